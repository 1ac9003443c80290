#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "rma/kernels.hpp"
#include "rma/qr.hpp"
#include "rma/runtime/drop.hpp"

namespace rma::runtime {

template <typename T>
bool is_leaf_sized(DropType type, const std::vector<Matrix<T>>& inputs, const KernelConfig& cfg) {
  if (!is_recursive(type)) return true;
  if (type == DropType::QP) return inputs.at(0).cols() <= cfg.leaf_size;
  return inputs.at(0).rows() <= cfg.leaf_size;
}

/// Computes a drop directly with the sequential kernels.
template <typename T>
std::vector<Matrix<T>> compute_drop(DropType type, const std::vector<Matrix<T>>& in, const KernelConfig& cfg,
                                    OpCounter& ctr) {
  if (in.size() != input_arity(type))
    throw Error(ErrorKind::InvalidShape, "wrong input count for " + std::string(drop_type_name(type)));
  switch (type) {
    case DropType::MulAccum: return {mul_accum_recursive(in[0], in[1], in[2], cfg, ctr)};
    case DropType::Mul: return {multiply(in[0], in[1], cfg, ctr)};
    case DropType::MulNeg: return {mul_neg(in[0], in[1], cfg, ctr)};
    case DropType::InvTri: return {rma::detail::inv_lower_rec(in[0], 0, cfg, ctr)};
    case DropType::Cholesky: {
      auto r = cholesky(in[0], cfg, ctr);
      return {std::move(r.h), std::move(r.h_inv)};
    }
    case DropType::InvStrassen: return {inv_strassen(in[0], cfg, ctr)};
    case DropType::QRG: {
      auto r = qr_g(in[0], cfg);
      ctr += r.counter;
      return {std::move(r.q), std::move(r.r)};
    }
    case DropType::QP: {
      rma::detail::require_float<T>("QP drop");
      if constexpr (is_float_scalar_v<T>) {
        auto r = rma::detail::qp_rec(in[0], in[1], cfg, ctr);
        return {std::move(r.q), std::move(r.p_top)};
      }
      return {};
    }
    case DropType::MatAdd: return {rma::detail::counted_add(in[0], in[1], +1, ctr)};
    case DropType::MatTranspose: return {mat_transpose(in[0])};
  }
  return {};
}

namespace detail {

template <typename T>
class AmineBuilder {
 public:
  AmineBuilder(Amine<T>& am, std::size_t result_count) : am_(am) { am_.results.resize(result_count); }

  // Adds a drop; slots passed as std::nullopt are filled later through arcs.
  std::size_t add(DropType type, std::vector<std::optional<Matrix<T>>> inputs) {
    Drop<T> d;
    d.drop_type = type;
    d.in_data = std::move(inputs);
    d.in_data.resize(input_arity(type));
    d.out_data.resize(output_arity(type));
    d.arcs.resize(output_arity(type));
    d.rec_num = am_.rec_num + 1;
    d.pad = {am_.return_pad.proc, 0, am_.drops.size()};
    am_.drops.push_back(std::move(d));
    return am_.drops.size() - 1;
  }

  void arc(std::size_t from, std::size_t out, std::size_t to, std::size_t slot, Xform xf = Xform::Id) {
    am_.drops[from].arcs[out].push_back({to, slot, xf});
  }

  void result(std::size_t from, std::size_t out, std::size_t slot, Xform xf = Xform::Id) {
    am_.drops[from].arcs[out].push_back({kAmineResult, slot, xf});
  }

 private:
  Amine<T>& am_;
};

template <typename T>
void build_mul(Amine<T>& am, const Matrix<T>& a_in, const Matrix<T>& b, bool negate_a) {
  const Matrix<T> a = negate_a ? mat_negate(a_in) : a_in;
  auto qa = split(a), qb = split(b);
  if (am.strassen) {
    AmineBuilder<T> bld(am, 7);
    OpCounter scratch;
    auto ops = strassen_operands(qa, qb, scratch);
    for (std::size_t k = 0; k < 7; ++k) {
      auto d = bld.add(DropType::Mul, {ops[k].first, ops[k].second});
      bld.result(d, 0, k);
    }
    return;
  }
  AmineBuilder<T> bld(am, 4);
  auto t0 = bld.add(DropType::Mul, {qa.a1, qb.a2});
  auto t1 = bld.add(DropType::Mul, {qa.a1, qb.a3});
  auto t2 = bld.add(DropType::Mul, {qa.a3, qb.a2});
  auto t3 = bld.add(DropType::Mul, {qa.a3, qb.a3});
  const std::pair<Matrix<T>*, Matrix<T>*> lhs[4] = {{&qa.a0, &qb.a0}, {&qa.a0, &qb.a1}, {&qa.a2, &qb.a0}, {&qa.a2, &qb.a1}};
  const std::size_t ts[4] = {t0, t1, t2, t3};
  for (std::size_t k = 0; k < 4; ++k) {
    auto d = bld.add(DropType::MulAccum, {*lhs[k].first, *lhs[k].second, std::nullopt});
    bld.arc(ts[k], 0, d, 2);
    bld.result(d, 0, k);
  }
}

template <typename T>
void build_mul_accum(Amine<T>& am, const Matrix<T>& a, const Matrix<T>& b, const Matrix<T>& c) {
  AmineBuilder<T> bld(am, 4);
  auto qa = split(a), qb = split(b), qc = split(c);
  auto t0 = bld.add(DropType::MulAccum, {qa.a1, qb.a2, qc.a0});
  auto t1 = bld.add(DropType::MulAccum, {qa.a1, qb.a3, qc.a1});
  auto t2 = bld.add(DropType::MulAccum, {qa.a3, qb.a2, qc.a2});
  auto t3 = bld.add(DropType::MulAccum, {qa.a3, qb.a3, qc.a3});
  const std::pair<Matrix<T>*, Matrix<T>*> lhs[4] = {{&qa.a0, &qb.a0}, {&qa.a0, &qb.a1}, {&qa.a2, &qb.a0}, {&qa.a2, &qb.a1}};
  const std::size_t ts[4] = {t0, t1, t2, t3};
  for (std::size_t k = 0; k < 4; ++k) {
    auto d = bld.add(DropType::MulAccum, {*lhs[k].first, *lhs[k].second, std::nullopt});
    bld.arc(ts[k], 0, d, 2);
    bld.result(d, 0, k);
  }
}

template <typename T>
void build_inv_tri(Amine<T>& am, const Matrix<T>& a) {
  AmineBuilder<T> bld(am, 3);
  auto q = split(a);
  auto f = bld.add(DropType::InvTri, {q.a0});
  auto g = bld.add(DropType::InvTri, {q.a3});
  auto h = bld.add(DropType::Mul, {q.a2, std::nullopt});
  auto x = bld.add(DropType::MulNeg, {std::nullopt, std::nullopt});
  bld.arc(f, 0, h, 1);
  bld.arc(g, 0, x, 0);
  bld.arc(h, 0, x, 1);
  bld.result(f, 0, 0);
  bld.result(g, 0, 1);
  bld.result(x, 0, 2);
}

template <typename T>
void build_cholesky(Amine<T>& am, const Matrix<T>& a) {
  AmineBuilder<T> bld(am, 6);
  auto q = split(a);
  auto b = bld.add(DropType::Cholesky, {q.a0});
  auto c = bld.add(DropType::Mul, {mat_transpose(q.a1), std::nullopt});
  auto p = bld.add(DropType::MulNeg, {std::nullopt, std::nullopt});
  auto f = bld.add(DropType::MatAdd, {q.a3, std::nullopt});
  auto d = bld.add(DropType::Cholesky, {std::nullopt});
  auto e = bld.add(DropType::Mul, {std::nullopt, std::nullopt});
  auto x = bld.add(DropType::MulNeg, {std::nullopt, std::nullopt});
  bld.arc(b, 1, c, 1, Xform::Transpose);
  bld.arc(c, 0, p, 0);
  bld.arc(c, 0, p, 1, Xform::Transpose);
  bld.arc(p, 0, f, 1);
  bld.arc(f, 0, d, 0);
  bld.arc(c, 0, e, 0);
  bld.arc(b, 1, e, 1);
  bld.arc(d, 1, x, 0);
  bld.arc(e, 0, x, 1);
  bld.result(b, 0, 0);
  bld.result(b, 1, 1);
  bld.result(c, 0, 2);
  bld.result(d, 0, 3);
  bld.result(d, 1, 4);
  bld.result(x, 0, 5);
}

template <typename T>
void build_inv_strassen(Amine<T>& am, const Matrix<T>& a) {
  AmineBuilder<T> bld(am, 4);
  auto q = split(a);
  auto y = bld.add(DropType::InvStrassen, {q.a0});
  auto m1 = bld.add(DropType::MulNeg, {std::nullopt, q.a1});
  auto m2 = bld.add(DropType::MulNeg, {q.a2, std::nullopt});
  auto m3 = bld.add(DropType::Mul, {std::nullopt, q.a1});
  auto s = bld.add(DropType::MatAdd, {q.a3, std::nullopt});
  auto m4 = bld.add(DropType::InvStrassen, {std::nullopt});
  auto m5 = bld.add(DropType::Mul, {std::nullopt, std::nullopt});
  auto m6 = bld.add(DropType::MulAccum, {std::nullopt, std::nullopt, std::nullopt});
  auto m14 = bld.add(DropType::Mul, {std::nullopt, std::nullopt});
  bld.arc(y, 0, m1, 0);
  bld.arc(y, 0, m2, 1);
  bld.arc(y, 0, m6, 2);
  bld.arc(m2, 0, m3, 0);
  bld.arc(m3, 0, s, 1);
  bld.arc(s, 0, m4, 0);
  bld.arc(m4, 0, m5, 0);
  bld.arc(m2, 0, m5, 1);
  bld.arc(m1, 0, m6, 0);
  bld.arc(m5, 0, m6, 1);
  bld.arc(m1, 0, m14, 0);
  bld.arc(m4, 0, m14, 1);
  bld.result(m6, 0, 0);
  bld.result(m14, 0, 1);
  bld.result(m5, 0, 2);
  bld.result(m4, 0, 3);
}

template <typename T>
void build_qrg(Amine<T>& am, const Matrix<T>& m) {
  AmineBuilder<T> bld(am, 7);
  auto q = split(m);
  auto qc = bld.add(DropType::QRG, {q.a2});
  auto d1 = bld.add(DropType::Mul, {std::nullopt, q.a3});
  auto qp = bld.add(DropType::QP, {q.a0, std::nullopt});
  auto t0 = bld.add(DropType::Mul, {std::nullopt, q.a1});
  auto b1 = bld.add(DropType::MulAccum, {std::nullopt, std::nullopt, std::nullopt});
  auto t1 = bld.add(DropType::Mul, {std::nullopt, q.a1});
  auto d2 = bld.add(DropType::MulAccum, {std::nullopt, std::nullopt, std::nullopt});
  auto qd = bld.add(DropType::QRG, {std::nullopt});
  auto x01 = bld.add(DropType::Mul, {std::nullopt, std::nullopt});
  auto x11 = bld.add(DropType::Mul, {std::nullopt, std::nullopt});
  auto y10 = bld.add(DropType::Mul, {std::nullopt, std::nullopt});
  auto y11 = bld.add(DropType::Mul, {std::nullopt, std::nullopt});
  bld.arc(qc, 0, d1, 0, Xform::Transpose);
  bld.arc(qc, 1, qp, 1);
  bld.arc(qp, 0, t0, 0, Xform::Quad0);
  bld.arc(qp, 0, b1, 0, Xform::Quad1);
  bld.arc(d1, 0, b1, 1);
  bld.arc(t0, 0, b1, 2);
  bld.arc(qp, 0, t1, 0, Xform::Quad2);
  bld.arc(qp, 0, d2, 0, Xform::Quad3);
  bld.arc(d1, 0, d2, 1);
  bld.arc(t1, 0, d2, 2);
  bld.arc(d2, 0, qd, 0);
  bld.arc(qp, 0, x01, 0, Xform::Quad1);
  bld.arc(qc, 0, x01, 1, Xform::Transpose);
  bld.arc(qp, 0, x11, 0, Xform::Quad3);
  bld.arc(qc, 0, x11, 1, Xform::Transpose);
  bld.arc(qd, 0, y10, 0, Xform::Transpose);
  bld.arc(qp, 0, y10, 1, Xform::Quad2);
  bld.arc(qd, 0, y11, 0, Xform::Transpose);
  bld.arc(x11, 0, y11, 1);
  bld.result(qp, 0, 0, Xform::Quad0);
  bld.result(x01, 0, 1);
  bld.result(y10, 0, 2);
  bld.result(y11, 0, 3);
  bld.result(qp, 1, 4);
  bld.result(b1, 0, 5);
  bld.result(qd, 1, 6);
}

// Result slots of a QP Amine.
enum QpSlot : std::size_t { U00, Q01, Q02, Q10, Q11, Q12, Q13, Q20, Q21, Q22, Q23, Q31, Q32, D33, PLU, PR0, PRU, QpSlots };

template <typename T>
void build_qp(Amine<T>& am, const Matrix<T>& top, const Matrix<T>& bottom) {
  AmineBuilder<T> bld(am, QpSlots);
  auto a = split(top);
  auto b = split(bottom);
  const auto none = std::nullopt;
  auto ld = bld.add(DropType::QP, {a.a2, b.a0});
  auto t1 = bld.add(DropType::Mul, {none, b.a1});
  auto r1 = bld.add(DropType::MulAccum, {none, a.a3, none});
  auto t2 = bld.add(DropType::Mul, {none, b.a1});
  auto r2 = bld.add(DropType::MulAccum, {none, a.a3, none});
  auto lu = bld.add(DropType::QP, {a.a0, none});
  auto rd = bld.add(DropType::QP, {none, b.a3});
  auto t3 = bld.add(DropType::Mul, {none, none});
  auto r0 = bld.add(DropType::MulAccum, {none, a.a1, none});
  auto t4 = bld.add(DropType::Mul, {none, none});
  auto r1u = bld.add(DropType::MulAccum, {none, a.a1, none});
  auto ru = bld.add(DropType::QP, {none, none});
  bld.arc(ld, 0, t1, 0, Xform::Quad1);
  bld.arc(ld, 0, r1, 0, Xform::Quad0);
  bld.arc(t1, 0, r1, 2);
  bld.arc(ld, 0, t2, 0, Xform::Quad3);
  bld.arc(ld, 0, r2, 0, Xform::Quad2);
  bld.arc(t2, 0, r2, 2);
  bld.arc(ld, 1, lu, 1);
  bld.arc(r2, 0, rd, 0);
  bld.arc(lu, 0, t3, 0, Xform::Quad1);
  bld.arc(r1, 0, t3, 1);
  bld.arc(lu, 0, r0, 0, Xform::Quad0);
  bld.arc(t3, 0, r0, 2);
  bld.arc(lu, 0, t4, 0, Xform::Quad3);
  bld.arc(r1, 0, t4, 1);
  bld.arc(lu, 0, r1u, 0, Xform::Quad2);
  bld.arc(t4, 0, r1u, 2);
  bld.arc(r1u, 0, ru, 0);
  bld.arc(rd, 1, ru, 1);

  // Assembly of the 4x4 block factor. Operands come from ld (l), lu (u),
  // rd (d) and ru (v).
  auto mul = [&](std::size_t lhs, Xform lx, std::size_t rhs, std::size_t rout, Xform rx) {
    auto t = bld.add(DropType::Mul, {none, none});
    bld.arc(lhs, 0, t, 0, lx);
    bld.arc(rhs, rout, t, 1, rx);
    return t;
  };
  auto q01 = mul(lu, Xform::Quad1, ld, 0, Xform::Quad0);
  auto q02 = mul(lu, Xform::Quad1, ld, 0, Xform::Quad1);
  auto q31 = mul(rd, Xform::Quad2, ld, 0, Xform::Quad2);
  auto q32 = mul(rd, Xform::Quad2, ld, 0, Xform::Quad3);
  auto p1 = mul(ru, Xform::Quad0, lu, 0, Xform::Quad3);
  auto s1 = mul(ru, Xform::Quad1, rd, 0, Xform::Quad0);
  auto q10 = mul(ru, Xform::Quad0, lu, 0, Xform::Quad2);
  auto q13 = mul(ru, Xform::Quad1, rd, 0, Xform::Quad1);
  auto p2 = mul(ru, Xform::Quad2, lu, 0, Xform::Quad3);
  auto s2 = mul(ru, Xform::Quad3, rd, 0, Xform::Quad0);
  auto q20 = mul(ru, Xform::Quad2, lu, 0, Xform::Quad2);
  auto q23 = mul(ru, Xform::Quad3, rd, 0, Xform::Quad1);
  auto accum = [&](std::size_t p, std::size_t s, Xform lx_for_p, Xform lx_for_s) {
    auto t = bld.add(DropType::Mul, {none, none});
    bld.arc(s, 0, t, 0);
    bld.arc(ld, 0, t, 1, lx_for_s);
    auto r = bld.add(DropType::MulAccum, {none, none, none});
    bld.arc(p, 0, r, 0);
    bld.arc(ld, 0, r, 1, lx_for_p);
    bld.arc(t, 0, r, 2);
    return r;
  };
  auto q11 = accum(p1, s1, Xform::Quad0, Xform::Quad2);
  auto q12 = accum(p1, s1, Xform::Quad1, Xform::Quad3);
  auto q21 = accum(p2, s2, Xform::Quad0, Xform::Quad2);
  auto q22 = accum(p2, s2, Xform::Quad1, Xform::Quad3);

  bld.result(lu, 0, U00, Xform::Quad0);
  bld.result(q01, 0, Q01);
  bld.result(q02, 0, Q02);
  bld.result(q10, 0, Q10);
  bld.result(q11, 0, Q11);
  bld.result(q12, 0, Q12);
  bld.result(q13, 0, Q13);
  bld.result(q20, 0, Q20);
  bld.result(q21, 0, Q21);
  bld.result(q22, 0, Q22);
  bld.result(q23, 0, Q23);
  bld.result(q31, 0, Q31);
  bld.result(q32, 0, Q32);
  bld.result(rd, 0, D33, Xform::Quad3);
  bld.result(lu, 1, PLU);
  bld.result(r0, 0, PR0);
  bld.result(ru, 1, PRU);
}

}  // namespace detail

/// Expands an above-leaf drop into its Amine. The Amine is owned by
/// `owner`; `return_pad` is where its assembled outputs go.
template <typename T>
Amine<T> expand(DropType type, const std::vector<Matrix<T>>& inputs, int rec_num, const Pad& return_pad,
                NodeId owner, std::size_t amine_index, const KernelConfig& cfg) {
  if (!is_recursive(type)) throw Error(ErrorKind::NotExpandable, std::string(drop_type_name(type)) + " is not recursive");
  if (inputs.size() != input_arity(type)) throw Error(ErrorKind::InvalidShape, "wrong input count");
  if (is_leaf_sized(type, inputs, cfg)) throw Error(ErrorKind::NotExpandable, "drop is at or below the leaf size");
  Amine<T> am;
  am.return_pad = return_pad;
  am.amine_type = type;
  am.rec_num = rec_num;
  am.in_data = inputs;
  am.out_data.resize(output_arity(type));
  am.strassen = cfg.multiply_algo == MultiplyAlgo::Strassen;
  switch (type) {
    case DropType::Mul: detail::build_mul(am, inputs[0], inputs[1], false); break;
    case DropType::MulNeg: detail::build_mul(am, inputs[0], inputs[1], true); break;
    case DropType::MulAccum: detail::build_mul_accum(am, inputs[0], inputs[1], inputs[2]); break;
    case DropType::InvTri: detail::build_inv_tri(am, inputs[0]); break;
    case DropType::Cholesky:
      if constexpr (!is_float_scalar_v<T>)
        throw Error(ErrorKind::UnsupportedScalar, "cholesky needs square roots; use f64 scalars");
      detail::build_cholesky(am, inputs[0]);
      break;
    case DropType::InvStrassen: detail::build_inv_strassen(am, inputs[0]); break;
    case DropType::QRG:
      rma::detail::require_float<T>("QRG drop");
      detail::build_qrg(am, inputs[0]);
      break;
    case DropType::QP:
      rma::detail::require_float<T>("QP drop");
      detail::build_qp(am, inputs[0], inputs[1]);
      break;
    default: break;
  }
  for (std::size_t i = 0; i < am.drops.size(); ++i) {
    am.drops[i].pad = {owner, amine_index, i};
    if (am.drops[i].inputs_complete()) am.drops[i].state = DropState::Ready;
  }
  return am;
}

/// Combines the filled result slots of a complete Amine into its outputs.
template <typename T>
std::vector<Matrix<T>> assemble(const Amine<T>& am) {
  std::vector<Matrix<T>> r;
  for (const auto& s : am.results) {
    if (!s) throw Error(ErrorKind::PreconditionViolated, "assembling an incomplete Amine");
    r.push_back(*s);
  }
  const std::size_t h = am.in_data.at(0).cols() / 2;
  switch (am.amine_type) {
    case DropType::Mul:
    case DropType::MulNeg:
      if (am.strassen) {
        OpCounter scratch;
        std::array<Matrix<T>, 7> p;
        for (std::size_t k = 0; k < 7; ++k) p[k] = r[k];
        return {strassen_combine(p, scratch)};
      }
      return {join(r[0], r[1], r[2], r[3])};
    case DropType::MulAccum: return {join(r[0], r[1], r[2], r[3])};
    case DropType::InvTri: return {join(r[0], Matrix<T>(h, h), r[2], r[1])};
    case DropType::Cholesky: {
      Matrix<T> zero(h, h);
      return {join(r[0], zero, r[2], r[3]), join(r[1], zero, r[5], r[4])};
    }
    case DropType::InvStrassen: return {join(r[0], r[1], r[2], r[3])};
    case DropType::QRG:
      return {mat_transpose(join(r[0], r[1], r[2], r[3])), join(r[4], r[5], Matrix<T>(h, h), r[6])};
    case DropType::QP: {
      using namespace detail;
      const std::size_t hq = r[U00].rows();
      auto q = rma::detail::join4x4<T>({{{&r[U00], &r[Q01], &r[Q02], nullptr},
                            {&r[Q10], &r[Q11], &r[Q12], &r[Q13]},
                            {&r[Q20], &r[Q21], &r[Q22], &r[Q23]},
                            {nullptr, &r[Q31], &r[Q32], &r[D33]}}},
                          hq);
      return {std::move(q), join(r[PLU], r[PR0], Matrix<T>(hq, hq), r[PRU])};
    }
    default: break;
  }
  throw Error(ErrorKind::NotExpandable, "no assembly for this drop type");
}

/// Outcome of routing a drop's outputs inside its Amine.
struct WriteOutcome {
  std::vector<std::size_t> ready;  // drops whose inputs just became complete
  bool amine_complete = false;
  bool duplicate = false;          // identical re-delivery, ignored
};

namespace detail {

template <typename T>
bool write_slot(std::optional<Matrix<T>>& slot, Matrix<T> value, const char* what) {
  if (slot) {
    if (bitwise_equal(*slot, value)) return false;
    throw Error(ErrorKind::DuplicateWrite, std::string("conflicting write to ") + what);
  }
  slot = std::move(value);
  return true;
}

}  // namespace detail

/// Stores the outputs of drop `drop_id` and forwards them along its arcs.
/// A repeated write of bitwise-identical data is ignored; a conflicting one
/// raises DuplicateWrite.
template <typename T>
WriteOutcome write_results_to_amine(Amine<T>& am, std::size_t drop_id, const std::vector<Matrix<T>>& outputs) {
  WriteOutcome res;
  if (drop_id >= am.drops.size()) throw Error(ErrorKind::InvalidIndex, "no such drop", drop_id);
  auto& d = am.drops[drop_id];
  if (outputs.size() != d.out_data.size()) throw Error(ErrorKind::InvalidShape, "wrong output count");
  if (d.state == DropState::Done) {
    for (std::size_t k = 0; k < outputs.size(); ++k)
      if (!bitwise_equal(*d.out_data[k], outputs[k]))
        throw Error(ErrorKind::DuplicateWrite, "conflicting result for a finished drop", drop_id);
    res.duplicate = true;
    return res;
  }
  d.state = DropState::Done;
  for (std::size_t k = 0; k < outputs.size(); ++k) {
    d.out_data[k] = outputs[k];
    for (const auto& a : d.arcs[k]) {
      auto value = apply_xform(outputs[k], a.xf);
      if (a.consumer == kAmineResult) {
        detail::write_slot(am.results.at(a.slot), std::move(value), "an Amine result");
        continue;
      }
      auto& c = am.drops.at(a.consumer);
      detail::write_slot(c.in_data.at(a.slot), std::move(value), "a drop input");
      if (c.state == DropState::Waiting && c.inputs_complete()) {
        c.state = DropState::Ready;
        res.ready.push_back(a.consumer);
      }
    }
  }
  if (!am.complete) {
    bool all = true;
    for (const auto& s : am.results) all = all && s.has_value();
    if (all) {
      auto outs = assemble(am);
      for (std::size_t k = 0; k < outs.size(); ++k) am.out_data[k] = std::move(outs[k]);
      am.complete = true;
      res.amine_complete = true;
    }
  }
  return res;
}

}  // namespace rma::runtime
