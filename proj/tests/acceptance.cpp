// One PASS/FAIL line per acceptance criterion; exits 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "rma/rma.hpp"

using namespace rma;
using runtime::DropType;

namespace {

// Tolerances.
constexpr double kMulRelTol = 1e-9;
constexpr double kCholRelTol = 1e-9;
constexpr double kCholInvTol = 1e-9;
constexpr double kOrthTol = 1e-10;
constexpr double kQrRelTol = 1e-9;
constexpr double kDiagRelTol = 1e-8;
constexpr double kRecurrenceRelTol = 1e-6;
constexpr double kLoadRatioMax = 2.5;
constexpr double kKernelSeconds = 60.0;
constexpr double kScheduleSeconds = 120.0;

int failures = 0;

void report(int id, const char* name, bool ok, const std::string& detail) {
  std::printf("criterion %2d %-34s %s  %s\n", id, name, ok ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

KernelConfig kernel_cfg(std::size_t leaf, MultiplyAlgo algo = MultiplyAlgo::Standard) {
  KernelConfig k;
  k.leaf_size = leaf;
  k.multiply_algo = algo;
  return k;
}

template <typename T>
Matrix<T> add(const Matrix<T>& a, const Matrix<T>& b) {
  Matrix<T> c(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) c(i, j) = a(i, j) + b(i, j);
  return c;
}

// Entries with non-terminating binary expansions, so float paths really round.
Matrix<double> float_matrix(MatrixGenerator& g, std::size_t n) {
  auto m = g.square<double>(n);
  for (auto& v : m.data()) v = (v + 0.5) / 3.0;
  return m;
}

void kernel_oracle_equivalence() {
  const auto t0 = std::chrono::steady_clock::now();
  std::size_t cases = 0, bad = 0;
  double worst = 0.0;
  for (std::size_t n : {2, 4, 8, 16, 32, 64})
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      MatrixGenerator g(1000 * n + seed);
      const auto cfg = kernel_cfg(4, MultiplyAlgo::Strassen);
      {
        auto a = g.square<Rational>(n), b = g.square<Rational>(n), c = g.square<Rational>(n);
        OpCounter ctr;
        auto ab = oracle::product(a, b);
        bad += !bitwise_equal(mul_accum_recursive(a, b, c, cfg, ctr), add(ab, c));
        bad += !bitwise_equal(mul_strassen(a, b, cfg, ctr), ab);
      }
      {
        auto a = float_matrix(g, n), b = float_matrix(g, n), c = float_matrix(g, n);
        OpCounter ctr;
        auto ab = oracle::product(a, b);
        auto abc = add(ab, c);
        const double e1 = oracle::fro(mul_accum_recursive(a, b, c, cfg, ctr), abc) / oracle::fro(abc);
        const double e2 = oracle::fro(mul_strassen(a, b, cfg, ctr), ab) / oracle::fro(ab);
        worst = std::max({worst, e1, e2});
        bad += (e1 > kMulRelTol) + (e2 > kMulRelTol);
      }
      cases += 4;
    }
  const double secs = seconds_since(t0);
  report(1, "kernel oracle equivalence", bad == 0 && secs < kKernelSeconds,
         std::to_string(cases - bad) + "/" + std::to_string(cases) + " cases, worst float rel err " +
             fmt("%.2e", worst) + ", " + fmt("%.1f s", secs));
}

void exact_inverse_identities() {
  std::size_t cases = 0, bad = 0;
  for (std::size_t n : {1, 2, 4, 8, 16})
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      MatrixGenerator g(77 * n + seed);
      const auto cfg = kernel_cfg(2);
      const auto id = oracle::eye<Rational>(n);
      OpCounter ctr;
      auto l = g.lower_triangular<Rational>(n);
      bad += !bitwise_equal(oracle::product(l, inv_lower_triangular(l, cfg, ctr)), id);
      auto a = g.diagonally_dominant<Rational>(n);
      bad += !bitwise_equal(oracle::product(a, inv_strassen(a, cfg, ctr)), id);
      cases += 2;
    }
  report(2, "exact inverse identities", bad == 0, std::to_string(cases - bad) + "/" + std::to_string(cases) + " exact");
}

void cholesky_reconstruction() {
  std::size_t cases = 0, bad = 0;
  double worst_rec = 0.0, worst_inv = 0.0;
  for (std::size_t n : {1, 2, 4, 8, 16, 32, 64})
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      MatrixGenerator g(31 * n + seed);
      auto a = g.spd(n);
      OpCounter ctr;
      auto r = cholesky(a, kernel_cfg(4), ctr);
      const double rec = oracle::fro(oracle::product(r.h, oracle::transpose(r.h)), a) / oracle::fro(a);
      const double inv = oracle::fro(oracle::product(r.h, r.h_inv), oracle::eye<double>(n));
      worst_rec = std::max(worst_rec, rec);
      worst_inv = std::max(worst_inv, inv);
      bad += rec > kCholRelTol || inv > kCholInvTol;
      ++cases;
    }
  report(3, "cholesky reconstruction", bad == 0,
         std::to_string(cases - bad) + "/" + std::to_string(cases) + ", worst rel " + fmt("%.2e", worst_rec) +
             ", worst inverse " + fmt("%.2e", worst_inv));
}

void qr_properties() {
  std::size_t cases = 0, bad = 0;
  double worst_orth = 0.0, worst_rec = 0.0, worst_diag = 0.0;
  auto check = [&](const Matrix<double>& a, const Matrix<double>& q, const Matrix<double>& r) {
    const double orth = oracle::fro(oracle::product(oracle::transpose(q), q), oracle::eye<double>(a.rows()));
    const double rec = oracle::fro(oracle::product(q, r), a) / oracle::fro(a);
    worst_orth = std::max(worst_orth, orth);
    worst_rec = std::max(worst_rec, rec);
    return oracle::strictly_lower_zero(r) && orth <= kOrthTol && rec <= kQrRelTol;
  };
  for (std::size_t n : {2, 4, 8, 16, 32, 64})
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      MatrixGenerator g(57 * n + seed);
      auto a = float_matrix(g, n);
      auto s = qr_sequential(a);
      auto b = qr_g(a, kernel_cfg(2));
      bool ok = check(a, s.q, s.r) && check(a, b.q, b.r);
      for (std::size_t i = 0; i < n; ++i) {
        const double ref = std::abs(s.r(i, i));
        const double d = std::abs(std::abs(b.r(i, i)) - ref) / ref;
        worst_diag = std::max(worst_diag, d);
        ok = ok && d <= kDiagRelTol;
      }
      bad += !ok;
      ++cases;
    }
  report(4, "qr properties", bad == 0,
         std::to_string(cases - bad) + "/" + std::to_string(cases) + ", worst orth " + fmt("%.2e", worst_orth) +
             ", worst rel " + fmt("%.2e", worst_rec) + ", worst diag " + fmt("%.2e", worst_diag));
}

void block_count_recurrence() {
  // count(k) is the number of order-k/2 block products inside qp_decompose
  // of a stacked pair of k x k blocks.
  auto count = [](std::size_t k) { return counted_cp(2 * k).block_muls; };
  bool ok = true;
  std::string detail;
  for (std::size_t n : {2, 4, 8}) {
    const auto lhs = count(2 * n), base = count(n);
    const auto per_level = static_cast<long long>(lhs) - 4 * static_cast<long long>(base);
    ok = ok && per_level == 24;
    detail += "n=" + std::to_string(n) + ": " + std::to_string(lhs) + " = 4*" + std::to_string(base) + " + " +
              std::to_string(per_level) + "; ";
  }
  report(5, "qp block-count recurrence", ok, detail + "expected +24");
}

void closed_form_recurrences() {
  const ComplexityModel m{2.0, 3.0};
  double worst = 0.0;
  auto rel = [](double x, double y) { return std::abs(x - y) / std::max(std::abs(x), std::abs(y)); };
  for (double n = 2; n <= 128; n *= 2)
    worst = std::max(worst, rel(predicted_cp(2 * n, m), 4 * predicted_cp(n, m) + 24 * m.multiply_cost(n / 2)));
  for (double n = 2; n <= 256; n *= 2) {
    const double half = n == 2 ? 0.0 : predicted_c(n / 2, m);  // C(1) = 0
    worst = std::max(worst, rel(predicted_c(n, m), 2 * half + predicted_cp(n, m) + 6 * m.multiply_cost(n / 2)));
  }
  report(6, "closed-form recurrences", worst <= kRecurrenceRelTol, "worst rel " + fmt("%.2e", worst));
}

void amine_cardinalities() {
  MatrixGenerator g(3);
  const auto cfg = kernel_cfg(2);
  auto inv = runtime::expand(DropType::InvTri, std::vector<Matrix<double>>{g.lower_triangular<double>(8)}, 0,
                             runtime::root_pad(), 0, 0, cfg);
  auto mul = runtime::expand(DropType::Mul, std::vector<Matrix<double>>{g.square<double>(8), g.square<double>(8)}, 0,
                             runtime::root_pad(), 0, 0, cfg);
  auto of = [&](DropType t) {
    return std::count_if(mul.drops.begin(), mul.drops.end(), [&](const auto& d) { return d.drop_type == t; });
  };
  const bool ok = inv.drops.size() == 4 && mul.drops.size() == 8 && of(DropType::Mul) == 4 && of(DropType::MulAccum) == 4;
  report(7, "amine cardinalities", ok,
         "InvTri " + std::to_string(inv.drops.size()) + " drops, Mul " + std::to_string(mul.drops.size()) + " drops (" +
             std::to_string(of(DropType::Mul)) + " Mul + " + std::to_string(of(DropType::MulAccum)) + " MulAccum)");
}

// Traces written by criteria 8 and 9, with the report text of the original run.
std::vector<std::pair<std::string, std::string>> traces;
const std::filesystem::path trace_dir = std::filesystem::temp_directory_path() / "rma_acceptance_traces";

sim::SimConfig sim_cfg(std::size_t nodes, std::uint64_t seed, std::size_t leaf) {
  sim::SimConfig c;
  c.num_nodes = nodes;
  c.seed = seed;
  c.leaf_size = leaf;
  c.latency = {1, 10};
  return c;
}

template <typename T>
sim::RunReport traced_run(DropType type, const std::vector<Matrix<T>>& in, sim::SimConfig cfg) {
  cfg.trace_path = (trace_dir / ("trace_" + std::to_string(traces.size()) + ".jsonl")).string();
  auto r = sim::run_simulation(type, in, cfg);
  traces.emplace_back(cfg.trace_path, sim::report_to_text(r));
  return r;
}

bool same_result(const sim::RunReport& r, const std::vector<Matrix<double>>& want) {
  if (r.result.size() != want.size()) return false;
  for (std::size_t k = 0; k < want.size(); ++k)
    if (!bitwise_equal(std::get<Matrix<double>>(r.result[k]), want[k])) return false;
  return true;
}

void schedule_independence() {
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t leaf = 4;
  MatrixGenerator g(2024);
  const std::vector<std::pair<DropType, std::vector<Matrix<double>>>> jobs{
      {DropType::Mul, {float_matrix(g, 32), float_matrix(g, 32)}},
      {DropType::InvTri, {g.lower_triangular<double>(32)}},
      {DropType::QRG, {float_matrix(g, 32)}}};
  std::size_t runs = 0, bad = 0;
  for (const auto& [type, in] : jobs) {
    std::optional<std::vector<Matrix<double>>> first;
    for (std::size_t p : {1, 2, 4, 8, 16})
      for (std::uint64_t seed = 0; seed < 20; ++seed) {
        auto r = traced_run(type, in, sim_cfg(p, seed, leaf));
        if (!first) {
          first.emplace();
          for (auto& m : r.result) first->push_back(std::get<Matrix<double>>(m));
        }
        bad += !same_result(r, *first);
        ++runs;
      }
    OpCounter ctr;
    bad += !same_result(sim::run_simulation(type, in, sim_cfg(1, 0, leaf)),
                        runtime::compute_drop(type, in, kernel_cfg(leaf), ctr));
  }
  const double secs = seconds_since(t0);
  report(8, "schedule-independent determinism", bad == 0 && secs < kScheduleSeconds,
         std::to_string(runs - bad) + "/" + std::to_string(runs) + " runs identical, " + fmt("%.1f s", secs));
}

void single_failure_tolerance() {
  MatrixGenerator g(99);
  std::vector<Matrix<double>> in{float_matrix(g, 32), float_matrix(g, 32)};
  OpCounter ctr;
  const auto want = multiply(in[0], in[1], kernel_cfg(4), ctr);
  const auto clean = sim::run_simulation(DropType::Mul, in, sim_cfg(4, 5, 4));
  std::size_t ok = 0, runs = 0;
  std::uint64_t recomputed = 0;
  for (runtime::NodeId node = 1; node <= 3; ++node)
    for (int k = 0; k < 10; ++k) {
      auto cfg = sim_cfg(4, 5, 4);
      cfg.failures = {{node, 1 + k * clean.makespan_ticks / 10}};
      ++runs;
      try {
        auto r = traced_run(DropType::Mul, in, cfg);
        ok += same_result(r, {want});
        recomputed += r.recomputed_drop_count;
      } catch (const Error& e) {
        std::printf("  failure run node %zu step %d: %s\n", node, k, e.what());
      }
    }
  report(9, "single-failure tolerance", ok == runs,
         std::to_string(ok) + "/" + std::to_string(runs) + " correct, " + std::to_string(recomputed) +
             " drops recomputed in total");
}

void progress_and_load() {
  std::size_t finished = 0;
  std::mt19937_64 pick(4242);
  for (int i = 0; i < 100; ++i) {
    auto cfg = sim_cfg(1 + pick() % 16, pick(), 4);
    const std::uint64_t lo = 1 + pick() % 5;
    cfg.latency = {lo, lo + pick() % 20};
    cfg.multiply_algo = pick() % 2 ? MultiplyAlgo::Strassen : MultiplyAlgo::Standard;
    cfg.cost_model = pick() % 2 ? sim::CostModel::Ops : sim::CostModel::Unit;
    if (cfg.num_nodes > 2 && pick() % 2) cfg.failures = {{1 + pick() % (cfg.num_nodes - 1), pick() % 200}};
    MatrixGenerator g(pick());
    const DropType types[] = {DropType::Mul, DropType::InvTri, DropType::Cholesky, DropType::InvStrassen,
                              DropType::QRG};
    const DropType type = types[pick() % 5];
    std::vector<Matrix<double>> in;
    if (type == DropType::Mul) in = {g.square<double>(32), g.square<double>(32)};
    if (type == DropType::InvTri) in = {g.lower_triangular<double>(32)};
    if (type == DropType::Cholesky) in = {g.spd(32)};
    if (type == DropType::InvStrassen) in = {g.diagonally_dominant<double>(32)};
    if (type == DropType::QRG) in = {float_matrix(g, 32)};
    try {
      sim::run_simulation(type, in, cfg);
      ++finished;
    } catch (const Error& e) {
      std::printf("  schedule %d: %s\n", i, e.what());
    }
  }
  MatrixGenerator g(64);
  std::vector<Matrix<double>> in{g.square<double>(64), g.square<double>(64)};
  auto p4 = sim::run_simulation(DropType::Mul, in, sim_cfg(4, 1, 16));
  auto p1 = sim::run_simulation(DropType::Mul, in, sim_cfg(1, 1, 16));
  const double mean = std::accumulate(p4.busy_ticks.begin(), p4.busy_ticks.end(), 0.0) / p4.busy_ticks.size();
  const double ratio = *std::max_element(p4.busy_ticks.begin(), p4.busy_ticks.end()) / mean;
  const bool ok = finished == 100 && p4.leaf_drop_count >= 64 && ratio <= kLoadRatioMax &&
                  p4.makespan_ticks <= p1.makespan_ticks;
  report(10, "progress and load", ok,
         std::to_string(finished) + "/100 finished; P=4: " + std::to_string(p4.leaf_drop_count) +
             " leaf drops, max/mean busy " + fmt("%.2f", ratio) + ", makespan " + std::to_string(p4.makespan_ticks) +
             " vs " + std::to_string(p1.makespan_ticks) + " on one node");
}

void trace_replay() {
  std::size_t same = 0;
  for (const auto& [path, text] : traces) {
    try {
      same += sim::report_to_text(sim::replay_trace(path)) == text;
    } catch (const Error& e) {
      std::printf("  replay %s: %s\n", path.c_str(), e.what());
    }
  }
  report(11, "trace replay", !traces.empty() && same == traces.size(),
         std::to_string(same) + "/" + std::to_string(traces.size()) + " reports reproduced byte-for-byte");
}

}  // namespace

int main() {
  std::filesystem::create_directories(trace_dir);
  kernel_oracle_equivalence();
  exact_inverse_identities();
  cholesky_reconstruction();
  qr_properties();
  block_count_recurrence();
  closed_form_recurrences();
  amine_cardinalities();
  schedule_independence();
  single_failure_tolerance();
  progress_and_load();
  trace_replay();
  std::filesystem::remove_all(trace_dir);
  std::printf("%d of 11 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
