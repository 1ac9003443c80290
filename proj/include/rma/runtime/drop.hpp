#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "rma/matrix.hpp"

namespace rma::runtime {

using NodeId = std::size_t;

inline constexpr std::size_t kRootAmine = std::numeric_limits<std::size_t>::max();

/// Drop address: (processor, Amine within that processor's Pine, Drop within the Amine).
struct Pad {
  NodeId proc = 0;
  std::size_t amine = 0;
  std::size_t drop = 0;

  bool is_root() const noexcept { return amine == kRootAmine; }
  friend bool operator==(const Pad&, const Pad&) = default;
  friend bool operator<(const Pad& a, const Pad& b) {
    return std::tie(a.proc, a.amine, a.drop) < std::tie(b.proc, b.amine, b.drop);
  }
};

inline Pad root_pad() { return {0, kRootAmine, 0}; }

enum class DropType : std::uint8_t {
  MulAccum,
  Mul,
  MulNeg,
  InvTri,
  Cholesky,
  InvStrassen,
  QRG,
  QP,
  MatAdd,
  MatTranspose,
};

inline constexpr std::string_view drop_type_name(DropType t) noexcept {
  switch (t) {
    case DropType::MulAccum: return "MulAccum";
    case DropType::Mul: return "Mul";
    case DropType::MulNeg: return "MulNeg";
    case DropType::InvTri: return "InvTri";
    case DropType::Cholesky: return "Cholesky";
    case DropType::InvStrassen: return "InvStrassen";
    case DropType::QRG: return "QRG";
    case DropType::QP: return "QP";
    case DropType::MatAdd: return "MatAdd";
    case DropType::MatTranspose: return "MatTranspose";
  }
  return "?";
}

inline DropType parse_drop_type(std::string_view s) {
  for (auto t : {DropType::MulAccum, DropType::Mul, DropType::MulNeg, DropType::InvTri, DropType::Cholesky,
                 DropType::InvStrassen, DropType::QRG, DropType::QP, DropType::MatAdd, DropType::MatTranspose})
    if (drop_type_name(t) == s) return t;
  throw Error(ErrorKind::ParseError, "unknown drop type '" + std::string(s) + "'");
}

inline constexpr std::size_t input_arity(DropType t) noexcept {
  switch (t) {
    case DropType::MulAccum: return 3;
    case DropType::Mul:
    case DropType::MulNeg:
    case DropType::QP:
    case DropType::MatAdd: return 2;
    default: return 1;
  }
}

inline constexpr std::size_t output_arity(DropType t) noexcept {
  switch (t) {
    case DropType::Cholesky:
    case DropType::QRG:
    case DropType::QP: return 2;
    default: return 1;
  }
}

inline constexpr bool is_recursive(DropType t) noexcept {
  return t != DropType::MatAdd && t != DropType::MatTranspose;
}

/// Exact reshaping applied to a value as it travels along an arc.
enum class Xform : std::uint8_t { Id, Transpose, Negate, Quad0, Quad1, Quad2, Quad3 };

template <typename T>
Matrix<T> apply_xform(const Matrix<T>& m, Xform xf) {
  switch (xf) {
    case Xform::Id: return m;
    case Xform::Transpose: return mat_transpose(m);
    case Xform::Negate: return mat_negate(m);
    case Xform::Quad0: return split(m).a0;
    case Xform::Quad1: return split(m).a1;
    case Xform::Quad2: return split(m).a2;
    case Xform::Quad3: return split(m).a3;
  }
  return m;
}

inline constexpr std::size_t kAmineResult = std::numeric_limits<std::size_t>::max();

/// Routes one drop output to a consumer input slot, or (consumer ==
/// kAmineResult) to one of the Amine's result slots.
struct Arc {
  std::size_t consumer = 0;
  std::size_t slot = 0;
  Xform xf = Xform::Id;
};

enum class DropState : std::uint8_t { Waiting, Ready, Running, Expanded, Sent, Done };

template <typename T>
struct Drop {
  Pad pad;
  DropType drop_type = DropType::Mul;
  std::vector<std::optional<Matrix<T>>> in_data;
  std::vector<std::optional<Matrix<T>>> out_data;
  int rec_num = 0;
  std::vector<std::vector<Arc>> arcs;  // per output
  DropState state = DropState::Waiting;
  NodeId sent_to = 0;

  bool inputs_complete() const {
    for (const auto& s : in_data)
      if (!s) return false;
    return true;
  }
};

template <typename T>
struct Amine {
  Pad return_pad;
  DropType amine_type = DropType::Mul;
  int rec_num = 0;  // rec_num of the drop this Amine expands
  std::vector<Matrix<T>> in_data;
  std::vector<std::optional<Matrix<T>>> out_data;
  std::vector<Drop<T>> drops;
  std::vector<std::optional<Matrix<T>>> results;
  bool strassen = false;
  bool complete = false;
};

/// A unit of work waiting in a Vokzal, whether created locally or received.
template <typename T>
struct Task {
  Pad pad;  // where the outputs go
  DropType drop_type = DropType::Mul;
  int rec_num = 0;
  std::vector<Matrix<T>> inputs;
};

}  // namespace rma::runtime
