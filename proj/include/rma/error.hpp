#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace rma {

enum class ErrorKind : std::uint8_t {
  InvalidShape,
  InvalidIndex,
  Singular,
  PivotBlockSingular,
  NotPositiveDefinite,
  UnsupportedScalar,
  PreconditionViolated,
  ModelSingular,
  NotExpandable,
  DuplicateWrite,
  Stalled,
  RootFailureUnsupported,
  TraceDecodeError,
  ParseError,
};

inline constexpr std::string_view error_name(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidShape: return "InvalidShape";
    case ErrorKind::InvalidIndex: return "InvalidIndex";
    case ErrorKind::Singular: return "Singular";
    case ErrorKind::PivotBlockSingular: return "PivotBlockSingular";
    case ErrorKind::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorKind::UnsupportedScalar: return "UnsupportedScalar";
    case ErrorKind::PreconditionViolated: return "PreconditionViolated";
    case ErrorKind::ModelSingular: return "ModelSingular";
    case ErrorKind::NotExpandable: return "NotExpandable";
    case ErrorKind::DuplicateWrite: return "DuplicateWrite";
    case ErrorKind::Stalled: return "Stalled";
    case ErrorKind::RootFailureUnsupported: return "RootFailureUnsupported";
    case ErrorKind::TraceDecodeError: return "TraceDecodeError";
    case ErrorKind::ParseError: return "ParseError";
  }
  return "Unknown";
}

/// Exception carrying a machine-readable kind and, for Singular /
/// PivotBlockSingular / NotPositiveDefinite, the offending index or level.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& detail, std::optional<std::size_t> index = std::nullopt)
      : std::runtime_error(format(kind, detail, index)), kind_(kind), index_(index) {}

  ErrorKind kind() const noexcept { return kind_; }
  std::optional<std::size_t> index() const noexcept { return index_; }

 private:
  static std::string format(ErrorKind kind, const std::string& detail,
                            std::optional<std::size_t> index) {
    std::string out(error_name(kind));
    if (index) out += "(" + std::to_string(*index) + ")";
    if (!detail.empty()) out += ": " + detail;
    return out;
  }

  ErrorKind kind_;
  std::optional<std::size_t> index_;
};

}  // namespace rma
