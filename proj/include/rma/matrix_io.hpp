#pragma once

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <variant>

#include "rma/matrix.hpp"

namespace rma {

using AnyMatrix = std::variant<Matrix<double>, Matrix<Rational>>;

// Text format:
//   rows cols kind        (kind is f64 or rat)
//   one line per row, entries separated by a single space
template <typename T>
void write_matrix(std::ostream& os, const Matrix<T>& m) {
  os << m.rows() << ' ' << m.cols() << ' ' << ScalarTraits<T>::tag << '\n';
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      if (j) os << ' ';
      os << ScalarTraits<T>::format(m(i, j));
    }
    os << '\n';
  }
}

template <typename T>
std::string to_text(const Matrix<T>& m) {
  std::ostringstream os;
  write_matrix(os, m);
  return os.str();
}

namespace detail {

template <typename T>
Matrix<T> read_entries(std::istream& is, std::size_t rows, std::size_t cols) {
  Matrix<T> m(rows, cols);
  std::string token;
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) {
      if (!(is >> token))
        throw Error(ErrorKind::ParseError, "truncated matrix: expected " + std::to_string(rows * cols) + " entries");
      m(i, j) = ScalarTraits<T>::parse(token);
    }
  return m;
}

}  // namespace detail

inline AnyMatrix read_matrix(std::istream& is) {
  long long rows = -1, cols = -1;
  std::string kind;
  if (!(is >> rows >> cols >> kind) || rows <= 0 || cols <= 0)
    throw Error(ErrorKind::ParseError, "bad matrix header");
  if (kind == ScalarTraits<double>::tag)
    return detail::read_entries<double>(is, static_cast<std::size_t>(rows), static_cast<std::size_t>(cols));
  if (kind == ScalarTraits<Rational>::tag)
    return detail::read_entries<Rational>(is, static_cast<std::size_t>(rows), static_cast<std::size_t>(cols));
  throw Error(ErrorKind::ParseError, "unknown scalar kind '" + kind + "'");
}

template <typename T>
Matrix<T> read_matrix_as(std::istream& is) {
  AnyMatrix any = read_matrix(is);
  if (auto* m = std::get_if<Matrix<T>>(&any)) return std::move(*m);
  throw Error(ErrorKind::ParseError, "matrix scalar kind does not match the expected kind");
}

template <typename T>
Matrix<T> from_text(const std::string& text) {
  std::istringstream is(text);
  return read_matrix_as<T>(is);
}

inline AnyMatrix load_matrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::ParseError, "cannot open " + path);
  return read_matrix(in);
}

inline std::string to_text(const AnyMatrix& m) {
  return std::visit([](const auto& x) { return to_text(x); }, m);
}

}  // namespace rma
