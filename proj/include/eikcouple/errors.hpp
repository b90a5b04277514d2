#pragma once

#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>

namespace eikcouple {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file. The message carries `path:line:`.
class ParseError : public Error {
 public:
  ParseError(const std::string& path, std::size_t line, const std::string& what)
      : Error(path + ":" + std::to_string(line) + ": " + what), path_(path), line_(line) {}

  const std::string& path() const { return path_; }
  std::size_t line() const { return line_; }

 private:
  std::string path_;
  std::size_t line_;
};

/// Input that parses but violates a model invariant.
class ValidationError : public Error {
 public:
  static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

  explicit ValidationError(const std::string& what, std::size_t entity = npos)
      : Error(what), entity_(entity) {}

  /// Offending cell / edge / entry index, or npos when the problem is global.
  std::size_t entity() const { return entity_; }

 private:
  std::size_t entity_;
};

/// Numerical failure inside a solver (Newton divergence, Krylov breakdown,
/// pseudo-time non-convergence, coupling iteration failure).
class SolverError : public Error {
 public:
  using Error::Error;
};

}  // namespace eikcouple
