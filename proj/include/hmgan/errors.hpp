#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace hmgan {

/// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Two operands whose shapes do not conform for the named operation.
struct ShapeError : Error {
  std::string op;
  std::string lhs;
  std::string rhs;

  ShapeError(std::string op_name, std::string lhs_shape, std::string rhs_shape)
      : Error("shape mismatch in " + op_name + ": " + lhs_shape + " vs " + rhs_shape),
        op(std::move(op_name)),
        lhs(std::move(lhs_shape)),
        rhs(std::move(rhs_shape)) {}
};

/// An argument outside its documented domain (bad index, count, name, ...).
struct DomainError : Error {
  using Error::Error;
};

/// A numeric contract violation (e.g. an eigenvalue below tolerance).
struct NumericError : Error {
  double offending_value;

  NumericError(const std::string& what, double value)
      : Error(what + " (value " + std::to_string(value) + ")"), offending_value(value) {}
};

struct ValidationIssue {
  std::string path;     // JSON-pointer style, e.g. "/dataset/sigma"
  std::string message;
};

/// Carries every config problem found, not just the first.
struct ValidationError : Error {
  std::vector<ValidationIssue> issues;

  explicit ValidationError(std::vector<ValidationIssue> found)
      : Error(join(found)), issues(std::move(found)) {}

 private:
  static std::string join(const std::vector<ValidationIssue>& found) {
    std::string out = "config validation failed:";
    for (const auto& issue : found) out += "\n  " + issue.path + ": " + issue.message;
    return out;
  }
};

}  // namespace hmgan
