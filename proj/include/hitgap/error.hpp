#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace hitgap {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input: bad rates, wrong lengths, invalid generator entries.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Diffusion coefficient is not strictly positive at some grid node.
class EllipticityError : public ValidationError {
 public:
  EllipticityError(const std::string& what, double x, double value)
      : ValidationError(what), x_(x), value_(value) {}
  double location() const { return x_; }
  double value() const { return value_; }

 private:
  double x_;
  double value_;
};

/// The positivity graph of a generator is not strongly connected.
class IrreducibilityError : public Error {
 public:
  IrreducibilityError(const std::string& what, std::vector<std::vector<int>> components)
      : Error(what), components_(std::move(components)) {}
  /// Strongly connected components of the positivity graph.
  const std::vector<std::vector<int>>& components() const { return components_; }

 private:
  std::vector<std::vector<int>> components_;
};

/// Argument outside the mathematical domain of the operation (Re z <= 0, K empty, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Operation requires a reversible chain and the chain is not.
class UnsupportedModeError : public Error {
 public:
  using Error::Error;
};

/// Requested exponential moment is infinite: alpha is at or above the threshold.
class BlowUpError : public Error {
 public:
  BlowUpError(const std::string& what, double alpha, double alpha_star)
      : Error(what), alpha_(alpha), alpha_star_(alpha_star) {}
  double alpha() const { return alpha_; }
  double alpha_star() const { return alpha_star_; }

 private:
  double alpha_;
  double alpha_star_;
};

/// Truncation of an infinite range leaves an error above the requested tolerance.
class TruncationError : public Error {
 public:
  TruncationError(const std::string& what, double estimate, double suggested)
      : Error(what), estimate_(estimate), suggested_(suggested) {}
  double estimate() const { return estimate_; }
  /// A parameter value (horizon, truncation height or step) that meets the tolerance.
  double suggested() const { return suggested_; }

 private:
  double estimate_;
  double suggested_;
};

/// psi does not satisfy the hypotheses required by the requested mode.
class ModeError : public Error {
 public:
  using Error::Error;
};

/// Target sets of a cycle bound are not a valid separating geometry.
class GeometryError : public Error {
 public:
  using Error::Error;
};

/// Configuration problems; carries every error found, not only the first.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<std::string> problems)
      : Error(join(problems)), problems_(std::move(problems)) {}
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  static std::string join(const std::vector<std::string>& items) {
    std::string out;
    for (const auto& s : items) {
      if (!out.empty()) out += "; ";
      out += s;
    }
    return out;
  }
  std::vector<std::string> problems_;
};

/// A numerical step failed where theory says it cannot (singular solve on Re z > 0, ...).
class InternalError : public Error {
 public:
  using Error::Error;
};

}  // namespace hitgap
