#pragma once

#include <stdexcept>
#include <string>

namespace lft {

/// Shapes that do not line up for the requested operation.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A documented precondition of an operation was violated by the caller.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Bad user-supplied data: out-of-range ids, non-finite costs, missing files.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Training produced a non-finite loss.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, long step, double lr)
      : std::runtime_error(what + " (step " + std::to_string(step) + ", lr " + std::to_string(lr) + ")"),
        step_(step),
        lr_(lr) {}

  long step() const { return step_; }
  double lr() const { return lr_; }

 private:
  long step_;
  double lr_;
};

}  // namespace lft
