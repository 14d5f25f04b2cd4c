#pragma once

#include <stdexcept>
#include <string>

namespace collapse {

/// Bad input: malformed operator, mismatched dimensions, violated precondition.
/// `field()` names the offending quantity when one can be identified.
class ValidationError : public std::invalid_argument {
 public:
  explicit ValidationError(const std::string& what, std::string field = {})
      : std::invalid_argument(what), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// A computation produced a result that contradicts an invariant that should
/// hold by construction (e.g. branch probabilities of a complete family not
/// summing to one).
class InconsistencyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace collapse
