#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace bsbloch {

enum class ErrorKind {
  Invalid,  // bad input or configuration
  Defective,
  ComplexSpectrum,  // real matrix with a complex-conjugate eigenpair
  Singular,
  BadRange,
  PoleHit,
  CoincidentWithoutDerivative,
  NoRoot,
  BranchJump,
  Diverged,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace bsbloch
