#pragma once

#include <stdexcept>
#include <string>

namespace hamlab {

enum class error_kind {
  domain,          // point outside the chart, or evaluation outside a valid range
  structural,      // singular symplectic matrix, bad dimensions
  stiffness,       // step-size underflow in the integrator
  accuracy,        // residual above the accepted level
  regularity,      // degenerate canonical form
  transversality,  // reduction preconditions
  conjugate_point,
  inconsistency,   // monotonicity of horizon limits violated
  precondition,
  config,
  io,
};

const char* to_string(error_kind k) noexcept;

class hamlab_error : public std::runtime_error {
 public:
  hamlab_error(error_kind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  error_kind kind() const noexcept { return kind_; }

 private:
  error_kind kind_;
};

[[noreturn]] void fail(error_kind kind, const std::string& what);

}  // namespace hamlab
