#pragma once

#include "ella/arch.hpp"

namespace ella {

struct JvpResult {
  Vector value;    // g(x), identical to forward()
  Vector tangent;  // J(x) v, directional derivative in parameter space
};

Vector forward(const FlatParams& p, const Vector& x);

// One fused pass carrying (primal, tangent) pairs; the primal side runs the
// same code as forward(), so the two agree bit for bit.
JvpResult jvp(const FlatParams& p, const Vector& x, const Vector& v);

// Reverse pass for J(x)^T u; grad_row(i) is the cotangent e_i special case.
Vector vjp(const FlatParams& p, const Vector& x, const Vector& cotangent);
Vector grad_row(const FlatParams& p, const Vector& x, int output_index);

// Dense C x P Jacobian assembled one reverse pass per output row.
Matrix jacobian(const FlatParams& p, const Vector& x);

// cumulative number of jvp() evaluations in this process (instrumentation)
long jvp_pass_count();

}  // namespace ella
