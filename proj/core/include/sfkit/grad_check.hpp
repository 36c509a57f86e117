#pragma once

#include <functional>

#include "sfkit/tensor.hpp"

namespace sfkit {

/// Central-difference gradient of a scalar-valued function, the oracle every
/// hand-derived backward pass in this project is checked against:
///   g[i] = (f(x + eps*e_i) - f(x - eps*e_i)) / (2*eps)
///
/// Throws InputError for eps <= 0 and InvariantError if f returns a
/// non-finite value anywhere in the stencil.
Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f, const Tensor& x,
                        double eps);

}  // namespace sfkit
