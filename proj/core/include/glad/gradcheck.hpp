#pragma once

#include <functional>
#include <vector>

#include "glad/error.hpp"

namespace glad {

/// Central finite differences: per coordinate k returns
/// (f(theta + eps*e_k) - f(theta - eps*e_k)) / (2*eps).
/// Throws InvalidInputError when eps <= 0 or f evaluates to a non-finite
/// value at any probe point. This is the gradient oracle every analytic
/// backward pass in the library is checked against.
std::vector<double> central_diff(
    const std::function<double(const std::vector<double>&)>& f,
    const std::vector<double>& theta, double eps = 1e-5);

/// Disagreement between two gradient vectors: ||a - b|| / max(||a||, ||b||)
/// when either norm reaches `norm_floor`, otherwise the plain ||a - b||.
/// Below the floor a ratio would only amplify finite-difference noise, so
/// near-zero and dead-path tensors are compared absolutely instead.
double gradient_rel_error(const std::vector<double>& a,
                          const std::vector<double>& b,
                          double norm_floor = 1e-3);

}  // namespace glad
