#pragma once

#include <functional>
#include <span>

#include "posergcn/tape.hpp"

namespace posergcn {

/// Builds a scalar loss on a fresh tape. Must be deterministic and read the
/// current values of the checked Params (capture them by reference).
using LossBuilder = std::function<Var(Tape&)>;

/// Compares the analytic gradient of `build` against central differences
/// (f(x+h) - f(x-h)) / 2h for every entry of every param, and returns the
/// worst relative error with denominator max(|analytic|, |numeric|, 1e-8).
/// The 1e-8 floor avoids spurious failures near zero gradients.
double finite_diff_check(const LossBuilder& build, std::span<Param* const> params,
                         double step = 1e-6);

}  // namespace posergcn
