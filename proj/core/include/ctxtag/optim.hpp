#pragma once

#include <functional>
#include <vector>

#include "ctxtag/autodiff.hpp"

namespace ctxtag {

// SGD with global-norm clipping: if the gradient norm over all params
// exceeds clip_norm, every grad is scaled by clip_norm/norm; then
// value -= lr * grad and grads are zeroed. clip_norm may be +infinity.
void sgd_step(const std::vector<ParamNode*>& params, real lr, real clip_norm);

// Central-difference gradient check. loss_fn must rebuild the loss from the
// current parameter values on every call; returns the max relative error
// between analytic and numeric gradients over every coordinate, with
// denominator max(|a|, |b|, 1e-8). Leaves all grads zeroed.
double finite_diff_check(const std::function<Var()>& loss_fn,
                         const std::vector<ParamNode*>& params, double eps);

}  // namespace ctxtag
