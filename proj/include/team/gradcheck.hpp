#pragma once

#include "team/network.hpp"

namespace team {

enum class LossKind { SoftmaxXent, SigmoidBce };

struct FragmentLoss {
    LossKind kind = LossKind::SoftmaxXent;
    int label = 0; // class index, or 0/1 for the sigmoid head
};

/// Compares the engine's analytic gradients (float32) against central finite
/// differences of a double-precision re-evaluation of the same fragment.
/// Checks every parameter element and every input element; returns the worst
/// error |analytic - fd| / max(1, |analytic|, |fd|).
/// Throws input_error for eps <= 0 and oracle_error when the loss is not finite.
double finite_diff_check(Network& fragment, const Tensor4& input,
                         const FragmentLoss& loss, double eps);

} // namespace team
