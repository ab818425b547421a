#pragma once

#include <span>

#include "team/layers.hpp"

namespace team {

/// value <- value - lr * grad for trainable blocks; frozen blocks untouched.
/// Grads of every block (frozen included) are zeroed afterwards.
/// Throws config_error for negative lr.
void sgd_step(std::span<ParamBlock* const> blocks, float lr);

/// grad *= s on every trainable block (mini-batch mean before the step).
void scale_grads(std::span<ParamBlock* const> blocks, float s);

void zero_grads(std::span<ParamBlock* const> blocks);

} // namespace team
