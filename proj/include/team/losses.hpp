#pragma once

#include <span>
#include <vector>

namespace team {

struct LossGrad {
    float loss = 0.0f;
    std::vector<float> d_logits;
};

/// loss = -log softmax(logits)[label]; d_logits = softmax - one_hot(label).
/// Throws input_error when label is out of range.
LossGrad softmax_cross_entropy(std::span<const float> logits, int label);

struct ScalarLossGrad {
    float loss = 0.0f;
    float d_logit = 0.0f;
};

/// Numerically stable binary cross-entropy on a raw logit; label in {0, 1}.
ScalarLossGrad sigmoid_bce(float logit, int label);

float sigmoid(float z);

} // namespace team
