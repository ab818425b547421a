#include "team/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "team/errors.hpp"

namespace team {

LossGrad softmax_cross_entropy(std::span<const float> logits, int label) {
    const int k = static_cast<int>(logits.size());
    if (label < 0 || label >= k)
        throw input_error("softmax_cross_entropy: label " + std::to_string(label) +
                          " out of range for " + std::to_string(k) + " logits");
    float mx = logits[0];
    for (int i = 1; i < k; ++i) mx = std::max(mx, logits[i]);
    double denom = 0.0;
    for (int i = 0; i < k; ++i) denom += std::exp(static_cast<double>(logits[i]) - mx);
    LossGrad out;
    out.loss = static_cast<float>(-(static_cast<double>(logits[label]) - mx - std::log(denom)));
    out.d_logits.resize(k);
    for (int i = 0; i < k; ++i) {
        const double p = std::exp(static_cast<double>(logits[i]) - mx) / denom;
        out.d_logits[i] = static_cast<float>(p - (i == label ? 1.0 : 0.0));
    }
    return out;
}

ScalarLossGrad sigmoid_bce(float logit, int label) {
    if (label != 0 && label != 1)
        throw input_error("sigmoid_bce: label must be 0 or 1, got " + std::to_string(label));
    const double z = logit;
    ScalarLossGrad out;
    out.loss = static_cast<float>(std::max(z, 0.0) - z * label + std::log1p(std::exp(-std::abs(z))));
    out.d_logit = sigmoid(logit) - static_cast<float>(label);
    return out;
}

float sigmoid(float z) {
    const double zd = z;
    const double s = zd >= 0.0 ? 1.0 / (1.0 + std::exp(-zd))
                               : std::exp(zd) / (1.0 + std::exp(zd));
    return static_cast<float>(s);
}

} // namespace team
