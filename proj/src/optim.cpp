#include "team/optim.hpp"

#include <string>

#include "team/errors.hpp"

namespace team {

void sgd_step(std::span<ParamBlock* const> blocks, float lr) {
    if (lr < 0.0f)
        throw config_error("sgd_step: negative learning rate " + std::to_string(lr));
    for (ParamBlock* b : blocks) {
        if (b->trainable && lr != 0.0f) {
            for (std::size_t i = 0; i < b->value.size(); ++i)
                b->value.data[i] -= lr * b->grad.data[i];
        }
        b->zero_grad();
    }
}

void scale_grads(std::span<ParamBlock* const> blocks, float s) {
    for (ParamBlock* b : blocks)
        if (b->trainable)
            for (auto& g : b->grad.data) g *= s;
}

void zero_grads(std::span<ParamBlock* const> blocks) {
    for (ParamBlock* b : blocks) b->zero_grad();
}

} // namespace team
