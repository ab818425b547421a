#include "team/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "team/errors.hpp"
#include "team/losses.hpp"
#include "team/optim.hpp"
#include "team/reference.hpp"

namespace team {

namespace {

// Double-precision mirror of a fragment, evaluated with the serial reference
// kernels so the oracle shares no code with the OpenMP engine path.
struct Mirror {
    const ArchSpec* arch;
    Shape3 input_shape;
    std::vector<std::vector<double>> weights, biases;
    std::vector<double> input;
    FragmentLoss loss;
    int batch;

    double eval() const {
        Shape3 s = input_shape;
        std::vector<double> cur = input;
        for (std::size_t i = 0; i < arch->layers.size(); ++i) {
            const auto& spec = arch->layers[i];
            switch (spec.kind) {
                case LayerKind::Conv: {
                    const int cpg = spec.in_channels / spec.groups;
                    const int oh = (s.h + 2 * spec.pad - spec.kernel) / spec.stride + 1;
                    const int ow = (s.w + 2 * spec.pad - spec.kernel) / spec.stride + 1;
                    std::vector<double> out(static_cast<std::size_t>(batch) * spec.out_filters * oh * ow);
                    ref::conv2d_forward(cur.data(), batch, s.c, s.h, s.w,
                                        weights[i].data(), spec.out_filters, cpg, spec.kernel, spec.kernel,
                                        biases[i].data(), spec.stride, spec.pad, spec.groups,
                                        out.data(), oh, ow);
                    cur = std::move(out);
                    s = {spec.out_filters, oh, ow};
                    break;
                }
                case LayerKind::ReLU:
                    ref::relu(cur.data(), cur.data(), cur.size());
                    break;
                case LayerKind::MaxPool: {
                    const int oh = (s.h - spec.pool_kernel) / spec.pool_stride + 1;
                    const int ow = (s.w - spec.pool_kernel) / spec.pool_stride + 1;
                    std::vector<double> out(static_cast<std::size_t>(batch) * s.c * oh * ow);
                    ref::maxpool_forward(cur.data(), batch, s.c, s.h, s.w,
                                         spec.pool_kernel, spec.pool_stride,
                                         out.data(), oh, ow, nullptr);
                    cur = std::move(out);
                    s = {s.c, oh, ow};
                    break;
                }
                case LayerKind::Flatten:
                    s = {s.c * s.h * s.w, 1, 1};
                    break;
                case LayerKind::Affine: {
                    std::vector<double> out(static_cast<std::size_t>(batch) * spec.out_dim);
                    ref::affine_forward(cur.data(), batch, spec.in_dim,
                                        weights[i].data(), spec.out_dim, biases[i].data(), out.data());
                    cur = std::move(out);
                    s = {spec.out_dim, 1, 1};
                    break;
                }
            }
        }
        // mean loss over the batch, matching the engine's 1/B gradient scaling
        double total = 0.0;
        for (int b = 0; b < batch; ++b) {
            if (loss.kind == LossKind::SoftmaxXent)
                total += ref::softmax_cross_entropy(cur.data() + static_cast<std::size_t>(b) * s.c,
                                                    s.c, loss.label, static_cast<double*>(nullptr));
            else
                total += ref::sigmoid_bce(cur[static_cast<std::size_t>(b) * s.c], loss.label,
                                          static_cast<double*>(nullptr));
        }
        return total / batch;
    }
};

double rel_err(double analytic, double fd) {
    return std::abs(analytic - fd) / std::max({1.0, std::abs(analytic), std::abs(fd)});
}

} // namespace

double finite_diff_check(Network& fragment, const Tensor4& input,
                         const FragmentLoss& loss, double eps) {
    if (eps <= 0.0)
        throw input_error("finite_diff_check: eps must be positive");

    // Analytic gradients through the float32 engine.
    auto blocks = all_blocks(fragment);
    zero_grads(blocks);
    ForwardCache cache;
    const Tensor4 logits = network_forward(fragment, input, &cache);
    const int batch = logits.n();
    const int k = logits.c();

    Tensor4 d_logits = Tensor4::zeros_like(logits);
    double loss_value = 0.0;
    for (int b = 0; b < batch; ++b) {
        if (loss.kind == LossKind::SoftmaxXent) {
            auto lg = softmax_cross_entropy(
                std::span<const float>(logits.data).subspan(static_cast<std::size_t>(b) * k, k),
                loss.label);
            loss_value += lg.loss;
            for (int i = 0; i < k; ++i)
                d_logits.data[static_cast<std::size_t>(b) * k + i] = lg.d_logits[i] / batch;
        } else {
            auto lg = sigmoid_bce(logits.data[static_cast<std::size_t>(b) * k], loss.label);
            loss_value += lg.loss;
            d_logits.data[static_cast<std::size_t>(b) * k] = lg.d_logit / batch;
        }
    }
    loss_value /= batch;
    if (!std::isfinite(loss_value))
        throw oracle_error("finite_diff_check: non-finite loss");

    const Tensor4 d_input = network_backward(fragment, cache, d_logits, /*want_d_input=*/true);

    // Double mirror for the central differences.
    Mirror m;
    m.arch = &fragment.arch;
    m.input_shape = {input.c(), input.h(), input.w()};
    m.batch = input.n();
    m.loss = loss;
    m.input.assign(input.data.begin(), input.data.end());
    m.weights.resize(fragment.params.size());
    m.biases.resize(fragment.params.size());
    for (std::size_t i = 0; i < fragment.params.size(); ++i) {
        const auto& p = fragment.params[i];
        m.weights[i].assign(p.weight.value.data.begin(), p.weight.value.data.end());
        m.biases[i].assign(p.bias.value.data.begin(), p.bias.value.data.end());
    }

    double worst = 0.0;
    auto probe = [&](std::vector<double>& vec, std::size_t idx, float analytic) {
        const double keep = vec[idx];
        vec[idx] = keep + eps;
        const double up = m.eval();
        vec[idx] = keep - eps;
        const double down = m.eval();
        vec[idx] = keep;
        if (!std::isfinite(up) || !std::isfinite(down))
            throw oracle_error("finite_diff_check: non-finite loss during perturbation");
        worst = std::max(worst, rel_err(analytic, (up - down) / (2.0 * eps)));
    };

    for (std::size_t i = 0; i < fragment.params.size(); ++i) {
        const auto& p = fragment.params[i];
        for (std::size_t j = 0; j < p.weight.param_count(); ++j)
            probe(m.weights[i], j, p.weight.grad.data[j]);
        for (std::size_t j = 0; j < p.bias.param_count(); ++j)
            probe(m.biases[i], j, p.bias.grad.data[j]);
    }
    for (std::size_t j = 0; j < input.size(); ++j)
        probe(m.input, j, d_input.data[j]);

    zero_grads(blocks);
    return worst;
}

} // namespace team
