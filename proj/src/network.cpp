#include "team/network.hpp"

#include <cmath>
#include <random>
#include <string>

#include "team/errors.hpp"
#include "team/kernels.hpp"
#include "team/rng.hpp"

namespace team {

std::string layer_kind_name(LayerKind k) {
    switch (k) {
        case LayerKind::Conv: return "conv";
        case LayerKind::ReLU: return "relu";
        case LayerKind::MaxPool: return "maxpool";
        case LayerKind::Flatten: return "flatten";
        case LayerKind::Affine: return "affine";
    }
    return "?";
}

Shape3 layer_output_shape(const LayerSpec& spec, const Shape3& in) {
    switch (spec.kind) {
        case LayerKind::Conv: {
            if (spec.groups < 1 || spec.out_filters % spec.groups != 0 ||
                spec.in_channels % spec.groups != 0)
                throw config_error("conv: out_filters " + std::to_string(spec.out_filters) +
                                   " and in_channels " + std::to_string(spec.in_channels) +
                                   " must both divide by groups " + std::to_string(spec.groups));
            if (spec.in_channels != in.c)
                throw config_error("conv: declared in_channels " + std::to_string(spec.in_channels) +
                                   " != incoming channels " + std::to_string(in.c));
            const int oh = (in.h + 2 * spec.pad - spec.kernel) / spec.stride + 1;
            const int ow = (in.w + 2 * spec.pad - spec.kernel) / spec.stride + 1;
            if (oh <= 0 || ow <= 0 || spec.kernel > in.h + 2 * spec.pad || spec.kernel > in.w + 2 * spec.pad)
                throw config_error("conv: kernel " + std::to_string(spec.kernel) +
                                   " does not produce positive output from " +
                                   std::to_string(in.h) + "x" + std::to_string(in.w));
            return {spec.out_filters, oh, ow};
        }
        case LayerKind::ReLU:
            return in;
        case LayerKind::MaxPool: {
            if (spec.pool_kernel > in.h || spec.pool_kernel > in.w)
                throw config_error("maxpool: kernel " + std::to_string(spec.pool_kernel) +
                                   " larger than input " + std::to_string(in.h) + "x" +
                                   std::to_string(in.w));
            const int oh = (in.h - spec.pool_kernel) / spec.pool_stride + 1;
            const int ow = (in.w - spec.pool_kernel) / spec.pool_stride + 1;
            if (oh <= 0 || ow <= 0)
                throw config_error("maxpool: non-positive output extent");
            return {in.c, oh, ow};
        }
        case LayerKind::Flatten:
            return {in.c * in.h * in.w, 1, 1};
        case LayerKind::Affine: {
            if (spec.in_dim != in.c * in.h * in.w)
                throw config_error("affine: declared in_dim " + std::to_string(spec.in_dim) +
                                   " != incoming dim " + std::to_string(in.c * in.h * in.w));
            return {spec.out_dim, 1, 1};
        }
    }
    throw config_error("unknown layer kind");
}

void validate_arch(const ArchSpec& arch) {
    if (arch.layers.empty()) throw config_error("arch: empty layer list");
    if (arch.in_c < 1 || arch.in_h < 1 || arch.in_w < 1)
        throw config_error("arch: input extents must be positive");
    if (arch.class_count < 1) throw config_error("arch: class_count must be >= 1");
    Shape3 s{arch.in_c, arch.in_h, arch.in_w};
    for (const auto& spec : arch.layers) s = layer_output_shape(spec, s);
    const auto& last = arch.layers.back();
    if (last.kind != LayerKind::Affine || last.out_dim != arch.class_count)
        throw config_error("arch: stack must end in an Affine classifier with out_dim == class_count");
    if (arch.layers.size() < 2 || arch.layers[arch.layers.size() - 2].kind != LayerKind::Flatten)
        throw config_error("arch: classifier must be preceded by a Flatten layer");
    if (arch.split_index < 0 || arch.split_index >= static_cast<int>(arch.layers.size()))
        throw config_error("arch: split_index out of range");
    // decoupled region: contiguous suffix of conv layers (plus the classifier)
    for (int i = arch.split_index; i < static_cast<int>(arch.layers.size()); ++i) {
        const auto k = arch.layers[i].kind;
        if (k == LayerKind::Conv && arch.layers[i].groups != 1)
            throw config_error("arch: decoupled conv layers must have groups == 1 before decoupling");
    }
    if (arch.layers[arch.split_index].kind != LayerKind::Conv)
        throw config_error("arch: split_index must point at a conv layer");
    for (int i = 0; i < arch.split_index; ++i)
        if (arch.layers[i].kind == LayerKind::Flatten || arch.layers[i].kind == LayerKind::Affine)
            throw config_error("arch: shared stack cannot contain Flatten/Affine layers");
}

int compute_split_index(const ArchSpec& arch, int decoupled_conv_count) {
    std::vector<int> conv_positions;
    for (int i = 0; i < static_cast<int>(arch.layers.size()); ++i)
        if (arch.layers[i].kind == LayerKind::Conv) conv_positions.push_back(i);
    if (decoupled_conv_count < 1 || decoupled_conv_count > static_cast<int>(conv_positions.size()))
        throw config_error("decoupled_layer_count " + std::to_string(decoupled_conv_count) +
                           " out of range; model has " + std::to_string(conv_positions.size()) +
                           " conv layers");
    return conv_positions[conv_positions.size() - decoupled_conv_count];
}

std::vector<int> decoupled_conv_layers(const ArchSpec& arch) {
    std::vector<int> out;
    for (int i = arch.split_index; i < static_cast<int>(arch.layers.size()); ++i)
        if (arch.layers[i].kind == LayerKind::Conv) out.push_back(i);
    return out;
}

std::size_t Network::param_count() const {
    std::size_t total = 0;
    for (const auto& p : params) total += p.param_count();
    return total;
}

namespace {

ParamBlock he_init(Tensor4 shape_like, int fan_in, std::mt19937_64& rng, const std::string& name) {
    std::normal_distribution<float> dist(0.0f, std::sqrt(2.0f / static_cast<float>(fan_in)));
    for (auto& v : shape_like.data) v = dist(rng);
    return ParamBlock(std::move(shape_like), true, name);
}

} // namespace

Network build_network(const ArchSpec& arch, std::uint64_t seed) {
    validate_arch(arch);
    Network net;
    net.arch = arch;
    net.params.resize(arch.layers.size());
    auto rng = make_rng(seed);
    for (std::size_t i = 0; i < arch.layers.size(); ++i) {
        const auto& spec = arch.layers[i];
        const std::string base = "layer" + std::to_string(i);
        if (spec.kind == LayerKind::Conv) {
            const int cpg = spec.in_channels / spec.groups;
            net.params[i].weight = he_init(Tensor4(spec.out_filters, cpg, spec.kernel, spec.kernel),
                                           cpg * spec.kernel * spec.kernel, rng, base + ".weight");
            net.params[i].bias = ParamBlock(Tensor4(1, 1, 1, spec.out_filters), true, base + ".bias");
        } else if (spec.kind == LayerKind::Affine) {
            net.params[i].weight = he_init(Tensor4(1, 1, spec.in_dim, spec.out_dim),
                                           spec.in_dim, rng, base + ".weight");
            net.params[i].bias = ParamBlock(Tensor4(1, 1, 1, spec.out_dim), true, base + ".bias");
        }
    }
    return net;
}

Tensor4 stack_forward(std::span<const LayerSpec> specs,
                      std::span<const LayerParams> params,
                      const Tensor4& input, ForwardCache* cache) {
    if (specs.size() != params.size())
        throw config_error("stack_forward: specs/params length mismatch");
    if (cache) {
        cache->inputs.assign(specs.size(), Tensor4{});
        cache->pool_argmax.assign(specs.size(), {});
    }
    Tensor4 cur = input;
    for (std::size_t i = 0; i < specs.size(); ++i) {
        if (cache) cache->inputs[i] = cur;
        const auto& spec = specs[i];
        switch (spec.kind) {
            case LayerKind::Conv:
                cur = kernels::conv2d_forward(cur, params[i].weight.value, params[i].bias.value,
                                              spec.stride, spec.pad, spec.groups);
                break;
            case LayerKind::ReLU:
                cur = kernels::relu_forward(cur);
                break;
            case LayerKind::MaxPool: {
                auto res = kernels::maxpool2d_forward(cur, spec.pool_kernel, spec.pool_stride);
                if (cache) cache->pool_argmax[i] = std::move(res.argmax);
                cur = std::move(res.output);
                break;
            }
            case LayerKind::Flatten:
                cur = kernels::flatten_forward(cur);
                break;
            case LayerKind::Affine:
                cur = kernels::affine_forward(cur, params[i].weight.value, params[i].bias.value);
                break;
        }
    }
    return cur;
}

Tensor4 stack_backward(std::span<const LayerSpec> specs,
                       std::span<LayerParams> params,
                       const ForwardCache& cache, const Tensor4& d_out,
                       bool want_d_input) {
    if (specs.size() != params.size() || cache.inputs.size() != specs.size())
        throw config_error("stack_backward: cache does not match stack");
    Tensor4 grad = d_out;
    for (int i = static_cast<int>(specs.size()) - 1; i >= 0; --i) {
        const auto& spec = specs[i];
        const Tensor4& layer_in = cache.inputs[i];
        const bool need_below = want_d_input || i > 0;
        switch (spec.kind) {
            case LayerKind::Conv: {
                Tensor4 d_in;
                kernels::conv2d_backward(layer_in, params[i].weight.value, grad,
                                         spec.stride, spec.pad, spec.groups,
                                         need_below ? &d_in : nullptr,
                                         params[i].weight.grad, params[i].bias.grad);
                grad = std::move(d_in);
                break;
            }
            case LayerKind::ReLU:
                grad = kernels::relu_backward(layer_in, grad);
                break;
            case LayerKind::MaxPool:
                grad = kernels::maxpool2d_backward(layer_in.shape, cache.pool_argmax[i], grad);
                break;
            case LayerKind::Flatten:
                grad = kernels::flatten_backward(grad, layer_in.shape);
                break;
            case LayerKind::Affine: {
                Tensor4 d_in;
                kernels::affine_backward(layer_in, params[i].weight.value, grad,
                                         need_below ? &d_in : nullptr,
                                         params[i].weight.grad, params[i].bias.grad);
                grad = std::move(d_in);
                break;
            }
        }
    }
    return grad;
}

Tensor4 network_forward(const Network& net, const Tensor4& input, ForwardCache* cache) {
    if (input.c() != net.arch.in_c || input.h() != net.arch.in_h || input.w() != net.arch.in_w)
        throw input_error("network_forward: input shape [" + std::to_string(input.c()) + "," +
                          std::to_string(input.h()) + "," + std::to_string(input.w()) +
                          "] does not match arch input [" + std::to_string(net.arch.in_c) + "," +
                          std::to_string(net.arch.in_h) + "," + std::to_string(net.arch.in_w) + "]");
    return stack_forward(net.arch.layers, net.params, input, cache);
}

Tensor4 network_backward(Network& net, const ForwardCache& cache, const Tensor4& d_logits,
                         bool want_d_input) {
    return stack_backward(net.arch.layers, net.params, cache, d_logits, want_d_input);
}

std::vector<ParamBlock*> all_blocks(Network& net) { return all_blocks(std::span(net.params)); }

std::vector<ParamBlock*> all_blocks(std::span<LayerParams> params) {
    std::vector<ParamBlock*> out;
    for (auto& p : params) {
        if (p.weight.param_count() > 0) out.push_back(&p.weight);
        if (p.bias.param_count() > 0) out.push_back(&p.bias);
    }
    return out;
}

} // namespace team
