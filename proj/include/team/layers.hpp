#pragma once

#include <cstdint>
#include <string>

#include "team/tensor.hpp"

namespace team {

enum class LayerKind { Conv, ReLU, MaxPool, Flatten, Affine };

struct LayerSpec {
    LayerKind kind = LayerKind::ReLU;
    // Conv
    int out_filters = 0, in_channels = 0, kernel = 0, stride = 1, pad = 0, groups = 1;
    // MaxPool
    int pool_kernel = 0, pool_stride = 0;
    // Affine
    int in_dim = 0, out_dim = 0;

    static LayerSpec conv(int out_filters, int in_channels, int kernel,
                          int stride = 1, int pad = 0, int groups = 1) {
        LayerSpec s;
        s.kind = LayerKind::Conv;
        s.out_filters = out_filters;
        s.in_channels = in_channels;
        s.kernel = kernel;
        s.stride = stride;
        s.pad = pad;
        s.groups = groups;
        return s;
    }
    static LayerSpec relu() { return LayerSpec{}; }
    static LayerSpec maxpool(int kernel, int stride) {
        LayerSpec s;
        s.kind = LayerKind::MaxPool;
        s.pool_kernel = kernel;
        s.pool_stride = stride;
        return s;
    }
    static LayerSpec flatten() {
        LayerSpec s;
        s.kind = LayerKind::Flatten;
        return s;
    }
    static LayerSpec affine(int in_dim, int out_dim) {
        LayerSpec s;
        s.kind = LayerKind::Affine;
        s.in_dim = in_dim;
        s.out_dim = out_dim;
        return s;
    }
    bool has_params() const { return kind == LayerKind::Conv || kind == LayerKind::Affine; }
    bool operator==(const LayerSpec&) const = default;
};

struct Shape3 {
    int c = 0, h = 0, w = 0;
    bool operator==(const Shape3&) const = default;
};

/// Output extents for one layer; throws config_error on invalid geometry.
Shape3 layer_output_shape(const LayerSpec& spec, const Shape3& in);

struct ParamBlock {
    Tensor4 value;
    Tensor4 grad;
    bool trainable = true;
    std::string name;

    ParamBlock() = default;
    explicit ParamBlock(Tensor4 v, bool trainable_ = true, std::string name_ = "")
        : value(std::move(v)), grad(Tensor4::zeros_like(value)),
          trainable(trainable_), name(std::move(name_)) {}

    std::size_t param_count() const { return value.size(); }
    void zero_grad() { grad.fill(0.0f); }
};

std::string layer_kind_name(LayerKind k);

} // namespace team
