#pragma once

// Production layer kernels. Parallelised with OpenMP so that every output
// element is written by exactly one thread with a fixed inner accumulation
// order: results are bitwise identical for any thread count.

#include <cstdint>
#include <vector>

#include "team/tensor.hpp"

namespace team::kernels {

struct ConvDims {
    int n, c, h, w;      // input
    int f, cpg, kh, kw;  // weight [f, c/groups, kh, kw]
    int stride, pad, groups;
    int oh, ow;
};

/// Validates conv shapes and returns the derived dimensions.
/// Throws config_error naming the offending dimension.
ConvDims conv_dims(const Tensor4& input, const Tensor4& weight,
                   int stride, int pad, int groups);

Tensor4 conv2d_forward(const Tensor4& input, const Tensor4& weight,
                       const Tensor4& bias, int stride, int pad, int groups);

/// d_weight/d_bias accumulate (+=) into the given tensors; d_input is overwritten.
void conv2d_backward(const Tensor4& input, const Tensor4& weight,
                     const Tensor4& upstream, int stride, int pad, int groups,
                     Tensor4* d_input, Tensor4& d_weight, Tensor4& d_bias);

struct PoolResult {
    Tensor4 output;
    std::vector<std::int64_t> argmax; // flat input index per output cell
};

PoolResult maxpool2d_forward(const Tensor4& input, int kernel, int stride);

Tensor4 maxpool2d_backward(const std::array<int, 4>& input_shape,
                           const std::vector<std::int64_t>& argmax,
                           const Tensor4& upstream);

Tensor4 relu_forward(const Tensor4& input);
// Gradient at exactly zero is zero.
Tensor4 relu_backward(const Tensor4& input, const Tensor4& upstream);

/// input [n, d, 1, 1], weight [1, 1, d, m], bias [1, 1, 1, m] -> [n, m, 1, 1]
Tensor4 affine_forward(const Tensor4& input, const Tensor4& weight, const Tensor4& bias);
void affine_backward(const Tensor4& input, const Tensor4& weight,
                     const Tensor4& upstream,
                     Tensor4* d_input, Tensor4& d_weight, Tensor4& d_bias);

Tensor4 flatten_forward(const Tensor4& input);
Tensor4 flatten_backward(const Tensor4& upstream, const std::array<int, 4>& input_shape);

} // namespace team::kernels
