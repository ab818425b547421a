#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "team/layers.hpp"

namespace team {

/// Architecture of a dense model: layer stack, input extents, number of
/// classes of the trailing classifier and the first decoupled layer index.
struct ArchSpec {
    int in_c = 1, in_h = 0, in_w = 0;
    int class_count = 0;
    int split_index = 0; // first layer of the decoupled region
    std::vector<LayerSpec> layers;

    bool operator==(const ArchSpec&) const = default;
};

/// Validates the stack end-to-end (shape chaining, conv divisibility, the
/// trailing Flatten+Affine classifier); throws config_error naming the issue.
void validate_arch(const ArchSpec& arch);

/// split_index such that exactly `decoupled_conv_count` conv layers — a
/// contiguous suffix of the conv layers — fall at or after it.
int compute_split_index(const ArchSpec& arch, int decoupled_conv_count);

/// Positions of conv layers at/after split_index, in order.
std::vector<int> decoupled_conv_layers(const ArchSpec& arch);

struct LayerParams {
    ParamBlock weight; // empty for parameterless layers
    ParamBlock bias;

    std::size_t param_count() const { return weight.param_count() + bias.param_count(); }
};

/// A dense model: ArchSpec plus one LayerParams per layer.
struct Network {
    ArchSpec arch;
    std::vector<LayerParams> params;

    std::size_t param_count() const;
};

/// He/fan-in Gaussian init for conv and affine weights, zero biases.
Network build_network(const ArchSpec& arch, std::uint64_t seed);

struct ForwardCache {
    std::vector<Tensor4> inputs;                        // input seen by each layer
    std::vector<std::vector<std::int64_t>> pool_argmax; // per layer, empty unless MaxPool
};

/// Generic stack walkers; specs and params must be the same length. A
/// critical path reuses these over the decoupled suffix of the ArchSpec with
/// its own (narrower) parameter blocks.
Tensor4 stack_forward(std::span<const LayerSpec> specs,
                      std::span<const LayerParams> params,
                      const Tensor4& input, ForwardCache* cache);
/// Accumulates parameter gradients; returns d_input of the first layer
/// (empty tensor when want_d_input is false).
Tensor4 stack_backward(std::span<const LayerSpec> specs,
                       std::span<LayerParams> params,
                       const ForwardCache& cache, const Tensor4& d_out,
                       bool want_d_input);

Tensor4 network_forward(const Network& net, const Tensor4& input, ForwardCache* cache);
Tensor4 network_backward(Network& net, const ForwardCache& cache, const Tensor4& d_logits,
                         bool want_d_input = false);

std::vector<ParamBlock*> all_blocks(Network& net);
std::vector<ParamBlock*> all_blocks(std::span<LayerParams> params);

} // namespace team
