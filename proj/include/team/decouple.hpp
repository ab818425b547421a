#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "team/data.hpp"
#include "team/network.hpp"

namespace team {

struct DecoupleConfig {
    int decoupled_layer_count = 0; // trailing conv layers to decouple
    double path_fraction = 0.0;    // fraction of filters per path per layer
    int num_paths = 0;             // one per pretrained class
    int calib_samples_per_class = 1;
};

void validate_decouple_config(const DecoupleConfig& cfg, const ArchSpec& arch);

/// importance[class][filter], non-negative.
using ImportanceMatrix = std::vector<std::vector<double>>;

/// Selected source-filter indices: per_class[class][decoupled layer] is an
/// ascending list of length ceil(path_fraction * F_layer).
struct PathAssignment {
    std::vector<std::vector<std::vector<int>>> per_class;
};

/// One class's private slice of the decoupled layers plus its scalar-logit
/// head. `params` aligns with arch.layers[split_index..]: conv positions
/// carry the sliced filters, the classifier position carries the head.
struct CriticalPath {
    int class_label = -1;
    std::vector<LayerParams> params;
    std::vector<std::vector<int>> selected; // per decoupled conv layer

    std::size_t param_count() const;
};

struct GlobalModel {
    ArchSpec arch;
    std::vector<LayerParams> shared; // layers < split_index, frozen
    std::vector<CriticalPath> paths; // ascending class_label, unique
    std::int64_t version = 0;
};

enum class TaskMode { ClosedSet, OneVsAll };

/// Shared layers plus a task-chosen subset of paths. Owns private copies;
/// value-like and safe to hand to a device thread.
struct SpecializedModel {
    ArchSpec arch;
    std::vector<LayerParams> shared;
    std::vector<CriticalPath> paths;
    TaskMode mode = TaskMode::ClosedSet;
};

/// Mean per-class L1 activation of the conv layer's post-ReLU output maps,
/// normalised by map size. calib must contain >= 1 sample of every class.
ImportanceMatrix score_filter_importance(const Network& pretrained, int class_count,
                                         const Dataset& calib, int layer_index);

/// Top-ceil(p*F) filters per class and layer, ties to the lower filter index.
PathAssignment build_path_assignment(const std::vector<ImportanceMatrix>& per_layer,
                                     const DecoupleConfig& cfg,
                                     const std::vector<int>& layer_filter_counts);

/// Slices a pretrained dense model into shared layers plus one critical path
/// per class; shared blocks are copied and frozen, version starts at 0.
GlobalModel decouple(const Network& pretrained, const DecoupleConfig& cfg,
                     const Dataset& calib);

SpecializedModel extract_specialized(const GlobalModel& global,
                                     const std::vector<int>& class_set, TaskMode mode);

struct SpecForward {
    Tensor4 logits; // [N, P, 1, 1]
    Tensor4 scores; // softmax rows (ClosedSet) or sigmoid (OneVsAll)
};

SpecForward forward_specialized(const SpecializedModel& model, const Tensor4& batch);

/// Per-path forward/backward pieces used by the trainer.
Tensor4 shared_forward(const ArchSpec& arch, const std::vector<LayerParams>& shared,
                       const Tensor4& batch, ForwardCache* cache);
Tensor4 path_forward(const ArchSpec& arch, const CriticalPath& path,
                     const Tensor4& shared_out, ForwardCache* cache);
/// Accumulates gradients into the path blocks; returns d(shared_out) when
/// want_d_shared is set.
Tensor4 path_backward(const ArchSpec& arch, CriticalPath& path, const ForwardCache& cache,
                      const Tensor4& d_logit, bool want_d_shared);

struct ParamAccount {
    struct PathCount {
        int class_label = -1;
        std::size_t conv_params = 0;
        std::size_t head_params = 0;
        std::size_t total() const { return conv_params + head_params; }
    };
    std::size_t shared_params = 0;
    std::vector<PathCount> paths;

    std::size_t path_total() const;
    std::size_t total_params() const { return shared_params + path_total(); }
    static std::uint64_t bytes(std::size_t params) { return static_cast<std::uint64_t>(params) * 4; }
};

ParamAccount param_accounting(const GlobalModel& model);
ParamAccount param_accounting(const SpecializedModel& model);
ParamAccount::PathCount path_accounting(const CriticalPath& path);

std::vector<ParamBlock*> path_blocks(CriticalPath& path);
std::uint64_t shared_checksum(const std::vector<LayerParams>& shared);

} // namespace team
