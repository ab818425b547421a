#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "team/tensor.hpp"

namespace team {

struct Dataset {
    Tensor4 images; // [N, C, H, W], values in [0, 1]
    std::vector<int> labels;
    std::vector<std::string> label_names;

    int size() const { return images.n(); }
    /// One-sample slice as a [1, C, H, W] tensor.
    Tensor4 sample(int i) const;
};

/// Number of distinct labels assuming labels are drawn from 0..K-1.
int label_span(const Dataset& ds);

/// IDX container pair (0x00000803 images, 0x00000801 labels, big-endian
/// extents). Pixels are normalised byte/255. Errors carry the byte offset.
Dataset load_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path);
void write_idx(const Dataset& ds, const std::filesystem::path& images_path,
               const std::filesystem::path& labels_path);

struct SynthSpec {
    int classes = 2;
    int samples_per_class = 10;
    int image_size = 28;
    float noise_sigma = 0.0f;
};

/// Each class gets a distinct bright-block template at a grid position;
/// Gaussian noise is added and values clamped to [0, 1].
Dataset generate_synthetic(const SynthSpec& spec, std::uint64_t seed);

struct PartitionPlan {
    // device -> (class -> fraction of that class's samples)
    std::map<int, std::map<int, double>> fractions;
    double imbalance_factor = 1.0;
    std::uint64_t seed = 0;
};

/// Rotation scheme: within every device the largest class share is
/// `factor` times the smallest, and per class the fractions sum to 1.
PartitionPlan make_imbalanced_plan(const std::vector<int>& classes,
                                   const std::vector<int>& device_ids,
                                   double factor, std::uint64_t seed);

/// Seeded sampling without replacement; floor per device with the remainder
/// going to the lowest device id. Oversubscribed classes raise input_error.
std::map<int, Dataset> partition(const Dataset& ds, const PartitionPlan& plan,
                                 const std::vector<int>& device_ids);

Dataset filter_by_labels(const Dataset& ds, const std::set<int>& keep);
/// Labels become 1 for `positive_label`, 0 otherwise.
Dataset binary_relabel(const Dataset& ds, int positive_label);
/// First `per_class` samples of every class present, in dataset order.
Dataset take_per_class(const Dataset& ds, int per_class);

} // namespace team
