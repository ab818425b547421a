#include "team/decouple.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <string>

#include "team/errors.hpp"
#include "team/kernels.hpp"
#include "team/rng.hpp"

namespace team {

void validate_decouple_config(const DecoupleConfig& cfg, const ArchSpec& arch) {
    if (cfg.path_fraction <= 0.0 || cfg.path_fraction > 1.0)
        throw config_error("decouple: path_fraction must be in (0, 1], got " +
                           std::to_string(cfg.path_fraction));
    if (cfg.num_paths != arch.class_count)
        throw config_error("decouple: num_paths " + std::to_string(cfg.num_paths) +
                           " must equal the pretrained class count " +
                           std::to_string(arch.class_count));
    if (cfg.calib_samples_per_class < 1)
        throw config_error("decouple: calib_samples_per_class must be >= 1");
    const int split = compute_split_index(arch, cfg.decoupled_layer_count);
    if (split != arch.split_index)
        throw config_error("decouple: split_index " + std::to_string(arch.split_index) +
                           " inconsistent with decoupled_layer_count " +
                           std::to_string(cfg.decoupled_layer_count));
    for (int li : decoupled_conv_layers(arch)) {
        const int f = arch.layers[li].out_filters;
        if (static_cast<int>(std::ceil(cfg.path_fraction * f)) < 1)
            throw config_error("decouple: path width rounds to zero at layer " + std::to_string(li));
    }
}

std::size_t CriticalPath::param_count() const {
    std::size_t total = 0;
    for (const auto& p : params) total += p.param_count();
    return total;
}

ImportanceMatrix score_filter_importance(const Network& pretrained, int class_count,
                                         const Dataset& calib, int layer_index) {
    const auto& layers = pretrained.arch.layers;
    if (layer_index < 0 || layer_index >= static_cast<int>(layers.size()) ||
        layers[layer_index].kind != LayerKind::Conv)
        throw input_error("score_filter_importance: layer " + std::to_string(layer_index) +
                          " is not a conv layer");
    // activation taken after the ReLU directly following the conv, if any
    int stop = layer_index + 1;
    if (stop < static_cast<int>(layers.size()) && layers[stop].kind == LayerKind::ReLU) ++stop;

    std::vector<std::int64_t> per_class_counts(class_count, 0);
    for (int l : calib.labels) {
        if (l < 0 || l >= class_count)
            throw input_error("score_filter_importance: calibration label " + std::to_string(l) +
                              " outside pretrained classes");
        ++per_class_counts[l];
    }
    for (int c = 0; c < class_count; ++c)
        if (per_class_counts[c] == 0)
            throw input_error("score_filter_importance: calibration set has no samples of class " +
                              std::to_string(c));

    const int filters = layers[layer_index].out_filters;
    ImportanceMatrix importance(class_count, std::vector<double>(filters, 0.0));

    const auto specs = std::span(layers).first(stop);
    const auto params = std::span(pretrained.params).first(stop);
    for (int i = 0; i < calib.size(); ++i) {
        const Tensor4 act = stack_forward(specs, params, calib.sample(i), nullptr);
        const int hw = act.h() * act.w();
        for (int f = 0; f < filters; ++f) {
            double l1 = 0.0;
            for (int y = 0; y < act.h(); ++y)
                for (int x = 0; x < act.w(); ++x) l1 += std::abs(act.at(0, f, y, x));
            importance[calib.labels[i]][f] += l1 / hw;
        }
    }
    for (int c = 0; c < class_count; ++c)
        for (int f = 0; f < filters; ++f) importance[c][f] /= static_cast<double>(per_class_counts[c]);
    return importance;
}

PathAssignment build_path_assignment(const std::vector<ImportanceMatrix>& per_layer,
                                     const DecoupleConfig& cfg,
                                     const std::vector<int>& layer_filter_counts) {
    if (per_layer.size() != layer_filter_counts.size())
        throw input_error("build_path_assignment: importance/layer count mismatch");
    PathAssignment out;
    out.per_class.resize(cfg.num_paths);
    for (int c = 0; c < cfg.num_paths; ++c) {
        out.per_class[c].resize(per_layer.size());
        for (std::size_t l = 0; l < per_layer.size(); ++l) {
            const int f_count = layer_filter_counts[l];
            const int width = static_cast<int>(std::ceil(cfg.path_fraction * f_count));
            if (width < 1)
                throw config_error("build_path_assignment: zero path width at layer " +
                                   std::to_string(l));
            const auto& row = per_layer[l].at(c);
            std::vector<int> order(f_count);
            std::iota(order.begin(), order.end(), 0);
            std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
                if (row[a] != row[b]) return row[a] > row[b];
                return a < b; // tie -> lower filter index
            });
            std::vector<int> chosen(order.begin(), order.begin() + width);
            std::sort(chosen.begin(), chosen.end());
            out.per_class[c][l] = std::move(chosen);
        }
    }
    return out;
}

namespace {

Tensor4 slice_filters(const Tensor4& weight, const std::vector<int>& rows) {
    Tensor4 out(static_cast<int>(rows.size()), weight.c(), weight.h(), weight.w());
    const std::size_t plane = static_cast<std::size_t>(weight.c()) * weight.h() * weight.w();
    for (std::size_t r = 0; r < rows.size(); ++r)
        std::copy_n(weight.data.begin() + rows[r] * plane, plane, out.data.begin() + r * plane);
    return out;
}

Tensor4 slice_filters_and_channels(const Tensor4& weight, const std::vector<int>& rows,
                                   const std::vector<int>& in_channels) {
    Tensor4 out(static_cast<int>(rows.size()), static_cast<int>(in_channels.size()),
                weight.h(), weight.w());
    const int kk = weight.h() * weight.w();
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t ci = 0; ci < in_channels.size(); ++ci)
            std::copy_n(weight.data.begin() +
                            (static_cast<std::size_t>(rows[r]) * weight.c() + in_channels[ci]) * kk,
                        kk,
                        out.data.begin() + (r * in_channels.size() + ci) * kk);
    return out;
}

Tensor4 slice_bias(const Tensor4& bias, const std::vector<int>& rows) {
    Tensor4 out(1, 1, 1, static_cast<int>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) out.data[r] = bias.data[rows[r]];
    return out;
}

} // namespace

GlobalModel decouple(const Network& pretrained, const DecoupleConfig& cfg,
                     const Dataset& calib) {
    const ArchSpec& arch = pretrained.arch;
    validate_arch(arch);
    validate_decouple_config(cfg, arch);

    const std::vector<int> conv_layers = decoupled_conv_layers(arch);

    std::vector<ImportanceMatrix> importance;
    std::vector<int> filter_counts;
    for (int li : conv_layers) {
        importance.push_back(score_filter_importance(pretrained, arch.class_count, calib, li));
        filter_counts.push_back(arch.layers[li].out_filters);
    }
    const PathAssignment assignment = build_path_assignment(importance, cfg, filter_counts);

    GlobalModel global;
    global.arch = arch;
    global.version = 0;

    global.shared.resize(arch.split_index);
    for (int i = 0; i < arch.split_index; ++i) {
        global.shared[i] = pretrained.params[i];
        global.shared[i].weight.trainable = false;
        global.shared[i].bias.trainable = false;
        global.shared[i].weight.zero_grad();
        global.shared[i].bias.zero_grad();
    }

    // final-feature spatial extents, needed to slice the classifier rows
    Shape3 s{arch.in_c, arch.in_h, arch.in_w};
    std::vector<Shape3> out_shapes(arch.layers.size());
    for (std::size_t i = 0; i < arch.layers.size(); ++i) {
        s = layer_output_shape(arch.layers[i], s);
        out_shapes[i] = s;
    }
    const int classifier_idx = static_cast<int>(arch.layers.size()) - 1;
    const Shape3 feat = out_shapes[classifier_idx - 2]; // before Flatten
    const int feat_hw = feat.h * feat.w;

    const int region = static_cast<int>(arch.layers.size()) - arch.split_index;
    for (int c = 0; c < arch.class_count; ++c) {
        CriticalPath path;
        path.class_label = c;
        path.selected = assignment.per_class[c];
        path.params.resize(region);

        for (std::size_t l = 0; l < conv_layers.size(); ++l) {
            const int li = conv_layers[l];
            const auto& src = pretrained.params[li];
            const auto& rows = path.selected[l];
            Tensor4 w = (l == 0)
                            ? slice_filters(src.weight.value, rows)
                            : slice_filters_and_channels(src.weight.value, rows, path.selected[l - 1]);
            const std::string base = "path" + std::to_string(c) + ".conv" + std::to_string(l);
            path.params[li - arch.split_index].weight = ParamBlock(std::move(w), true, base + ".weight");
            path.params[li - arch.split_index].bias =
                ParamBlock(slice_bias(src.bias.value, rows), true, base + ".bias");
        }

        // head: the classifier row for this class, restricted to surviving channels
        const auto& cls_w = pretrained.params[classifier_idx].weight.value; // [1,1,D,K]
        const auto& cls_b = pretrained.params[classifier_idx].bias.value;
        const int k_total = cls_w.w();
        const auto& last_sel = path.selected.back();
        const int d_path = static_cast<int>(last_sel.size()) * feat_hw;
        Tensor4 head_w(1, 1, d_path, 1);
        for (std::size_t r = 0; r < last_sel.size(); ++r)
            for (int p = 0; p < feat_hw; ++p)
                head_w.data[r * feat_hw + p] =
                    cls_w.data[(static_cast<std::size_t>(last_sel[r]) * feat_hw + p) * k_total + c];
        Tensor4 head_b(1, 1, 1, 1);
        head_b.data[0] = cls_b.data[c];
        const std::string base = "path" + std::to_string(c) + ".head";
        path.params[region - 1].weight = ParamBlock(std::move(head_w), true, base + ".weight");
        path.params[region - 1].bias = ParamBlock(std::move(head_b), true, base + ".bias");

        global.paths.push_back(std::move(path));
    }
    return global;
}

SpecializedModel extract_specialized(const GlobalModel& global,
                                     const std::vector<int>& class_set, TaskMode mode) {
    if (class_set.empty())
        throw input_error("extract_specialized: empty class set");
    std::set<int> wanted(class_set.begin(), class_set.end());
    if (wanted.size() != class_set.size())
        throw input_error("extract_specialized: duplicate class labels in request");
    if (mode == TaskMode::ClosedSet && wanted.size() < 2)
        throw input_error("extract_specialized: ClosedSet needs >= 2 paths");
    if (mode == TaskMode::OneVsAll && wanted.size() != 1)
        throw input_error("extract_specialized: OneVsAll needs exactly 1 path");

    SpecializedModel model;
    model.arch = global.arch;
    model.shared = global.shared;
    model.mode = mode;
    for (int label : wanted) { // std::set iterates ascending
        auto it = std::find_if(global.paths.begin(), global.paths.end(),
                               [&](const CriticalPath& p) { return p.class_label == label; });
        if (it == global.paths.end())
            throw input_error("extract_specialized: unknown class label " + std::to_string(label));
        model.paths.push_back(*it);
    }
    return model;
}

Tensor4 shared_forward(const ArchSpec& arch, const std::vector<LayerParams>& shared,
                       const Tensor4& batch, ForwardCache* cache) {
    if (batch.c() != arch.in_c || batch.h() != arch.in_h || batch.w() != arch.in_w)
        throw input_error("shared_forward: batch shape does not match arch input");
    return stack_forward(std::span(arch.layers).first(arch.split_index),
                         std::span(shared), batch, cache);
}

Tensor4 path_forward(const ArchSpec& arch, const CriticalPath& path,
                     const Tensor4& shared_out, ForwardCache* cache) {
    return stack_forward(std::span(arch.layers).subspan(arch.split_index),
                         std::span(path.params), shared_out, cache);
}

Tensor4 path_backward(const ArchSpec& arch, CriticalPath& path, const ForwardCache& cache,
                      const Tensor4& d_logit, bool want_d_shared) {
    return stack_backward(std::span(arch.layers).subspan(arch.split_index),
                          std::span(path.params), cache, d_logit, want_d_shared);
}

SpecForward forward_specialized(const SpecializedModel& model, const Tensor4& batch) {
    const Tensor4 shared_out = shared_forward(model.arch, model.shared, batch, nullptr);
    const int n = batch.n();
    const int p = static_cast<int>(model.paths.size());
    SpecForward out{Tensor4(n, p, 1, 1), Tensor4(n, p, 1, 1)};

    // paths are independent; each column is written by one thread
#pragma omp parallel for schedule(static)
    for (int j = 0; j < p; ++j) {
        const Tensor4 logit = path_forward(model.arch, model.paths[j], shared_out, nullptr);
        for (int i = 0; i < n; ++i)
            out.logits.data[static_cast<std::size_t>(i) * p + j] = logit.data[i];
    }

    for (int i = 0; i < n; ++i) {
        if (model.mode == TaskMode::ClosedSet) {
            // softmax row
            float mx = out.logits.data[static_cast<std::size_t>(i) * p];
            for (int j = 1; j < p; ++j)
                mx = std::max(mx, out.logits.data[static_cast<std::size_t>(i) * p + j]);
            double denom = 0.0;
            for (int j = 0; j < p; ++j)
                denom += std::exp(static_cast<double>(out.logits.data[static_cast<std::size_t>(i) * p + j]) - mx);
            for (int j = 0; j < p; ++j)
                out.scores.data[static_cast<std::size_t>(i) * p + j] = static_cast<float>(
                    std::exp(static_cast<double>(out.logits.data[static_cast<std::size_t>(i) * p + j]) - mx) / denom);
        } else {
            out.scores.data[i] = 1.0f / (1.0f + std::exp(-out.logits.data[i]));
        }
    }
    return out;
}

std::size_t ParamAccount::path_total() const {
    std::size_t total = 0;
    for (const auto& p : paths) total += p.total();
    return total;
}

ParamAccount::PathCount path_accounting(const CriticalPath& path) {
    ParamAccount::PathCount out;
    out.class_label = path.class_label;
    for (std::size_t i = 0; i + 1 < path.params.size(); ++i)
        out.conv_params += path.params[i].param_count();
    if (!path.params.empty()) out.head_params = path.params.back().param_count();
    return out;
}

namespace {

ParamAccount account_impl(const std::vector<LayerParams>& shared,
                          const std::vector<CriticalPath>& paths) {
    ParamAccount acc;
    for (const auto& p : shared) acc.shared_params += p.param_count();
    for (const auto& path : paths) acc.paths.push_back(path_accounting(path));
    return acc;
}

} // namespace

ParamAccount param_accounting(const GlobalModel& model) {
    return account_impl(model.shared, model.paths);
}

ParamAccount param_accounting(const SpecializedModel& model) {
    return account_impl(model.shared, model.paths);
}

std::vector<ParamBlock*> path_blocks(CriticalPath& path) {
    return all_blocks(std::span(path.params));
}

std::uint64_t shared_checksum(const std::vector<LayerParams>& shared) {
    std::uint64_t h = 1469598103934665603ull;
    for (const auto& p : shared) {
        if (p.weight.param_count() > 0) h ^= mix64(bytes_checksum(p.weight.value));
        if (p.bias.param_count() > 0) h ^= mix64(bytes_checksum(p.bias.value) + 0x9e3779b97f4a7c15ull);
    }
    return h;
}

} // namespace team
