#include "team/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>

#include "team/errors.hpp"
#include "team/rng.hpp"

namespace team {

Tensor4 Dataset::sample(int i) const {
    Tensor4 out(1, images.c(), images.h(), images.w());
    const std::size_t plane = out.size();
    std::copy_n(images.data.begin() + static_cast<std::size_t>(i) * plane, plane, out.data.begin());
    return out;
}

int label_span(const Dataset& ds) {
    int mx = -1;
    for (int l : ds.labels) mx = std::max(mx, l);
    return mx + 1;
}

namespace {

constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;

std::uint32_t read_be32(std::ifstream& f, const std::filesystem::path& path, std::size_t& offset) {
    unsigned char b[4];
    f.read(reinterpret_cast<char*>(b), 4);
    if (!f)
        throw format_error(path.filename().string() + ": truncated at byte " + std::to_string(offset));
    offset += 4;
    return (static_cast<std::uint32_t>(b[0]) << 24) | (static_cast<std::uint32_t>(b[1]) << 16) |
           (static_cast<std::uint32_t>(b[2]) << 8) | static_cast<std::uint32_t>(b[3]);
}

void write_be32(std::ofstream& f, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
    f.write(reinterpret_cast<const char*>(b), 4);
}

} // namespace

Dataset load_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path) {
    std::ifstream imgs(images_path, std::ios::binary);
    if (!imgs) throw io_error("cannot open " + images_path.string());
    std::ifstream lbls(labels_path, std::ios::binary);
    if (!lbls) throw io_error("cannot open " + labels_path.string());

    std::size_t off = 0;
    const std::uint32_t img_magic = read_be32(imgs, images_path, off);
    if (img_magic != kImagesMagic)
        throw format_error(images_path.filename().string() + ": bad magic 0x" +
                           [&] { char buf[16]; std::snprintf(buf, sizeof buf, "%08x", img_magic); return std::string(buf); }() +
                           " at byte 0 (want 0x00000803)");
    const std::uint32_t n = read_be32(imgs, images_path, off);
    const std::uint32_t h = read_be32(imgs, images_path, off);
    const std::uint32_t w = read_be32(imgs, images_path, off);
    if (n == 0 || h == 0 || w == 0)
        throw format_error(images_path.filename().string() + ": zero extent in header");

    std::size_t loff = 0;
    const std::uint32_t lbl_magic = read_be32(lbls, labels_path, loff);
    if (lbl_magic != kLabelsMagic)
        throw format_error(labels_path.filename().string() + ": bad magic at byte 0 (want 0x00000801)");
    const std::uint32_t ln = read_be32(lbls, labels_path, loff);
    if (ln != n)
        throw format_error("IDX count mismatch: " + std::to_string(n) + " images vs " +
                           std::to_string(ln) + " labels");

    Dataset ds;
    ds.images = Tensor4(static_cast<int>(n), 1, static_cast<int>(h), static_cast<int>(w));
    std::vector<unsigned char> raw(static_cast<std::size_t>(n) * h * w);
    imgs.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!imgs)
        throw format_error(images_path.filename().string() + ": truncated pixel data at byte " +
                           std::to_string(off + imgs.gcount()));
    for (std::size_t i = 0; i < raw.size(); ++i)
        ds.images.data[i] = static_cast<float>(raw[i]) / 255.0f;

    std::vector<unsigned char> lraw(n);
    lbls.read(reinterpret_cast<char*>(lraw.data()), static_cast<std::streamsize>(lraw.size()));
    if (!lbls)
        throw format_error(labels_path.filename().string() + ": truncated label data at byte " +
                           std::to_string(loff + lbls.gcount()));
    ds.labels.assign(lraw.begin(), lraw.end());
    return ds;
}

void write_idx(const Dataset& ds, const std::filesystem::path& images_path,
               const std::filesystem::path& labels_path) {
    if (ds.images.c() != 1)
        throw input_error("write_idx: IDX image container is single-channel");
    std::ofstream imgs(images_path, std::ios::binary);
    if (!imgs) throw io_error("cannot write " + images_path.string());
    write_be32(imgs, kImagesMagic);
    write_be32(imgs, static_cast<std::uint32_t>(ds.size()));
    write_be32(imgs, static_cast<std::uint32_t>(ds.images.h()));
    write_be32(imgs, static_cast<std::uint32_t>(ds.images.w()));
    std::vector<unsigned char> raw(ds.images.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        const float v = std::clamp(ds.images.data[i], 0.0f, 1.0f);
        raw[i] = static_cast<unsigned char>(std::lround(v * 255.0f));
    }
    imgs.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!imgs) throw io_error("short write to " + images_path.string());

    std::ofstream lbls(labels_path, std::ios::binary);
    if (!lbls) throw io_error("cannot write " + labels_path.string());
    write_be32(lbls, kLabelsMagic);
    write_be32(lbls, static_cast<std::uint32_t>(ds.labels.size()));
    for (int l : ds.labels) {
        const unsigned char b = static_cast<unsigned char>(l);
        lbls.write(reinterpret_cast<const char*>(&b), 1);
    }
    if (!lbls) throw io_error("short write to " + labels_path.string());
}

Dataset generate_synthetic(const SynthSpec& spec, std::uint64_t seed) {
    if (spec.classes < 2) throw input_error("generate_synthetic: classes must be >= 2");
    if (spec.samples_per_class < 1 || spec.image_size < 4)
        throw input_error("generate_synthetic: bad sample count or image size");

    const int sz = spec.image_size;
    const int grid = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(spec.classes))));
    const int cell = sz / grid;
    if (cell < 2) throw input_error("generate_synthetic: too many classes for image size");

    Dataset ds;
    const int n = spec.classes * spec.samples_per_class;
    ds.images = Tensor4(n, 1, sz, sz);
    ds.labels.resize(n);
    auto rng = make_rng(seed);
    std::normal_distribution<float> noise(0.0f, spec.noise_sigma);

    int i = 0;
    for (int c = 0; c < spec.classes; ++c) {
        const int gy = (c / grid) * cell;
        const int gx = (c % grid) * cell;
        for (int s = 0; s < spec.samples_per_class; ++s, ++i) {
            ds.labels[i] = c;
            for (int y = 0; y < sz; ++y)
                for (int x = 0; x < sz; ++x) {
                    const bool inside = y >= gy && y < gy + cell && x >= gx && x < gx + cell;
                    float v = inside ? 0.9f : 0.1f;
                    if (spec.noise_sigma > 0.0f) v += noise(rng);
                    ds.images.at(i, 0, y, x) = std::clamp(v, 0.0f, 1.0f);
                }
        }
    }
    return ds;
}

PartitionPlan make_imbalanced_plan(const std::vector<int>& classes,
                                   const std::vector<int>& device_ids,
                                   double factor, std::uint64_t seed) {
    if (factor < 1.0) throw input_error("make_imbalanced_plan: factor must be >= 1");
    if (classes.empty() || device_ids.empty())
        throw input_error("make_imbalanced_plan: classes and devices must be non-empty");
    PartitionPlan plan;
    plan.imbalance_factor = factor;
    plan.seed = seed;
    const int dcount = static_cast<int>(device_ids.size());
    const int ccount = static_cast<int>(classes.size());
    // Rotated geometric weights: every class sees the same weight multiset
    // across devices, so per-class normalisation keeps the in-device ratio
    // exactly `factor`.
    std::vector<double> weights(ccount);
    for (int j = 0; j < ccount; ++j)
        weights[j] = ccount == 1 ? 1.0
                                 : std::pow(factor, 1.0 - static_cast<double>(j) / (ccount - 1));
    for (int ci = 0; ci < ccount; ++ci) {
        double wsum = 0.0;
        for (int d = 0; d < dcount; ++d) wsum += weights[(ci - d % ccount + ccount) % ccount];
        for (int d = 0; d < dcount; ++d) {
            const double w = weights[(ci - d % ccount + ccount) % ccount];
            plan.fractions[device_ids[d]][classes[ci]] = w / wsum;
        }
    }
    return plan;
}

std::map<int, Dataset> partition(const Dataset& ds, const PartitionPlan& plan,
                                 const std::vector<int>& device_ids) {
    // class -> sample indices
    std::map<int, std::vector<int>> by_class;
    for (int i = 0; i < ds.size(); ++i) by_class[ds.labels[i]].push_back(i);

    for (const auto& [cls, idxs] : by_class) {
        double total = 0.0;
        for (int dev : device_ids) {
            auto dit = plan.fractions.find(dev);
            if (dit == plan.fractions.end()) continue;
            auto cit = dit->second.find(cls);
            if (cit != dit->second.end()) {
                if (cit->second < 0.0)
                    throw input_error("partition: negative fraction for class " + std::to_string(cls));
                total += cit->second;
            }
        }
        if (total > 1.0 + 1e-9)
            throw input_error("partition: class " + std::to_string(cls) +
                              " oversubscribed, fractions sum to " + std::to_string(total));
    }

    std::map<int, std::vector<int>> device_indices;
    for (int dev : device_ids) device_indices[dev] = {};

    std::vector<int> sorted_devices = device_ids;
    std::sort(sorted_devices.begin(), sorted_devices.end());

    for (auto& [cls, idxs] : by_class) {
        auto rng = make_rng(derive_seed(plan.seed, "partition.class", static_cast<std::uint64_t>(cls)));
        std::vector<int> pool = idxs;
        std::shuffle(pool.begin(), pool.end(), rng);

        double requested = 0.0;
        std::vector<std::pair<int, int>> counts; // (device, count) ascending by device
        for (int dev : sorted_devices) {
            double frac = 0.0;
            auto dit = plan.fractions.find(dev);
            if (dit != plan.fractions.end()) {
                auto cit = dit->second.find(cls);
                if (cit != dit->second.end()) frac = cit->second;
            }
            requested += frac * static_cast<double>(pool.size());
            counts.emplace_back(dev, static_cast<int>(std::floor(frac * pool.size() + 1e-9)));
        }
        int assigned = 0;
        for (auto& [dev, cnt] : counts) assigned += cnt;
        int leftover = static_cast<int>(std::floor(requested + 1e-9)) - assigned;
        if (leftover > 0 && !counts.empty()) counts.front().second += leftover;

        std::size_t cursor = 0;
        for (auto& [dev, cnt] : counts) {
            for (int k = 0; k < cnt && cursor < pool.size(); ++k, ++cursor)
                device_indices[dev].push_back(pool[cursor]);
        }
    }

    std::map<int, Dataset> out;
    for (int dev : device_ids) {
        auto& idxs = device_indices[dev];
        std::sort(idxs.begin(), idxs.end()); // stable sample order per device
        Dataset part;
        part.images = Tensor4(static_cast<int>(idxs.size()), ds.images.c(), ds.images.h(), ds.images.w());
        part.labels.resize(idxs.size());
        const std::size_t plane = static_cast<std::size_t>(ds.images.c()) * ds.images.h() * ds.images.w();
        for (std::size_t k = 0; k < idxs.size(); ++k) {
            std::copy_n(ds.images.data.begin() + idxs[k] * plane, plane,
                        part.images.data.begin() + k * plane);
            part.labels[k] = ds.labels[idxs[k]];
        }
        out[dev] = std::move(part);
    }
    return out;
}

namespace {

Dataset select_indices(const Dataset& ds, const std::vector<int>& idxs) {
    Dataset out;
    out.images = Tensor4(static_cast<int>(idxs.size()), ds.images.c(), ds.images.h(), ds.images.w());
    out.labels.resize(idxs.size());
    out.label_names = ds.label_names;
    const std::size_t plane = static_cast<std::size_t>(ds.images.c()) * ds.images.h() * ds.images.w();
    for (std::size_t k = 0; k < idxs.size(); ++k) {
        std::copy_n(ds.images.data.begin() + idxs[k] * plane, plane,
                    out.images.data.begin() + k * plane);
        out.labels[k] = ds.labels[idxs[k]];
    }
    return out;
}

} // namespace

Dataset filter_by_labels(const Dataset& ds, const std::set<int>& keep) {
    std::vector<int> idxs;
    for (int i = 0; i < ds.size(); ++i)
        if (keep.count(ds.labels[i])) idxs.push_back(i);
    return select_indices(ds, idxs);
}

Dataset binary_relabel(const Dataset& ds, int positive_label) {
    Dataset out = ds;
    for (auto& l : out.labels) l = (l == positive_label) ? 1 : 0;
    return out;
}

Dataset take_per_class(const Dataset& ds, int per_class) {
    std::map<int, int> taken;
    std::vector<int> idxs;
    for (int i = 0; i < ds.size(); ++i)
        if (taken[ds.labels[i]]++ < per_class) idxs.push_back(i);
    return select_indices(ds, idxs);
}

} // namespace team
