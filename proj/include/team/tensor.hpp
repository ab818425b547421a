#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace team {

/// Dense row-major [n, c, h, w] float32 array; the carrier for every
/// activation and parameter in the engine.
struct Tensor4 {
    std::array<int, 4> shape{0, 0, 0, 0};
    std::vector<float> data;

    Tensor4() = default;
    Tensor4(int n, int c, int h, int w)
        : shape{n, c, h, w},
          data(static_cast<std::size_t>(n) * c * h * w, 0.0f) {}

    static Tensor4 zeros_like(const Tensor4& other) {
        return Tensor4(other.shape[0], other.shape[1], other.shape[2], other.shape[3]);
    }

    int n() const { return shape[0]; }
    int c() const { return shape[1]; }
    int h() const { return shape[2]; }
    int w() const { return shape[3]; }

    std::size_t size() const { return data.size(); }

    std::size_t index(int i, int ci, int y, int x) const {
        return ((static_cast<std::size_t>(i) * shape[1] + ci) * shape[2] + y) * shape[3] + x;
    }
    float& at(int i, int ci, int y, int x) { return data[index(i, ci, y, x)]; }
    float at(int i, int ci, int y, int x) const { return data[index(i, ci, y, x)]; }

    void fill(float v) { std::fill(data.begin(), data.end(), v); }

    bool same_shape(const Tensor4& other) const { return shape == other.shape; }
    bool operator==(const Tensor4& other) const = default;
};

bool all_finite(const Tensor4& t);

/// FNV-1a over the raw little-endian float bytes; used for freeze-invariant
/// checks (bit-identical before/after means equal checksums and vice versa
/// for our purposes).
std::uint64_t bytes_checksum(std::span<const float> values);
std::uint64_t bytes_checksum(const Tensor4& t);

} // namespace team
