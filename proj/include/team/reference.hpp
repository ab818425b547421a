#pragma once

// Serial reference kernels. Plain loop nests with no tiling, no threading and
// scalar-type accumulation. The OpenMP kernels in kernels.cpp are checked
// against these in the test suite, and the double instantiation is what the
// finite-difference oracle evaluates.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

namespace team::ref {

template <class T>
void conv2d_forward(const T* in, int n, int c, int h, int w,
                    const T* wt, int f, int cpg, int kh, int kw,
                    const T* bias, int stride, int pad, int groups,
                    T* out, int oh, int ow) {
    const int fpg = f / groups;
    for (int i = 0; i < n; ++i)
        for (int fo = 0; fo < f; ++fo) {
            const int g = fo / fpg;
            for (int y = 0; y < oh; ++y)
                for (int x = 0; x < ow; ++x) {
                    T acc = bias ? bias[fo] : T(0);
                    for (int cc = 0; cc < cpg; ++cc) {
                        const int ci = g * cpg + cc;
                        for (int ky = 0; ky < kh; ++ky) {
                            const int yy = y * stride - pad + ky;
                            if (yy < 0 || yy >= h) continue;
                            for (int kx = 0; kx < kw; ++kx) {
                                const int xx = x * stride - pad + kx;
                                if (xx < 0 || xx >= w) continue;
                                acc += in[((static_cast<std::size_t>(i) * c + ci) * h + yy) * w + xx] *
                                       wt[((static_cast<std::size_t>(fo) * cpg + cc) * kh + ky) * kw + kx];
                            }
                        }
                    }
                    out[((static_cast<std::size_t>(i) * f + fo) * oh + y) * ow + x] = acc;
                }
        }
}

template <class T>
void relu(const T* in, T* out, std::size_t count) {
    for (std::size_t i = 0; i < count; ++i) out[i] = in[i] > T(0) ? in[i] : T(0);
}

// Window scan in row-major order; first occurrence wins on ties.
template <class T>
void maxpool_forward(const T* in, int n, int c, int h, int w,
                     int kernel, int stride,
                     T* out, int oh, int ow, std::int64_t* argmax) {
    for (int i = 0; i < n; ++i)
        for (int ci = 0; ci < c; ++ci)
            for (int y = 0; y < oh; ++y)
                for (int x = 0; x < ow; ++x) {
                    T best{};
                    std::int64_t best_idx = -1;
                    for (int ky = 0; ky < kernel; ++ky)
                        for (int kx = 0; kx < kernel; ++kx) {
                            const int yy = y * stride + ky;
                            const int xx = x * stride + kx;
                            if (yy >= h || xx >= w) continue;
                            const std::int64_t idx =
                                ((static_cast<std::int64_t>(i) * c + ci) * h + yy) * w + xx;
                            if (best_idx < 0 || in[idx] > best) {
                                best = in[idx];
                                best_idx = idx;
                            }
                        }
                    const std::size_t o = ((static_cast<std::size_t>(i) * c + ci) * oh + y) * ow + x;
                    out[o] = best;
                    if (argmax) argmax[o] = best_idx;
                }
}

template <class T>
void affine_forward(const T* in, int n, int d, const T* wt, int m, const T* bias, T* out) {
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) {
            T acc = bias ? bias[j] : T(0);
            for (int k = 0; k < d; ++k)
                acc += in[static_cast<std::size_t>(i) * d + k] * wt[static_cast<std::size_t>(k) * m + j];
            out[static_cast<std::size_t>(i) * m + j] = acc;
        }
}

template <class T>
T softmax_cross_entropy(const T* logits, int k, int label, T* d_logits) {
    T mx = logits[0];
    for (int i = 1; i < k; ++i) mx = std::max(mx, logits[i]);
    T denom = T(0);
    for (int i = 0; i < k; ++i) denom += std::exp(logits[i] - mx);
    const T loss = -(logits[label] - mx - std::log(denom));
    if (d_logits)
        for (int i = 0; i < k; ++i)
            d_logits[i] = std::exp(logits[i] - mx) / denom - (i == label ? T(1) : T(0));
    return loss;
}

template <class T>
T sigmoid_bce(T z, int y, T* d_z) {
    // max(z,0) - z*y + log(1 + exp(-|z|)) is the overflow-safe form.
    const T loss = std::max(z, T(0)) - z * T(y) + std::log1p(std::exp(-std::abs(z)));
    if (d_z) {
        const T s = z >= T(0) ? T(1) / (T(1) + std::exp(-z))
                              : std::exp(z) / (T(1) + std::exp(z));
        *d_z = s - T(y);
    }
    return loss;
}

} // namespace team::ref
