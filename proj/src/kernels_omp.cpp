#include "team/kernels.hpp"

#include <cmath>
#include <cstddef>
#include <cstring>
#include <string>

#include "team/errors.hpp"

namespace team {

bool all_finite(const Tensor4& t) {
    for (float v : t.data)
        if (!std::isfinite(v)) return false;
    return true;
}

std::uint64_t bytes_checksum(std::span<const float> values) {
    std::uint64_t h = 1469598103934665603ull;
    for (float v : values) {
        std::uint32_t bits;
        static_assert(sizeof(bits) == sizeof(v));
        std::memcpy(&bits, &v, sizeof(bits));
        for (int shift = 0; shift < 32; shift += 8) {
            h ^= (bits >> shift) & 0xffu;
            h *= 1099511628211ull;
        }
    }
    return h;
}

std::uint64_t bytes_checksum(const Tensor4& t) {
    return bytes_checksum(std::span<const float>(t.data));
}

} // namespace team

namespace team::kernels {

ConvDims conv_dims(const Tensor4& input, const Tensor4& weight,
                   int stride, int pad, int groups) {
    ConvDims d{};
    d.n = input.n(); d.c = input.c(); d.h = input.h(); d.w = input.w();
    d.f = weight.n(); d.cpg = weight.c(); d.kh = weight.h(); d.kw = weight.w();
    d.stride = stride; d.pad = pad; d.groups = groups;

    if (groups < 1)
        throw config_error("conv: groups must be >= 1, got " + std::to_string(groups));
    if (stride < 1)
        throw config_error("conv: stride must be >= 1, got " + std::to_string(stride));
    if (pad < 0)
        throw config_error("conv: pad must be >= 0, got " + std::to_string(pad));
    if (d.f % groups != 0)
        throw config_error("conv: out_filters " + std::to_string(d.f) +
                           " not divisible by groups " + std::to_string(groups));
    if (d.c != groups * d.cpg)
        throw config_error("conv: input channels " + std::to_string(d.c) +
                           " != groups " + std::to_string(groups) +
                           " * weight in-channels-per-group " + std::to_string(d.cpg));
    d.oh = (d.h + 2 * pad - d.kh) / stride + 1;
    d.ow = (d.w + 2 * pad - d.kw) / stride + 1;
    if (d.kh > d.h + 2 * pad || d.kw > d.w + 2 * pad || d.oh <= 0 || d.ow <= 0)
        throw config_error("conv: kernel " + std::to_string(d.kh) + "x" + std::to_string(d.kw) +
                           " does not fit padded input " + std::to_string(d.h + 2 * pad) + "x" +
                           std::to_string(d.w + 2 * pad));
    return d;
}

Tensor4 conv2d_forward(const Tensor4& input, const Tensor4& weight,
                       const Tensor4& bias, int stride, int pad, int groups) {
    const ConvDims d = conv_dims(input, weight, stride, pad, groups);
    if (static_cast<int>(bias.size()) != d.f)
        throw config_error("conv: bias length " + std::to_string(bias.size()) +
                           " != out_filters " + std::to_string(d.f));
    Tensor4 out(d.n, d.f, d.oh, d.ow);
    const float* in = input.data.data();
    const float* wt = weight.data.data();
    const float* bs = bias.data.data();
    float* op = out.data.data();
    const int fpg = d.f / d.groups;

#pragma omp parallel for collapse(2) schedule(static)
    for (int i = 0; i < d.n; ++i)
        for (int fo = 0; fo < d.f; ++fo) {
            const int g = fo / fpg;
            const std::size_t w_base = static_cast<std::size_t>(fo) * d.cpg * d.kh * d.kw;
            for (int y = 0; y < d.oh; ++y)
                for (int x = 0; x < d.ow; ++x) {
                    double acc = bs[fo];
                    for (int cc = 0; cc < d.cpg; ++cc) {
                        const int ci = g * d.cpg + cc;
                        const std::size_t in_base = (static_cast<std::size_t>(i) * d.c + ci) * d.h;
                        for (int ky = 0; ky < d.kh; ++ky) {
                            const int yy = y * d.stride - d.pad + ky;
                            if (yy < 0 || yy >= d.h) continue;
                            const float* in_row = in + (in_base + yy) * d.w;
                            const float* w_row = wt + w_base + (static_cast<std::size_t>(cc) * d.kh + ky) * d.kw;
                            for (int kx = 0; kx < d.kw; ++kx) {
                                const int xx = x * d.stride - d.pad + kx;
                                if (xx < 0 || xx >= d.w) continue;
                                acc += static_cast<double>(in_row[xx]) * w_row[kx];
                            }
                        }
                    }
                    op[((static_cast<std::size_t>(i) * d.f + fo) * d.oh + y) * d.ow + x] =
                        static_cast<float>(acc);
                }
        }
    return out;
}

void conv2d_backward(const Tensor4& input, const Tensor4& weight,
                     const Tensor4& upstream, int stride, int pad, int groups,
                     Tensor4* d_input, Tensor4& d_weight, Tensor4& d_bias) {
    const ConvDims d = conv_dims(input, weight, stride, pad, groups);
    if (upstream.n() != d.n || upstream.c() != d.f || upstream.h() != d.oh || upstream.w() != d.ow)
        throw config_error("conv backward: upstream shape [" + std::to_string(upstream.n()) + "," +
                           std::to_string(upstream.c()) + "," + std::to_string(upstream.h()) + "," +
                           std::to_string(upstream.w()) + "] does not match forward output [" +
                           std::to_string(d.n) + "," + std::to_string(d.f) + "," +
                           std::to_string(d.oh) + "," + std::to_string(d.ow) + "]");
    if (!d_weight.same_shape(weight))
        throw config_error("conv backward: d_weight shape mismatch");
    if (static_cast<int>(d_bias.size()) != d.f)
        throw config_error("conv backward: d_bias length mismatch");

    const float* in = input.data.data();
    const float* wt = weight.data.data();
    const float* up = upstream.data.data();
    const int fpg = d.f / d.groups;

    // Each filter's weight and bias gradients are owned by a single thread.
#pragma omp parallel for schedule(static)
    for (int fo = 0; fo < d.f; ++fo) {
        const int g = fo / fpg;
        double b_acc = 0.0;
        for (int cc = 0; cc < d.cpg; ++cc) {
            const int ci = g * d.cpg + cc;
            for (int ky = 0; ky < d.kh; ++ky)
                for (int kx = 0; kx < d.kw; ++kx) {
                    double acc = 0.0;
                    for (int i = 0; i < d.n; ++i) {
                        const std::size_t up_base = (static_cast<std::size_t>(i) * d.f + fo) * d.oh;
                        const std::size_t in_base = (static_cast<std::size_t>(i) * d.c + ci) * d.h;
                        for (int y = 0; y < d.oh; ++y) {
                            const int yy = y * d.stride - d.pad + ky;
                            if (yy < 0 || yy >= d.h) continue;
                            for (int x = 0; x < d.ow; ++x) {
                                const int xx = x * d.stride - d.pad + kx;
                                if (xx < 0 || xx >= d.w) continue;
                                acc += static_cast<double>(up[(up_base + y) * d.ow + x]) *
                                       in[(in_base + yy) * d.w + xx];
                            }
                        }
                    }
                    d_weight.data[((static_cast<std::size_t>(fo) * d.cpg + cc) * d.kh + ky) * d.kw + kx] +=
                        static_cast<float>(acc);
                }
        }
        for (int i = 0; i < d.n; ++i) {
            const std::size_t up_base = (static_cast<std::size_t>(i) * d.f + fo) * d.oh;
            for (int y = 0; y < d.oh; ++y)
                for (int x = 0; x < d.ow; ++x)
                    b_acc += up[(up_base + y) * d.ow + x];
        }
        d_bias.data[fo] += static_cast<float>(b_acc);
    }

    if (!d_input) return;
    *d_input = Tensor4(d.n, d.c, d.h, d.w);
    float* dip = d_input->data.data();

    // Gather formulation: every input cell is written by exactly one thread.
#pragma omp parallel for collapse(2) schedule(static)
    for (int i = 0; i < d.n; ++i)
        for (int ci = 0; ci < d.c; ++ci) {
            const int g = ci / d.cpg;
            const int cc = ci % d.cpg;
            for (int yy = 0; yy < d.h; ++yy)
                for (int xx = 0; xx < d.w; ++xx) {
                    double acc = 0.0;
                    for (int fo = g * fpg; fo < (g + 1) * fpg; ++fo) {
                        const std::size_t up_base = (static_cast<std::size_t>(i) * d.f + fo) * d.oh;
                        const std::size_t w_base =
                            (static_cast<std::size_t>(fo) * d.cpg + cc) * d.kh;
                        for (int ky = 0; ky < d.kh; ++ky) {
                            const int ynum = yy + d.pad - ky;
                            if (ynum < 0 || ynum % d.stride != 0) continue;
                            const int y = ynum / d.stride;
                            if (y >= d.oh) continue;
                            for (int kx = 0; kx < d.kw; ++kx) {
                                const int xnum = xx + d.pad - kx;
                                if (xnum < 0 || xnum % d.stride != 0) continue;
                                const int x = xnum / d.stride;
                                if (x >= d.ow) continue;
                                acc += static_cast<double>(up[(up_base + y) * d.ow + x]) *
                                       wt[(w_base + ky) * d.kw + kx];
                            }
                        }
                    }
                    dip[((static_cast<std::size_t>(i) * d.c + ci) * d.h + yy) * d.w + xx] =
                        static_cast<float>(acc);
                }
        }
}

PoolResult maxpool2d_forward(const Tensor4& input, int kernel, int stride) {
    if (kernel < 1 || stride < 1)
        throw config_error("maxpool: kernel and stride must be >= 1");
    if (kernel > input.h() || kernel > input.w())
        throw config_error("maxpool: kernel " + std::to_string(kernel) +
                           " larger than input " + std::to_string(input.h()) + "x" +
                           std::to_string(input.w()));
    const int n = input.n(), c = input.c(), h = input.h(), w = input.w();
    const int oh = (h - kernel) / stride + 1;
    const int ow = (w - kernel) / stride + 1;
    PoolResult res{Tensor4(n, c, oh, ow), std::vector<std::int64_t>(static_cast<std::size_t>(n) * c * oh * ow)};
    const float* in = input.data.data();
    float* out = res.output.data.data();
    std::int64_t* am = res.argmax.data();

#pragma omp parallel for collapse(2) schedule(static)
    for (int i = 0; i < n; ++i)
        for (int ci = 0; ci < c; ++ci)
            for (int y = 0; y < oh; ++y)
                for (int x = 0; x < ow; ++x) {
                    float best = 0.0f;
                    std::int64_t best_idx = -1;
                    for (int ky = 0; ky < kernel; ++ky) {
                        const int yy = y * stride + ky;
                        for (int kx = 0; kx < kernel; ++kx) {
                            const int xx = x * stride + kx;
                            const std::int64_t idx =
                                ((static_cast<std::int64_t>(i) * c + ci) * h + yy) * w + xx;
                            // strict > keeps the row-major earliest cell on ties
                            if (best_idx < 0 || in[idx] > best) {
                                best = in[idx];
                                best_idx = idx;
                            }
                        }
                    }
                    const std::size_t o = ((static_cast<std::size_t>(i) * c + ci) * oh + y) * ow + x;
                    out[o] = best;
                    am[o] = best_idx;
                }
    return res;
}

Tensor4 maxpool2d_backward(const std::array<int, 4>& input_shape,
                           const std::vector<std::int64_t>& argmax,
                           const Tensor4& upstream) {
    if (argmax.size() != upstream.size())
        throw config_error("maxpool backward: argmax record does not match upstream size");
    Tensor4 d_input(input_shape[0], input_shape[1], input_shape[2], input_shape[3]);
    const std::size_t plane = static_cast<std::size_t>(upstream.h()) * upstream.w();
    const std::size_t planes = upstream.size() / std::max<std::size_t>(plane, 1);

    // Overlapping windows may route two outputs to the same input cell, but
    // only within one (n, c) plane, so planes are the parallel unit.
#pragma omp parallel for schedule(static)
    for (std::size_t p = 0; p < planes; ++p)
        for (std::size_t j = p * plane; j < (p + 1) * plane; ++j)
            d_input.data[argmax[j]] += upstream.data[j];
    return d_input;
}

Tensor4 relu_forward(const Tensor4& input) {
    Tensor4 out = Tensor4::zeros_like(input);
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < input.size(); ++i)
        out.data[i] = input.data[i] > 0.0f ? input.data[i] : 0.0f;
    return out;
}

Tensor4 relu_backward(const Tensor4& input, const Tensor4& upstream) {
    if (!input.same_shape(upstream))
        throw config_error("relu backward: upstream shape mismatch");
    Tensor4 d_input = Tensor4::zeros_like(input);
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < input.size(); ++i)
        d_input.data[i] = input.data[i] > 0.0f ? upstream.data[i] : 0.0f;
    return d_input;
}

Tensor4 affine_forward(const Tensor4& input, const Tensor4& weight, const Tensor4& bias) {
    const int n = input.n();
    const int dim = input.c() * input.h() * input.w();
    const int d_in = weight.h(), m = weight.w();
    if (dim != d_in)
        throw config_error("affine: input dim " + std::to_string(dim) +
                           " != weight in-dim " + std::to_string(d_in));
    if (static_cast<int>(bias.size()) != m)
        throw config_error("affine: bias length " + std::to_string(bias.size()) +
                           " != out-dim " + std::to_string(m));
    Tensor4 out(n, m, 1, 1);
    const float* in = input.data.data();
    const float* wt = weight.data.data();
    const float* bs = bias.data.data();

#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) {
            double acc = bs[j];
            for (int k = 0; k < d_in; ++k)
                acc += static_cast<double>(in[static_cast<std::size_t>(i) * d_in + k]) *
                       wt[static_cast<std::size_t>(k) * m + j];
            out.data[static_cast<std::size_t>(i) * m + j] = static_cast<float>(acc);
        }
    return out;
}

void affine_backward(const Tensor4& input, const Tensor4& weight,
                     const Tensor4& upstream,
                     Tensor4* d_input, Tensor4& d_weight, Tensor4& d_bias) {
    const int n = input.n();
    const int d_in = weight.h(), m = weight.w();
    if (input.c() * input.h() * input.w() != d_in)
        throw config_error("affine backward: input dim mismatch");
    if (upstream.n() != n || upstream.c() * upstream.h() * upstream.w() != m)
        throw config_error("affine backward: upstream shape mismatch");
    const float* in = input.data.data();
    const float* wt = weight.data.data();
    const float* up = upstream.data.data();

#pragma omp parallel for schedule(static)
    for (int k = 0; k < d_in; ++k)
        for (int j = 0; j < m; ++j) {
            double acc = 0.0;
            for (int i = 0; i < n; ++i)
                acc += static_cast<double>(in[static_cast<std::size_t>(i) * d_in + k]) *
                       up[static_cast<std::size_t>(i) * m + j];
            d_weight.data[static_cast<std::size_t>(k) * m + j] += static_cast<float>(acc);
        }
    for (int j = 0; j < m; ++j) {
        double acc = 0.0;
        for (int i = 0; i < n; ++i)
            acc += up[static_cast<std::size_t>(i) * m + j];
        d_bias.data[j] += static_cast<float>(acc);
    }
    if (!d_input) return;
    *d_input = Tensor4(input.n(), input.c(), input.h(), input.w());
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < d_in; ++k) {
            double acc = 0.0;
            for (int j = 0; j < m; ++j)
                acc += static_cast<double>(up[static_cast<std::size_t>(i) * m + j]) *
                       wt[static_cast<std::size_t>(k) * m + j];
            d_input->data[static_cast<std::size_t>(i) * d_in + k] = static_cast<float>(acc);
        }
}

Tensor4 flatten_forward(const Tensor4& input) {
    Tensor4 out(input.n(), input.c() * input.h() * input.w(), 1, 1);
    out.data = input.data;
    return out;
}

Tensor4 flatten_backward(const Tensor4& upstream, const std::array<int, 4>& input_shape) {
    Tensor4 d_input(input_shape[0], input_shape[1], input_shape[2], input_shape[3]);
    if (d_input.size() != upstream.size())
        throw config_error("flatten backward: size mismatch");
    d_input.data = upstream.data;
    return d_input;
}

} // namespace team::kernels
