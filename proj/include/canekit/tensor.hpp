#pragma once

// Dense NCHW float tensors and the inference kernels the classifier needs.
// Every op is a pure function: inputs are never modified and results are
// freshly allocated tensors.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "canekit/errors.hpp"

namespace canekit {

struct Shape {
    std::size_t n = 0;
    std::size_t c = 0;
    std::size_t h = 0;
    std::size_t w = 0;

    constexpr std::size_t numel() const noexcept { return n * c * h * w; }
    constexpr std::size_t plane() const noexcept { return h * w; }
    friend constexpr bool operator==(const Shape&, const Shape&) = default;

    std::string str() const {
        return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," +
               std::to_string(w) + ")";
    }
};

class Tensor {
public:
    Tensor() = default;

    explicit Tensor(Shape shape, float fill = 0.0f) : shape_(shape), data_(shape.numel(), fill) {}

    Tensor(Shape shape, std::vector<float> data) : shape_(shape), data_(std::move(data)) {
        if (data_.size() != shape_.numel()) {
            throw DimensionError("data", "tensor data length " + std::to_string(data_.size()) +
                                             " does not match shape " + shape_.str());
        }
    }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t numel() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    std::span<float> data() noexcept { return data_; }
    std::span<const float> data() const noexcept { return data_; }
    const std::vector<float>& values() const noexcept { return data_; }

    std::size_t offset(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const noexcept {
        return ((n * shape_.c + c) * shape_.h + h) * shape_.w + w;
    }
    float& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) noexcept {
        return data_[offset(n, c, h, w)];
    }
    float at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const noexcept {
        return data_[offset(n, c, h, w)];
    }

    /// Contiguous H*W slice for one (batch, channel) pair.
    std::span<float> plane(std::size_t n, std::size_t c) noexcept {
        return std::span<float>(data_).subspan(offset(n, c, 0, 0), shape_.plane());
    }
    std::span<const float> plane(std::size_t n, std::size_t c) const noexcept {
        return std::span<const float>(data_).subspan(offset(n, c, 0, 0), shape_.plane());
    }

    bool all_finite() const noexcept {
        return std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); });
    }

private:
    Shape shape_;
    std::vector<float> data_;
};

struct Extent2 {
    std::size_t h = 1;
    std::size_t w = 1;
    friend constexpr bool operator==(const Extent2&, const Extent2&) = default;
};

/// Convolution geometry. groups == in_channels == out_channels is depthwise;
/// a 1x1 kernel with groups > 1 is a pointwise group convolution.
struct ConvSpec {
    std::size_t in_channels = 1;
    std::size_t out_channels = 1;
    Extent2 kernel{1, 1};
    Extent2 stride{1, 1};
    Extent2 padding{0, 0};
    std::size_t groups = 1;

    void validate() const {
        if (in_channels == 0 || out_channels == 0) throw ConfigError("conv channel counts must be positive");
        if (groups == 0) throw ConfigError("conv groups must be positive");
        if (in_channels % groups != 0 || out_channels % groups != 0) {
            throw ConfigError("conv groups (" + std::to_string(groups) + ") must divide in_channels (" +
                              std::to_string(in_channels) + ") and out_channels (" +
                              std::to_string(out_channels) + ")");
        }
        if (kernel.h == 0 || kernel.w == 0) throw ConfigError("conv kernel extents must be >= 1");
        if (stride.h == 0 || stride.w == 0) throw ConfigError("conv stride extents must be >= 1");
    }

    Shape weight_shape() const { return {out_channels, in_channels / groups, kernel.h, kernel.w}; }

    std::size_t out_extent(std::size_t in, std::size_t k, std::size_t s, std::size_t p,
                           const char* axis) const {
        if (in + 2 * p < k) {
            throw DimensionError(axis, std::string("padded input ") + axis + " is smaller than the kernel");
        }
        return (in + 2 * p - k) / s + 1;
    }
    std::size_t out_height(std::size_t h) const { return out_extent(h, kernel.h, stride.h, padding.h, "height"); }
    std::size_t out_width(std::size_t w) const { return out_extent(w, kernel.w, stride.w, padding.w, "width"); }
};

namespace detail {

inline void require(bool ok, const char* axis, const std::string& what) {
    if (!ok) throw DimensionError(axis, what);
}

/// out[ox] += k * in[ox*stride + base] over the output columns whose input
/// column lands inside [0, in_w).
inline void accumulate_row(float* out, const float* in, std::size_t out_w, std::size_t in_w,
                           std::size_t stride, std::ptrdiff_t base, float k) {
    std::size_t lo = 0;
    if (base < 0) lo = (static_cast<std::size_t>(-base) + stride - 1) / stride;
    if (lo >= out_w) return;
    const std::ptrdiff_t last = static_cast<std::ptrdiff_t>(in_w) - 1 - base;
    if (last < 0) return;
    const std::size_t hi = std::min(out_w, static_cast<std::size_t>(last) / stride + 1);
    if (stride == 1) {
        const float* src = in + base;
        for (std::size_t ox = lo; ox < hi; ++ox) out[ox] += k * src[ox];
    } else {
        for (std::size_t ox = lo; ox < hi; ++ox) out[ox] += k * in[static_cast<std::ptrdiff_t>(ox * stride) + base];
    }
}

}  // namespace detail

/// Grouped 2-D cross-correlation without bias.
/// weights: (out_channels, in_channels / groups, kh, kw).
inline Tensor conv2d(const Tensor& input, const Tensor& weights, const ConvSpec& spec) {
    spec.validate();
    const Shape& in = input.shape();
    detail::require(in.c == spec.in_channels, "channels",
                    "conv2d input has " + std::to_string(in.c) + " channels, spec expects " +
                        std::to_string(spec.in_channels));
    const Shape expected = spec.weight_shape();
    const Shape& ws = weights.shape();
    detail::require(ws.n == expected.n, "weights.out_channels",
                    "conv2d weights " + ws.str() + " do not match " + expected.str());
    detail::require(ws.c == expected.c, "weights.in_channels_per_group",
                    "conv2d weights " + ws.str() + " do not match " + expected.str());
    detail::require(ws.h == expected.h, "weights.kernel_height",
                    "conv2d weights " + ws.str() + " do not match " + expected.str());
    detail::require(ws.w == expected.w, "weights.kernel_width",
                    "conv2d weights " + ws.str() + " do not match " + expected.str());

    const std::size_t out_h = spec.out_height(in.h);
    const std::size_t out_w = spec.out_width(in.w);
    Tensor out({in.n, spec.out_channels, out_h, out_w});

    const std::size_t cin_g = spec.in_channels / spec.groups;
    const std::size_t cout_g = spec.out_channels / spec.groups;
    const std::size_t kh = spec.kernel.h;
    const std::size_t kw = spec.kernel.w;
    const bool pointwise = kh == 1 && kw == 1 && spec.stride == Extent2{1, 1} && spec.padding == Extent2{0, 0};
    const float* wdata = weights.data().data();

    if (pointwise) {
        // Four output channels per pass so each input row is loaded once per block.
        const std::size_t hw = in.h * in.w;
        for (std::size_t n = 0; n < in.n; ++n) {
            for (std::size_t oc = 0; oc < spec.out_channels;) {
                const std::size_t g = oc / cout_g;
                const std::size_t group_end = (g + 1) * cout_g;
                if (oc + 4 <= group_end) {
                    float* o0 = out.plane(n, oc).data();
                    float* o1 = out.plane(n, oc + 1).data();
                    float* o2 = out.plane(n, oc + 2).data();
                    float* o3 = out.plane(n, oc + 3).data();
                    for (std::size_t icg = 0; icg < cin_g; ++icg) {
                        const float* x = input.plane(n, g * cin_g + icg).data();
                        const float k0 = wdata[oc * cin_g + icg];
                        const float k1 = wdata[(oc + 1) * cin_g + icg];
                        const float k2 = wdata[(oc + 2) * cin_g + icg];
                        const float k3 = wdata[(oc + 3) * cin_g + icg];
                        for (std::size_t p = 0; p < hw; ++p) {
                            const float v = x[p];
                            o0[p] += k0 * v;
                            o1[p] += k1 * v;
                            o2[p] += k2 * v;
                            o3[p] += k3 * v;
                        }
                    }
                    oc += 4;
                } else {
                    float* o = out.plane(n, oc).data();
                    for (std::size_t icg = 0; icg < cin_g; ++icg) {
                        const float* x = input.plane(n, g * cin_g + icg).data();
                        const float kv = wdata[oc * cin_g + icg];
                        for (std::size_t p = 0; p < hw; ++p) o[p] += kv * x[p];
                    }
                    ++oc;
                }
            }
        }
        return out;
    }

    for (std::size_t n = 0; n < in.n; ++n) {
        for (std::size_t oc = 0; oc < spec.out_channels; ++oc) {
            const std::size_t g = oc / cout_g;
            float* o = out.plane(n, oc).data();
            for (std::size_t icg = 0; icg < cin_g; ++icg) {
                const float* x = input.plane(n, g * cin_g + icg).data();
                const float* k = wdata + (oc * cin_g + icg) * kh * kw;
                for (std::size_t ky = 0; ky < kh; ++ky) {
                    for (std::size_t kx = 0; kx < kw; ++kx) {
                        const float kv = k[ky * kw + kx];
                        const std::ptrdiff_t col_base =
                            static_cast<std::ptrdiff_t>(kx) - static_cast<std::ptrdiff_t>(spec.padding.w);
                        for (std::size_t oy = 0; oy < out_h; ++oy) {
                            const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * spec.stride.h + ky) -
                                                      static_cast<std::ptrdiff_t>(spec.padding.h);
                            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(in.h)) continue;
                            detail::accumulate_row(o + oy * out_w, x + static_cast<std::size_t>(iy) * in.w, out_w,
                                                   in.w, spec.stride.w, col_base, kv);
                        }
                    }
                }
            }
        }
    }
    return out;
}

/// Per-channel batch-norm statistics and affine terms, each of length C.
struct BatchNormParams {
    std::span<const float> mean;
    std::span<const float> var;
    std::span<const float> gamma;
    std::span<const float> beta;
    float eps = 1e-5f;
};

/// y = gamma * (x - mean) / sqrt(var + eps) + beta, per channel.
inline Tensor batchnorm_infer(const Tensor& input, const BatchNormParams& bn) {
    const Shape& s = input.shape();
    for (auto len : {bn.mean.size(), bn.var.size(), bn.gamma.size(), bn.beta.size()}) {
        detail::require(len == s.c, "channels",
                        "batch-norm vector length " + std::to_string(len) + " != channel count " + std::to_string(s.c));
    }
    if (!(bn.eps >= 0.0f)) throw ArgumentError("batch-norm eps must be non-negative");
    Tensor out(s);
    for (std::size_t c = 0; c < s.c; ++c) {
        if (bn.var[c] < 0.0f) throw ArgumentError("batch-norm variance must be non-negative");
        const float denom = std::sqrt(bn.var[c] + bn.eps);
        if (!(denom > 0.0f)) throw ArgumentError("batch-norm var + eps must be positive");
        const float mean = bn.mean[c];
        const float gamma = bn.gamma[c];
        const float beta = bn.beta[c];
        for (std::size_t n = 0; n < s.n; ++n) {
            auto x = input.plane(n, c);
            auto y = out.plane(n, c);
            for (std::size_t i = 0; i < x.size(); ++i) y[i] = gamma * (x[i] - mean) / denom + beta;
        }
    }
    return out;
}

inline Tensor relu(const Tensor& input) {
    Tensor out = input;
    for (float& v : out.data()) v = v > 0.0f ? v : 0.0f;
    return out;
}

struct PoolSpec {
    std::size_t kernel = 3;
    std::size_t stride = 2;
    std::size_t padding = 1;
};

/// Sliding-window max; padded cells behave as -infinity.
inline Tensor maxpool2d(const Tensor& input, const PoolSpec& spec = {}) {
    if (spec.kernel == 0 || spec.stride == 0) throw ConfigError("pool kernel and stride must be >= 1");
    if (2 * spec.padding > spec.kernel) throw ConfigError("pool padding must be at most half the kernel");
    const Shape& s = input.shape();
    detail::require(s.h >= 1, "height", "maxpool2d needs a non-empty input");
    detail::require(s.w >= 1, "width", "maxpool2d needs a non-empty input");
    detail::require(s.h + 2 * spec.padding >= spec.kernel, "height", "padded height smaller than pool window");
    detail::require(s.w + 2 * spec.padding >= spec.kernel, "width", "padded width smaller than pool window");
    const std::size_t out_h = (s.h + 2 * spec.padding - spec.kernel) / spec.stride + 1;
    const std::size_t out_w = (s.w + 2 * spec.padding - spec.kernel) / spec.stride + 1;
    Tensor out({s.n, s.c, out_h, out_w});
    const auto pad = static_cast<std::ptrdiff_t>(spec.padding);
    for (std::size_t n = 0; n < s.n; ++n) {
        for (std::size_t c = 0; c < s.c; ++c) {
            auto x = input.plane(n, c);
            auto y = out.plane(n, c);
            for (std::size_t oy = 0; oy < out_h; ++oy) {
                const std::ptrdiff_t y0 = static_cast<std::ptrdiff_t>(oy * spec.stride) - pad;
                const std::size_t ylo = static_cast<std::size_t>(std::max<std::ptrdiff_t>(y0, 0));
                const std::size_t yhi =
                    std::min<std::size_t>(s.h, static_cast<std::size_t>(y0 + static_cast<std::ptrdiff_t>(spec.kernel)));
                for (std::size_t ox = 0; ox < out_w; ++ox) {
                    const std::ptrdiff_t x0 = static_cast<std::ptrdiff_t>(ox * spec.stride) - pad;
                    const std::size_t xlo = static_cast<std::size_t>(std::max<std::ptrdiff_t>(x0, 0));
                    const std::size_t xhi = std::min<std::size_t>(
                        s.w, static_cast<std::size_t>(x0 + static_cast<std::ptrdiff_t>(spec.kernel)));
                    float m = -std::numeric_limits<float>::infinity();
                    for (std::size_t iy = ylo; iy < yhi; ++iy)
                        for (std::size_t ix = xlo; ix < xhi; ++ix) m = std::max(m, x[iy * s.w + ix]);
                    y[oy * out_w + ox] = m;
                }
            }
        }
    }
    return out;
}

/// Reshape channels to (groups, C/groups), transpose, flatten: input channel
/// g*(C/groups)+k lands at output channel k*groups+g.
inline Tensor channel_shuffle(const Tensor& input, std::size_t groups) {
    const Shape& s = input.shape();
    if (groups == 0 || s.c % groups != 0) {
        throw ConfigError("channel_shuffle groups (" + std::to_string(groups) + ") must divide channel count (" +
                          std::to_string(s.c) + ")");
    }
    const std::size_t per_group = s.c / groups;
    Tensor out(s);
    for (std::size_t n = 0; n < s.n; ++n) {
        for (std::size_t g = 0; g < groups; ++g) {
            for (std::size_t k = 0; k < per_group; ++k) {
                auto src = input.plane(n, g * per_group + k);
                std::copy(src.begin(), src.end(), out.plane(n, k * groups + g).begin());
            }
        }
    }
    return out;
}

/// (N,C,H,W) -> (N,C,1,1) spatial mean.
inline Tensor global_avg_pool(const Tensor& input) {
    const Shape& s = input.shape();
    detail::require(s.h >= 1 && s.w >= 1, "height", "global_avg_pool needs a non-empty spatial extent");
    Tensor out({s.n, s.c, 1, 1});
    const double inv = 1.0 / static_cast<double>(s.plane());
    for (std::size_t n = 0; n < s.n; ++n) {
        for (std::size_t c = 0; c < s.c; ++c) {
            double acc = 0.0;
            for (float v : input.plane(n, c)) acc += v;
            out.at(n, c, 0, 0) = static_cast<float>(acc * inv);
        }
    }
    return out;
}

/// Fully connected layer over the flattened (C*H*W) features of each batch row.
/// weights: (O, F, 1, 1); bias: length O. Result: (N, O, 1, 1).
inline Tensor linear(const Tensor& input, const Tensor& weights, std::span<const float> bias) {
    const Shape& s = input.shape();
    const std::size_t features = s.c * s.h * s.w;
    const Shape& ws = weights.shape();
    detail::require(ws.h == 1 && ws.w == 1, "weights", "linear weights must have shape (O, F, 1, 1)");
    detail::require(ws.c == features, "features",
                    "linear expects " + std::to_string(ws.c) + " input features, got " + std::to_string(features));
    detail::require(bias.size() == ws.n, "bias",
                    "linear bias length " + std::to_string(bias.size()) + " != outputs " + std::to_string(ws.n));
    Tensor out({s.n, ws.n, 1, 1});
    const float* x = input.data().data();
    const float* w = weights.data().data();
    for (std::size_t n = 0; n < s.n; ++n) {
        const float* row = x + n * features;
        for (std::size_t o = 0; o < ws.n; ++o) {
            const float* wr = w + o * features;
            float acc = 0.0f;
            for (std::size_t f = 0; f < features; ++f) acc += wr[f] * row[f];
            out.at(n, o, 0, 0) = acc + bias[o];
        }
    }
    return out;
}

/// Numerically stable softmax (max subtraction, double accumulation).
inline std::vector<double> softmax(std::span<const float> logits) {
    std::vector<double> out(logits.size());
    if (logits.empty()) return out;
    const double peak = *std::max_element(logits.begin(), logits.end());
    double total = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(static_cast<double>(logits[i]) - peak);
        total += out[i];
    }
    for (double& v : out) v /= total;
    return out;
}

/// Bilinear resampling with half-pixel centers: the source coordinate of
/// output index d is (d + 0.5) * in / out - 0.5, clamped to the valid range.
inline Tensor bilinear_resize(const Tensor& image, std::size_t out_h, std::size_t out_w) {
    if (out_h == 0 || out_w == 0) throw ConfigError("bilinear_resize target extents must be positive");
    const Shape& s = image.shape();
    detail::require(s.h >= 1, "height", "bilinear_resize needs a non-empty input");
    detail::require(s.w >= 1, "width", "bilinear_resize needs a non-empty input");

    struct Tap {
        std::size_t i0, i1;
        float frac;
    };
    auto taps = [](std::size_t in, std::size_t out) {
        std::vector<Tap> t(out);
        const double scale = static_cast<double>(in) / static_cast<double>(out);
        for (std::size_t d = 0; d < out; ++d) {
            double src = (static_cast<double>(d) + 0.5) * scale - 0.5;
            src = std::clamp(src, 0.0, static_cast<double>(in - 1));
            const auto i0 = static_cast<std::size_t>(std::floor(src));
            const std::size_t i1 = std::min(i0 + 1, in - 1);
            t[d] = {i0, i1, static_cast<float>(src - static_cast<double>(i0))};
        }
        return t;
    };
    const auto ty = taps(s.h, out_h);
    const auto tx = taps(s.w, out_w);

    Tensor out({s.n, s.c, out_h, out_w});
    for (std::size_t n = 0; n < s.n; ++n) {
        for (std::size_t c = 0; c < s.c; ++c) {
            auto x = image.plane(n, c);
            auto y = out.plane(n, c);
            for (std::size_t oy = 0; oy < out_h; ++oy) {
                const Tap& a = ty[oy];
                const float* r0 = x.data() + a.i0 * s.w;
                const float* r1 = x.data() + a.i1 * s.w;
                for (std::size_t ox = 0; ox < out_w; ++ox) {
                    const Tap& b = tx[ox];
                    const float top = r0[b.i0] + (r0[b.i1] - r0[b.i0]) * b.frac;
                    const float bottom = r1[b.i0] + (r1[b.i1] - r1[b.i0]) * b.frac;
                    y[oy * out_w + ox] = top + (bottom - top) * a.frac;
                }
            }
        }
    }
    return out;
}

/// Channels [begin, begin + count) of every batch row.
inline Tensor slice_channels(const Tensor& input, std::size_t begin, std::size_t count) {
    const Shape& s = input.shape();
    detail::require(begin + count <= s.c, "channels", "channel slice out of range");
    Tensor out({s.n, count, s.h, s.w});
    for (std::size_t n = 0; n < s.n; ++n)
        for (std::size_t c = 0; c < count; ++c) {
            auto src = input.plane(n, begin + c);
            std::copy(src.begin(), src.end(), out.plane(n, c).begin());
        }
    return out;
}

/// Stack a and b along the channel axis.
inline Tensor concat_channels(const Tensor& a, const Tensor& b) {
    const Shape& sa = a.shape();
    const Shape& sb = b.shape();
    detail::require(sa.n == sb.n, "batch", "concat operands differ in batch size");
    detail::require(sa.h == sb.h, "height", "concat operands differ in height");
    detail::require(sa.w == sb.w, "width", "concat operands differ in width");
    Tensor out({sa.n, sa.c + sb.c, sa.h, sa.w});
    for (std::size_t n = 0; n < sa.n; ++n) {
        for (std::size_t c = 0; c < sa.c; ++c) {
            auto src = a.plane(n, c);
            std::copy(src.begin(), src.end(), out.plane(n, c).begin());
        }
        for (std::size_t c = 0; c < sb.c; ++c) {
            auto src = b.plane(n, c);
            std::copy(src.begin(), src.end(), out.plane(n, sa.c + c).begin());
        }
    }
    return out;
}

}  // namespace canekit
