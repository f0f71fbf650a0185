#pragma once

// Reference implementations used only by tests. Written for clarity, not
// speed: direct loops in double precision with no shared code paths into
// the library kernels.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "canekit/rng.hpp"
#include "canekit/tensor.hpp"

namespace oracle {

using canekit::ConvSpec;
using canekit::Rng;
using canekit::Shape;
using canekit::Tensor;

inline Tensor random_tensor(const Shape& s, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t(s);
    for (float& v : t.data()) v = static_cast<float>(rng.uniform(lo, hi));
    return t;
}

/// max |a - b| / max(max |b|, 1e-12): norm-wise relative error.
inline double rel_error(std::span<const float> a, std::span<const float> b) {
    if (a.size() != b.size()) return std::numeric_limits<double>::infinity();
    double diff = 0.0, scale = 1e-12;
    for (std::size_t i = 0; i < a.size(); ++i) {
        diff = std::max(diff, std::abs(static_cast<double>(a[i]) - b[i]));
        scale = std::max(scale, std::abs(static_cast<double>(b[i])));
    }
    return diff / scale;
}

inline double rel_error(const Tensor& a, const Tensor& b) {
    if (!(a.shape() == b.shape())) return std::numeric_limits<double>::infinity();
    return rel_error(a.data(), b.data());
}

/// Seven nested loops over (n, oc, oy, ox, ic, ky, kx). Counts every
/// multiply when `multiplies` is given.
inline Tensor conv2d(const Tensor& x, const Tensor& w, const ConvSpec& s, std::uint64_t* multiplies = nullptr) {
    const Shape& in = x.shape();
    const std::size_t oh = (in.h + 2 * s.padding.h - s.kernel.h) / s.stride.h + 1;
    const std::size_t ow = (in.w + 2 * s.padding.w - s.kernel.w) / s.stride.w + 1;
    const std::size_t cin_g = s.in_channels / s.groups;
    const std::size_t cout_g = s.out_channels / s.groups;
    Tensor out({in.n, s.out_channels, oh, ow});
    for (std::size_t n = 0; n < in.n; ++n)
        for (std::size_t oc = 0; oc < s.out_channels; ++oc) {
            const std::size_t g = oc / cout_g;
            for (std::size_t oy = 0; oy < oh; ++oy)
                for (std::size_t ox = 0; ox < ow; ++ox) {
                    double acc = 0.0;
                    for (std::size_t ic = 0; ic < cin_g; ++ic)
                        for (std::size_t ky = 0; ky < s.kernel.h; ++ky)
                            for (std::size_t kx = 0; kx < s.kernel.w; ++kx) {
                                if (multiplies) ++*multiplies;
                                const long iy = static_cast<long>(oy * s.stride.h + ky) - static_cast<long>(s.padding.h);
                                const long ix = static_cast<long>(ox * s.stride.w + kx) - static_cast<long>(s.padding.w);
                                if (iy < 0 || ix < 0 || iy >= static_cast<long>(in.h) || ix >= static_cast<long>(in.w))
                                    continue;
                                acc += static_cast<double>(x.at(n, g * cin_g + ic, iy, ix)) * w.at(oc, ic, ky, kx);
                            }
                    out.at(n, oc, oy, ox) = static_cast<float>(acc);
                }
        }
    return out;
}

/// Window maximum with out-of-range taps ignored (-inf padding).
inline Tensor maxpool(const Tensor& x, std::size_t k, std::size_t stride, std::size_t pad) {
    const Shape& in = x.shape();
    const std::size_t oh = (in.h + 2 * pad - k) / stride + 1;
    const std::size_t ow = (in.w + 2 * pad - k) / stride + 1;
    Tensor out({in.n, in.c, oh, ow});
    for (std::size_t n = 0; n < in.n; ++n)
        for (std::size_t c = 0; c < in.c; ++c)
            for (std::size_t oy = 0; oy < oh; ++oy)
                for (std::size_t ox = 0; ox < ow; ++ox) {
                    float best = -std::numeric_limits<float>::infinity();
                    for (std::size_t ky = 0; ky < k; ++ky)
                        for (std::size_t kx = 0; kx < k; ++kx) {
                            const long iy = static_cast<long>(oy * stride + ky) - static_cast<long>(pad);
                            const long ix = static_cast<long>(ox * stride + kx) - static_cast<long>(pad);
                            if (iy < 0 || ix < 0 || iy >= static_cast<long>(in.h) || ix >= static_cast<long>(in.w))
                                continue;
                            best = std::max(best, x.at(n, c, iy, ix));
                        }
                    out.at(n, c, oy, ox) = best;
                }
    return out;
}

inline Tensor gap(const Tensor& x) {
    const Shape& s = x.shape();
    Tensor out({s.n, s.c, 1, 1});
    for (std::size_t n = 0; n < s.n; ++n)
        for (std::size_t c = 0; c < s.c; ++c) {
            double sum = 0.0;
            for (std::size_t y = 0; y < s.h; ++y)
                for (std::size_t xx = 0; xx < s.w; ++xx) sum += x.at(n, c, y, xx);
            out.at(n, c, 0, 0) = static_cast<float>(sum / static_cast<double>(s.h * s.w));
        }
    return out;
}

/// y[n][o] = sum_f W[o][f] x[n][f] + b[o], with x flattened per sample.
inline Tensor linear(const Tensor& x, const Tensor& w, std::span<const float> b) {
    const std::size_t n = x.shape().n;
    const std::size_t f = x.shape().c * x.shape().h * x.shape().w;
    const std::size_t o = w.shape().n;
    Tensor out({n, o, 1, 1});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < o; ++j) {
            double acc = b[j];
            for (std::size_t k = 0; k < f; ++k) acc += static_cast<double>(w.data()[j * f + k]) * x.data()[i * f + k];
            out.data()[i * o + j] = static_cast<float>(acc);
        }
    return out;
}

/// Plain-array head used by gradient checks.
struct Head {
    std::size_t features = 0, hidden = 0, classes = 0;
    std::vector<float> w1, b1, w2, b2;
};

inline Head random_head(Rng& rng, std::size_t features, std::size_t hidden, std::size_t classes) {
    Head h{features, hidden, classes, {}, {}, {}, {}};
    auto fill = [&](std::vector<float>& v, std::size_t n) {
        v.resize(n);
        for (float& x : v) x = static_cast<float>(rng.uniform(-1.0, 1.0));
    };
    fill(h.w1, hidden * features);
    fill(h.b1, hidden);
    fill(h.w2, classes * hidden);
    fill(h.b2, classes);
    return h;
}

/// Hidden pre-activations z = W1 gap(A) + b1 in double.
inline std::vector<double> hidden_pre(const Head& h, const std::vector<double>& a, std::size_t hw) {
    std::vector<double> z(h.hidden);
    for (std::size_t j = 0; j < h.hidden; ++j) {
        double acc = h.b1[j];
        for (std::size_t k = 0; k < h.features; ++k) {
            double mean = 0.0;
            for (std::size_t p = 0; p < hw; ++p) mean += a[k * hw + p];
            acc += static_cast<double>(h.w1[j * h.features + k]) * (mean / static_cast<double>(hw));
        }
        z[j] = acc;
    }
    return z;
}

inline double logit(const Head& h, const std::vector<double>& a, std::size_t hw, std::size_t c) {
    const auto z = hidden_pre(h, a, hw);
    double out = h.b2[c];
    for (std::size_t j = 0; j < h.hidden; ++j) out += static_cast<double>(h.w2[c * h.hidden + j]) * std::max(z[j], 0.0);
    return out;
}

/// Central differences of logit c with respect to every activation.
inline std::vector<double> finite_difference(const Head& h, std::vector<double> a, std::size_t hw, std::size_t c,
                                             double step = 1e-3) {
    std::vector<double> g(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double keep = a[i];
        a[i] = keep + step;
        const double up = logit(h, a, hw, c);
        a[i] = keep - step;
        const double down = logit(h, a, hw, c);
        a[i] = keep;
        g[i] = (up - down) / (2.0 * step);
    }
    return g;
}

/// Wilson score interval evaluated in long double.
inline std::pair<long double, long double> wilson(std::uint64_t k, std::uint64_t n, long double z = 1.959964L) {
    const long double nn = n, p = static_cast<long double>(k) / nn, z2 = z * z;
    const long double denom = 1.0L + z2 / nn;
    const long double center = (p + z2 / (2.0L * nn)) / denom;
    const long double half = (z / denom) * std::sqrt(p * (1.0L - p) / nn + z2 / (4.0L * nn * nn));
    return {std::max(0.0L, center - half), std::min(1.0L, center + half)};
}

/// Mann-Whitney AUC: fraction of (positive, negative) pairs ranked
/// correctly, ties counting one half.
inline double pair_auc(std::span<const double> scores, std::span<const bool> pos) {
    double good = 0.0, pairs = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!pos[i]) continue;
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (pos[j]) continue;
            pairs += 1.0;
            if (scores[i] > scores[j])
                good += 1.0;
            else if (scores[i] == scores[j])
                good += 0.5;
        }
    }
    return good / pairs;
}

/// AP by brute force: for each distinct threshold, precision and recall of
/// "score >= threshold", summed as (R_i - R_{i-1}) P_i.
inline double brute_ap(std::span<const double> scores, std::span<const bool> pos) {
    std::vector<double> thresholds(scores.begin(), scores.end());
    std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
    double total_pos = 0.0;
    for (bool p : pos) total_pos += p ? 1.0 : 0.0;
    double ap = 0.0, prev_recall = 0.0;
    for (double t : thresholds) {
        double tp = 0.0, fp = 0.0;
        for (std::size_t i = 0; i < scores.size(); ++i)
            if (scores[i] >= t) (pos[i] ? tp : fp) += 1.0;
        const double recall = tp / total_pos;
        ap += (recall - prev_recall) * (tp / (tp + fp));
        prev_recall = recall;
    }
    return ap;
}

/// Per-class counts from label pairs, no matrix involved.
struct PairCounts {
    std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;
};

inline PairCounts count_pairs(std::span<const std::size_t> truth, std::span<const std::size_t> pred, std::size_t c) {
    PairCounts r;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const bool t = truth[i] == c, p = pred[i] == c;
        if (t && p) ++r.tp;
        else if (!t && p) ++r.fp;
        else if (t && !p) ++r.fn;
        else ++r.tn;
    }
    return r;
}

}  // namespace oracle
