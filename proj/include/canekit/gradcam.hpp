#pragma once

// Grad-CAM on the final 1x1 conv output. The head is
//   logit = W2 relu(W1 gap(A) + b1) + b2
// so d logit_c / d A[k,i,j] = (1 / HW) * sum_h W2[c,h] [z_h > 0] W1[h,k],
// constant over (i, j). Only the head is differentiated; no autodiff needed.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "canekit/image.hpp"
#include "canekit/model.hpp"
#include "canekit/preprocess.hpp"
#include "canekit/tensor.hpp"

namespace canekit::xai {

/// Row-major views of the two head layers.
struct HeadView {
    std::span<const float> w1;  // hidden x features
    std::span<const float> b1;  // hidden
    std::span<const float> w2;  // classes x hidden
    std::span<const float> b2;  // classes
    std::size_t features = 0;
    std::size_t hidden = 0;
    std::size_t classes = 0;

    static HeadView of(const ModelGraph& model) {
        const auto& cfg = model.config();
        return {model.param("head.fc1.weight").data(),
                model.param("head.fc1.bias").data(),
                model.param("head.fc2.weight").data(),
                model.param("head.fc2.bias").data(),
                cfg.final_conv_channels,
                cfg.head_hidden,
                cfg.num_classes};
    }

    void validate() const {
        if (w1.size() != hidden * features || b1.size() != hidden || w2.size() != classes * hidden ||
            b2.size() != classes)
            throw DimensionError("head", "head weight views disagree with declared widths");
    }
};

namespace detail {

inline std::vector<double> pooled_features(const Tensor& activations) {
    const Shape& s = activations.shape();
    std::vector<double> pooled(s.c);
    for (std::size_t k = 0; k < s.c; ++k) {
        double acc = 0.0;
        for (float v : activations.plane(0, k)) acc += v;
        pooled[k] = acc / static_cast<double>(s.plane());
    }
    return pooled;
}

inline void check_activations(const HeadView& head, const Tensor& a) {
    const Shape& s = a.shape();
    if (s.n != 1) throw DimensionError("batch", "Grad-CAM works on one image at a time");
    if (s.c != head.features)
        throw DimensionError("channels", "activations have " + std::to_string(s.c) + " channels, head expects " +
                                             std::to_string(head.features));
    if (s.h == 0 || s.w == 0) throw DimensionError("height", "activations have an empty spatial extent");
}

}  // namespace detail

/// Gradient of logit `target` with respect to the activations (1, C, H, W).
inline Tensor head_gradient(const HeadView& head, const Tensor& activations, std::size_t target) {
    head.validate();
    detail::check_activations(head, activations);
    if (target >= head.classes)
        throw ArgumentError("class index " + std::to_string(target) + " out of range [0, " +
                            std::to_string(head.classes) + ")");
    const auto pooled = detail::pooled_features(activations);

    std::vector<double> upstream(head.hidden, 0.0);
    for (std::size_t h = 0; h < head.hidden; ++h) {
        double z = head.b1[h];
        const float* row = head.w1.data() + h * head.features;
        for (std::size_t k = 0; k < head.features; ++k) z += static_cast<double>(row[k]) * pooled[k];
        // ReLU subgradient at exactly zero is taken as zero.
        upstream[h] = z > 0.0 ? head.w2[target * head.hidden + h] : 0.0;
    }

    const Shape& s = activations.shape();
    const double inv_area = 1.0 / static_cast<double>(s.plane());
    Tensor grad(s);
    for (std::size_t k = 0; k < s.c; ++k) {
        double g = 0.0;
        for (std::size_t h = 0; h < head.hidden; ++h)
            if (upstream[h] != 0.0) g += upstream[h] * head.w1[h * head.features + k];
        const auto value = static_cast<float>(g * inv_area);
        for (float& v : grad.plane(0, k)) v = value;
    }
    return grad;
}

inline Tensor head_gradient(const ModelGraph& model, const Tensor& activations, std::size_t target) {
    return head_gradient(HeadView::of(model), activations, target);
}

struct CamResult {
    std::size_t target_class = 0;
    std::vector<float> alphas;  // per-channel weights
    Tensor raw_map;             // (1, 1, H', W'), relu(sum_k alpha_k A_k)
    Tensor normalized_map;      // (1, 1, H', W') in [0, 1]
    Image overlay;              // RGBA, filled by explain()
};

/// (x - min) / (max - min); a constant map becomes all zeros.
inline Tensor min_max_normalize(const Tensor& map) {
    Tensor out(map.shape());
    if (map.empty()) return out;
    const auto [lo, hi] = std::minmax_element(map.data().begin(), map.data().end());
    const float min = *lo, max = *hi;
    if (!(max > min)) return out;
    const float range = max - min;
    auto src = map.data();
    auto dst = out.data();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = std::clamp((src[i] - min) / range, 0.0f, 1.0f);
    return out;
}

/// Grad-CAM from already-computed activations.
inline CamResult gradcam_from_activations(const HeadView& head, const Tensor& activations, std::size_t target) {
    const Tensor grad = head_gradient(head, activations, target);
    const Shape& s = activations.shape();
    CamResult r;
    r.target_class = target;
    r.alphas.resize(s.c);
    for (std::size_t k = 0; k < s.c; ++k) {
        double acc = 0.0;
        for (float v : grad.plane(0, k)) acc += v;
        r.alphas[k] = static_cast<float>(acc / static_cast<double>(s.plane()));
    }
    r.raw_map = Tensor({1, 1, s.h, s.w});
    auto raw = r.raw_map.data();
    for (std::size_t k = 0; k < s.c; ++k) {
        const float a = r.alphas[k];
        if (a == 0.0f) continue;
        auto plane = activations.plane(0, k);
        for (std::size_t i = 0; i < raw.size(); ++i) raw[i] += a * plane[i];
    }
    for (float& v : raw) v = v > 0.0f ? v : 0.0f;
    r.normalized_map = min_max_normalize(r.raw_map);
    return r;
}

inline std::size_t argmax(std::span<const float> v) {
    return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

/// Grad-CAM for one preprocessed image (1, 3, S, S). Without a target the
/// predicted (argmax) class is explained.
inline CamResult gradcam_map(const ModelGraph& model, const Tensor& input, std::optional<std::size_t> target = {}) {
    if (input.shape().n != 1) throw DimensionError("batch", "Grad-CAM works on one image at a time");
    const ForwardTrace trace = forward_trace(model, input);
    const std::size_t cls = target.value_or(argmax(trace.logits.data()));
    return gradcam_from_activations(HeadView::of(model), trace.features, cls);
}

struct Rgb {
    std::uint8_t r, g, b;
};

/// Fixed linear blue (cold, 0) -> red (hot, 1) ramp.
inline Rgb heat_color(float v) {
    const float t = std::clamp(v, 0.0f, 1.0f);
    return {static_cast<std::uint8_t>(std::lround(255.0f * t)), 0,
            static_cast<std::uint8_t>(std::lround(255.0f * (1.0f - t)))};
}

/// 50/50 blend of the colored map over `original` (RGB). The map is
/// resampled bilinearly to the image size when needed. Output is RGBA, opaque.
inline Image overlay(const Tensor& normalized_map, const Image& original) {
    if (original.channels < 3) throw ArgumentError("overlay needs an RGB image");
    const Shape& ms = normalized_map.shape();
    if (ms.n != 1 || ms.c != 1) throw DimensionError("channels", "overlay expects a (1,1,H,W) map");
    const Tensor map = (ms.h == original.height && ms.w == original.width)
                           ? normalized_map
                           : bilinear_resize(normalized_map, original.height, original.width);
    Image out(original.width, original.height, 4);
    auto m = map.data();
    for (std::size_t y = 0; y < original.height; ++y) {
        for (std::size_t x = 0; x < original.width; ++x) {
            const Rgb heat = heat_color(m[y * original.width + x]);
            const std::uint8_t hc[3] = {heat.r, heat.g, heat.b};
            for (std::size_t c = 0; c < 3; ++c)
                out.at(x, y, c) = static_cast<std::uint8_t>((hc[c] + original.at(x, y, c) + 1) / 2);
            out.at(x, y, 3) = 255;
        }
    }
    return out;
}

/// Decode-free end-to-end explanation: Grad-CAM plus a 224x224 overlay on
/// the resized original.
inline CamResult explain(const ModelGraph& model, const Image& original, std::optional<std::size_t> target = {}) {
    const std::size_t size = model.config().input_size;
    CamResult r = gradcam_map(model, preprocess(original, size), target);
    r.overlay = overlay(r.normalized_map, resize_image(original, size));
    return r;
}

}  // namespace canekit::xai
