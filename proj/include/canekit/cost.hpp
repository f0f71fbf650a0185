#pragma once

// Parameter and multiply-accumulate accounting.
//   conv   params Cout*(Cin/g)*kh*kw,  MACs params*Hout*Wout
//   linear params O*F + O,             MACs O*F
//   BN     2C affine params (running statistics counted as buffers), 0 MACs
//   ReLU / pooling / shuffle           0

#include <cstdint>
#include <string>
#include <vector>

#include "canekit/model.hpp"
#include "canekit/weights.hpp"

namespace canekit {

struct LayerCost {
    std::string name;
    std::string kind;  // "conv", "bn", "linear"
    std::uint64_t params = 0;
    std::uint64_t buffers = 0;
    std::uint64_t macs = 0;
    std::size_t out_h = 0;
    std::size_t out_w = 0;
};

struct CostReport {
    std::vector<LayerCost> layers;
    std::uint64_t total_params = 0;
    std::uint64_t total_buffers = 0;
    std::uint64_t total_macs = 0;
    std::uint64_t file_bytes = 0;

    const LayerCost* find(const std::string& name) const {
        for (const auto& l : layers)
            if (l.name == name) return &l;
        return nullptr;
    }
};

inline std::uint64_t conv_params(const ConvSpec& c) {
    return static_cast<std::uint64_t>(c.out_channels) * (c.in_channels / c.groups) * c.kernel.h * c.kernel.w;
}

inline std::uint64_t conv_macs(const ConvSpec& c, std::size_t out_h, std::size_t out_w) {
    return conv_params(c) * out_h * out_w;
}

namespace detail {

inline void cost_unit(const ConvBnUnit& u, std::size_t& h, std::size_t& w, CostReport& r) {
    const std::size_t oh = u.conv.out_height(h);
    const std::size_t ow = u.conv.out_width(w);
    r.layers.push_back({u.name + ".conv", "conv", conv_params(u.conv), 0, conv_macs(u.conv, oh, ow), oh, ow});
    r.layers.push_back({u.name + ".bn", "bn", 2ULL * u.conv.out_channels, 2ULL * u.conv.out_channels, 0, oh, ow});
    h = oh;
    w = ow;
}

}  // namespace detail

/// Full accounting for one image of `input_h` x `input_w`.
inline CostReport profile(const ModelGraph& model, std::size_t input_h, std::size_t input_w) {
    CostReport r;
    std::size_t h = input_h, w = input_w;
    for (const auto& seg : model.segments()) {
        switch (seg.kind) {
            case SegmentKind::Stem:
            case SegmentKind::FinalConv:
                for (const auto& u : seg.units) detail::cost_unit(u, h, w, r);
                break;
            case SegmentKind::MaxPool:
                h = (h + 2 - 3) / 2 + 1;
                w = (w + 2 - 3) / 2 + 1;
                break;
            case SegmentKind::ShuffleBlock: {
                std::size_t lh = h, lw = w, rh = h, rw = w;
                for (const auto& u : seg.left) detail::cost_unit(u, lh, lw, r);
                for (const auto& u : seg.right) detail::cost_unit(u, rh, rw, r);
                h = rh;
                w = rw;
                break;
            }
            case SegmentKind::GlobalPool:
                h = w = 1;
                break;
            case SegmentKind::Linear: {
                const auto& l = seg.linear;
                const std::uint64_t weights = static_cast<std::uint64_t>(l.out_features) * l.in_features;
                r.layers.push_back({l.name, "linear", weights + l.out_features, 0, weights, 1, 1});
                break;
            }
        }
    }
    for (const auto& l : r.layers) {
        r.total_params += l.params;
        r.total_buffers += l.buffers;
        r.total_macs += l.macs;
    }
    r.file_bytes = save_weights(model).size();
    return r;
}

/// Parameter accounting at the model's configured input size.
inline CostReport count_params(const ModelGraph& model) {
    return profile(model, model.config().input_size, model.config().input_size);
}

/// MAC accounting for a 3 x input_h x input_w image.
inline CostReport count_macs(const ModelGraph& model, std::size_t input_h = 224, std::size_t input_w = 224) {
    return profile(model, input_h, input_w);
}

}  // namespace canekit
