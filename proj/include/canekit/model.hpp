#pragma once

// The channel-split shuffle classifier: layout description, seeded
// initialization, and the inference forward pass.
//
// Layout (default config):
//   stem      3x3/2 conv 3->24, BN, ReLU
//   pool      3x3/2 max pool
//   stage2-4  [4, 8, 4] shuffle blocks, widths 116/232/464, first block of
//             each stage downsamples
//   conv5     1x1 conv 464->1024, BN, ReLU        <- Grad-CAM target
//   gap       global average pool                 <- embedding
//   head      fc1 1024->1024, ReLU, fc2 1024->17  (dropouts are identity)

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iterator>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "canekit/errors.hpp"
#include "canekit/rng.hpp"
#include "canekit/tensor.hpp"

namespace canekit {

struct ModelConfig {
    std::size_t input_size = 224;
    std::size_t stem_channels = 24;
    std::vector<std::size_t> stage_blocks{4, 8, 4};
    std::vector<std::size_t> stage_channels{116, 232, 464};
    std::size_t final_conv_channels = 1024;
    std::size_t head_hidden = 1024;
    std::size_t num_classes = 17;
    // Head dropout rates. Identity at inference; kept so a container records
    // the configuration it was trained with.
    double dropout1 = 0.480;
    double dropout2 = 0.492;

    void validate() const {
        if (input_size == 0) throw ConfigError("input_size must be positive");
        if (stem_channels == 0) throw ConfigError("stem_channels must be positive");
        if (stage_blocks.empty() || stage_blocks.size() != stage_channels.size())
            throw ConfigError("stage_blocks and stage_channels must be non-empty and the same length");
        for (std::size_t s = 0; s < stage_blocks.size(); ++s) {
            if (stage_blocks[s] == 0) throw ConfigError("every stage needs at least one block");
            if (stage_channels[s] == 0 || stage_channels[s] % 2 != 0)
                throw ConfigError("stage_channels must be positive and even (blocks split channels in half), got " +
                                  std::to_string(stage_channels[s]));
        }
        if (final_conv_channels == 0 || head_hidden == 0) throw ConfigError("head widths must be positive");
        if (num_classes < 2) throw ConfigError("num_classes must be at least 2");
        if (!(dropout1 >= 0.0 && dropout1 <= 1.0) || !(dropout2 >= 0.0 && dropout2 <= 1.0))
            throw ConfigError("dropout rates must lie in [0, 1]");
    }

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

enum class ParamRole { ConvWeight, LinearWeight, LinearBias, BnAffine, BnBuffer };

struct ParamSpec {
    std::string name;
    Shape shape;
    ParamRole role;
    std::size_t fan_in = 0;
};

/// Conv followed by inference batch norm and optional ReLU.
struct ConvBnUnit {
    std::string name;  // parameter prefix: <name>.conv.weight, <name>.bn.{weight,bias,running_mean,running_var}
    ConvSpec conv;
    bool relu = true;

    std::string weight_name() const { return name + ".conv.weight"; }
    std::string bn_name(std::string_view field) const { return name + ".bn." + std::string(field); }
};

struct LinearUnit {
    std::string name;  // <name>.weight (O,F,1,1), <name>.bias (O,1,1,1)
    std::size_t in_features = 0;
    std::size_t out_features = 0;
    bool relu = false;
};

enum class SegmentKind { Stem, MaxPool, ShuffleBlock, FinalConv, GlobalPool, Linear };

inline const char* to_string(SegmentKind k) {
    switch (k) {
        case SegmentKind::Stem: return "stem";
        case SegmentKind::MaxPool: return "maxpool";
        case SegmentKind::ShuffleBlock: return "shuffle_block";
        case SegmentKind::FinalConv: return "final_conv";
        case SegmentKind::GlobalPool: return "global_pool";
        case SegmentKind::Linear: return "linear";
    }
    return "?";
}

/// One step of the forward chain. Which fields are meaningful depends on kind:
/// Stem/FinalConv use `units[0]`; ShuffleBlock uses `left` (downsample only)
/// and `right`; Linear uses `linear`.
struct Segment {
    SegmentKind kind{};
    std::string name;
    std::size_t in_channels = 0;
    std::size_t out_channels = 0;
    bool downsample = false;
    std::vector<ConvBnUnit> units;
    std::vector<ConvBnUnit> left;
    std::vector<ConvBnUnit> right;
    LinearUnit linear;
};

using ParamTable = std::map<std::string, Tensor>;

namespace detail {

inline ConvBnUnit conv_unit(std::string name, std::size_t in, std::size_t out, std::size_t k, std::size_t stride,
                            std::size_t groups, bool relu) {
    ConvSpec spec;
    spec.in_channels = in;
    spec.out_channels = out;
    spec.kernel = {k, k};
    spec.stride = {stride, stride};
    spec.padding = {k / 2, k / 2};
    spec.groups = groups;
    spec.validate();
    return {std::move(name), spec, relu};
}

}  // namespace detail

/// Describe one shuffle block. Regular blocks keep the channel count and split
/// it in half; downsample blocks run both branches at stride 2.
inline Segment shuffle_block_segment(const std::string& name, std::size_t in_channels, std::size_t out_channels,
                                     bool downsample) {
    if (out_channels % 2 != 0) throw ConfigError(name + ": block output channels must be even");
    Segment seg;
    seg.kind = SegmentKind::ShuffleBlock;
    seg.name = name;
    seg.in_channels = in_channels;
    seg.out_channels = out_channels;
    seg.downsample = downsample;
    const std::size_t half = out_channels / 2;
    if (downsample) {
        seg.left.push_back(detail::conv_unit(name + ".left.dw", in_channels, in_channels, 3, 2, in_channels, false));
        seg.left.push_back(detail::conv_unit(name + ".left.pw", in_channels, half, 1, 1, 1, true));
        seg.right.push_back(detail::conv_unit(name + ".right.pw1", in_channels, half, 1, 1, 1, true));
        seg.right.push_back(detail::conv_unit(name + ".right.dw", half, half, 3, 2, half, false));
        seg.right.push_back(detail::conv_unit(name + ".right.pw2", half, half, 1, 1, 1, true));
    } else {
        if (in_channels != out_channels)
            throw ConfigError(name + ": regular block must preserve channel count (" + std::to_string(in_channels) +
                              " -> " + std::to_string(out_channels) + ")");
        seg.right.push_back(detail::conv_unit(name + ".right.pw1", half, half, 1, 1, 1, true));
        seg.right.push_back(detail::conv_unit(name + ".right.dw", half, half, 3, 1, half, false));
        seg.right.push_back(detail::conv_unit(name + ".right.pw2", half, half, 1, 1, 1, true));
    }
    return seg;
}

/// Reject any chain whose declared input channels disagree with the
/// predecessor's output channels.
inline void validate_chain(const std::vector<Segment>& segments, std::size_t input_channels = 3) {
    std::size_t channels = input_channels;
    for (const auto& seg : segments) {
        if (seg.in_channels != channels)
            throw ConfigError("segment '" + seg.name + "' expects " + std::to_string(seg.in_channels) +
                              " input channels but its predecessor produces " + std::to_string(channels));
        auto check_units = [&](const std::vector<ConvBnUnit>& units, std::size_t start) {
            std::size_t c = start;
            for (const auto& u : units) {
                if (u.conv.in_channels != c)
                    throw ConfigError("unit '" + u.name + "' expects " + std::to_string(u.conv.in_channels) +
                                      " channels, receives " + std::to_string(c));
                c = u.conv.out_channels;
            }
            return c;
        };
        switch (seg.kind) {
            case SegmentKind::Stem:
            case SegmentKind::FinalConv:
                if (check_units(seg.units, channels) != seg.out_channels)
                    throw ConfigError("segment '" + seg.name + "' output channel mismatch");
                break;
            case SegmentKind::ShuffleBlock: {
                if (seg.downsample) {
                    const std::size_t l = check_units(seg.left, channels);
                    const std::size_t r = check_units(seg.right, channels);
                    if (l + r != seg.out_channels)
                        throw ConfigError("segment '" + seg.name + "' branch widths do not sum to output channels");
                } else {
                    if (channels % 2 != 0) throw ConfigError("segment '" + seg.name + "' needs an even channel count");
                    const std::size_t r = check_units(seg.right, channels / 2);
                    if (channels / 2 + r != seg.out_channels)
                        throw ConfigError("segment '" + seg.name + "' branch widths do not sum to output channels");
                }
                break;
            }
            case SegmentKind::Linear:
                if (seg.linear.in_features != channels || seg.linear.out_features != seg.out_channels)
                    throw ConfigError("segment '" + seg.name + "' linear shape mismatch");
                break;
            case SegmentKind::MaxPool:
            case SegmentKind::GlobalPool:
                if (seg.out_channels != channels)
                    throw ConfigError("segment '" + seg.name + "' must preserve channel count");
                break;
        }
        channels = seg.out_channels;
    }
}

inline std::vector<Segment> build_layout(const ModelConfig& cfg) {
    cfg.validate();
    std::vector<Segment> segs;

    Segment stem;
    stem.kind = SegmentKind::Stem;
    stem.name = "stem";
    stem.in_channels = 3;
    stem.out_channels = cfg.stem_channels;
    stem.units.push_back(detail::conv_unit("stem", 3, cfg.stem_channels, 3, 2, 1, true));
    segs.push_back(std::move(stem));

    Segment pool;
    pool.kind = SegmentKind::MaxPool;
    pool.name = "maxpool";
    pool.in_channels = pool.out_channels = cfg.stem_channels;
    segs.push_back(std::move(pool));

    std::size_t channels = cfg.stem_channels;
    for (std::size_t s = 0; s < cfg.stage_blocks.size(); ++s) {
        const std::string stage = "stage" + std::to_string(s + 2);
        for (std::size_t b = 0; b < cfg.stage_blocks[s]; ++b) {
            const bool down = b == 0;
            segs.push_back(
                shuffle_block_segment(stage + "." + std::to_string(b), channels, cfg.stage_channels[s], down));
            channels = cfg.stage_channels[s];
        }
    }

    Segment conv5;
    conv5.kind = SegmentKind::FinalConv;
    conv5.name = "conv5";
    conv5.in_channels = channels;
    conv5.out_channels = cfg.final_conv_channels;
    conv5.units.push_back(detail::conv_unit("conv5", channels, cfg.final_conv_channels, 1, 1, 1, true));
    segs.push_back(std::move(conv5));

    Segment gap;
    gap.kind = SegmentKind::GlobalPool;
    gap.name = "gap";
    gap.in_channels = gap.out_channels = cfg.final_conv_channels;
    segs.push_back(std::move(gap));

    Segment fc1;
    fc1.kind = SegmentKind::Linear;
    fc1.name = "head.fc1";
    fc1.in_channels = cfg.final_conv_channels;
    fc1.out_channels = cfg.head_hidden;
    fc1.linear = {"head.fc1", cfg.final_conv_channels, cfg.head_hidden, true};
    segs.push_back(std::move(fc1));

    Segment fc2;
    fc2.kind = SegmentKind::Linear;
    fc2.name = "head.fc2";
    fc2.in_channels = cfg.head_hidden;
    fc2.out_channels = cfg.num_classes;
    fc2.linear = {"head.fc2", cfg.head_hidden, cfg.num_classes, false};
    segs.push_back(std::move(fc2));

    validate_chain(segs);
    return segs;
}

inline void append_unit_specs(const ConvBnUnit& u, std::vector<ParamSpec>& out) {
    const ConvSpec& c = u.conv;
    out.push_back({u.weight_name(), c.weight_shape(), ParamRole::ConvWeight,
                   (c.in_channels / c.groups) * c.kernel.h * c.kernel.w});
    const Shape vec{c.out_channels, 1, 1, 1};
    out.push_back({u.bn_name("weight"), vec, ParamRole::BnAffine, 0});
    out.push_back({u.bn_name("bias"), vec, ParamRole::BnAffine, 0});
    out.push_back({u.bn_name("running_mean"), vec, ParamRole::BnBuffer, 0});
    out.push_back({u.bn_name("running_var"), vec, ParamRole::BnBuffer, 0});
}

/// Every tensor a segment owns, in forward order.
inline std::vector<ParamSpec> parameter_specs(const Segment& seg) {
    std::vector<ParamSpec> out;
    for (const auto& u : seg.units) append_unit_specs(u, out);
    for (const auto& u : seg.left) append_unit_specs(u, out);
    for (const auto& u : seg.right) append_unit_specs(u, out);
    if (seg.kind == SegmentKind::Linear) {
        const LinearUnit& l = seg.linear;
        out.push_back({l.name + ".weight", {l.out_features, l.in_features, 1, 1}, ParamRole::LinearWeight,
                       l.in_features});
        out.push_back({l.name + ".bias", {l.out_features, 1, 1, 1}, ParamRole::LinearBias, l.in_features});
    }
    return out;
}

inline std::vector<ParamSpec> parameter_specs(const std::vector<Segment>& segments) {
    std::vector<ParamSpec> out;
    for (const auto& seg : segments) {
        auto part = parameter_specs(seg);
        out.insert(out.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
    }
    return out;
}

/// Seeded initialization: conv/linear weights and linear biases uniform in
/// +-1/sqrt(fan_in); BN gamma 1, beta 0, running mean 0, running var 1.
/// Each tensor draws from its own stream keyed by (seed, name).
inline ParamTable init_parameters(const std::vector<ParamSpec>& specs, std::uint64_t seed) {
    ParamTable table;
    for (const auto& spec : specs) {
        Tensor t(spec.shape);
        if (spec.role == ParamRole::ConvWeight || spec.role == ParamRole::LinearWeight ||
            spec.role == ParamRole::LinearBias) {
            Rng rng(mix_seed({seed, fnv1a(spec.name)}));
            const double bound = 1.0 / std::sqrt(static_cast<double>(spec.fan_in));
            for (float& v : t.data()) v = static_cast<float>(rng.uniform(-bound, bound));
        } else {
            const bool ones = spec.name.ends_with(".bn.weight") || spec.name.ends_with(".bn.running_var");
            for (float& v : t.data()) v = ones ? 1.0f : 0.0f;
        }
        if (!table.emplace(spec.name, std::move(t)).second)
            throw ConfigError("duplicate parameter name: " + spec.name);
    }
    return table;
}

/// An immutable classifier: layout plus named parameters. Safe to share
/// across threads once constructed.
class ModelGraph {
public:
    /// Validates that `params` holds exactly the layout's tensors with the
    /// expected shapes.
    ModelGraph(ModelConfig config, ParamTable params) : config_(std::move(config)), params_(std::move(params)) {
        segments_ = build_layout(config_);
        specs_ = parameter_specs(segments_);
        std::vector<std::string> missing;
        for (const auto& spec : specs_) {
            auto it = params_.find(spec.name);
            if (it == params_.end()) {
                missing.push_back(spec.name);
            } else if (!(it->second.shape() == spec.shape)) {
                throw DimensionError(spec.name, "parameter " + spec.name + " has shape " + it->second.shape().str() +
                                                    ", expected " + spec.shape.str());
            }
        }
        if (!missing.empty()) throw IncompleteContainerError(std::move(missing));
        if (params_.size() != specs_.size()) {
            for (auto it = params_.begin(); it != params_.end();) {
                const bool known = std::any_of(specs_.begin(), specs_.end(),
                                               [&](const ParamSpec& s) { return s.name == it->first; });
                it = known ? std::next(it) : params_.erase(it);
            }
        }
    }

    const ModelConfig& config() const noexcept { return config_; }
    const std::vector<Segment>& segments() const noexcept { return segments_; }
    const std::vector<ParamSpec>& specs() const noexcept { return specs_; }
    const ParamTable& parameters() const noexcept { return params_; }

    const Tensor& param(const std::string& name) const {
        auto it = params_.find(name);
        if (it == params_.end()) throw ArgumentError("unknown parameter: " + name);
        return it->second;
    }

    const Segment& segment(SegmentKind kind, std::size_t nth = 0) const {
        for (const auto& s : segments_)
            if (s.kind == kind && nth-- == 0) return s;
        throw ArgumentError(std::string("model has no segment of kind ") + to_string(kind));
    }

private:
    ModelConfig config_;
    ParamTable params_;
    std::vector<Segment> segments_;
    std::vector<ParamSpec> specs_;
};

inline ModelGraph build_model(const ModelConfig& config, std::uint64_t seed) {
    return ModelGraph(config, init_parameters(parameter_specs(build_layout(config)), seed));
}

namespace detail {

inline BatchNormParams bn_view(const ConvBnUnit& u, const ParamTable& p) {
    auto get = [&](std::string_view field) -> std::span<const float> {
        auto it = p.find(u.bn_name(field));
        if (it == p.end()) throw ArgumentError("missing parameter " + u.bn_name(field));
        return it->second.data();
    };
    return {get("running_mean"), get("running_var"), get("weight"), get("bias"), 1e-5f};
}

/// Same arithmetic as batchnorm_infer followed by relu, without the copies.
inline void batchnorm_inplace(Tensor& t, const BatchNormParams& bn, bool with_relu) {
    const Shape& s = t.shape();
    for (std::size_t c = 0; c < s.c; ++c) {
        const float denom = std::sqrt(bn.var[c] + bn.eps);
        const float mean = bn.mean[c], gamma = bn.gamma[c], beta = bn.beta[c];
        for (std::size_t n = 0; n < s.n; ++n) {
            for (float& v : t.plane(n, c)) {
                const float y = gamma * (v - mean) / denom + beta;
                v = with_relu ? (y > 0.0f ? y : 0.0f) : y;
            }
        }
    }
}

inline const Tensor& lookup(const ParamTable& p, const std::string& name) {
    auto it = p.find(name);
    if (it == p.end()) throw ArgumentError("missing parameter " + name);
    return it->second;
}

}  // namespace detail

inline Tensor conv_bn_forward(const Tensor& x, const ConvBnUnit& u, const ParamTable& params) {
    Tensor y = conv2d(x, detail::lookup(params, u.weight_name()), u.conv);
    detail::batchnorm_inplace(y, detail::bn_view(u, params), u.relu);
    return y;
}

inline Tensor run_units(Tensor x, const std::vector<ConvBnUnit>& units, const ParamTable& params) {
    for (const auto& u : units) x = conv_bn_forward(x, u, params);
    return x;
}

/// Regular: split channels, transform the right half, concat, shuffle(2).
/// Downsample: both branches see the full input at stride 2, concat, shuffle(2).
inline Tensor shuffle_block_forward(const Tensor& x, const Segment& block, const ParamTable& params) {
    if (block.kind != SegmentKind::ShuffleBlock) throw ArgumentError(block.name + " is not a shuffle block");
    const std::size_t c = x.shape().c;
    if (c != block.in_channels)
        throw DimensionError("channels", block.name + " expects " + std::to_string(block.in_channels) +
                                             " channels, got " + std::to_string(c));
    Tensor merged;
    if (block.downsample) {
        merged = concat_channels(run_units(x, block.left, params), run_units(x, block.right, params));
    } else {
        if (c % 2 != 0) throw ConfigError(block.name + ": regular block needs an even channel count");
        merged = concat_channels(slice_channels(x, 0, c / 2), run_units(slice_channels(x, c / 2, c / 2), block.right, params));
    }
    return channel_shuffle(merged, 2);
}

/// Intermediate values the explainer and embedding export need.
struct ForwardTrace {
    Tensor features;  // final 1x1 conv output after BN+ReLU, (N, C, H', W')
    Tensor pooled;    // global average pool of features, (N, C, 1, 1)
    Tensor hidden;    // fc1 pre-activation, (N, hidden, 1, 1)
    Tensor logits;    // (N, classes, 1, 1)
};

inline void check_input(const ModelGraph& model, const Tensor& batch) {
    const Shape& s = batch.shape();
    const std::size_t size = model.config().input_size;
    if (s.n == 0) throw DimensionError("batch", "forward needs at least one image");
    if (s.c != 3) throw DimensionError("channels", "forward expects 3 input channels, got " + std::to_string(s.c));
    if (s.h != size) throw DimensionError("height", "forward expects height " + std::to_string(size) + ", got " + std::to_string(s.h));
    if (s.w != size) throw DimensionError("width", "forward expects width " + std::to_string(size) + ", got " + std::to_string(s.w));
}

inline ForwardTrace forward_trace(const ModelGraph& model, const Tensor& batch) {
    check_input(model, batch);
    const ParamTable& p = model.parameters();
    ForwardTrace trace;
    Tensor x = batch;
    for (const auto& seg : model.segments()) {
        switch (seg.kind) {
            case SegmentKind::Stem:
                x = run_units(std::move(x), seg.units, p);
                break;
            case SegmentKind::MaxPool:
                x = maxpool2d(x, {3, 2, 1});
                break;
            case SegmentKind::ShuffleBlock:
                x = shuffle_block_forward(x, seg, p);
                break;
            case SegmentKind::FinalConv:
                x = run_units(std::move(x), seg.units, p);
                trace.features = x;
                break;
            case SegmentKind::GlobalPool:
                x = global_avg_pool(x);
                trace.pooled = x;
                break;
            case SegmentKind::Linear: {
                x = linear(x, detail::lookup(p, seg.linear.name + ".weight"),
                           detail::lookup(p, seg.linear.name + ".bias").data());
                if (seg.linear.relu) {
                    trace.hidden = x;
                    x = relu(x);
                }
                break;
            }
        }
    }
    trace.logits = std::move(x);
    return trace;
}

/// Logits, shape (N, num_classes, 1, 1).
inline Tensor forward(const ModelGraph& model, const Tensor& batch) { return forward_trace(model, batch).logits; }

/// Logit row n as a plain vector.
inline std::vector<float> logits_row(const Tensor& logits, std::size_t n = 0) {
    const std::size_t k = logits.shape().c;
    auto d = logits.data().subspan(n * k, k);
    return {d.begin(), d.end()};
}

}  // namespace canekit
