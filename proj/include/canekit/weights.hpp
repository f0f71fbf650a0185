#pragma once

// CNEW weight container.
//
//   offset 0   magic "CNEW"
//          4   format version, u32 little-endian
//          8   header length L, u64 little-endian
//         16   header: L bytes of UTF-8 JSON
//     16 + L   payload: raw little-endian f32 values
//
// Header: {"config": {...}, "tensors": [{"name", "dtype": "f32", "shape",
// "offset", "byte_length"}, ...]}. Offsets are relative to the payload start,
// ascending and non-overlapping; tensors are listed in sorted name order so
// identical models serialize to identical bytes.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "canekit/errors.hpp"
#include "canekit/image.hpp"
#include "canekit/model.hpp"

namespace canekit {

inline constexpr std::uint32_t kContainerVersion = 1;
inline constexpr std::size_t kContainerPreamble = 16;

inline nlohmann::json config_to_json(const ModelConfig& c) {
    return {{"input_size", c.input_size},       {"stem_channels", c.stem_channels},
            {"stage_blocks", c.stage_blocks},   {"stage_channels", c.stage_channels},
            {"final_conv_channels", c.final_conv_channels},
            {"head_hidden", c.head_hidden},     {"num_classes", c.num_classes},
            {"dropout1", c.dropout1},           {"dropout2", c.dropout2}};
}

inline ModelConfig config_from_json(const nlohmann::json& j) {
    ModelConfig c;
    try {
        c.input_size = j.value("input_size", c.input_size);
        c.stem_channels = j.value("stem_channels", c.stem_channels);
        c.stage_blocks = j.value("stage_blocks", c.stage_blocks);
        c.stage_channels = j.value("stage_channels", c.stage_channels);
        c.final_conv_channels = j.value("final_conv_channels", c.final_conv_channels);
        c.head_hidden = j.value("head_hidden", c.head_hidden);
        c.num_classes = j.value("num_classes", c.num_classes);
        c.dropout1 = j.value("dropout1", c.dropout1);
        c.dropout2 = j.value("dropout2", c.dropout2);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("invalid model config in container header: ") + e.what());
    }
    return c;
}

struct ContainerEntry {
    std::string name;
    std::vector<std::size_t> shape;
    std::uint64_t offset = 0;
    std::uint64_t byte_length = 0;
};

/// Parsed preamble and header; `payload` views the caller's buffer.
struct ContainerView {
    std::uint32_t version = 0;
    nlohmann::json header;
    std::vector<ContainerEntry> entries;
    std::span<const std::uint8_t> payload;
};

namespace detail {

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
inline void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
inline std::uint64_t get_le(std::span<const std::uint8_t> b, std::size_t at, std::size_t width) {
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(b[at + i]) << (8 * i);
    return v;
}

}  // namespace detail

inline std::vector<std::uint8_t> save_weights(const ModelGraph& model) {
    nlohmann::json tensors = nlohmann::json::array();
    std::uint64_t offset = 0;
    for (const auto& [name, t] : model.parameters()) {
        const Shape& s = t.shape();
        const std::uint64_t len = 4ULL * t.numel();
        tensors.push_back({{"name", name},
                           {"dtype", "f32"},
                           {"shape", {s.n, s.c, s.h, s.w}},
                           {"offset", offset},
                           {"byte_length", len}});
        offset += len;
    }
    const nlohmann::json header = {{"config", config_to_json(model.config())}, {"tensors", tensors}};
    const std::string text = header.dump();

    std::vector<std::uint8_t> out;
    out.reserve(kContainerPreamble + text.size() + offset);
    for (char ch : std::string_view("CNEW")) out.push_back(static_cast<std::uint8_t>(ch));
    detail::put_u32(out, kContainerVersion);
    detail::put_u64(out, text.size());
    out.insert(out.end(), text.begin(), text.end());
    for (const auto& [name, t] : model.parameters())
        for (float v : t.data()) detail::put_u32(out, std::bit_cast<std::uint32_t>(v));
    return out;
}

/// Validate the preamble, header, and entry table against the buffer.
inline ContainerView read_container(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kContainerPreamble) throw FormatError("container too short for preamble");
    if (std::memcmp(bytes.data(), "CNEW", 4) != 0) throw FormatError("bad magic: not a CNEW weight container");
    ContainerView view;
    view.version = static_cast<std::uint32_t>(detail::get_le(bytes, 4, 4));
    if (view.version != kContainerVersion)
        throw FormatError("unsupported container version " + std::to_string(view.version));
    const std::uint64_t header_len = detail::get_le(bytes, 8, 8);
    if (header_len > bytes.size() - kContainerPreamble) throw FormatError("header length exceeds container size");
    const std::string text(reinterpret_cast<const char*>(bytes.data() + kContainerPreamble), header_len);
    try {
        view.header = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("container header is not valid JSON: ") + e.what());
    }
    if (!view.header.is_object() || !view.header.contains("tensors") || !view.header["tensors"].is_array())
        throw FormatError("container header lacks a tensor list");
    view.payload = bytes.subspan(kContainerPreamble + header_len);

    std::uint64_t cursor = 0;
    for (const auto& e : view.header["tensors"]) {
        ContainerEntry entry;
        try {
            entry.name = e.at("name").get<std::string>();
            if (e.at("dtype").get<std::string>() != "f32")
                throw FormatError("tensor " + entry.name + " has unsupported dtype");
            entry.shape = e.at("shape").get<std::vector<std::size_t>>();
            entry.offset = e.at("offset").get<std::uint64_t>();
            entry.byte_length = e.at("byte_length").get<std::uint64_t>();
        } catch (const nlohmann::json::exception& ex) {
            throw FormatError(std::string("malformed tensor entry: ") + ex.what());
        }
        if (entry.shape.empty() || entry.shape.size() > 4)
            throw FormatError("tensor " + entry.name + " must have rank 1 to 4");
        std::uint64_t count = 1;
        for (auto d : entry.shape) count *= d;
        if (entry.byte_length != 4 * count)
            throw FormatError("tensor " + entry.name + ": byte_length " + std::to_string(entry.byte_length) +
                              " does not match shape (expected " + std::to_string(4 * count) + ")");
        if (entry.offset < cursor)
            throw FormatError("tensor " + entry.name + ": offsets must be ascending and non-overlapping");
        if (entry.offset + entry.byte_length > view.payload.size())
            throw FormatError("tensor " + entry.name + ": payload truncated");
        cursor = entry.offset + entry.byte_length;
        view.entries.push_back(std::move(entry));
    }
    return view;
}

/// The model config recorded in a container header, if any.
inline std::optional<ModelConfig> container_config(std::span<const std::uint8_t> bytes) {
    auto view = read_container(bytes);
    if (!view.header.contains("config")) return std::nullopt;
    return config_from_json(view.header["config"]);
}

struct LoadResult {
    ModelGraph model;
    std::vector<std::string> warnings;
};

/// Decode a container against `config`. Missing tensors raise
/// IncompleteContainerError; tensors the layout does not know are reported as
/// warnings and dropped.
inline LoadResult load_weights(std::span<const std::uint8_t> bytes, const ModelConfig& config) {
    const ContainerView view = read_container(bytes);
    const auto specs = parameter_specs(build_layout(config));

    std::map<std::string, const ContainerEntry*> by_name;
    for (const auto& e : view.entries)
        if (!by_name.emplace(e.name, &e).second) throw FormatError("tensor " + e.name + " listed twice");

    ParamTable params;
    std::vector<std::string> missing;
    for (const auto& spec : specs) {
        auto it = by_name.find(spec.name);
        if (it == by_name.end()) {
            missing.push_back(spec.name);
            continue;
        }
        const ContainerEntry& e = *it->second;
        std::size_t dims[4] = {1, 1, 1, 1};
        for (std::size_t i = 0; i < e.shape.size(); ++i) dims[i] = e.shape[i];
        const Shape shape{dims[0], dims[1], dims[2], dims[3]};
        if (!(shape == spec.shape))
            throw FormatError("tensor " + spec.name + " has shape " + shape.str() + ", layout expects " +
                              spec.shape.str());
        std::vector<float> values(shape.numel());
        const auto* src = view.payload.data() + e.offset;
        for (std::size_t i = 0; i < values.size(); ++i)
            values[i] = std::bit_cast<float>(static_cast<std::uint32_t>(detail::get_le({src, e.byte_length}, 4 * i, 4)));
        params.emplace(spec.name, Tensor(shape, std::move(values)));
    }
    if (!missing.empty()) throw IncompleteContainerError(std::move(missing));

    std::vector<std::string> warnings;
    for (const auto& e : view.entries) {
        const bool known = std::any_of(specs.begin(), specs.end(), [&](const ParamSpec& s) { return s.name == e.name; });
        if (!known) warnings.push_back("ignoring unknown tensor " + e.name);
    }
    return {ModelGraph(config, std::move(params)), std::move(warnings)};
}

/// Load with the config stored in the header (default config when absent).
inline LoadResult load_weights(std::span<const std::uint8_t> bytes) {
    return load_weights(bytes, container_config(bytes).value_or(ModelConfig{}));
}

inline void save_weights_file(const std::filesystem::path& path, const ModelGraph& model) {
    write_file(path, save_weights(model));
}

inline LoadResult load_weights_file(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    return load_weights(bytes);
}

}  // namespace canekit
