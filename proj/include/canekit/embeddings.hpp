#pragma once

// Penultimate-feature export (the pooled vector feeding the head) as CSV,
// for external projection tools such as t-SNE.

#include <filesystem>
#include <locale>
#include <sstream>
#include <string>
#include <vector>

#include "canekit/errors.hpp"
#include "canekit/image.hpp"
#include "canekit/model.hpp"
#include "canekit/preprocess.hpp"

namespace canekit {

struct EmbeddingInput {
    std::string image_id;
    std::string label;
    std::filesystem::path path;
};

struct EmbeddingRow {
    std::string image_id;
    std::string label;
    std::vector<float> features;
};

struct EmbeddingSkip {
    std::string image_id;
    std::string reason;
};

struct EmbeddingExport {
    std::vector<EmbeddingRow> rows;
    std::vector<EmbeddingSkip> skipped;
};

/// Pooled final-conv features of one image.
inline std::vector<float> embed(const ModelGraph& model, const Image& img) {
    const ForwardTrace trace = forward_trace(model, preprocess(img, model.config().input_size));
    auto d = trace.pooled.data();
    return {d.begin(), d.end()};
}

inline EmbeddingExport export_embeddings(const ModelGraph& model, const std::vector<EmbeddingInput>& images) {
    EmbeddingExport out;
    for (const auto& in : images) {
        try {
            out.rows.push_back({in.image_id, in.label, embed(model, load_image(in.path))});
        } catch (const FormatError& e) {
            out.skipped.push_back({in.image_id, e.what()});
        } catch (const IoError& e) {
            out.skipped.push_back({in.image_id, e.what()});
        }
    }
    return out;
}

namespace detail {
inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
}
}  // namespace detail

/// Header image_id,label,f0..f{D-1}; '.' decimal separator regardless of
/// the global locale.
inline std::string embeddings_csv(const EmbeddingExport& e, std::size_t dims) {
    std::ostringstream out;
    out.imbue(std::locale::classic());
    out.precision(9);
    out << "image_id,label";
    for (std::size_t i = 0; i < dims; ++i) out << ",f" << i;
    out << '\n';
    for (const auto& r : e.rows) {
        if (r.features.size() != dims) throw DimensionError("features", "embedding width differs from header");
        out << detail::csv_field(r.image_id) << ',' << detail::csv_field(r.label);
        for (float v : r.features) out << ',' << v;
        out << '\n';
    }
    return out.str();
}

}  // namespace canekit
