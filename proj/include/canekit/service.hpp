#pragma once

// Diagnosis service: predictor pipeline plus the HTTP JSON API
//   POST /predict    multipart image -> top-5 + Grad-CAM overlay
//   GET  /classes    roster in canonical order
//   GET  /health     status, version, container checksum
//   POST /recommend  {"disease": name} -> three-section advice
// and optional static serving of the web UI bundle.

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <iostream>
#include <memory>
#include <mutex>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "canekit/classes.hpp"
#include "canekit/errors.hpp"
#include "canekit/gradcam.hpp"
#include "canekit/image.hpp"
#include "canekit/md5.hpp"
#include "canekit/model.hpp"
#include "canekit/preprocess.hpp"
#include "canekit/recommend.hpp"
#include "canekit/weights.hpp"

namespace canekit {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr std::size_t kMaxUploadBytes = 10u * 1024u * 1024u;
inline constexpr std::size_t kTopK = 5;

inline std::string base64_encode(std::span<const std::uint8_t> bytes) {
    std::string out(4 * ((bytes.size() + 2) / 3), '\0');
    const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                  static_cast<int>(bytes.size()));
    out.resize(static_cast<std::size_t>(n));
    return out;
}

inline std::vector<std::uint8_t> base64_decode(const std::string& text) {
    std::vector<std::uint8_t> out(3 * (text.size() / 4) + 3);
    const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()),
                                  static_cast<int>(text.size()));
    if (n < 0) throw FormatError("invalid base64");
    std::size_t len = static_cast<std::size_t>(n);
    // EVP_DecodeBlock keeps the zero bytes that stand in for '=' padding.
    for (auto it = text.rbegin(); it != text.rend() && *it == '=' && len > 0; ++it) --len;
    out.resize(len);
    return out;
}

inline std::string class_name(std::size_t index) {
    return index < kNumClasses ? std::string(kClassNames[index]) : "class_" + std::to_string(index);
}

struct ScoredClass {
    std::string name;
    std::size_t index = 0;
    double confidence = 0.0;
};

struct Prediction {
    ScoredClass top1;
    std::vector<ScoredClass> top5;
    std::vector<std::uint8_t> gradcam_png;
    double latency_ms = 0.0;
};

inline nlohmann::json to_json(const ScoredClass& s) {
    return {{"class", s.name}, {"index", s.index}, {"confidence", s.confidence}};
}

inline nlohmann::json to_json(const Prediction& p) {
    nlohmann::json top5 = nlohmann::json::array();
    for (const auto& s : p.top5) top5.push_back(to_json(s));
    return {{"top1", to_json(p.top1)},
            {"top5", top5},
            {"gradcam", base64_encode(p.gradcam_png)},
            {"latency_ms", p.latency_ms}};
}

/// The k most probable classes, descending; ties keep the lower index first.
inline std::vector<ScoredClass> top_k(const std::vector<double>& probs, std::size_t k) {
    std::vector<std::size_t> order(probs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    k = std::min(k, order.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                      [&](std::size_t a, std::size_t b) { return probs[a] > probs[b] || (probs[a] == probs[b] && a < b); });
    std::vector<ScoredClass> out;
    for (std::size_t i = 0; i < k; ++i) out.push_back({class_name(order[i]), order[i], probs[order[i]]});
    return out;
}

/// decode -> preprocess -> forward -> softmax -> top-5 -> Grad-CAM on top-1.
inline Prediction predict_image(const ModelGraph& model, std::span<const std::uint8_t> bytes) {
    const auto start = std::chrono::steady_clock::now();
    const Image img = decode_image(bytes);
    const std::size_t size = model.config().input_size;
    const ForwardTrace trace = forward_trace(model, preprocess(img, size));
    const auto probs = softmax(trace.logits.data());

    Prediction p;
    p.top5 = top_k(probs, kTopK);
    p.top1 = p.top5.front();
    const auto cam = xai::gradcam_from_activations(xai::HeadView::of(model), trace.features, p.top1.index);
    p.gradcam_png = encode_png(xai::overlay(cam.normalized_map, resize_image(img, size)));
    p.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return p;
}

class ModelNotLoadedError : public std::runtime_error {
public:
    ModelNotLoadedError() : std::runtime_error("model is not loaded yet") {}
};

/// Shared state behind the HTTP routes. The model is immutable once
/// published; requests take a shared_ptr snapshot.
class DiagnosisService {
public:
    explicit DiagnosisService(std::unique_ptr<RecommendationProvider> provider = std::make_unique<LocalProvider>())
        : provider_(std::move(provider)) {}

    void set_model(ModelGraph model, std::string checksum) {
        auto ptr = std::make_shared<const ModelGraph>(std::move(model));
        std::lock_guard lock(mu_);
        model_ = std::move(ptr);
        checksum_ = std::move(checksum);
    }

    /// Reads, validates and publishes a container. Returns load warnings.
    std::vector<std::string> load_file(const std::filesystem::path& path) {
        const auto bytes = read_file(path);
        auto result = load_weights(bytes);
        set_model(std::move(result.model), md5_hex(bytes));
        return result.warnings;
    }

    std::shared_ptr<const ModelGraph> model() const {
        std::lock_guard lock(mu_);
        return model_;
    }

    bool loaded() const { return model() != nullptr; }

    Prediction predict(std::span<const std::uint8_t> bytes) const {
        const auto m = model();
        if (!m) throw ModelNotLoadedError();
        return predict_image(*m, bytes);
    }

    Recommendation recommend(const std::string& disease) const { return provider_->recommend(disease); }

    nlohmann::json health() const {
        std::lock_guard lock(mu_);
        nlohmann::json j = {{"status", model_ ? "ok" : "loading"}, {"version", kVersion}};
        j["checksum"] = model_ ? nlohmann::json(checksum_) : nlohmann::json(nullptr);
        return j;
    }

private:
    mutable std::mutex mu_;
    std::shared_ptr<const ModelGraph> model_;
    std::string checksum_;
    std::unique_ptr<RecommendationProvider> provider_;
};

struct ServerOptions {
    std::string ui_dir;  // static bundle; empty disables
    std::size_t max_upload = kMaxUploadBytes;
    bool log_requests = true;
};

namespace detail {

inline void json_reply(httplib::Response& res, int status, const nlohmann::json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

inline void error_reply(httplib::Response& res, int status, const std::string& code, const std::string& message) {
    json_reply(res, status, {{"error", {{"code", code}, {"message", message}}}});
}

inline std::string status_code_name(int status) {
    switch (status) {
        case 400: return "bad_request";
        case 404: return "not_found";
        case 405: return "method_not_allowed";
        case 413: return "payload_too_large";
        case 503: return "unavailable";
        default: return status >= 500 ? "internal_error" : "client_error";
    }
}

/// The uploaded image: the "image" multipart field, else the first file
/// part, else the raw body.
inline std::optional<std::string> upload_bytes(const httplib::Request& req) {
    if (req.is_multipart_form_data()) {
        if (req.has_file("image")) return req.get_file_value("image").content;
        if (!req.files.empty()) return req.files.begin()->second.content;
        return std::nullopt;
    }
    if (req.body.empty()) return std::nullopt;
    return req.body;
}

}  // namespace detail

/// Installs the API routes, error handlers and optional UI mount.
inline void build_routes(httplib::Server& server, DiagnosisService& service, const ServerOptions& opts = {}) {
    server.set_payload_max_length(opts.max_upload + 64 * 1024);

    server.Post("/predict", [&service, max = opts.max_upload](const httplib::Request& req, httplib::Response& res) {
        if (!service.loaded()) return detail::error_reply(res, 503, "model_not_loaded", "model is still loading");
        const auto body = detail::upload_bytes(req);
        if (!body) return detail::error_reply(res, 400, "missing_image", "expected an image upload");
        if (body->size() > max) return detail::error_reply(res, 413, "payload_too_large", "image exceeds 10 MB");
        try {
            const auto* p = reinterpret_cast<const std::uint8_t*>(body->data());
            detail::json_reply(res, 200, to_json(service.predict({p, body->size()})));
        } catch (const FormatError& e) {
            detail::error_reply(res, 400, "undecodable_image", e.what());
        } catch (const ModelNotLoadedError& e) {
            detail::error_reply(res, 503, "model_not_loaded", e.what());
        }
    });

    server.Get("/classes", [](const httplib::Request&, httplib::Response& res) {
        nlohmann::json names = nlohmann::json::array();
        for (auto n : kClassNames) names.push_back(std::string(n));
        detail::json_reply(res, 200, names);
    });

    server.Get("/health", [&service](const httplib::Request&, httplib::Response& res) {
        detail::json_reply(res, 200, service.health());
    });

    server.Post("/recommend", [&service](const httplib::Request& req, httplib::Response& res) {
        std::string disease;
        try {
            const auto body = nlohmann::json::parse(req.body);
            disease = body.at("disease").get<std::string>();
        } catch (const nlohmann::json::exception&) {
            return detail::error_reply(res, 400, "bad_request", "expected JSON body {\"disease\": name}");
        }
        try {
            detail::json_reply(res, 200, to_json(service.recommend(disease)));
        } catch (const UnknownDiseaseError& e) {
            detail::error_reply(res, 404, "unknown_disease", e.what());
        }
    });

    if (!opts.ui_dir.empty()) {
        if (!server.set_mount_point("/", opts.ui_dir))
            throw IoError("UI directory not found: " + opts.ui_dir);
    }

    server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        std::string msg = "unexpected failure";
        try {
            if (ep) std::rethrow_exception(ep);
        } catch (const std::exception& e) {
            msg = e.what();
        } catch (...) {
        }
        detail::error_reply(res, 500, "internal_error", msg);
    });

    server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
        if (res.body.empty())
            detail::error_reply(res, res.status, detail::status_code_name(res.status), httplib::status_message(res.status));
        return httplib::Server::HandlerResponse::Handled;
    });

    if (opts.log_requests) {
        server.set_logger([](const httplib::Request& req, const httplib::Response& res) {
            std::cerr << nlohmann::json{{"event", "request"},
                                        {"method", req.method},
                                        {"path", req.path},
                                        {"status", res.status},
                                        {"bytes", res.body.size()}}
                             .dump()
                      << '\n';
        });
    }
}

}  // namespace canekit
