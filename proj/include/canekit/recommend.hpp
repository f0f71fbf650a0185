#pragma once

// Recommendation providers. Every answer has exactly three non-empty
// sections: cause, immediate steps, long-term control. The remote provider
// proxies to an HTTP endpoint and falls back to the local knowledge base on
// any failure, including timeouts.

#include <chrono>
#include <memory>
#include <optional>
#include <string>
#include <utility>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "canekit/classes.hpp"
#include "canekit/errors.hpp"

namespace canekit {

struct Recommendation {
    std::string disease;
    std::string cause;
    std::string immediate_steps;
    std::string long_term_control;
    std::string source;  // "local" or "remote"

    bool complete() const { return !cause.empty() && !immediate_steps.empty() && !long_term_control.empty(); }
};

inline nlohmann::json to_json(const Recommendation& r) {
    return {{"disease", r.disease},
            {"sections",
             {{"cause", r.cause}, {"immediate_steps", r.immediate_steps}, {"long_term_control", r.long_term_control}}},
            {"source", r.source}};
}

/// Raised for names outside the roster; the service maps it to 404.
class UnknownDiseaseError : public ArgumentError {
public:
    explicit UnknownDiseaseError(const std::string& name) : ArgumentError("unknown disease '" + name + "'") {}
};

class RecommendationProvider {
public:
    virtual ~RecommendationProvider() = default;
    virtual Recommendation recommend(const std::string& disease) const = 0;
};

class LocalProvider : public RecommendationProvider {
public:
    Recommendation recommend(const std::string& disease) const override {
        const auto idx = class_index(disease);
        if (!idx) throw UnknownDiseaseError(disease);
        const Advice& a = kKnowledgeBase[*idx];
        return {std::string(kClassNames[*idx]), std::string(a.cause), std::string(a.immediate_steps),
                std::string(a.long_term_control), "local"};
    }
};

struct RemoteSettings {
    std::string endpoint;  // e.g. http://host:port/path
    std::string api_key;   // sent as a bearer token when non-empty
    std::chrono::milliseconds timeout{5000};
};

/// Splits "scheme://host[:port]/path" into ("scheme://host[:port]", "/path").
inline std::pair<std::string, std::string> split_endpoint(const std::string& url) {
    const auto scheme = url.find("://");
    const std::size_t start = scheme == std::string::npos ? 0 : scheme + 3;
    const auto slash = url.find('/', start);
    if (slash == std::string::npos) return {url, "/"};
    return {url.substr(0, slash), url.substr(slash)};
}

class RemoteProvider : public RecommendationProvider {
public:
    explicit RemoteProvider(RemoteSettings settings) : settings_(std::move(settings)) {}

    Recommendation recommend(const std::string& disease) const override {
        // Unknown names are rejected locally; only roster classes go remote.
        Recommendation fallback = local_.recommend(disease);
        if (auto remote = query(fallback.disease)) return *remote;
        return fallback;
    }

    std::optional<Recommendation> query(const std::string& disease) const {
        try {
            const auto [base, path] = split_endpoint(settings_.endpoint);
            httplib::Client cli(base);
            const auto secs = settings_.timeout.count() / 1000;
            const auto usecs = (settings_.timeout.count() % 1000) * 1000;
            cli.set_connection_timeout(secs, usecs);
            cli.set_read_timeout(secs, usecs);
            cli.set_write_timeout(secs, usecs);
            httplib::Headers headers;
            if (!settings_.api_key.empty()) headers.emplace("Authorization", "Bearer " + settings_.api_key);
            const auto res =
                cli.Post(path, headers, nlohmann::json{{"disease", disease}}.dump(), "application/json");
            if (!res || res->status != 200) return std::nullopt;
            const auto body = nlohmann::json::parse(res->body);
            const auto& s = body.at("sections");
            Recommendation r{disease, s.at("cause").get<std::string>(), s.at("immediate_steps").get<std::string>(),
                             s.at("long_term_control").get<std::string>(), "remote"};
            if (!r.complete()) return std::nullopt;
            return r;
        } catch (const std::exception&) {
            return std::nullopt;
        }
    }

private:
    RemoteSettings settings_;
    LocalProvider local_;
};

inline std::unique_ptr<RecommendationProvider> make_provider(const std::string& endpoint, const std::string& key) {
    if (endpoint.empty()) return std::make_unique<LocalProvider>();
    return std::make_unique<RemoteProvider>(RemoteSettings{endpoint, key, std::chrono::milliseconds(5000)});
}

}  // namespace canekit
