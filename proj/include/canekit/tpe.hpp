#pragma once

// Tree-structured Parzen Estimator over a mixed continuous / categorical
// search space. suggest() is a pure function of (history, space, config);
// the Study wrapper adds JSON-lines persistence.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "canekit/errors.hpp"
#include "canekit/rng.hpp"

namespace canekit::hpo {

enum class DimKind { Uniform, LogUniform, Categorical };

struct Dimension {
    std::string name;
    DimKind kind = DimKind::Uniform;
    double low = 0.0;
    double high = 1.0;
    std::vector<std::string> choices;  // categorical only

    static Dimension uniform(std::string name, double low, double high) {
        return {std::move(name), DimKind::Uniform, low, high, {}};
    }
    static Dimension log_uniform(std::string name, double low, double high) {
        return {std::move(name), DimKind::LogUniform, low, high, {}};
    }
    static Dimension categorical(std::string name, std::vector<std::string> choices) {
        const double k = static_cast<double>(choices.size());
        return {std::move(name), DimKind::Categorical, 0.0, k - 1.0, std::move(choices)};
    }

    bool is_categorical() const noexcept { return kind == DimKind::Categorical; }

    /// Bounds in the space the density model works in (log for log dims).
    double internal_low() const { return kind == DimKind::LogUniform ? std::log(low) : low; }
    double internal_high() const { return kind == DimKind::LogUniform ? std::log(high) : high; }
    double to_internal(double v) const { return kind == DimKind::LogUniform ? std::log(v) : v; }
    double from_internal(double v) const {
        return std::clamp(kind == DimKind::LogUniform ? std::exp(v) : v, low, high);
    }

    bool contains(double v) const {
        if (!std::isfinite(v)) return false;
        if (is_categorical()) return v >= 0.0 && v < static_cast<double>(choices.size()) && v == std::floor(v);
        return v >= low && v <= high;
    }

    void validate() const {
        if (name.empty()) throw ConfigError("search dimension without a name");
        if (is_categorical()) {
            if (choices.empty()) throw ConfigError("categorical dimension '" + name + "' has no choices");
            return;
        }
        if (!(low < high)) throw ConfigError("dimension '" + name + "' needs low < high");
        if (kind == DimKind::LogUniform && !(low > 0.0))
            throw ConfigError("log-scaled dimension '" + name + "' must be strictly positive");
    }
};

struct SearchSpace {
    std::vector<Dimension> dims;

    std::size_t size() const noexcept { return dims.size(); }

    std::size_t index_of(const std::string& name) const {
        for (std::size_t i = 0; i < dims.size(); ++i)
            if (dims[i].name == name) return i;
        throw ArgumentError("unknown search dimension '" + name + "'");
    }

    void validate() const {
        if (dims.empty()) throw ConfigError("search space is empty");
        for (std::size_t i = 0; i < dims.size(); ++i) {
            dims[i].validate();
            for (std::size_t j = 0; j < i; ++j)
                if (dims[j].name == dims[i].name) throw ConfigError("duplicate dimension '" + dims[i].name + "'");
        }
    }
};

/// Learning rate, optimizer, weight decay, two dropouts, freeze ratio,
/// label smoothing and gradient-clip norm with their published ranges.
inline SearchSpace default_space() {
    return {{Dimension::log_uniform("lr", 1e-5, 1e-2), Dimension::categorical("optimizer", {"Adam", "AdamW"}),
             Dimension::log_uniform("weight_decay", 1e-6, 1e-2), Dimension::uniform("dropout1", 0.1, 0.6),
             Dimension::uniform("dropout2", 0.1, 0.6), Dimension::uniform("freeze_ratio", 0.0, 0.8),
             Dimension::uniform("label_smoothing", 0.0, 0.2), Dimension::uniform("grad_clip", 0.5, 2.0)}};
}

/// One value per dimension, in space order. Categorical values hold the
/// choice index.
struct Assignment {
    std::vector<double> values;

    double get(const SearchSpace& space, const std::string& name) const { return values.at(space.index_of(name)); }
    const std::string& choice(const SearchSpace& space, const std::string& name) const {
        const std::size_t i = space.index_of(name);
        return space.dims[i].choices.at(static_cast<std::size_t>(values.at(i)));
    }
    friend bool operator==(const Assignment&, const Assignment&) = default;
};

enum class TrialState { Completed, Pruned };

inline const char* to_string(TrialState s) { return s == TrialState::Completed ? "completed" : "pruned"; }

struct TrialRecord {
    Assignment assignment;
    double objective = 0.0;  // lower is better
    TrialState state = TrialState::Completed;
};

struct TpeConfig {
    double gamma = 0.25;
    std::size_t n_startup = 10;
    std::size_t n_candidates = 24;
    double bandwidth_floor = 1e-3;  // fraction of the internal range
    std::uint64_t seed = 0;

    void validate() const {
        if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("gamma must lie in (0, 1)");
        if (n_startup < 1) throw ConfigError("n_startup must be at least 1");
        if (n_candidates < 1) throw ConfigError("n_candidates must be at least 1");
        if (!(bandwidth_floor > 0.0)) throw ConfigError("bandwidth floor must be positive");
    }
};

/// ceil(gamma * n), at least 1 when n > 0.
inline std::size_t good_count(std::size_t n, double gamma) {
    if (n == 0) return 0;
    const auto k = static_cast<std::size_t>(std::ceil(gamma * static_cast<double>(n) - 1e-12));
    return std::clamp<std::size_t>(k, 1, n);
}

namespace detail {

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

/// Equal-weight mixture of Gaussians truncated to [lo, hi]. A broad prior
/// kernel centred on the range keeps the density defined for empty or
/// single-point sets.
class ParzenEstimator {
public:
    ParzenEstimator(const std::vector<double>& points, double lo, double hi, double floor_fraction)
        : lo_(lo), hi_(hi) {
        const double range = hi - lo;
        double bw = range;
        if (points.size() >= 2) {
            const double n = static_cast<double>(points.size());
            const double mean = std::accumulate(points.begin(), points.end(), 0.0) / n;
            double ss = 0.0;
            for (double p : points) ss += (p - mean) * (p - mean);
            const double sd = std::sqrt(ss / (n - 1.0));
            bw = 1.06 * sd * std::pow(n, -0.2);
        }
        bw = std::clamp(bw, floor_fraction * range, range);
        for (double p : points) add(p, bw);
        add(0.5 * (lo + hi), range);
    }

    double log_density(double x) const {
        double acc = 0.0;
        for (const auto& k : kernels_) {
            const double z = (x - k.mu) / k.sigma;
            acc += std::exp(-0.5 * z * z) / (k.sigma * std::sqrt(2.0 * std::numbers::pi) * k.mass);
        }
        acc /= static_cast<double>(kernels_.size());
        return std::log(std::max(acc, std::numeric_limits<double>::min()));
    }

    double sample(Rng& rng) const {
        const auto& k = kernels_[rng.below(kernels_.size())];
        for (int attempt = 0; attempt < 64; ++attempt) {
            const double v = k.mu + k.sigma * rng.normal();
            if (v >= lo_ && v <= hi_) return v;
        }
        return std::clamp(k.mu, lo_, hi_);
    }

private:
    struct Kernel {
        double mu, sigma, mass;
    };

    void add(double mu, double sigma) {
        const double mass = normal_cdf((hi_ - mu) / sigma) - normal_cdf((lo_ - mu) / sigma);
        kernels_.push_back({mu, sigma, std::max(mass, 1e-300)});
    }

    double lo_, hi_;
    std::vector<Kernel> kernels_;
};

/// Smoothed frequencies (count + 1) / (n + K).
class CategoricalEstimator {
public:
    CategoricalEstimator(const std::vector<double>& points, std::size_t k) : probs_(k, 1.0) {
        for (double p : points) probs_[static_cast<std::size_t>(p)] += 1.0;
        const double total = static_cast<double>(points.size() + k);
        for (double& p : probs_) p /= total;
    }

    double log_density(double x) const { return std::log(probs_[static_cast<std::size_t>(x)]); }

    double sample(Rng& rng) const {
        const double u = rng.uniform();
        double acc = 0.0;
        for (std::size_t i = 0; i < probs_.size(); ++i) {
            acc += probs_[i];
            if (u < acc) return static_cast<double>(i);
        }
        return static_cast<double>(probs_.size() - 1);
    }

private:
    std::vector<double> probs_;
};

inline Assignment random_assignment(const SearchSpace& space, Rng& rng) {
    Assignment a;
    for (const auto& d : space.dims) {
        if (d.is_categorical())
            a.values.push_back(static_cast<double>(rng.below(d.choices.size())));
        else
            a.values.push_back(d.from_internal(rng.uniform(d.internal_low(), d.internal_high())));
    }
    return a;
}

}  // namespace detail

/// Indices of completed trials ordered best first; ties keep history order.
inline std::vector<std::size_t> ranked_completed(const std::vector<TrialRecord>& history) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < history.size(); ++i)
        if (history[i].state == TrialState::Completed) idx.push_back(i);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return history[a].objective < history[b].objective; });
    return idx;
}

/// Next assignment to evaluate.
inline Assignment suggest(const std::vector<TrialRecord>& history, const SearchSpace& space, const TpeConfig& cfg) {
    space.validate();
    cfg.validate();
    Rng rng(mix_seed({cfg.seed, history.size()}));
    const auto ranked = ranked_completed(history);
    if (ranked.size() < cfg.n_startup) return detail::random_assignment(space, rng);

    const std::size_t n_good = good_count(ranked.size(), cfg.gamma);
    const std::size_t dims = space.size();

    // Per-dimension estimators in internal coordinates.
    std::vector<double> candidate_score(cfg.n_candidates, 0.0);
    std::vector<Assignment> candidates(cfg.n_candidates);
    for (auto& c : candidates) c.values.resize(dims);

    for (std::size_t d = 0; d < dims; ++d) {
        const Dimension& dim = space.dims[d];
        std::vector<double> good, bad;
        for (std::size_t r = 0; r < ranked.size(); ++r) {
            const double v = history[ranked[r]].assignment.values.at(d);
            (r < n_good ? good : bad).push_back(dim.is_categorical() ? v : dim.to_internal(v));
        }
        if (dim.is_categorical()) {
            const detail::CategoricalEstimator l(good, dim.choices.size()), g(bad, dim.choices.size());
            for (std::size_t i = 0; i < cfg.n_candidates; ++i) {
                const double x = l.sample(rng);
                candidates[i].values[d] = x;
                candidate_score[i] += l.log_density(x) - g.log_density(x);
            }
        } else {
            const double lo = dim.internal_low(), hi = dim.internal_high();
            const detail::ParzenEstimator l(good, lo, hi, cfg.bandwidth_floor),
                g(bad, lo, hi, cfg.bandwidth_floor);
            for (std::size_t i = 0; i < cfg.n_candidates; ++i) {
                const double x = l.sample(rng);
                candidates[i].values[d] = dim.from_internal(x);
                candidate_score[i] += l.log_density(x) - g.log_density(x);
            }
        }
    }

    std::size_t best = 0;
    for (std::size_t i = 1; i < cfg.n_candidates; ++i)
        if (candidate_score[i] > candidate_score[best]) best = i;
    return candidates[best];
}

/// Validates the record against the space and appends it.
inline std::vector<TrialRecord> observe(std::vector<TrialRecord> history, const SearchSpace& space,
                                        TrialRecord record) {
    if (record.assignment.values.size() != space.size())
        throw ArgumentError("assignment has " + std::to_string(record.assignment.values.size()) +
                            " values, space has " + std::to_string(space.size()) + " dimensions");
    for (std::size_t d = 0; d < space.size(); ++d)
        if (!space.dims[d].contains(record.assignment.values[d]))
            throw ArgumentError("value for '" + space.dims[d].name + "' is outside its bounds");
    if (record.state == TrialState::Completed && !std::isfinite(record.objective))
        throw ArgumentError("completed trial needs a finite objective");
    history.push_back(std::move(record));
    return history;
}

/// Index of the best completed trial; earliest wins ties.
inline std::size_t best_index(const std::vector<TrialRecord>& history) {
    const auto ranked = ranked_completed(history);
    if (ranked.empty()) throw ArgumentError("no completed trials");
    return ranked.front();
}

inline const TrialRecord& best(const std::vector<TrialRecord>& history) { return history[best_index(history)]; }

// ------------------------------------------------------------- persistence

inline nlohmann::json assignment_to_json(const SearchSpace& space, const Assignment& a) {
    nlohmann::json j = nlohmann::json::object();
    for (std::size_t d = 0; d < space.size(); ++d) {
        const Dimension& dim = space.dims[d];
        if (dim.is_categorical())
            j[dim.name] = dim.choices.at(static_cast<std::size_t>(a.values.at(d)));
        else
            j[dim.name] = a.values.at(d);
    }
    return j;
}

inline Assignment assignment_from_json(const SearchSpace& space, const nlohmann::json& j) {
    Assignment a;
    for (const auto& dim : space.dims) {
        if (!j.contains(dim.name)) throw FormatError("assignment lacks '" + dim.name + "'");
        const auto& v = j.at(dim.name);
        if (dim.is_categorical()) {
            const auto s = v.get<std::string>();
            const auto it = std::find(dim.choices.begin(), dim.choices.end(), s);
            if (it == dim.choices.end()) throw FormatError("unknown choice '" + s + "' for '" + dim.name + "'");
            a.values.push_back(static_cast<double>(it - dim.choices.begin()));
        } else {
            a.values.push_back(v.get<double>());
        }
    }
    return a;
}

inline nlohmann::json record_to_json(const SearchSpace& space, const TrialRecord& r) {
    return {{"assignment", assignment_to_json(space, r.assignment)},
            {"objective", r.objective},
            {"state", to_string(r.state)}};
}

inline TrialRecord record_from_json(const SearchSpace& space, const nlohmann::json& j) {
    TrialRecord r;
    r.assignment = assignment_from_json(space, j.at("assignment"));
    r.objective = j.at("objective").get<double>();
    const auto state = j.at("state").get<std::string>();
    if (state == "completed")
        r.state = TrialState::Completed;
    else if (state == "pruned")
        r.state = TrialState::Pruned;
    else
        throw FormatError("unknown trial state '" + state + "'");
    return r;
}

/// Single-owner optimizer state with an optional append-only JSONL log.
/// Opening an existing log replays it.
class Study {
public:
    Study(SearchSpace space, TpeConfig cfg, std::optional<std::filesystem::path> log = {})
        : space_(std::move(space)), cfg_(cfg), log_(std::move(log)) {
        space_.validate();
        cfg_.validate();
        if (log_ && std::filesystem::exists(*log_)) replay(*log_);
    }

    Assignment ask() const { return suggest(history_, space_, cfg_); }

    void tell(const Assignment& a, double objective, TrialState state = TrialState::Completed) {
        TrialRecord r{a, objective, state};
        history_ = observe(std::move(history_), space_, r);
        if (log_) {
            std::ofstream out(*log_, std::ios::app);
            if (!out) throw IoError("cannot append to study log " + log_->string());
            out << record_to_json(space_, r).dump() << '\n';
        }
    }

    /// Runs `trials` ask/evaluate/tell rounds.
    template <class Objective>
    const TrialRecord& optimize(Objective&& objective, std::size_t trials) {
        for (std::size_t t = 0; t < trials; ++t) {
            const Assignment a = ask();
            tell(a, objective(a));
        }
        return best();
    }

    const TrialRecord& best() const { return hpo::best(history_); }
    const std::vector<TrialRecord>& history() const noexcept { return history_; }
    const SearchSpace& space() const noexcept { return space_; }

private:
    void replay(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw IoError("cannot read study log " + path.string());
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty()) continue;
            try {
                history_ = observe(std::move(history_), space_, record_from_json(space_, nlohmann::json::parse(line)));
            } catch (const nlohmann::json::exception& e) {
                throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
            }
        }
    }

    SearchSpace space_;
    TpeConfig cfg_;
    std::optional<std::filesystem::path> log_;
    std::vector<TrialRecord> history_;
};

}  // namespace canekit::hpo
