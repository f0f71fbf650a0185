#pragma once

// Single-thread, batch-1 latency benchmark with the static cost figures
// alongside, for side-by-side display with published reference numbers.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "canekit/cost.hpp"
#include "canekit/errors.hpp"
#include "canekit/model.hpp"
#include "canekit/rng.hpp"
#include "canekit/weights.hpp"

namespace canekit {

inline constexpr std::size_t kMinBenchRuns = 30;
inline constexpr std::size_t kMinBenchWarmup = 10;

/// Published figures for the reference deployment of this backbone.
struct ReferenceRow {
    double latency_ms = 4.14;
    double params_millions = 2.19;
    double mmacs = 152.43;
    double size_mb = 9.26;
};

struct BenchReport {
    std::size_t warmup = 0;
    std::size_t runs = 0;
    std::vector<double> samples_ms;
    double mean_ms = 0.0;
    double median_ms = 0.0;
    double p95_ms = 0.0;
    double min_ms = 0.0;
    double max_ms = 0.0;
    std::uint64_t macs = 0;
    std::uint64_t params = 0;
    std::uint64_t buffers = 0;
    std::uint64_t file_bytes = 0;
};

/// Linear-interpolated quantile of sorted data, q in [0, 1].
inline double quantile_sorted(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) throw ArgumentError("quantile of empty sample");
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline void summarize(BenchReport& r) {
    std::vector<double> s = r.samples_ms;
    std::sort(s.begin(), s.end());
    r.runs = s.size();
    r.mean_ms = std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size());
    r.median_ms = quantile_sorted(s, 0.5);
    r.p95_ms = quantile_sorted(s, 0.95);
    r.min_ms = s.front();
    r.max_ms = s.back();
}

/// Times `runs` forwards of one seeded random image after `warmup` untimed
/// ones. `file_bytes` defaults to the serialized container size.
inline BenchReport bench(const ModelGraph& model, std::size_t runs = 100, std::size_t warmup = kMinBenchWarmup,
                         std::uint64_t seed = 0, std::optional<std::uint64_t> file_bytes = {}) {
    if (runs < kMinBenchRuns) throw ArgumentError("bench needs at least 30 measured runs");
    if (warmup < kMinBenchWarmup) throw ArgumentError("bench needs at least 10 warmup runs");
    const std::size_t size = model.config().input_size;
    Tensor input({1, 3, size, size});
    Rng rng(seed);
    for (float& v : input.data()) v = static_cast<float>(rng.normal());

    for (std::size_t i = 0; i < warmup; ++i) (void)forward(model, input);

    BenchReport r;
    r.warmup = warmup;
    r.samples_ms.reserve(runs);
    for (std::size_t i = 0; i < runs; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        const Tensor out = forward(model, input);
        const auto t1 = std::chrono::steady_clock::now();
        if (!out.all_finite()) throw ConsistencyError("benchmark forward produced non-finite logits");
        r.samples_ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    summarize(r);

    const CostReport cost = count_macs(model, size, size);
    r.macs = cost.total_macs;
    r.params = cost.total_params;
    r.buffers = cost.total_buffers;
    r.file_bytes = file_bytes.value_or(cost.file_bytes);
    return r;
}

inline BenchReport bench_file(const std::filesystem::path& path, std::size_t runs = 100,
                              std::size_t warmup = kMinBenchWarmup) {
    if (!std::filesystem::exists(path)) throw IoError("model file not found: " + path.string());
    const auto loaded = load_weights_file(path);
    return bench(loaded.model, runs, warmup, 0, std::filesystem::file_size(path));
}

inline nlohmann::json to_json(const BenchReport& r, const ReferenceRow& ref = {}) {
    return {{"warmup", r.warmup},
            {"runs", r.runs},
            {"mean_ms", r.mean_ms},
            {"median_ms", r.median_ms},
            {"p95_ms", r.p95_ms},
            {"min_ms", r.min_ms},
            {"max_ms", r.max_ms},
            {"macs", r.macs},
            {"params", r.params},
            {"buffers", r.buffers},
            {"file_bytes", r.file_bytes},
            {"samples_ms", r.samples_ms},
            {"reference",
             {{"latency_ms", ref.latency_ms},
              {"params_millions", ref.params_millions},
              {"mmacs", ref.mmacs},
              {"size_mb", ref.size_mb}}}};
}

/// Human-readable comparison table.
inline std::string format_report(const BenchReport& r, const ReferenceRow& ref = {}) {
    std::ostringstream out;
    out.setf(std::ios::fixed);
    out.precision(2);
    out << "metric              measured      reference\n";
    out << "latency mean (ms)   " << r.mean_ms << "\t\t" << ref.latency_ms << '\n';
    out << "latency median (ms) " << r.median_ms << '\n';
    out << "latency p95 (ms)    " << r.p95_ms << '\n';
    out << "params (M)          " << static_cast<double>(r.params) / 1e6 << "\t\t" << ref.params_millions << '\n';
    out << "MACs (MMac)         " << static_cast<double>(r.macs) / 1e6 << "\t\t" << ref.mmacs << '\n';
    out << "size (MB)           " << static_cast<double>(r.file_bytes) / 1e6 << "\t\t" << ref.size_mb
        << '\n';
    out << "runs " << r.runs << ", warmup " << r.warmup << '\n';
    return out.str();
}

}  // namespace canekit
