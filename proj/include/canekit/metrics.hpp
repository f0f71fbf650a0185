#pragma once

// Multi-class evaluation: confusion matrix, accuracy / precision / recall /
// F1 (per class, macro, weighted), Wilson intervals, ROC-AUC and average
// precision with tie-aware threshold sweeps.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "canekit/errors.hpp"

namespace canekit::metrics {

/// K x K counts; rows are true classes, columns predicted classes.
class ConfusionMatrix {
public:
    explicit ConfusionMatrix(std::size_t classes) : k_(classes), counts_(classes * classes, 0) {}

    std::size_t classes() const noexcept { return k_; }
    std::uint64_t operator()(std::size_t truth, std::size_t pred) const { return counts_[truth * k_ + pred]; }
    std::uint64_t& operator()(std::size_t truth, std::size_t pred) { return counts_[truth * k_ + pred]; }

    std::uint64_t total() const { return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0}); }
    std::uint64_t row_sum(std::size_t c) const {
        std::uint64_t s = 0;
        for (std::size_t j = 0; j < k_; ++j) s += (*this)(c, j);
        return s;
    }
    std::uint64_t col_sum(std::size_t c) const {
        std::uint64_t s = 0;
        for (std::size_t i = 0; i < k_; ++i) s += (*this)(i, c);
        return s;
    }
    std::uint64_t trace() const {
        std::uint64_t s = 0;
        for (std::size_t i = 0; i < k_; ++i) s += (*this)(i, i);
        return s;
    }

    std::uint64_t tp(std::size_t c) const { return (*this)(c, c); }
    std::uint64_t fp(std::size_t c) const { return col_sum(c) - tp(c); }
    std::uint64_t fn(std::size_t c) const { return row_sum(c) - tp(c); }
    std::uint64_t tn(std::size_t c) const { return total() - tp(c) - fp(c) - fn(c); }

    friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

private:
    std::size_t k_;
    std::vector<std::uint64_t> counts_;
};

inline ConfusionMatrix confusion(std::span<const std::size_t> truth, std::span<const std::size_t> pred,
                                 std::size_t classes) {
    if (truth.size() != pred.size())
        throw ArgumentError("label vectors differ in length (" + std::to_string(truth.size()) + " vs " +
                            std::to_string(pred.size()) + ")");
    if (classes == 0) throw ArgumentError("class count must be positive");
    ConfusionMatrix cm(classes);
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] >= classes || pred[i] >= classes)
            throw ArgumentError("label out of range at index " + std::to_string(i));
        ++cm(truth[i], pred[i]);
    }
    return cm;
}

namespace detail {
inline void require_nonempty(const ConfusionMatrix& cm) {
    if (cm.classes() == 0 || cm.total() == 0) throw ArgumentError("confusion matrix is empty");
}
inline double ratio(std::uint64_t num, std::uint64_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}
}  // namespace detail

/// Overall accuracy: correct / total.
inline double accuracy(const ConfusionMatrix& cm) {
    detail::require_nonempty(cm);
    return detail::ratio(cm.trace(), cm.total());
}

struct Interval {
    double low = 0.0;
    double high = 0.0;
};

inline constexpr double kZ95 = 1.959964;

/// Wilson score interval for k successes in n trials.
inline Interval wilson_ci(std::uint64_t k, std::uint64_t n, double z = kZ95) {
    if (n == 0) throw ArgumentError("wilson_ci needs at least one trial");
    if (k > n) throw ArgumentError("wilson_ci successes exceed trials");
    const double nn = static_cast<double>(n);
    const double p = static_cast<double>(k) / nn;
    const double z2 = z * z;
    const double denom = 1.0 + z2 / nn;
    const double center = (p + z2 / (2.0 * nn)) / denom;
    const double half = z / denom * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn));
    Interval ci{std::clamp(center - half, 0.0, 1.0), std::clamp(center + half, 0.0, 1.0)};
    if (k == 0) ci.low = 0.0;
    if (k == n) ci.high = 1.0;
    return ci;
}

struct ClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::uint64_t support = 0;
    double accuracy = 0.0;      // TP / support, the class-wise accuracy
    double ovr_accuracy = 0.0;  // (TP + TN) / total, one-vs-rest
    Interval ci;                // Wilson 95% on TP out of support
    bool precision_undefined = false;  // no predictions of this class
    bool recall_undefined = false;     // no samples of this class
};

/// Per-class metrics. F1 is 2TP / (2TP + FP + FN), which equals the harmonic
/// mean of precision and recall and is 0 when both are 0.
inline std::vector<ClassMetrics> precision_recall_f1(const ConfusionMatrix& cm) {
    detail::require_nonempty(cm);
    std::vector<ClassMetrics> out(cm.classes());
    const std::uint64_t total = cm.total();
    for (std::size_t c = 0; c < cm.classes(); ++c) {
        const std::uint64_t tp = cm.tp(c), fp = cm.fp(c), fn = cm.fn(c), tn = cm.tn(c);
        ClassMetrics& m = out[c];
        m.support = tp + fn;
        m.precision_undefined = tp + fp == 0;
        m.recall_undefined = m.support == 0;
        m.precision = detail::ratio(tp, tp + fp);
        m.recall = detail::ratio(tp, tp + fn);
        m.f1 = detail::ratio(2 * tp, 2 * tp + fp + fn);
        m.accuracy = m.recall;
        m.ovr_accuracy = detail::ratio(tp + tn, total);
        m.ci = m.support > 0 ? wilson_ci(tp, m.support) : Interval{0.0, 1.0};
    }
    return out;
}

struct Averages {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

inline Averages macro_average(const std::vector<ClassMetrics>& per_class) {
    Averages a;
    if (per_class.empty()) return a;
    for (const auto& m : per_class) {
        a.precision += m.precision;
        a.recall += m.recall;
        a.f1 += m.f1;
    }
    const double k = static_cast<double>(per_class.size());
    return {a.precision / k, a.recall / k, a.f1 / k};
}

inline Averages weighted_average(const std::vector<ClassMetrics>& per_class) {
    Averages a;
    double total = 0.0;
    for (const auto& m : per_class) {
        const double w = static_cast<double>(m.support);
        a.precision += w * m.precision;
        a.recall += w * m.recall;
        a.f1 += w * m.f1;
        total += w;
    }
    if (total == 0.0) return {};
    return {a.precision / total, a.recall / total, a.f1 / total};
}

/// Unweighted mean of per-class F1.
inline double macro_f1(const ConfusionMatrix& cm) { return macro_average(precision_recall_f1(cm)).f1; }

// ---------------------------------------------------------------- curves

struct CurvePoint {
    double threshold = 0.0;
    double x = 0.0;  // ROC: false-positive rate; PR: recall
    double y = 0.0;  // ROC: true-positive rate; PR: precision
};

struct RocResult {
    std::vector<CurvePoint> points;  // starts at (0, 0), ends at (1, 1)
    double auc = 0.0;
};

struct PrResult {
    std::vector<CurvePoint> points;
    double average_precision = 0.0;
};

namespace detail {

struct SweepStep {
    double threshold;
    std::uint64_t tp;
    std::uint64_t fp;
};

/// Cumulative (tp, fp) after admitting each group of equal scores, in
/// descending score order.
inline std::vector<SweepStep> sweep(std::span<const double> scores, std::span<const bool> positive) {
    if (scores.size() != positive.size()) throw ArgumentError("scores and labels differ in length");
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    std::vector<SweepStep> steps;
    std::uint64_t tp = 0, fp = 0;
    for (std::size_t i = 0; i < order.size();) {
        const double t = scores[order[i]];
        for (; i < order.size() && scores[order[i]] == t; ++i) (positive[order[i]] ? tp : fp) += 1;
        steps.push_back({t, tp, fp});
    }
    return steps;
}

}  // namespace detail

/// One-vs-rest ROC with trapezoidal AUC. Tied scores enter together, which
/// makes the AUC equal the Mann-Whitney statistic with ties counted as 1/2.
inline RocResult roc_auc(std::span<const double> scores, std::span<const bool> positive) {
    const auto pos = static_cast<std::uint64_t>(std::count(positive.begin(), positive.end(), true));
    const std::uint64_t neg = positive.size() - pos;
    if (pos == 0 || neg == 0) throw ArgumentError("AUC is undefined without both positive and negative samples");
    RocResult r;
    r.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
    double prev_x = 0.0, prev_y = 0.0;
    for (const auto& s : detail::sweep(scores, positive)) {
        const double x = static_cast<double>(s.fp) / static_cast<double>(neg);
        const double y = static_cast<double>(s.tp) / static_cast<double>(pos);
        r.auc += (x - prev_x) * (y + prev_y) / 2.0;
        r.points.push_back({s.threshold, x, y});
        prev_x = x;
        prev_y = y;
    }
    return r;
}

/// Precision-recall sweep; AP = sum over thresholds of (R_i - R_{i-1}) * P_i.
inline PrResult pr_curve_ap(std::span<const double> scores, std::span<const bool> positive) {
    const auto pos = static_cast<std::uint64_t>(std::count(positive.begin(), positive.end(), true));
    if (pos == 0) throw ArgumentError("average precision is undefined without positive samples");
    PrResult r;
    double prev_recall = 0.0;
    for (const auto& s : detail::sweep(scores, positive)) {
        const double recall = static_cast<double>(s.tp) / static_cast<double>(pos);
        const double precision = static_cast<double>(s.tp) / static_cast<double>(s.tp + s.fp);
        r.average_precision += (recall - prev_recall) * precision;
        r.points.push_back({s.threshold, recall, precision});
        prev_recall = recall;
    }
    return r;
}

// ---------------------------------------------------------------- report

struct ClassRow {
    std::string name;
    ClassMetrics metrics;
    std::optional<double> auc;
    std::optional<double> average_precision;
};

struct EvalReport {
    std::size_t samples = 0;
    double accuracy = 0.0;
    Averages macro;
    Averages weighted;
    std::vector<ClassRow> per_class;
};

/// `scores`, when given, is row-major samples x classes (e.g. softmax
/// outputs) aligned with `truth`; it adds per-class AUC and AP.
inline EvalReport report(const ConfusionMatrix& cm, const std::vector<std::string>& class_names,
                         std::span<const std::size_t> truth = {}, std::span<const double> scores = {}) {
    if (class_names.size() != cm.classes()) throw ArgumentError("class name count does not match matrix size");
    EvalReport r;
    r.samples = cm.total();
    r.accuracy = accuracy(cm);
    const auto per_class = precision_recall_f1(cm);
    r.macro = macro_average(per_class);
    r.weighted = weighted_average(per_class);
    const std::size_t k = cm.classes();
    const bool have_scores = !scores.empty();
    if (have_scores && scores.size() != truth.size() * k)
        throw ArgumentError("score matrix must be samples x classes");
    for (std::size_t c = 0; c < k; ++c) {
        ClassRow row{class_names[c], per_class[c], std::nullopt, std::nullopt};
        if (have_scores) {
            std::vector<double> col(truth.size());
            std::unique_ptr<bool[]> flags(new bool[truth.size()]);
            std::size_t npos = 0;
            for (std::size_t i = 0; i < truth.size(); ++i) {
                col[i] = scores[i * k + c];
                flags[i] = truth[i] == c;
                npos += flags[i] ? 1 : 0;
            }
            std::span<const bool> labels(flags.get(), truth.size());
            if (npos > 0 && npos < truth.size()) row.auc = roc_auc(col, labels).auc;
            if (npos > 0) row.average_precision = pr_curve_ap(col, labels).average_precision;
        }
        r.per_class.push_back(std::move(row));
    }
    return r;
}

inline nlohmann::json report_to_json(const EvalReport& r) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : r.per_class) {
        const ClassMetrics& m = row.metrics;
        nlohmann::json j = {{"class", row.name},
                            {"precision", m.precision},
                            {"recall", m.recall},
                            {"f1", m.f1},
                            {"support", m.support},
                            {"accuracy", m.accuracy},
                            {"ci_low", m.ci.low},
                            {"ci_high", m.ci.high},
                            {"precision_undefined", m.precision_undefined},
                            {"recall_undefined", m.recall_undefined}};
        j["auc"] = row.auc ? nlohmann::json(*row.auc) : nlohmann::json(nullptr);
        j["average_precision"] =
            row.average_precision ? nlohmann::json(*row.average_precision) : nlohmann::json(nullptr);
        rows.push_back(std::move(j));
    }
    return {{"samples", r.samples},
            {"accuracy", r.accuracy},
            {"macro_precision", r.macro.precision},
            {"macro_recall", r.macro.recall},
            {"macro_f1", r.macro.f1},
            {"weighted_precision", r.weighted.precision},
            {"weighted_recall", r.weighted.recall},
            {"weighted_f1", r.weighted.f1},
            {"per_class", rows}};
}

/// Per-class table; the header comment row is not emitted, overall figures
/// live in the JSON form.
inline std::string report_to_csv(const EvalReport& r) {
    std::ostringstream out;
    out.precision(17);
    out << "class,precision,recall,f1,support,accuracy,ci_low,ci_high,auc,average_precision\n";
    for (const auto& row : r.per_class) {
        const ClassMetrics& m = row.metrics;
        out << '"' << row.name << "\"," << m.precision << ',' << m.recall << ',' << m.f1 << ',' << m.support << ','
            << m.accuracy << ',' << m.ci.low << ',' << m.ci.high << ',';
        if (row.auc) out << *row.auc;
        out << ',';
        if (row.average_precision) out << *row.average_precision;
        out << '\n';
    }
    return out.str();
}

}  // namespace canekit::metrics
