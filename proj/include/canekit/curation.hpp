#pragma once

// Dataset curation: exact (MD5) and near-duplicate (dHash-64, Hamming <= 5)
// removal, canonical renaming, stratified 80/20 splits, tiered augmentation
// planning and deterministic augmentation.

#include <algorithm>
#include <array>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "canekit/errors.hpp"
#include "canekit/image.hpp"
#include "canekit/md5.hpp"
#include "canekit/preprocess.hpp"
#include "canekit/rng.hpp"
#include "canekit/tensor.hpp"

namespace canekit::curation {

namespace fs = std::filesystem;

inline constexpr int kNearDuplicateBits = 5;

// ---------------------------------------------------------------- hashing

inline Md5Digest hash_exact(std::span<const std::uint8_t> bytes) { return md5(bytes); }

inline Md5Digest hash_exact_file(const fs::path& path) { return md5(read_file(path)); }

/// Difference hash: luma, bilinear resize to 9 wide x 8 tall, bit set where a
/// pixel is brighter than its right neighbour. Row-major, first bit is the MSB.
inline std::uint64_t phash64(const Image& img) {
    if (img.empty() || img.channels < 3) throw FormatError("phash64 needs a decoded RGB image");
    Tensor gray({1, 1, img.height, img.width});
    auto g = gray.data();
    for (std::size_t y = 0; y < img.height; ++y)
        for (std::size_t x = 0; x < img.width; ++x)
            g[y * img.width + x] =
                0.299f * img.at(x, y, 0) + 0.587f * img.at(x, y, 1) + 0.114f * img.at(x, y, 2);
    const Tensor small = bilinear_resize(gray, 8, 9);
    std::uint64_t hash = 0;
    int bit = 63;
    for (std::size_t y = 0; y < 8; ++y)
        for (std::size_t x = 0; x < 8; ++x, --bit)
            if (small.at(0, 0, y, x) > small.at(0, 0, y, x + 1)) hash |= 1ULL << bit;
    return hash;
}

inline std::uint64_t phash64_bytes(std::span<const std::uint8_t> bytes) { return phash64(decode_image(bytes)); }

inline int hamming(std::uint64_t a, std::uint64_t b) { return std::popcount(a ^ b); }

// ---------------------------------------------------------------- corpus

enum class Role { Unassigned, Train, Test, RemovedExact, RemovedNear };

inline const char* to_string(Role r) {
    switch (r) {
        case Role::Unassigned: return "unassigned";
        case Role::Train: return "train";
        case Role::Test: return "test";
        case Role::RemovedExact: return "removed_exact";
        case Role::RemovedNear: return "removed_near";
    }
    return "?";
}

struct CorpusEntry {
    std::string path;
    std::string label;
    Md5Digest digest{};
    std::uint64_t dhash = 0;
    Role role = Role::Unassigned;
    std::string matched;  // surviving entry a removed file duplicated
};

struct SkippedFile {
    std::string path;
    std::string reason;
};

struct Corpus {
    std::vector<CorpusEntry> entries;
    std::vector<SkippedFile> skipped;
};

inline bool is_image_file(const fs::path& p) {
    auto ext = p.extension().string();
    for (auto& ch : ext) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    return ext == ".jpg" || ext == ".jpeg" || ext == ".png";
}

/// Scan a root with one subdirectory per class. Hashes are computed once per
/// file; undecodable files are skipped with a reason.
inline Corpus scan_corpus(const fs::path& root) {
    if (!fs::is_directory(root)) throw IoError("not a directory: " + root.string());
    Corpus corpus;
    std::vector<fs::path> class_dirs;
    for (const auto& d : fs::directory_iterator(root))
        if (d.is_directory()) class_dirs.push_back(d.path());
    std::sort(class_dirs.begin(), class_dirs.end());
    for (const auto& dir : class_dirs) {
        std::vector<fs::path> files;
        for (const auto& f : fs::directory_iterator(dir))
            if (f.is_regular_file() && is_image_file(f.path())) files.push_back(f.path());
        std::sort(files.begin(), files.end());
        for (const auto& f : files) {
            const auto bytes = read_file(f);
            try {
                CorpusEntry e;
                e.path = f.generic_string();
                e.label = dir.filename().string();
                e.digest = hash_exact(bytes);
                e.dhash = phash64_bytes(bytes);
                corpus.entries.push_back(std::move(e));
            } catch (const FormatError& err) {
                corpus.skipped.push_back({f.generic_string(), err.what()});
            }
        }
    }
    return corpus;
}

// ---------------------------------------------------------------- dedup

struct Removal {
    std::string path;
    std::string label;
    Role kind = Role::RemovedExact;
    std::string matched;
    int distance = 0;
};

struct DedupResult {
    std::vector<CorpusEntry> survivors;
    std::vector<Removal> removals;

    std::size_t exact_count() const {
        return static_cast<std::size_t>(
            std::count_if(removals.begin(), removals.end(), [](const Removal& r) { return r.kind == Role::RemovedExact; }));
    }
    std::size_t near_count() const { return removals.size() - exact_count(); }
};

/// Pass 1 drops byte-identical files, keeping the lexicographically smallest
/// path. Pass 2 walks survivors in path order and drops any image within
/// `threshold` Hamming bits of an image already kept. Runs over the whole
/// corpus, across classes.
inline DedupResult dedup(std::vector<CorpusEntry> entries, int threshold = kNearDuplicateBits) {
    std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) { return a.path < b.path; });
    DedupResult result;

    std::map<Md5Digest, std::size_t> first_by_digest;
    std::vector<CorpusEntry> unique;
    for (auto& e : entries) {
        auto [it, inserted] = first_by_digest.emplace(e.digest, unique.size());
        if (inserted) {
            unique.push_back(std::move(e));
        } else {
            const CorpusEntry& keep = unique[it->second];
            result.removals.push_back({e.path, e.label, Role::RemovedExact, keep.path, 0});
        }
    }

    for (auto& e : unique) {
        const CorpusEntry* match = nullptr;
        int best = 65;
        for (const auto& kept : result.survivors) {
            const int d = hamming(e.dhash, kept.dhash);
            if (d <= threshold && d < best) {
                best = d;
                match = &kept;
            }
        }
        if (match) {
            result.removals.push_back({e.path, e.label, Role::RemovedNear, match->path, best});
        } else {
            result.survivors.push_back(std::move(e));
        }
    }
    return result;
}

inline std::string removal_report_csv(const DedupResult& r) {
    std::ostringstream out;
    out << "path,class,kind,matched,distance\n";
    for (const auto& rm : r.removals)
        out << rm.path << ',' << rm.label << ',' << (rm.kind == Role::RemovedExact ? "exact" : "near") << ','
            << rm.matched << ',' << rm.distance << '\n';
    return out.str();
}

// ---------------------------------------------------------------- renaming

struct RenameEntry {
    std::string old_path;
    std::string label;
    std::string new_name;
};

/// "Red Rot" -> "RedRot": the label with whitespace and separators removed.
inline std::string class_stem(const std::string& label) {
    std::string out;
    for (char ch : label)
        if (std::isalnum(static_cast<unsigned char>(ch))) out.push_back(ch);
    return out;
}

inline std::string canonical_extension(const std::string& path) {
    auto ext = fs::path(path).extension().string();
    for (auto& ch : ext) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    if (ext.empty() || ext == ".jpeg") return ".jpg";
    return ext;
}

/// Per-class sequential names ClassName_0001.jpg, ordered by original path.
/// The original extension is kept (lower-cased, .jpeg -> .jpg).
inline std::vector<RenameEntry> rename_normalize(const std::vector<CorpusEntry>& survivors) {
    std::map<std::string, std::vector<const CorpusEntry*>> by_class;
    for (const auto& e : survivors) by_class[e.label].push_back(&e);
    std::vector<RenameEntry> out;
    std::map<std::string, std::string> taken;  // new name -> old path
    for (auto& [label, members] : by_class) {
        std::sort(members.begin(), members.end(), [](auto* a, auto* b) { return a->path < b->path; });
        const std::string stem = class_stem(label);
        if (stem.empty()) throw ConsistencyError("class label '" + label + "' has no usable characters");
        for (std::size_t i = 0; i < members.size(); ++i) {
            char index[16];
            std::snprintf(index, sizeof index, "%04zu", i + 1);
            std::string name = stem + "_" + index + canonical_extension(members[i]->path);
            auto [it, inserted] = taken.emplace(name, members[i]->path);
            if (!inserted)
                throw ConsistencyError("rename collision: " + members[i]->path + " and " + it->second + " both map to " +
                                       name);
            out.push_back({members[i]->path, label, std::move(name)});
        }
    }
    return out;
}

inline std::string manifest_csv(const std::vector<RenameEntry>& entries) {
    std::ostringstream out;
    out << "old_path,class,new_name\n";
    for (const auto& e : entries) out << e.old_path << ',' << e.label << ',' << e.new_name << '\n';
    return out.str();
}

inline std::vector<RenameEntry> parse_manifest_csv(const std::string& text) {
    std::vector<RenameEntry> out;
    std::istringstream in(text);
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
        if (header) {
            header = false;
            continue;
        }
        if (line.empty()) continue;
        const auto a = line.find(',');
        const auto b = line.rfind(',');
        if (a == std::string::npos || a == b) throw FormatError("malformed manifest row: " + line);
        out.push_back({line.substr(0, a), line.substr(a + 1, b - a - 1), line.substr(b + 1)});
    }
    return out;
}

// ---------------------------------------------------------------- splitting

struct SplitCounts {
    std::size_t train = 0;
    std::size_t test = 0;
};

/// train = floor(fraction * n), test = n - train.
inline SplitCounts split_counts(std::size_t n, double train_fraction = 0.8) {
    if (!(train_fraction >= 0.0 && train_fraction <= 1.0)) throw ArgumentError("train fraction must be in [0, 1]");
    // The epsilon keeps exact products such as 0.8 * 75 from flooring to 59.
    const auto train = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(n) + 1e-9));
    return {std::min(train, n), n - std::min(train, n)};
}

struct SplitAssignment {
    std::map<std::string, std::vector<std::string>> train;
    std::map<std::string, std::vector<std::string>> test;
};

/// Seeded Fisher-Yates shuffle inside each class, then the first floor(0.8 n)
/// members go to train. Member lists are sorted first so the result depends
/// only on the set of paths and the seed.
inline SplitAssignment stratified_split(const std::map<std::string, std::vector<std::string>>& members,
                                        double train_fraction, std::uint64_t seed) {
    SplitAssignment out;
    for (const auto& [label, paths] : members) {
        std::vector<std::string> order = paths;
        std::sort(order.begin(), order.end());
        Rng rng(mix_seed({seed, fnv1a(label)}));
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
        const SplitCounts counts = split_counts(order.size(), train_fraction);
        out.train[label].assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(counts.train));
        out.test[label].assign(order.begin() + static_cast<std::ptrdiff_t>(counts.train), order.end());
    }
    return out;
}

// ---------------------------------------------------------------- planning

/// Extra augmented copies per training image, by the class's size after dedup:
/// [0,100) 6, [100,200) 4, [200,250) 3, [250,400) 2, [400,500) 1, 500+ 0.
inline std::size_t augmentation_factor(std::size_t original) {
    if (original < 100) return 6;
    if (original < 200) return 4;
    if (original < 250) return 3;
    if (original < 400) return 2;
    if (original < 500) return 1;
    return 0;
}

struct PlanRow {
    std::string label;
    std::size_t original = 0;
    std::size_t train = 0;
    std::size_t test = 0;
    std::size_t factor = 0;
    std::size_t final_train = 0;
};

struct CurationPlan {
    std::vector<PlanRow> rows;

    std::size_t total(std::size_t PlanRow::*field) const {
        std::size_t s = 0;
        for (const auto& r : rows) s += r.*field;
        return s;
    }

    static double ratio(const std::vector<PlanRow>& rows, std::size_t PlanRow::*field) {
        if (rows.empty()) return 0.0;
        auto [lo, hi] = std::minmax_element(rows.begin(), rows.end(),
                                            [&](const PlanRow& a, const PlanRow& b) { return a.*field < b.*field; });
        if ((*lo).*field == 0) return std::numeric_limits<double>::infinity();
        return static_cast<double>((*hi).*field) / static_cast<double>((*lo).*field);
    }

    /// max / min class size before augmentation.
    double original_imbalance() const { return ratio(rows, &PlanRow::original); }
    /// max / min final training count.
    double final_imbalance() const { return ratio(rows, &PlanRow::final_train); }
};

/// Rows in input order: split counts plus tier factor and final training size
/// train * (1 + factor).
inline CurationPlan augmentation_plan(const std::vector<std::pair<std::string, std::size_t>>& originals,
                                      double train_fraction = 0.8) {
    CurationPlan plan;
    for (const auto& [label, n] : originals) {
        const SplitCounts s = split_counts(n, train_fraction);
        const std::size_t f = augmentation_factor(n);
        plan.rows.push_back({label, n, s.train, s.test, f, s.train * (1 + f)});
    }
    return plan;
}

inline nlohmann::json plan_to_json(const CurationPlan& plan) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : plan.rows)
        rows.push_back({{"class", r.label},
                        {"original", r.original},
                        {"train", r.train},
                        {"test", r.test},
                        {"augmentation_factor", r.factor},
                        {"final_train", r.final_train}});
    return {{"classes", rows},
            {"totals",
             {{"original", plan.total(&PlanRow::original)},
              {"train", plan.total(&PlanRow::train)},
              {"test", plan.total(&PlanRow::test)},
              {"augmented", plan.total(&PlanRow::final_train) - plan.total(&PlanRow::train)},
              {"final_train", plan.total(&PlanRow::final_train)}}},
            {"imbalance", {{"original", plan.original_imbalance()}, {"final", plan.final_imbalance()}}}};
}

// ---------------------------------------------------------------- augmentation

enum class AugKind { HorizontalFlip, VerticalFlip, Rotate, Brightness, Contrast, CropResize };
inline constexpr std::size_t kAugKinds = 6;

inline const char* to_string(AugKind k) {
    switch (k) {
        case AugKind::HorizontalFlip: return "hflip";
        case AugKind::VerticalFlip: return "vflip";
        case AugKind::Rotate: return "rotate";
        case AugKind::Brightness: return "brightness";
        case AugKind::Contrast: return "contrast";
        case AugKind::CropResize: return "crop_resize";
    }
    return "?";
}

struct AugmentationOp {
    AugKind kind{};
    double amount = 0.0;    // degrees for Rotate, gain for Brightness/Contrast
    double offset_x = 0.0;  // CropResize window origin as a fraction of the slack
    double offset_y = 0.0;
};

/// Op `index` for an image: kinds are drawn without replacement from a
/// per-image permutation, cycling with fresh parameters past six.
inline AugmentationOp augmentation_op(std::uint64_t image_id, std::size_t index, std::uint64_t seed) {
    Rng perm_rng(mix_seed({seed, image_id, 0xA11}));
    std::array<std::size_t, kAugKinds> perm{0, 1, 2, 3, 4, 5};
    for (std::size_t i = kAugKinds; i > 1; --i) std::swap(perm[i - 1], perm[perm_rng.below(i)]);
    Rng rng(mix_seed({seed, image_id, index + 1}));
    AugmentationOp op;
    op.kind = static_cast<AugKind>(perm[index % kAugKinds]);
    switch (op.kind) {
        case AugKind::Rotate: op.amount = rng.uniform(-25.0, 25.0); break;
        case AugKind::Brightness:
        case AugKind::Contrast: op.amount = rng.uniform(0.8, 1.2); break;
        case AugKind::CropResize:
            op.offset_x = rng.uniform();
            op.offset_y = rng.uniform();
            break;
        default: break;
    }
    return op;
}

namespace detail {

inline float sample_clamped(std::span<const float> plane, std::size_t w, std::size_t h, double x, double y) {
    x = std::clamp(x, 0.0, static_cast<double>(w - 1));
    y = std::clamp(y, 0.0, static_cast<double>(h - 1));
    const auto x0 = static_cast<std::size_t>(x), y0 = static_cast<std::size_t>(y);
    const std::size_t x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
    const auto fx = static_cast<float>(x - static_cast<double>(x0));
    const auto fy = static_cast<float>(y - static_cast<double>(y0));
    const float top = plane[y0 * w + x0] + (plane[y0 * w + x1] - plane[y0 * w + x0]) * fx;
    const float bot = plane[y1 * w + x0] + (plane[y1 * w + x1] - plane[y1 * w + x0]) * fx;
    return top + (bot - top) * fy;
}

}  // namespace detail

/// Apply one op to a (1, 3, S, S) [0, 1] tensor; output has the same shape.
inline Tensor apply_op(const Tensor& src, const AugmentationOp& op) {
    const Shape& s = src.shape();
    Tensor out(s);
    for (std::size_t c = 0; c < s.c; ++c) {
        auto in = src.plane(0, c);
        auto dst = out.plane(0, c);
        double mean = 0.0;
        if (op.kind == AugKind::Contrast) {
            for (float v : in) mean += v;
            mean /= static_cast<double>(in.size());
        }
        const double theta = op.amount * std::numbers::pi / 180.0;
        const double cx = (static_cast<double>(s.w) - 1) / 2, cy = (static_cast<double>(s.h) - 1) / 2;
        const double crop_w = 0.9 * static_cast<double>(s.w), crop_h = 0.9 * static_cast<double>(s.h);
        const double ox = op.offset_x * (static_cast<double>(s.w) - crop_w);
        const double oy = op.offset_y * (static_cast<double>(s.h) - crop_h);
        for (std::size_t y = 0; y < s.h; ++y) {
            for (std::size_t x = 0; x < s.w; ++x) {
                float v = 0.0f;
                switch (op.kind) {
                    case AugKind::HorizontalFlip: v = in[y * s.w + (s.w - 1 - x)]; break;
                    case AugKind::VerticalFlip: v = in[(s.h - 1 - y) * s.w + x]; break;
                    case AugKind::Rotate: {
                        const double dx = static_cast<double>(x) - cx, dy = static_cast<double>(y) - cy;
                        const double sx = cx + dx * std::cos(theta) + dy * std::sin(theta);
                        const double sy = cy - dx * std::sin(theta) + dy * std::cos(theta);
                        v = detail::sample_clamped(in, s.w, s.h, sx, sy);
                        break;
                    }
                    case AugKind::Brightness: v = static_cast<float>(in[y * s.w + x] * op.amount); break;
                    case AugKind::Contrast:
                        v = static_cast<float>((in[y * s.w + x] - mean) * op.amount + mean);
                        break;
                    case AugKind::CropResize: {
                        const double sx = ox + (static_cast<double>(x) + 0.5) * crop_w / static_cast<double>(s.w) - 0.5;
                        const double sy = oy + (static_cast<double>(y) + 0.5) * crop_h / static_cast<double>(s.h) - 0.5;
                        v = detail::sample_clamped(in, s.w, s.h, sx, sy);
                        break;
                    }
                }
                dst[y * s.w + x] = std::clamp(v, 0.0f, 1.0f);
            }
        }
    }
    return out;
}

/// `factor` augmented 224x224 copies of a training image. Deterministic in
/// (image_id, seed).
inline std::vector<Image> apply_augmentations(const Image& img, std::size_t factor, std::uint64_t seed,
                                              std::uint64_t image_id = 0, std::size_t size = kInputSize) {
    std::vector<Image> out;
    if (factor == 0) return out;
    const Tensor base = [&] {
        Tensor t = image_to_tensor(img);
        return (img.width == size && img.height == size) ? t : bilinear_resize(t, size, size);
    }();
    out.reserve(factor);
    for (std::size_t i = 0; i < factor; ++i) out.push_back(tensor_to_image(apply_op(base, augmentation_op(image_id, i, seed))));
    return out;
}

}  // namespace canekit::curation
