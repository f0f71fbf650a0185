#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "canekit/image.hpp"
#include "canekit/rng.hpp"

namespace fixture {

namespace fs = std::filesystem;

/// One row of the published augmentation table.
struct PublishedRow {
    std::string_view label;
    std::size_t original, train, factor, final_train;
};

inline constexpr std::array<PublishedRow, 17> kPublishedPlan = {{
    {"Eye Spot", 75, 60, 6, 420},        {"Red Leaf Spot", 43, 34, 6, 238},   {"Ring Spot", 83, 66, 6, 462},
    {"Brown Rust", 163, 130, 4, 650},    {"Dried Leaves", 185, 148, 4, 740},  {"Smut", 149, 119, 4, 595},
    {"Banded Chlorosis", 293, 234, 2, 702}, {"Grassy Shoot", 286, 228, 2, 684}, {"Mosaic", 376, 300, 2, 900},
    {"Pokkah Boeng", 227, 181, 3, 724},  {"Rust", 443, 354, 1, 708},          {"Sett Rot", 478, 382, 1, 764},
    {"Viral Disease", 425, 340, 1, 680}, {"Brown Spot", 1019, 815, 0, 815},   {"Healthy", 930, 744, 0, 744},
    {"RedRot", 731, 584, 0, 584},        {"Yellow Leaf", 1131, 904, 0, 904},
}};

inline std::vector<std::pair<std::string, std::size_t>> published_originals() {
    std::vector<std::pair<std::string, std::size_t>> out;
    for (const auto& r : kPublishedPlan) out.emplace_back(std::string(r.label), r.original);
    return out;
}

/// A fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        std::random_device rd;
        path_ = fs::temp_directory_path() / ("canekit_" + tag + "_" + std::to_string(rd()));
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const fs::path& path() const { return path_; }

private:
    fs::path path_;
};

/// A 9x8 gray image whose difference hash is exactly `bits`: each row walks
/// down by 12 where the bit is set and up by 12 otherwise.
inline canekit::Image image_with_dhash(std::uint64_t bits) {
    canekit::Image img(9, 8, 3);
    for (std::size_t y = 0; y < 8; ++y) {
        int v = 128;
        for (std::size_t x = 0; x < 9; ++x) {
            for (std::size_t c = 0; c < 3; ++c) img.at(x, y, c) = static_cast<std::uint8_t>(v);
            if (x == 8) break;
            const bool bit = (bits >> (63 - (y * 8 + x))) & 1u;
            v += bit ? -12 : 12;
        }
    }
    return img;
}

inline constexpr std::uint64_t kBaseHash = 0xA5C3'0F96'5AE1'3C78ULL;
inline constexpr std::uint64_t kNearMask = 0x8000'0400'0020'0001ULL;  // 4 bits
inline constexpr std::uint64_t kFarMask = 0x0101'0101'0101'0000ULL;   // 6 bits

/// Writes the five-file dedup corpus under root/<label>/:
///   f1 base, f2 byte copy of f1, f3 at distance 4, f4 at distance 6,
///   f5 the bitwise complement of f1.
inline void write_dedup_corpus(const fs::path& root, const std::string& label = "RedRot") {
    const fs::path dir = root / label;
    fs::create_directories(dir);
    const auto f1 = canekit::encode_png(image_with_dhash(kBaseHash));
    canekit::write_file(dir / "f1.png", f1);
    canekit::write_file(dir / "f2.png", f1);
    canekit::write_file(dir / "f3.png", canekit::encode_png(image_with_dhash(kBaseHash ^ kNearMask)));
    canekit::write_file(dir / "f4.png", canekit::encode_png(image_with_dhash(kBaseHash ^ kFarMask)));
    canekit::write_file(dir / "f5.png", canekit::encode_png(image_with_dhash(~kBaseHash)));
}

/// Deterministic leaf-like RGB test image: green blade with darker veins
/// and a few reddish lesions, plus seeded noise.
inline canekit::Image synthetic_leaf(std::size_t w = 256, std::size_t h = 192, std::uint64_t seed = 3) {
    canekit::Image img(w, h, 3);
    canekit::Rng rng(seed);
    const double cx = w / 2.0, cy = h / 2.0;
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            const double dx = (x - cx) / (0.48 * w), dy = (y - cy) / (0.30 * h);
            const bool blade = dx * dx + dy * dy < 1.0;
            double r = blade ? 60 : 200, g = blade ? 150 : 190, b = blade ? 50 : 170;
            if (blade && (static_cast<int>(x + y / 3) % 23 == 0)) g -= 40;
            for (int k = 0; k < 3; ++k) {
                const double lx = w * (0.3 + 0.2 * k), ly = h * (0.4 + 0.1 * k);
                if ((x - lx) * (x - lx) + (y - ly) * (y - ly) < 90.0) {
                    r = 170;
                    g = 60;
                    b = 40;
                }
            }
            const double noise = rng.uniform(-8.0, 8.0);
            img.at(x, y, 0) = static_cast<std::uint8_t>(std::clamp(r + noise, 0.0, 255.0));
            img.at(x, y, 1) = static_cast<std::uint8_t>(std::clamp(g + noise, 0.0, 255.0));
            img.at(x, y, 2) = static_cast<std::uint8_t>(std::clamp(b + noise, 0.0, 255.0));
        }
    return img;
}

}  // namespace fixture
