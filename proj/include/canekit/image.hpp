#pragma once

// 8-bit interleaved images plus codec glue. Decoding and encoding go through
// OpenCV's imgcodecs; every pixel operation stays in canekit's own kernels.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "canekit/errors.hpp"
#include "canekit/tensor.hpp"

namespace canekit {

/// Row-major interleaved pixels: RGB (channels = 3) or RGBA (channels = 4).
struct Image {
    std::size_t width = 0;
    std::size_t height = 0;
    std::size_t channels = 3;
    std::vector<std::uint8_t> pixels;

    Image() = default;
    Image(std::size_t w, std::size_t h, std::size_t ch, std::uint8_t fill = 0)
        : width(w), height(h), channels(ch), pixels(w * h * ch, fill) {}

    std::uint8_t& at(std::size_t x, std::size_t y, std::size_t ch) { return pixels[(y * width + x) * channels + ch]; }
    std::uint8_t at(std::size_t x, std::size_t y, std::size_t ch) const {
        return pixels[(y * width + x) * channels + ch];
    }
    bool empty() const noexcept { return pixels.empty(); }
    friend bool operator==(const Image&, const Image&) = default;
};

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError("failed reading " + path.string());
    return bytes;
}

inline void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("failed writing " + path.string());
}

/// Decode JPEG/PNG (anything imgcodecs understands) into RGB.
inline Image decode_image(std::span<const std::uint8_t> bytes) {
    if (bytes.empty()) throw FormatError("empty image buffer");
    cv::Mat raw(1, static_cast<int>(bytes.size()), CV_8UC1, const_cast<std::uint8_t*>(bytes.data()));
    cv::Mat bgr;
    try {
        bgr = cv::imdecode(raw, cv::IMREAD_COLOR);
    } catch (const cv::Exception& e) {
        throw FormatError(std::string("image decode failed: ") + e.what());
    }
    if (bgr.empty() || bgr.type() != CV_8UC3) throw FormatError("bytes are not a decodable JPEG/PNG image");
    Image img(static_cast<std::size_t>(bgr.cols), static_cast<std::size_t>(bgr.rows), 3);
    for (int y = 0; y < bgr.rows; ++y) {
        const auto* row = bgr.ptr<cv::Vec3b>(y);
        for (int x = 0; x < bgr.cols; ++x) {
            img.at(x, y, 0) = row[x][2];
            img.at(x, y, 1) = row[x][1];
            img.at(x, y, 2) = row[x][0];
        }
    }
    return img;
}

inline Image load_image(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    try {
        return decode_image(bytes);
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

namespace detail {

inline cv::Mat to_bgr_mat(const Image& img) {
    if (img.channels != 3 && img.channels != 4) throw ArgumentError("only RGB and RGBA images can be encoded");
    const int type = img.channels == 3 ? CV_8UC3 : CV_8UC4;
    cv::Mat m(static_cast<int>(img.height), static_cast<int>(img.width), type);
    for (std::size_t y = 0; y < img.height; ++y) {
        auto* row = m.ptr<std::uint8_t>(static_cast<int>(y));
        for (std::size_t x = 0; x < img.width; ++x) {
            auto* px = row + x * img.channels;
            px[0] = img.at(x, y, 2);
            px[1] = img.at(x, y, 1);
            px[2] = img.at(x, y, 0);
            if (img.channels == 4) px[3] = img.at(x, y, 3);
        }
    }
    return m;
}

inline std::vector<std::uint8_t> encode(const Image& img, const std::string& ext, const std::vector<int>& params) {
    std::vector<std::uint8_t> out;
    if (!cv::imencode(ext, to_bgr_mat(img), out, params)) throw FormatError("image encode to " + ext + " failed");
    return out;
}

}  // namespace detail

/// Lossless PNG with fixed compression settings so identical pixels give identical bytes.
inline std::vector<std::uint8_t> encode_png(const Image& img) {
    return detail::encode(img, ".png", {cv::IMWRITE_PNG_COMPRESSION, 6});
}

inline std::vector<std::uint8_t> encode_jpeg(const Image& img, int quality = 95) {
    return detail::encode(img, ".jpg", {cv::IMWRITE_JPEG_QUALITY, quality});
}

/// Encode by file extension (.png or .jpg/.jpeg) and write.
inline void save_image(const std::filesystem::path& path, const Image& img) {
    auto ext = path.extension().string();
    for (auto& ch : ext) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    if (ext == ".png") {
        write_file(path, encode_png(img));
    } else if (ext == ".jpg" || ext == ".jpeg") {
        write_file(path, encode_jpeg(img));
    } else {
        throw ArgumentError("unsupported image extension: " + ext);
    }
}

/// RGB image -> (1, 3, H, W) tensor scaled to [0, 1].
inline Tensor image_to_tensor(const Image& img) {
    if (img.channels < 3) throw ArgumentError("image_to_tensor needs at least three channels");
    Tensor t({1, 3, img.height, img.width});
    for (std::size_t c = 0; c < 3; ++c) {
        auto plane = t.plane(0, c);
        for (std::size_t y = 0; y < img.height; ++y)
            for (std::size_t x = 0; x < img.width; ++x)
                plane[y * img.width + x] = static_cast<float>(img.at(x, y, c)) / 255.0f;
    }
    return t;
}

/// (1, 3, H, W) tensor in [0, 1] -> RGB image (rounded, clamped).
inline Image tensor_to_image(const Tensor& t) {
    const Shape& s = t.shape();
    if (s.n != 1 || s.c != 3) throw DimensionError("channels", "tensor_to_image expects shape (1,3,H,W), got " + s.str());
    Image img(s.w, s.h, 3);
    for (std::size_t c = 0; c < 3; ++c) {
        auto plane = t.plane(0, c);
        for (std::size_t y = 0; y < s.h; ++y)
            for (std::size_t x = 0; x < s.w; ++x) {
                const float v = std::clamp(plane[y * s.w + x], 0.0f, 1.0f);
                img.at(x, y, c) = static_cast<std::uint8_t>(std::lround(v * 255.0f));
            }
    }
    return img;
}

}  // namespace canekit
