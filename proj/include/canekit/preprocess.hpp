#pragma once

#include <array>

#include "canekit/image.hpp"
#include "canekit/tensor.hpp"

namespace canekit {

inline constexpr std::array<float, 3> kChannelMean{0.485f, 0.456f, 0.406f};
inline constexpr std::array<float, 3> kChannelStd{0.229f, 0.224f, 0.225f};
inline constexpr std::size_t kInputSize = 224;

/// (x - mean) / std per RGB channel on a [0, 1] tensor.
inline Tensor normalize_rgb(const Tensor& rgb01) {
    const Shape& s = rgb01.shape();
    if (s.c != 3) throw DimensionError("channels", "normalize_rgb expects 3 channels, got " + std::to_string(s.c));
    Tensor out = rgb01;
    for (std::size_t n = 0; n < s.n; ++n)
        for (std::size_t c = 0; c < 3; ++c)
            for (float& v : out.plane(n, c)) v = (v - kChannelMean[c]) / kChannelStd[c];
    return out;
}

/// Resize (bilinear, half-pixel) to size x size, then normalize.
inline Tensor preprocess(const Tensor& rgb01, std::size_t size = kInputSize) {
    const Shape& s = rgb01.shape();
    if (s.h == size && s.w == size) return normalize_rgb(rgb01);
    return normalize_rgb(bilinear_resize(rgb01, size, size));
}

/// Decoded RGB image -> (1, 3, size, size) network input.
inline Tensor preprocess(const Image& img, std::size_t size = kInputSize) {
    return preprocess(image_to_tensor(img), size);
}

/// Decode then preprocess; undecodable bytes raise FormatError.
inline Tensor preprocess_bytes(std::span<const std::uint8_t> bytes, std::size_t size = kInputSize) {
    return preprocess(decode_image(bytes), size);
}

/// The image resampled to size x size in 8-bit RGB, for overlays.
inline Image resize_image(const Image& img, std::size_t size = kInputSize) {
    if (img.width == size && img.height == size && img.channels == 3) return img;
    return tensor_to_image(bilinear_resize(image_to_tensor(img), size, size));
}

}  // namespace canekit
