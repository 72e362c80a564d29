// This source code is licensed under the Apache License, Version 2.0
// found in the LICENSE file in the root directory of this source tree.

#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace dpanet {

// Value range carried by an image. byte_range images hold whole numbers in
// [0,255]; unit_range images hold reals in [0,1].
enum class PixelMode { byte_range, unit_range };

struct GrayImage {
    int height = 0;
    int width = 0;
    PixelMode mode = PixelMode::byte_range;
    std::vector<double> values;  // row-major, height*width

    double at(int y, int x) const { return values[static_cast<size_t>(y) * width + x]; }
    double& at(int y, int x) { return values[static_cast<size_t>(y) * width + x]; }
    size_t pixels() const { return values.size(); }
};

struct ColorImage {
    int height = 0;
    int width = 0;
    PixelMode mode = PixelMode::byte_range;
    // planar RGB: channel c at values[c*height*width + y*width + x]
    std::vector<double> values;

    double at(int c, int y, int x) const {
        return values[(static_cast<size_t>(c) * height + y) * width + x];
    }
    double& at(int c, int y, int x) {
        return values[(static_cast<size_t>(c) * height + y) * width + x];
    }
    size_t pixels() const { return static_cast<size_t>(height) * width; }
};

struct BinaryMask {
    int height = 0;
    int width = 0;
    std::vector<uint8_t> values;  // strictly {0,1}

    uint8_t at(int y, int x) const { return values[static_cast<size_t>(y) * width + x]; }
    uint8_t& at(int y, int x) { return values[static_cast<size_t>(y) * width + x]; }
    size_t pixels() const { return values.size(); }
    size_t area() const;  // number of 1 pixels
};

GrayImage make_gray(int height, int width, PixelMode mode = PixelMode::byte_range);
ColorImage make_color(int height, int width, PixelMode mode = PixelMode::byte_range);
BinaryMask make_mask(int height, int width);

// Bilinear resize with half-pixel-center source mapping and edge clamping.
// Output values never leave [min(input), max(input)].
GrayImage resize_bilinear(const GrayImage& img, int out_h, int out_w);
ColorImage resize_bilinear(const ColorImage& img, int out_h, int out_w);

// mask[p] = 1 iff img[p] > threshold
BinaryMask to_binary(const GrayImage& img, double threshold);

GrayImage flip_horizontal(const GrayImage& img);
ColorImage flip_horizontal(const ColorImage& img);
BinaryMask flip_horizontal(const BinaryMask& mask);

// out = (in/255 - mean) / std per channel; input must be byte_range.
ColorImage normalize(const ColorImage& img, const std::array<double, 3>& mean,
                     const std::array<double, 3>& stddev);

// 255 - v (byte_range images); used by the per-dataset depth polarity flag.
GrayImage invert(const GrayImage& img);

}  // namespace dpanet
