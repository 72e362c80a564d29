// This source code is licensed under the Apache License, Version 2.0
// found in the LICENSE file in the root directory of this source tree.

#pragma once

#include <string>

#include "dpanet/image.hpp"

namespace dpanet {

// Decodes an 8- or 16-bit grayscale image (PNG/JPEG; color inputs are
// luminance-converted). 16-bit values are rescaled to [0,255] by dividing by
// the format maximum (65535). Deterministic for identical file bytes.
GrayImage load_gray(const std::string& path);

// Decodes an RGB image; grayscale inputs are replicated to 3 channels.
ColorImage load_color(const std::string& path);

// Loads a ground-truth mask: grayscale decode followed by a fixed binarization
// at threshold 127 (pixel > 127 -> 1), absorbing antialiased edges.
BinaryMask load_mask(const std::string& path);

// Lossless 8-bit grayscale PNG. Values are clamped to [0,255] and rounded.
void save_gray_png(const std::string& path, const GrayImage& img);
void save_mask_png(const std::string& path, const BinaryMask& mask);
// Saliency map in [0,1] stored as round(255*v).
void save_saliency_png(const std::string& path, const GrayImage& unit_map);
void save_color_png(const std::string& path, const ColorImage& img);

}  // namespace dpanet
