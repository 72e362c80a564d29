// This source code is licensed under the Apache License, Version 2.0
// found in the LICENSE file in the root directory of this source tree.

#include "dpanet/image.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dpanet {

namespace {

void require_size(int h, int w) {
    if (h < 1 || w < 1) throw std::invalid_argument("image size must be >= 1x1");
}

struct Tap {
    int lo, hi;
    double w_hi;
};

std::vector<Tap> make_taps(int in_size, int out_size) {
    std::vector<Tap> taps(static_cast<size_t>(out_size));
    const double scale = static_cast<double>(in_size) / out_size;
    for (int o = 0; o < out_size; ++o) {
        const double src = (o + 0.5) * scale - 0.5;
        const double f = std::floor(src);
        int lo = static_cast<int>(f);
        int hi = lo + 1;
        const double frac = src - f;
        lo = std::clamp(lo, 0, in_size - 1);
        hi = std::clamp(hi, 0, in_size - 1);
        taps[static_cast<size_t>(o)] = {lo, hi, frac};
    }
    return taps;
}

void resize_plane(const double* src, int h, int w, double* dst, int oh, int ow) {
    const auto ty = make_taps(h, oh);
    const auto tx = make_taps(w, ow);
    for (int oy = 0; oy < oh; ++oy) {
        const Tap& yt = ty[static_cast<size_t>(oy)];
        for (int ox = 0; ox < ow; ++ox) {
            const Tap& xt = tx[static_cast<size_t>(ox)];
            const double top =
                (1.0 - xt.w_hi) * src[yt.lo * w + xt.lo] + xt.w_hi * src[yt.lo * w + xt.hi];
            const double bot =
                (1.0 - xt.w_hi) * src[yt.hi * w + xt.lo] + xt.w_hi * src[yt.hi * w + xt.hi];
            dst[static_cast<size_t>(oy) * ow + ox] = (1.0 - yt.w_hi) * top + yt.w_hi * bot;
        }
    }
}

}  // namespace

size_t BinaryMask::area() const {
    size_t n = 0;
    for (uint8_t v : values) n += v;
    return n;
}

GrayImage make_gray(int height, int width, PixelMode mode) {
    require_size(height, width);
    GrayImage g;
    g.height = height;
    g.width = width;
    g.mode = mode;
    g.values.assign(static_cast<size_t>(height) * width, 0.0);
    return g;
}

ColorImage make_color(int height, int width, PixelMode mode) {
    require_size(height, width);
    ColorImage c;
    c.height = height;
    c.width = width;
    c.mode = mode;
    c.values.assign(static_cast<size_t>(height) * width * 3, 0.0);
    return c;
}

BinaryMask make_mask(int height, int width) {
    require_size(height, width);
    BinaryMask m;
    m.height = height;
    m.width = width;
    m.values.assign(static_cast<size_t>(height) * width, 0);
    return m;
}

GrayImage resize_bilinear(const GrayImage& img, int out_h, int out_w) {
    require_size(out_h, out_w);
    GrayImage out = make_gray(out_h, out_w, img.mode);
    resize_plane(img.values.data(), img.height, img.width, out.values.data(), out_h, out_w);
    return out;
}

ColorImage resize_bilinear(const ColorImage& img, int out_h, int out_w) {
    require_size(out_h, out_w);
    ColorImage out = make_color(out_h, out_w, img.mode);
    const size_t in_plane = img.pixels();
    const size_t out_plane = out.pixels();
    for (int c = 0; c < 3; ++c) {
        resize_plane(img.values.data() + c * in_plane, img.height, img.width,
                     out.values.data() + c * out_plane, out_h, out_w);
    }
    return out;
}

BinaryMask to_binary(const GrayImage& img, double threshold) {
    BinaryMask m = make_mask(img.height, img.width);
    for (size_t i = 0; i < img.values.size(); ++i) m.values[i] = img.values[i] > threshold ? 1 : 0;
    return m;
}

GrayImage flip_horizontal(const GrayImage& img) {
    GrayImage out = img;
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) out.at(y, x) = img.at(y, img.width - 1 - x);
    return out;
}

ColorImage flip_horizontal(const ColorImage& img) {
    ColorImage out = img;
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x) out.at(c, y, x) = img.at(c, y, img.width - 1 - x);
    return out;
}

BinaryMask flip_horizontal(const BinaryMask& mask) {
    BinaryMask out = mask;
    for (int y = 0; y < mask.height; ++y)
        for (int x = 0; x < mask.width; ++x) out.at(y, x) = mask.at(y, mask.width - 1 - x);
    return out;
}

ColorImage normalize(const ColorImage& img, const std::array<double, 3>& mean,
                     const std::array<double, 3>& stddev) {
    if (img.mode != PixelMode::byte_range)
        throw std::invalid_argument("normalize expects a byte-range image");
    for (double s : stddev)
        if (s <= 0.0) throw std::invalid_argument("normalize: std components must be > 0");
    ColorImage out = img;
    out.mode = PixelMode::unit_range;  // conditioned for the network, not display
    const size_t plane = img.pixels();
    for (int c = 0; c < 3; ++c) {
        const double m = mean[static_cast<size_t>(c)], s = stddev[static_cast<size_t>(c)];
        double* p = out.values.data() + c * plane;
        for (size_t i = 0; i < plane; ++i) p[i] = (p[i] / 255.0 - m) / s;
    }
    return out;
}

GrayImage invert(const GrayImage& img) {
    if (img.mode != PixelMode::byte_range)
        throw std::invalid_argument("invert expects a byte-range image");
    GrayImage out = img;
    for (double& v : out.values) v = 255.0 - v;
    return out;
}

}  // namespace dpanet
