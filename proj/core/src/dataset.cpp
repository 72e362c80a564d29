// This source code is licensed under the Apache License, Version 2.0
// found in the LICENSE file in the root directory of this source tree.

#include "dpanet/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <stdexcept>

#include "dpanet/encoder.hpp"
#include "dpanet/image_io.hpp"

namespace fs = std::filesystem;

namespace dpanet {

namespace {

bool supported_ext(const fs::path& p) {
    std::string e = p.extension().string();
    std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return std::tolower(c); });
    return e == ".png" || e == ".jpg" || e == ".jpeg";
}

std::map<std::string, fs::path> stem_index(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw std::runtime_error("missing dataset directory: " + dir.string());
    std::map<std::string, fs::path> index;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file() || !supported_ext(entry.path())) continue;
        index[entry.path().stem().string()] = entry.path();
    }
    return index;
}

GrayImage resize_gt_like(const BinaryMask& gt, int oh, int ow) {
    GrayImage g = make_gray(gt.height, gt.width, PixelMode::unit_range);
    for (size_t i = 0; i < gt.values.size(); ++i) g.values[i] = gt.values[i];
    return resize_bilinear(g, oh, ow);
}

BinaryMask binarize_unit(const GrayImage& g) { return to_binary(g, 0.5); }

}  // namespace

std::vector<RgbdSample> load_dataset(const DatasetSpec& spec) {
    const fs::path root(spec.root);
    auto rgb_idx = stem_index(root / "rgb");
    auto depth_idx = stem_index(root / "depth");
    auto gt_idx = stem_index(root / "gt");

    if (rgb_idx.empty()) throw std::runtime_error("empty dataset: no images under " + (root / "rgb").string());
    for (const auto& [stem, p] : depth_idx)
        if (!rgb_idx.count(stem)) throw std::runtime_error("depth file without rgb counterpart: " + stem);
    for (const auto& [stem, p] : gt_idx)
        if (!rgb_idx.count(stem)) throw std::runtime_error("gt file without rgb counterpart: " + stem);

    std::vector<RgbdSample> samples;
    samples.reserve(rgb_idx.size());
    for (const auto& [stem, rgb_path] : rgb_idx) {  // std::map iterates in stem order
        auto dit = depth_idx.find(stem);
        auto git = gt_idx.find(stem);
        if (dit == depth_idx.end()) throw std::runtime_error("missing depth counterpart for " + stem);
        if (git == gt_idx.end()) throw std::runtime_error("missing gt counterpart for " + stem);
        RgbdSample s;
        s.id = stem;
        s.rgb = load_color(rgb_path.string());
        s.depth = load_gray(dit->second.string());
        if (spec.invert_depth) s.depth = invert(s.depth);
        s.gt = load_mask(git->second.string());
        if (spec.split == Split::train) s.dp = dp_label(s.depth, s.gt, spec.gamma);
        samples.push_back(std::move(s));
    }
    return samples;
}

namespace {

RgbdSample resize_sample(const RgbdSample& s, int oh, int ow) {
    RgbdSample out;
    out.id = s.id;
    out.dp = s.dp;
    out.rgb = (s.rgb.height == oh && s.rgb.width == ow) ? s.rgb : resize_bilinear(s.rgb, oh, ow);
    out.depth =
        (s.depth.height == oh && s.depth.width == ow) ? s.depth : resize_bilinear(s.depth, oh, ow);
    if (s.gt.height == oh && s.gt.width == ow)
        out.gt = s.gt;
    else
        out.gt = binarize_unit(resize_gt_like(s.gt, oh, ow));
    return out;
}

double median_of(const std::vector<double>& values) {
    std::vector<double> v = values;
    const size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    return v[mid];
}

// Padding fills rgb/depth with the per-plane median (a background-mode value,
// so the depth histogram keeps its background/object split); masks pad with
// zeros (no object outside the content).
GrayImage crop_or_pad_gray(const GrayImage& g, int target, int oy, int ox, bool pad) {
    GrayImage out = make_gray(target, target, g.mode);
    if (pad) {
        const double fill = median_of(g.values);
        for (double& v : out.values) v = fill;
        for (int y = 0; y < g.height; ++y)
            for (int x = 0; x < g.width; ++x) out.at(y + oy, x + ox) = g.at(y, x);
    } else {
        for (int y = 0; y < target; ++y)
            for (int x = 0; x < target; ++x) out.at(y, x) = g.at(y + oy, x + ox);
    }
    return out;
}

ColorImage crop_or_pad_color(const ColorImage& img, int target, int oy, int ox, bool pad) {
    ColorImage out = make_color(target, target, img.mode);
    const size_t in_plane = img.pixels();
    const size_t out_plane = out.pixels();
    for (int c = 0; c < 3; ++c) {
        if (pad) {
            const std::vector<double> plane(img.values.begin() + c * in_plane,
                                            img.values.begin() + (c + 1) * in_plane);
            const double fill = median_of(plane);
            std::fill(out.values.begin() + c * out_plane,
                      out.values.begin() + (c + 1) * out_plane, fill);
            for (int y = 0; y < img.height; ++y)
                for (int x = 0; x < img.width; ++x) out.at(c, y + oy, x + ox) = img.at(c, y, x);
        } else {
            for (int y = 0; y < target; ++y)
                for (int x = 0; x < target; ++x) out.at(c, y, x) = img.at(c, y + oy, x + ox);
        }
    }
    return out;
}

BinaryMask crop_or_pad_mask(const BinaryMask& m, int target, int oy, int ox, bool pad) {
    BinaryMask out = make_mask(target, target);
    if (pad) {
        for (int y = 0; y < m.height; ++y)
            for (int x = 0; x < m.width; ++x) out.at(y + oy, x + ox) = m.at(y, x);
    } else {
        for (int y = 0; y < target; ++y)
            for (int x = 0; x < target; ++x) out.at(y, x) = m.at(y + oy, x + ox);
    }
    return out;
}

// crop offset range that keeps the mask's bounding box visible when possible
int crop_offset(Rng& rng, int scaled, int target, int lo_keep, int hi_keep) {
    int lo = std::max(0, hi_keep - target);
    int hi = std::min(scaled - target, lo_keep);
    if (lo > hi) {
        lo = 0;
        hi = scaled - target;
    }
    return rng.uniform_int(lo, hi);
}

}  // namespace

RgbdSample prepare(const RgbdSample& sample, int input_size) {
    return resize_sample(sample, input_size, input_size);
}

RgbdSample augment(const RgbdSample& sample, Rng& rng, int input_size) {
    static constexpr double kScales[3] = {0.75, 1.0, 1.25};
    const bool flip = rng.bernoulli(0.5);
    const double scale = kScales[rng.uniform_int(0, 2)];
    const int scaled = std::max(1, static_cast<int>(std::lround(scale * input_size)));

    RgbdSample out = resize_sample(sample, scaled, scaled);
    if (scaled < input_size) {
        const int oy = rng.uniform_int(0, input_size - scaled);
        const int ox = rng.uniform_int(0, input_size - scaled);
        out.rgb = crop_or_pad_color(out.rgb, input_size, oy, ox, /*pad=*/true);
        out.depth = crop_or_pad_gray(out.depth, input_size, oy, ox, true);
        out.gt = crop_or_pad_mask(out.gt, input_size, oy, ox, true);
    } else if (scaled > input_size) {
        int y0 = scaled, y1 = 0, x0 = scaled, x1 = 0;
        for (int y = 0; y < scaled; ++y)
            for (int x = 0; x < scaled; ++x)
                if (out.gt.at(y, x)) {
                    y0 = std::min(y0, y);
                    y1 = std::max(y1, y + 1);
                    x0 = std::min(x0, x);
                    x1 = std::max(x1, x + 1);
                }
        if (y1 == 0) {  // empty mask: unconstrained crop
            y0 = x0 = 0;
            y1 = x1 = scaled;
        }
        const int oy = crop_offset(rng, scaled, input_size, y0, y1);
        const int ox = crop_offset(rng, scaled, input_size, x0, x1);
        out.rgb = crop_or_pad_color(out.rgb, input_size, oy, ox, /*pad=*/false);
        out.depth = crop_or_pad_gray(out.depth, input_size, oy, ox, false);
        out.gt = crop_or_pad_mask(out.gt, input_size, oy, ox, false);
    }
    if (flip) {
        out.rgb = flip_horizontal(out.rgb);
        out.depth = flip_horizontal(out.depth);
        out.gt = flip_horizontal(out.gt);
    }
    return out;
}

// ---- synthetic scenes ---------------------------------------------------------

namespace {

struct Shape {
    bool ellipse;
    int cy, cx, ry, rx;
    std::array<double, 3> color;
    double depth_boost;
};

bool inside(const Shape& s, int y, int x) {
    if (s.ellipse) {
        const double dy = static_cast<double>(y - s.cy) / s.ry;
        const double dx = static_cast<double>(x - s.cx) / s.rx;
        return dy * dy + dx * dx <= 1.0;
    }
    return std::abs(y - s.cy) <= s.ry && std::abs(x - s.cx) <= s.rx;
}

}  // namespace

std::vector<RgbdSample> synth_samples(int n, int size, uint64_t seed, bool corrupt_depth) {
    if (n < 1) throw std::invalid_argument("synth_samples: n must be >= 1");
    Rng rng(seed);
    std::vector<RgbdSample> out;
    out.reserve(static_cast<size_t>(n));

    for (int i = 0; i < n; ++i) {
        RgbdSample s;
        {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "sample_%04d", i);
            s.id = buf;
        }
        s.rgb = make_color(size, size);
        s.depth = make_gray(size, size);
        s.gt = make_mask(size, size);

        const int n_obj = rng.uniform_int(1, 3);
        std::vector<Shape> shapes;
        for (int k = 0; k < n_obj; ++k) {
            Shape sh;
            sh.ellipse = rng.bernoulli(0.5);
            sh.ry = rng.uniform_int(size / 12, size / 7);
            sh.rx = rng.uniform_int(size / 12, size / 7);
            sh.cy = rng.uniform_int(sh.ry, size - 1 - sh.ry);
            sh.cx = rng.uniform_int(sh.rx, size - 1 - sh.rx);
            for (int c = 0; c < 3; ++c) sh.color[static_cast<size_t>(c)] = rng.uniform(140.0, 250.0);
            sh.depth_boost = rng.uniform(0.0, 35.0);
            shapes.push_back(sh);
        }
        const std::array<double, 3> bg_base{rng.uniform(20.0, 90.0), rng.uniform(20.0, 90.0),
                                            rng.uniform(20.0, 90.0)};

        for (int y = 0; y < size; ++y) {
            for (int x = 0; x < size; ++x) {
                int owner = -1;
                for (size_t k = 0; k < shapes.size(); ++k)
                    if (inside(shapes[k], y, x)) owner = static_cast<int>(k);
                const double tex = rng.uniform(-8.0, 8.0);
                for (int c = 0; c < 3; ++c) {
                    double v;
                    if (owner >= 0) {
                        v = shapes[static_cast<size_t>(owner)].color[static_cast<size_t>(c)] + tex;
                    } else {
                        v = bg_base[static_cast<size_t>(c)] + 30.0 * y / size + 15.0 * x / size + tex;
                    }
                    s.rgb.at(c, y, x) = std::clamp(std::round(v), 0.0, 255.0);
                }
                if (owner >= 0) s.gt.at(y, x) = 1;

                double d;
                if (corrupt_depth) {
                    const double u = rng.uniform(0.0, 1.0);
                    d = 255.0 * u * u * u;  // dark-skewed pixel noise
                } else if (owner >= 0) {
                    d = 205.0 + shapes[static_cast<size_t>(owner)].depth_boost + rng.uniform(-3.0, 3.0);
                } else {
                    d = 40.0 + 70.0 * y / size + rng.uniform(-3.0, 3.0);
                }
                s.depth.at(y, x) = std::clamp(std::round(d), 0.0, 255.0);
            }
        }
        s.dp = dp_label(s.depth, s.gt);
        out.push_back(std::move(s));
    }
    return out;
}

void synth_dataset(const std::string& out_root, int n, int size, uint64_t seed,
                   bool corrupt_depth) {
    const fs::path root(out_root);
    fs::create_directories(root / "rgb");
    fs::create_directories(root / "depth");
    fs::create_directories(root / "gt");
    for (const auto& s : synth_samples(n, size, seed, corrupt_depth)) {
        save_color_png((root / "rgb" / (s.id + ".png")).string(), s.rgb);
        save_gray_png((root / "depth" / (s.id + ".png")).string(), s.depth);
        save_mask_png((root / "gt" / (s.id + ".png")).string(), s.gt);
    }
}

// ---- input conditioning ---------------------------------------------------------

namespace {
constexpr std::array<double, 3> kMean{0.485, 0.456, 0.406};
constexpr std::array<double, 3> kStd{0.229, 0.224, 0.225};
}  // namespace

Tensor conditioned_rgb(const ColorImage& rgb) {
    return image_to_tensor(normalize(rgb, kMean, kStd));
}

Tensor conditioned_depth(const GrayImage& depth) {
    return image_to_tensor(normalize(depth_to_3ch(depth), kMean, kStd));
}

}  // namespace dpanet
