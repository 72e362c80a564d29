// This source code is licensed under the Apache License, Version 2.0
// found in the LICENSE file in the root directory of this source tree.

#include "dpanet/encoder.hpp"

#include <stdexcept>

namespace dpanet {

BackboneConfig resnet50_shape_config(int input_size) {
    return {BackboneKind::resnet50_shape, {64, 256, 512, 1024, 2048}, input_size};
}

BackboneConfig toy_backbone_config(int input_size, std::array<int, 5> channels) {
    for (int c : channels)
        if (c < 1 || c > 64)
            throw std::invalid_argument("toy backbone stages must have 1..64 channels");
    return {BackboneKind::toy, channels, input_size};
}

Variable BranchEncoder::Bottleneck::operator()(const Variable& x) const {
    Variable h = relu(reduce(x));
    h = relu(mid(h));
    h = expand(h);
    Variable skip = has_proj ? proj(x) : x;
    return relu(add(h, skip));
}

BranchEncoder::BranchEncoder(ParamStore& ps, Rng& rng, const std::string& prefix,
                             const BackboneConfig& cfg)
    : cfg_(cfg) {
    if (cfg.kind == BackboneKind::toy) {
        // norm-free so per-sample scale statistics survive to the gate head
        // even at tiny top-stage extents; bias-free keeps zero inputs at zero
        int in_ch = 3;
        for (int s = 0; s < 5; ++s) {
            const int out_ch = cfg.stage_channels[static_cast<size_t>(s)];
            toy_stages_.emplace_back(ps, rng, prefix + ".s" + std::to_string(s + 1) + ".conv",
                                     in_ch, out_ch, 3, /*stride=*/2, /*pad=*/1, /*bias=*/false);
            in_ch = out_ch;
        }
        return;
    }

    // resnet50-shape: 7x7/2 stem, 3x3/2 maxpool, bottleneck stages 3-4-6-3
    stem_ = ConvNorm(ps, rng, prefix + ".stem", 3, 64, 7, 2, 3);
    const std::array<int, 4> block_counts{3, 4, 6, 3};
    const std::array<int, 4> mid_channels{64, 128, 256, 512};
    int in_ch = 64;
    for (int layer = 0; layer < 4; ++layer) {
        std::vector<Bottleneck> blocks;
        const int mid = mid_channels[static_cast<size_t>(layer)];
        const int out = mid * 4;
        for (int b = 0; b < block_counts[static_cast<size_t>(layer)]; ++b) {
            const int stride = (layer > 0 && b == 0) ? 2 : 1;
            const std::string name =
                prefix + ".layer" + std::to_string(layer + 1) + ".b" + std::to_string(b);
            Bottleneck blk;
            blk.reduce = ConvNorm(ps, rng, name + ".reduce", in_ch, mid, 1, 1, 0);
            blk.mid = ConvNorm(ps, rng, name + ".mid", mid, mid, 3, stride, 1);
            blk.expand = ConvNorm(ps, rng, name + ".expand", mid, out, 1, 1, 0);
            if (in_ch != out || stride != 1) {
                blk.proj = ConvNorm(ps, rng, name + ".proj", in_ch, out, 1, stride, 0);
                blk.has_proj = true;
            }
            blocks.push_back(std::move(blk));
            in_ch = out;
        }
        layers_.push_back(std::move(blocks));
    }
}

FeaturePyramid BranchEncoder::operator()(const Variable& input) const {
    const Tensor& v = input.value();
    if (v.ndim() != 3 || v.dim(0) != 3)
        throw std::invalid_argument("encoder input must be {3,H,W}");
    if (v.dim(1) % 32 != 0 || v.dim(2) % 32 != 0)
        throw std::invalid_argument("encoder input size must be divisible by 32, got " +
                                    v.shape_str());

    FeaturePyramid pyr;
    pyr.channels = cfg_.stage_channels;
    if (cfg_.kind == BackboneKind::toy) {
        Variable h = input;
        for (int s = 0; s < 5; ++s) {
            h = relu(toy_stages_[static_cast<size_t>(s)](h));
            pyr.stages[static_cast<size_t>(s)] = h;
        }
        return pyr;
    }

    Variable h = relu(stem_(input));
    pyr.stages[0] = h;  // stride 2
    h = max_pool2d(h, 3, 2, 1);
    for (int layer = 0; layer < 4; ++layer) {
        for (const auto& blk : layers_[static_cast<size_t>(layer)]) h = blk(h);
        pyr.stages[static_cast<size_t>(layer + 1)] = h;
    }
    return pyr;
}

ColorImage depth_to_3ch(const GrayImage& depth) {
    ColorImage out = make_color(depth.height, depth.width, depth.mode);
    const size_t plane = depth.pixels();
    for (int c = 0; c < 3; ++c)
        std::copy(depth.values.begin(), depth.values.end(), out.values.begin() + c * plane);
    return out;
}

Tensor image_to_tensor(const ColorImage& img) {
    return Tensor({3, img.height, img.width}, img.values);
}

}  // namespace dpanet
