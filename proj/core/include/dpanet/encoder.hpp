// This source code is licensed under the Apache License, Version 2.0
// found in the LICENSE file in the root directory of this source tree.

#pragma once

#include <array>
#include <string>
#include <vector>

#include "dpanet/image.hpp"
#include "dpanet/nn.hpp"

namespace dpanet {

enum class BackboneKind { resnet50_shape, toy };

struct BackboneConfig {
    BackboneKind kind = BackboneKind::resnet50_shape;
    std::array<int, 5> stage_channels{64, 256, 512, 1024, 2048};
    int input_size = 256;
};

BackboneConfig resnet50_shape_config(int input_size = 256);
// Small strided CNN with the same 5-stage stride contract; <= 64 channels per
// stage for desk-scale tests.
BackboneConfig toy_backbone_config(int input_size = 64,
                                   std::array<int, 5> channels = {8, 16, 32, 32, 32});

// Five stage features of one branch; stages[i] holds stage i+1 at stride
// strides[i] relative to the input.
struct FeaturePyramid {
    std::array<Variable, 5> stages;
    std::array<int, 5> strides{2, 4, 8, 16, 32};
    std::array<int, 5> channels{};
};

// One encoder branch (the two branches never share weights; construct two of
// these with distinct prefixes, e.g. "rgb.backbone" / "depth.backbone").
class BranchEncoder {
public:
    BranchEncoder() = default;
    BranchEncoder(ParamStore& ps, Rng& rng, const std::string& prefix, const BackboneConfig& cfg);

    // input {3,H,W}; H and W must be divisible by 32
    FeaturePyramid operator()(const Variable& input) const;

    const BackboneConfig& config() const { return cfg_; }

private:
    struct Bottleneck {
        ConvNorm reduce, mid, expand, proj;
        bool has_proj = false;
        Variable operator()(const Variable& x) const;
    };

    BackboneConfig cfg_;
    std::vector<Conv2d> toy_stages_;
    ConvNorm stem_;
    std::vector<std::vector<Bottleneck>> layers_;
};

// Channel-replicated depth (the depth branch consumes the same 3-channel
// layout as the RGB branch; no HHA or other encodings).
ColorImage depth_to_3ch(const GrayImage& depth);

// Planar {3,H,W} tensor from a color image.
Tensor image_to_tensor(const ColorImage& img);

}  // namespace dpanet
