// This source code is licensed under the Apache License, Version 2.0
// found in the LICENSE file in the root directory of this source tree.

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dpanet/depth_potentiality.hpp"
#include "dpanet/image.hpp"
#include "dpanet/rng.hpp"
#include "dpanet/tensor.hpp"

namespace dpanet {

struct RgbdSample {
    std::string id;
    ColorImage rgb;
    GrayImage depth;
    BinaryMask gt;
    std::optional<DepthPotentialityLabel> dp;  // cached pseudo label (training split)
};

enum class Split { train, val, test };

// root must contain rgb/, depth/ and gt/ subdirectories with stem-matched
// files (.png/.jpg/.jpeg).
struct DatasetSpec {
    std::string root;
    Split split = Split::train;
    bool invert_depth = false;
    double gamma = 0.3;
};

// Samples sorted by stem; pseudo labels attached for the train split.
std::vector<RgbdSample> load_dataset(const DatasetSpec& spec);

// Joint augmentation: with prob 0.5 flip all planes; scale from
// {0.75, 1.0, 1.25} of input_size, then random crop/pad back to input_size.
// Draw order: flip, scale index, offset-y, offset-x.
RgbdSample augment(const RgbdSample& sample, Rng& rng, int input_size);

// Deterministic resize of every plane to input_size (no randomness).
RgbdSample prepare(const RgbdSample& sample, int input_size);

// Synthetic scenes: 1-3 random ellipses/rectangles as salient objects,
// GT = object mask, depth = object-biased gradient; corrupt_depth replaces
// the depth plane with pixel noise (low-potentiality samples).
std::vector<RgbdSample> synth_samples(int n, int size, uint64_t seed, bool corrupt_depth);

// Same generator written to out_root/{rgb,depth,gt}/*.png; byte-identical for
// identical seeds.
void synth_dataset(const std::string& out_root, int n, int size, uint64_t seed, bool corrupt_depth);

// Backbone input conditioning: (v/255 - mean)/std with the usual ImageNet
// statistics; the depth plane is replicated to 3 channels first.
Tensor conditioned_rgb(const ColorImage& rgb);
Tensor conditioned_depth(const GrayImage& depth);

}  // namespace dpanet
