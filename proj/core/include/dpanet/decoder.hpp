// This source code is licensed under the Apache License, Version 2.0
// found in the LICENSE file in the root directory of this source tree.

#pragma once

#include <array>
#include <string>
#include <vector>

#include "dpanet/nn.hpp"

namespace dpanet {

// How Eqs-style multi-scale fusion combines the projected high-level feature
// with the low-level feature: element-wise product (default), channel
// concatenation + 1x1 conv, or summation.
enum class FusionMode { multiply, concat, sum };

// f1 = relu(upsample(conv3(high)) . low); f2 = relu(conv4(low) . upsample(high));
// f_F = relu(conv5([f1, f2])), where "." is chosen by FusionMode. Output has
// `channels` channels at low's resolution; the upsample factor is inferred
// from the operand shapes.
struct MultiScaleFuse {
    MultiScaleFuse() = default;
    MultiScaleFuse(ParamStore& ps, Rng& rng, const std::string& name, int channels,
                   FusionMode mode);
    Variable operator()(const Variable& high, const Variable& low) const;
    ConvNorm conv3, conv4, conv5;
    ConvNorm cat1, cat2;  // 1x1 mixers, concat mode only
    FusionMode mode = FusionMode::multiply;
    int channels = 0;
};

// Progressive per-branch decoding: rd5 = rf5, rd_i = fuse(rd_{i+1}, rf_i).
// Arrays are indexed by stage-2 offset: [0]=stage2 ... [3]=stage5.
struct BranchDecoder {
    BranchDecoder() = default;
    BranchDecoder(ParamStore& ps, Rng& rng, const std::string& prefix, int channels,
                  FusionMode mode);
    std::array<Variable, 4> operator()(const std::array<Variable, 4>& rf) const;
    std::vector<MultiScaleFuse> fuses;  // [0] for stage 4, [1] stage 3, [2] stage 2
};

// f3 = alpha (*) rd2 + g_hat * (1-alpha) (*) dd2; f4 = rd2 (*) dd2;
// f_sal = relu(conv([f3,f4])) -> 3x3 -> 1 logit -> upsample -> sigmoid.
struct FusionHead {
    struct Output {
        Variable saliency;   // {1,out_h,out_w} in (0,1)
        Variable logits;     // pre-sigmoid, same size
        Variable f3, f4;     // retained for inspection
    };

    FusionHead() = default;
    FusionHead(ParamStore& ps, Rng& rng, const std::string& name, int channels);
    Output operator()(const Variable& rd2, const Variable& dd2, const Variable& alpha,
                      const Variable& g_hat, int out_h, int out_w) const;
    ConvNorm conv_cat;  // 2C -> C
    Conv2d head;        // C -> 1 logits
    int channels = 0;
};

// 3x3 conv to one channel, bilinear upsample to the target size, sigmoid.
struct AuxHead {
    AuxHead() = default;
    AuxHead(ParamStore& ps, Rng& rng, const std::string& name, int channels);
    Variable operator()(const Variable& feat, int out_h, int out_w) const;
    Conv2d conv;
};

}  // namespace dpanet
