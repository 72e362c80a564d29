// This source code is licensed under the Apache License, Version 2.0
// found in the LICENSE file in the root directory of this source tree.

#pragma once

#include <string>

#include "dpanet/nn.hpp"

namespace dpanet {

// Two-vector snapshot of the learned confidences for one sample.
struct GateState {
    double g_hat = 1.0;
    Tensor alpha;  // {decoder channels}, each in [0,1]
};

// g_hat = sigmoid(FC2(relu(FC1([GAP(rb5), GAP(db5)]))))
struct GateHead {
    GateHead() = default;
    GateHead(ParamStore& ps, Rng& rng, const std::string& name, int top_channels, int hidden = 512);
    Variable operator()(const Variable& rb5, const Variable& db5) const;  // -> {1}
    Linear fc1, fc2;
};

// alpha = sigmoid(FC([GAP(rb5), GAP(db5)])), one FC on the shared GAP-concat
struct AlphaHead {
    AlphaHead() = default;
    AlphaHead(ParamStore& ps, Rng& rng, const std::string& name, int top_channels,
              int out_channels);
    Variable operator()(const Variable& rb5, const Variable& db5) const;  // -> {out_channels}
    Linear fc;
};

}  // namespace dpanet
