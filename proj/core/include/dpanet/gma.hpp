// This source code is licensed under the Apache License, Version 2.0
// found in the LICENSE file in the root directory of this source tree.

#pragma once

#include <string>

#include "dpanet/nn.hpp"

namespace dpanet {

// f = conv1(f_in); (W;B) = conv2(f); f_out = relu(W (*) f + B).
// conv1 is 3x3 + per-channel norm, conv2 is 3x3 emitting 2*out_ch channels
// split into the multiplicative and additive halves. Unifies the stage to
// out_ch channels.
struct SpatialAttention {
    SpatialAttention() = default;
    SpatialAttention(ParamStore& ps, Rng& rng, const std::string& name, int in_ch, int out_ch);
    Variable operator()(const Variable& f_in) const;
    ConvNorm conv1;
    Conv2d conv2;
    int out_ch = 0;
};

// Cross-modal attention: 1x1 projections give W_q, W_k (reduced channels
// C1 = max(1, C/8)) from the query source and W_v (C channels) from the value
// source; W_a = softmax_cols(W_q^T W_k); output = reshape(W_v W_a, {C,H,W}).
struct CrossModalAttention {
    CrossModalAttention() = default;
    CrossModalAttention(ParamStore& ps, Rng& rng, const std::string& name, int channels);
    Variable operator()(const Variable& query_source, const Variable& value_source) const;
    // attention matrix for inspection (columns sum to 1)
    Variable attention(const Variable& query_source) const;
    Conv2d wq, wk, wv;
    int channels = 0, reduced = 0;
};

// One GMA stage: per-branch spatial attention, two symmetric cross-modal
// attentions, gated residual combination with g1 = g_hat, g2 = 1 - g_hat.
struct GmaStage {
    struct Output {
        Variable rf, df;
        Variable rb_tilde, db_tilde, f_dr, f_rd;  // retained for inspection
    };

    GmaStage() = default;
    GmaStage(ParamStore& ps, Rng& rng, const std::string& name, int rgb_in_ch, int depth_in_ch,
             int channels);
    // g_hat: 1-element variable in [0,1]
    Output operator()(const Variable& rb, const Variable& db, const Variable& g_hat) const;

    SpatialAttention sa_rgb, sa_depth;
    CrossModalAttention a_dr, a_rd;
};

}  // namespace dpanet
