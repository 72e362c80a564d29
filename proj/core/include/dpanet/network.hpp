// This source code is licensed under the Apache License, Version 2.0
// found in the LICENSE file in the root directory of this source tree.

#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "dpanet/decoder.hpp"
#include "dpanet/encoder.hpp"
#include "dpanet/gma.hpp"
#include "dpanet/heads.hpp"

namespace dpanet {

enum class GateMode { soft, hard, off };

struct ModelConfig {
    BackboneKind backbone = BackboneKind::resnet50_shape;
    std::array<int, 5> toy_channels{8, 16, 32, 32, 32};
    int input_size = 256;
    int decoder_channels = 256;  // unified GMA/decoder width (C)
    int gate_hidden = 512;
    FusionMode fusion_mode = FusionMode::multiply;
    GateMode gate_mode = GateMode::soft;
    bool depth_branch = true;
};

ModelConfig toy_model_config(int input_size = 64, int decoder_channels = 32);

struct ForwardResult {
    Variable saliency;  // {1,H,W} in (0,1), H=W=input size
    Variable logits;    // pre-sigmoid logits, same size
    // Training-time side outputs ordered (rgb rd5..rd2, depth dd5..dd2);
    // the depth half is absent when the depth branch is off.
    std::vector<Variable> aux;
    Variable g_hat;  // {1}
    Variable alpha;  // {decoder_channels}
    struct StageDump {
        int stage = 0;
        Variable rb_tilde, db_tilde, f_dr, f_rd, rf, df;
    };
    std::vector<StageDump> stages;  // stages 2..5; cross-modal slots undefined when depth off
    FeaturePyramid rgb_pyramid, depth_pyramid;
    std::array<Variable, 4> rd, dd;  // decoder features, [0]=stage2 .. [3]=stage5
};

// The full two-stream gated-attention network. Stateless given parameters;
// forward builds a fresh graph per sample.
class DpaNet {
public:
    DpaNet(const ModelConfig& cfg, ParamStore& ps, Rng& rng);

    // rgb/depth: {3,S,S} conditioned tensors; S divisible by 32. When the
    // depth branch is off the depth tensor is never read.
    ForwardResult forward(const Tensor& rgb, const Tensor& depth, bool training) const;

    const ModelConfig& config() const { return cfg_; }
    const BackboneConfig& backbone_config() const { return backbone_cfg_; }

private:
    ModelConfig cfg_;
    BackboneConfig backbone_cfg_;
    BranchEncoder rgb_encoder_, depth_encoder_;
    std::vector<GmaStage> gma_;                  // stages 2..5 (depth on)
    std::vector<SpatialAttention> rgb_only_sa_;  // stages 2..5 (depth off)
    GateHead gate_head_;
    AlphaHead alpha_head_;
    BranchDecoder rgb_decoder_, depth_decoder_;
    FusionHead fusion_;
    std::vector<AuxHead> rgb_aux_, depth_aux_;  // [0]=stage5 .. [3]=stage2
    bool has_gate_head_ = false;
};

}  // namespace dpanet
