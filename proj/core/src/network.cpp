// This source code is licensed under the Apache License, Version 2.0
// found in the LICENSE file in the root directory of this source tree.

#include "dpanet/network.hpp"

#include <stdexcept>

namespace dpanet {

ModelConfig toy_model_config(int input_size, int decoder_channels) {
    ModelConfig cfg;
    cfg.backbone = BackboneKind::toy;
    cfg.input_size = input_size;
    cfg.decoder_channels = decoder_channels;
    cfg.gate_hidden = 64;
    return cfg;
}

DpaNet::DpaNet(const ModelConfig& cfg, ParamStore& ps, Rng& rng) : cfg_(cfg) {
    backbone_cfg_ = cfg.backbone == BackboneKind::toy
                        ? toy_backbone_config(cfg.input_size, cfg.toy_channels)
                        : resnet50_shape_config(cfg.input_size);

    rgb_encoder_ = BranchEncoder(ps, rng, "rgb.backbone", backbone_cfg_);
    if (cfg.depth_branch) depth_encoder_ = BranchEncoder(ps, rng, "depth.backbone", backbone_cfg_);

    const int c = cfg.decoder_channels;
    const int top = backbone_cfg_.stage_channels[4];
    for (int stage = 2; stage <= 5; ++stage) {
        const int in_ch = backbone_cfg_.stage_channels[static_cast<size_t>(stage - 1)];
        const std::string name = "gma.s" + std::to_string(stage);
        if (cfg.depth_branch) {
            gma_.emplace_back(ps, rng, name, in_ch, in_ch, c);
        } else {
            rgb_only_sa_.emplace_back(ps, rng, name + ".rgb", in_ch, c);
        }
    }

    if (cfg.depth_branch) {
        if (cfg.gate_mode != GateMode::off) {
            gate_head_ = GateHead(ps, rng, "head.gate", top, cfg.gate_hidden);
            has_gate_head_ = true;
        }
        alpha_head_ = AlphaHead(ps, rng, "head.alpha", top, c);
    }

    rgb_decoder_ = BranchDecoder(ps, rng, "rgb.dec", c, cfg.fusion_mode);
    if (cfg.depth_branch) depth_decoder_ = BranchDecoder(ps, rng, "depth.dec", c, cfg.fusion_mode);

    fusion_ = FusionHead(ps, rng, "fuse", c);

    for (int stage = 5; stage >= 2; --stage) {
        rgb_aux_.emplace_back(ps, rng, "aux.rgb.s" + std::to_string(stage), c);
        if (cfg.depth_branch)
            depth_aux_.emplace_back(ps, rng, "aux.depth.s" + std::to_string(stage), c);
    }
}

ForwardResult DpaNet::forward(const Tensor& rgb, const Tensor& depth, bool training) const {
    ForwardResult r;
    const int out_h = rgb.dim(1), out_w = rgb.dim(2);
    Variable rgb_in = Variable::constant(rgb);

    try {
        r.rgb_pyramid = rgb_encoder_(rgb_in);
    } catch (const std::exception& e) {
        throw std::invalid_argument(std::string("rgb encoder: ") + e.what());
    }

    std::array<Variable, 4> rf, df;

    if (cfg_.depth_branch) {
        Variable depth_in = Variable::constant(depth);
        try {
            r.depth_pyramid = depth_encoder_(depth_in);
        } catch (const std::exception& e) {
            throw std::invalid_argument(std::string("depth encoder: ") + e.what());
        }

        const Variable& rb5 = r.rgb_pyramid.stages[4];
        const Variable& db5 = r.depth_pyramid.stages[4];
        // one gate estimate per sample feeds all four GMA stages
        r.g_hat = has_gate_head_ ? gate_head_(rb5, db5) : Variable::constant(Tensor::scalar(1.0));
        r.alpha = alpha_head_(rb5, db5);

        for (int i = 0; i < 4; ++i) {
            const int stage = i + 2;
            GmaStage::Output o;
            try {
                o = gma_[static_cast<size_t>(i)](r.rgb_pyramid.stages[static_cast<size_t>(stage - 1)],
                                                 r.depth_pyramid.stages[static_cast<size_t>(stage - 1)],
                                                 r.g_hat);
            } catch (const std::exception& e) {
                throw std::invalid_argument("gma stage " + std::to_string(stage) + ": " + e.what());
            }
            rf[static_cast<size_t>(i)] = o.rf;
            df[static_cast<size_t>(i)] = o.df;
            r.stages.push_back({stage, o.rb_tilde, o.db_tilde, o.f_dr, o.f_rd, o.rf, o.df});
        }

        r.rd = rgb_decoder_(rf);
        r.dd = depth_decoder_(df);
        FusionHead::Output fo = fusion_(r.rd[0], r.dd[0], r.alpha, r.g_hat, out_h, out_w);
        r.saliency = fo.saliency;
        r.logits = fo.logits;
    } else {
        // RGB-only ablation: spatial attention per stage, no cross-modal path;
        // fusion degenerates to f3 = rd2, f4 = rd2 (*) rd2 with alpha = 1.
        r.g_hat = Variable::constant(Tensor::scalar(1.0));
        r.alpha = Variable::constant(Tensor::full({cfg_.decoder_channels}, 1.0));
        for (int i = 0; i < 4; ++i) {
            const int stage = i + 2;
            Variable sa =
                rgb_only_sa_[static_cast<size_t>(i)](r.rgb_pyramid.stages[static_cast<size_t>(stage - 1)]);
            rf[static_cast<size_t>(i)] = sa;
            ForwardResult::StageDump dump;
            dump.stage = stage;
            dump.rb_tilde = sa;
            dump.rf = sa;
            r.stages.push_back(std::move(dump));
        }
        r.rd = rgb_decoder_(rf);
        FusionHead::Output fo = fusion_(r.rd[0], r.rd[0], r.alpha, r.g_hat, out_h, out_w);
        r.saliency = fo.saliency;
        r.logits = fo.logits;
    }

    if (training) {
        // side outputs ordered rd5..rd2 then dd5..dd2
        for (int i = 0; i < 4; ++i)
            r.aux.push_back(rgb_aux_[static_cast<size_t>(i)](r.rd[static_cast<size_t>(3 - i)], out_h, out_w));
        if (cfg_.depth_branch) {
            for (int i = 0; i < 4; ++i)
                r.aux.push_back(
                    depth_aux_[static_cast<size_t>(i)](r.dd[static_cast<size_t>(3 - i)], out_h, out_w));
        }
    }
    return r;
}

}  // namespace dpanet
