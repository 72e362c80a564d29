// This source code is licensed under the Apache License, Version 2.0
// found in the LICENSE file in the root directory of this source tree.

#include "dpanet/decoder.hpp"

#include <stdexcept>

namespace dpanet {

MultiScaleFuse::MultiScaleFuse(ParamStore& ps, Rng& rng, const std::string& name, int channels_,
                               FusionMode mode_)
    : conv3(ps, rng, name + ".conv3", channels_, channels_, 3, 1, 1),
      conv4(ps, rng, name + ".conv4", channels_, channels_, 3, 1, 1),
      conv5(ps, rng, name + ".conv5", 2 * channels_, channels_, 3, 1, 1),
      mode(mode_),
      channels(channels_) {
    if (mode == FusionMode::concat) {
        cat1 = ConvNorm(ps, rng, name + ".cat1", 2 * channels_, channels_, 1, 1, 0);
        cat2 = ConvNorm(ps, rng, name + ".cat2", 2 * channels_, channels_, 1, 1, 0);
    }
}

Variable MultiScaleFuse::operator()(const Variable& high, const Variable& low) const {
    if (high.value().dim(0) != channels || low.value().dim(0) != channels)
        throw std::invalid_argument("multi_scale_fuse: operands must have " +
                                    std::to_string(channels) + " channels");
    const int oh = low.value().dim(1), ow = low.value().dim(2);
    Variable high_proj = upsample_bilinear(conv3(high), oh, ow);
    Variable high_up = upsample_bilinear(high, oh, ow);
    Variable low_proj = conv4(low);

    Variable f1, f2;
    switch (mode) {
        case FusionMode::multiply:
            f1 = relu(mul(high_proj, low));
            f2 = relu(mul(low_proj, high_up));
            break;
        case FusionMode::sum:
            f1 = relu(add(high_proj, low));
            f2 = relu(add(low_proj, high_up));
            break;
        case FusionMode::concat:
            f1 = relu(cat1(concat_channels(high_proj, low)));
            f2 = relu(cat2(concat_channels(low_proj, high_up)));
            break;
    }
    return relu(conv5(concat_channels(f1, f2)));
}

BranchDecoder::BranchDecoder(ParamStore& ps, Rng& rng, const std::string& prefix, int channels,
                             FusionMode mode) {
    for (int stage = 4; stage >= 2; --stage)
        fuses.emplace_back(ps, rng, prefix + ".s" + std::to_string(stage), channels, mode);
}

std::array<Variable, 4> BranchDecoder::operator()(const std::array<Variable, 4>& rf) const {
    for (const auto& f : rf)
        if (!f.defined()) throw std::invalid_argument("decode_branch: missing stage feature");
    std::array<Variable, 4> rd;
    rd[3] = rf[3];  // rd5 = rf5
    rd[2] = fuses[0](rd[3], rf[2]);
    rd[1] = fuses[1](rd[2], rf[1]);
    rd[0] = fuses[2](rd[1], rf[0]);
    return rd;
}

FusionHead::FusionHead(ParamStore& ps, Rng& rng, const std::string& name, int channels_)
    : conv_cat(ps, rng, name + ".conv", 2 * channels_, channels_, 3, 1, 1),
      head(ps, rng, name + ".head", channels_, 1, 3, 1, 1),
      channels(channels_) {}

FusionHead::Output FusionHead::operator()(const Variable& rd2, const Variable& dd2,
                                          const Variable& alpha, const Variable& g_hat, int out_h,
                                          int out_w) const {
    const double g = g_hat.value()[0];
    if (!(g >= 0.0 && g <= 1.0))
        throw std::invalid_argument("multi_modality_fuse: g_hat out of [0,1]");
    const Tensor& av = alpha.value();
    for (int64_t i = 0; i < av.numel(); ++i)
        if (!(av[i] >= 0.0 && av[i] <= 1.0))
            throw std::invalid_argument("multi_modality_fuse: alpha out of [0,1]");

    Output out;
    Variable inv_alpha = add_scalar(mul_scalar(alpha, -1.0), 1.0);
    out.f3 = add(channel_scale(rd2, alpha), scale(channel_scale(dd2, inv_alpha), g_hat));
    out.f4 = mul(rd2, dd2);
    Variable f_sal = relu(conv_cat(concat_channels(out.f3, out.f4)));
    out.logits = upsample_bilinear(head(f_sal), out_h, out_w);
    out.saliency = sigmoid(out.logits);
    return out;
}

AuxHead::AuxHead(ParamStore& ps, Rng& rng, const std::string& name, int channels)
    : conv(ps, rng, name + ".conv", channels, 1, 3, 1, 1) {}

Variable AuxHead::operator()(const Variable& feat, int out_h, int out_w) const {
    return sigmoid(upsample_bilinear(conv(feat), out_h, out_w));
}

}  // namespace dpanet
