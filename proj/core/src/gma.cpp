// This source code is licensed under the Apache License, Version 2.0
// found in the LICENSE file in the root directory of this source tree.

#include "dpanet/gma.hpp"

#include <algorithm>
#include <stdexcept>

namespace dpanet {

SpatialAttention::SpatialAttention(ParamStore& ps, Rng& rng, const std::string& name, int in_ch,
                                   int out_ch_)
    : conv1(ps, rng, name + ".conv1", in_ch, out_ch_, 3, 1, 1),
      conv2(ps, rng, name + ".conv2", out_ch_, 2 * out_ch_, 3, 1, 1),
      out_ch(out_ch_) {}

Variable SpatialAttention::operator()(const Variable& f_in) const {
    if (f_in.value().dim(1) < 1 || f_in.value().dim(2) < 1)
        throw std::invalid_argument("spatial_attention: spatially empty input");
    Variable f = conv1(f_in);
    Variable wb = conv2(f);
    Variable w = slice_channels(wb, 0, out_ch);
    Variable b = slice_channels(wb, out_ch, out_ch);
    return relu(add(mul(w, f), b));
}

CrossModalAttention::CrossModalAttention(ParamStore& ps, Rng& rng, const std::string& name,
                                         int channels_)
    : wq(ps, rng, name + ".wq", channels_, std::max(1, channels_ / 8), 1, 1, 0),
      wk(ps, rng, name + ".wk", channels_, std::max(1, channels_ / 8), 1, 1, 0),
      wv(ps, rng, name + ".wv", channels_, channels_, 1, 1, 0),
      channels(channels_),
      reduced(std::max(1, channels_ / 8)) {}

Variable CrossModalAttention::attention(const Variable& query_source) const {
    const Tensor& qv = query_source.value();
    const int h = qv.dim(1), w = qv.dim(2);
    if (static_cast<int64_t>(h) * w == 0)
        throw std::invalid_argument("cross_modal_attention: empty spatial extent");
    Variable q = reshape(wq(query_source), {reduced, h * w});
    Variable k = reshape(wk(query_source), {reduced, h * w});
    return softmax_cols(matmul_tn(q, k));  // {HW, HW}
}

Variable CrossModalAttention::operator()(const Variable& query_source,
                                         const Variable& value_source) const {
    const Tensor& qv = query_source.value();
    const Tensor& vv = value_source.value();
    if (qv.shape() != vv.shape())
        throw std::invalid_argument("cross_modal_attention: operand shapes differ: " +
                                    qv.shape_str() + " vs " + vv.shape_str());
    const int h = qv.dim(1), w = qv.dim(2);
    Variable wa = attention(query_source);
    Variable v = reshape(wv(value_source), {channels, h * w});
    return reshape(matmul(v, wa), {channels, h, w});
}

GmaStage::GmaStage(ParamStore& ps, Rng& rng, const std::string& name, int rgb_in_ch,
                   int depth_in_ch, int channels)
    : sa_rgb(ps, rng, name + ".rgb", rgb_in_ch, channels),
      sa_depth(ps, rng, name + ".depth", depth_in_ch, channels),
      a_dr(ps, rng, name + ".a_dr", channels),
      a_rd(ps, rng, name + ".a_rd", channels) {}

GmaStage::Output GmaStage::operator()(const Variable& rb, const Variable& db,
                                      const Variable& g_hat) const {
    const double g = g_hat.value()[0];
    if (!(g >= 0.0 && g <= 1.0))
        throw std::invalid_argument("gma_forward: g_hat out of [0,1]");

    Output out;
    out.rb_tilde = sa_rgb(rb);
    out.db_tilde = sa_depth(db);
    // A_dr: depth guides RGB (query from depth, values from RGB); A_rd symmetric.
    out.f_dr = a_dr(out.db_tilde, out.rb_tilde);
    out.f_rd = a_rd(out.rb_tilde, out.db_tilde);
    Variable g2 = one_minus(g_hat);
    out.rf = add(out.rb_tilde, scale(out.f_dr, g_hat));
    out.df = add(out.db_tilde, scale(out.f_rd, g2));
    return out;
}

}  // namespace dpanet
