// This source code is licensed under the Apache License, Version 2.0
// found in the LICENSE file in the root directory of this source tree.

#include "dpanet/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace dpanet {

Variable ParamStore::create(const std::string& name, Tensor init) {
    if (index_.count(name)) throw std::invalid_argument("duplicate parameter name: " + name);
    Variable v = Variable::parameter(std::move(init));
    index_[name] = entries_.size();
    entries_.emplace_back(name, v);
    return v;
}

Variable ParamStore::get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("unknown parameter: " + name);
    return entries_[it->second].second;
}

void ParamStore::zero_grads() {
    for (auto& [name, v] : entries_) v.zero_grad();
}

int64_t ParamStore::total_params() const {
    int64_t n = 0;
    for (const auto& [name, v] : entries_) n += v.numel();
    return n;
}

Tensor he_normal(Rng& rng, std::vector<int> shape, int fan_in) {
    Tensor t(std::move(shape));
    const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (int64_t i = 0; i < t.numel(); ++i) t[i] = rng.normal(0.0, stddev);
    return t;
}

Conv2d::Conv2d(ParamStore& ps, Rng& rng, const std::string& name, int in_ch, int out_ch, int k,
               int stride_, int pad_, bool bias)
    : stride(stride_), pad(pad_) {
    w = ps.create(name + ".w", he_normal(rng, {out_ch, in_ch, k, k}, in_ch * k * k));
    if (bias) b = ps.create(name + ".b", Tensor({out_ch}));
}

ChannelNorm::ChannelNorm(ParamStore& ps, const std::string& name, int ch, double eps_) : eps(eps_) {
    gamma = ps.create(name + ".g", Tensor::full({ch}, 1.0));
    beta = ps.create(name + ".b", Tensor({ch}));
}

ConvNorm::ConvNorm(ParamStore& ps, Rng& rng, const std::string& name, int in_ch, int out_ch, int k,
                   int stride, int pad)
    : conv(ps, rng, name + ".conv", in_ch, out_ch, k, stride, pad, /*bias=*/false),
      norm(ps, name + ".norm", out_ch) {}

Linear::Linear(ParamStore& ps, Rng& rng, const std::string& name, int in, int out, bool bias) {
    w = ps.create(name + ".w", he_normal(rng, {out, in}, in));
    if (bias) b = ps.create(name + ".b", Tensor({out}));
}

}  // namespace dpanet
