// This source code is licensed under the Apache License, Version 2.0
// found in the LICENSE file in the root directory of this source tree.

#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "dpanet/autograd.hpp"
#include "dpanet/rng.hpp"

namespace dpanet {

// Ordered registry of named learnable tensors. Registration order is the
// canonical iteration order for the optimizer and the checkpoint writer.
class ParamStore {
public:
    Variable create(const std::string& name, Tensor init);
    Variable get(const std::string& name) const;
    bool has(const std::string& name) const { return index_.count(name) > 0; }
    const std::vector<std::pair<std::string, Variable>>& entries() const { return entries_; }
    void zero_grads();
    int64_t total_params() const;

private:
    std::vector<std::pair<std::string, Variable>> entries_;
    std::unordered_map<std::string, size_t> index_;
};

Tensor he_normal(Rng& rng, std::vector<int> shape, int fan_in);

struct Conv2d {
    Conv2d() = default;
    Conv2d(ParamStore& ps, Rng& rng, const std::string& name, int in_ch, int out_ch, int k,
           int stride = 1, int pad = 0, bool bias = true);
    Variable operator()(const Variable& x) const { return conv2d(x, w, b, stride, pad); }
    Variable w, b;
    int stride = 1, pad = 0;
};

struct ChannelNorm {
    ChannelNorm() = default;
    ChannelNorm(ParamStore& ps, const std::string& name, int ch, double eps = 1e-5);
    Variable operator()(const Variable& x) const { return channel_norm(x, gamma, beta, eps); }
    Variable gamma, beta;
    double eps = 1e-5;
};

// conv -> per-channel norm, the standard block used everywhere a spec formula
// says "conv" without activation details.
struct ConvNorm {
    ConvNorm() = default;
    ConvNorm(ParamStore& ps, Rng& rng, const std::string& name, int in_ch, int out_ch, int k,
             int stride = 1, int pad = 0);
    Variable operator()(const Variable& x) const { return norm(conv(x)); }
    Conv2d conv;
    ChannelNorm norm;
};

struct Linear {
    Linear() = default;
    Linear(ParamStore& ps, Rng& rng, const std::string& name, int in, int out, bool bias = true);
    Variable operator()(const Variable& x) const { return linear(x, w, b); }
    Variable w, b;
};

}  // namespace dpanet
