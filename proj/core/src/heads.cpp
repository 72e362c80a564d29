// This source code is licensed under the Apache License, Version 2.0
// found in the LICENSE file in the root directory of this source tree.

#include "dpanet/heads.hpp"

#include <stdexcept>

namespace dpanet {

namespace {

Variable gap_concat(const Variable& rb5, const Variable& db5) {
    if (rb5.value().ndim() != 3 || db5.value().ndim() != 3)
        throw std::invalid_argument("head inputs must be {C,H,W}");
    return concat_vec(global_avg_pool(rb5), global_avg_pool(db5));
}

}  // namespace

GateHead::GateHead(ParamStore& ps, Rng& rng, const std::string& name, int top_channels, int hidden)
    : fc1(ps, rng, name + ".fc1", 2 * top_channels, hidden),
      fc2(ps, rng, name + ".fc2", hidden, 1) {}

Variable GateHead::operator()(const Variable& rb5, const Variable& db5) const {
    return sigmoid(fc2(relu(fc1(gap_concat(rb5, db5)))));
}

AlphaHead::AlphaHead(ParamStore& ps, Rng& rng, const std::string& name, int top_channels,
                     int out_channels)
    : fc(ps, rng, name + ".fc", 2 * top_channels, out_channels) {}

Variable AlphaHead::operator()(const Variable& rb5, const Variable& db5) const {
    return sigmoid(fc(gap_concat(rb5, db5)));
}

}  // namespace dpanet
