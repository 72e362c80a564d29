// This source code is licensed under the Apache License, Version 2.0
// found in the LICENSE file in the root directory of this source tree.

#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dpanet/nn.hpp"
#include "dpanet/tensor.hpp"

namespace dpanet {

// Versioned named-array archive, little-endian:
//   magic "DPAN" | u32 version | u64 iteration
//   u32 n_config  { u32 klen, key, u32 vlen, value }
//   u32 n_arrays  { u32 nlen, name, u32 ndim, u32 dims[ndim], f64 data[] }
// Optimizer momentum buffers are stored as arrays named "momentum.<param>".
// Save/load round-trips are bit-exact.
inline constexpr uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    uint32_t version = kCheckpointVersion;
    int64_t iteration = 0;
    std::vector<std::pair<std::string, std::string>> config;
    std::vector<std::pair<std::string, Tensor>> arrays;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);  // throws on version/corruption

// Copies parameter values out of / into a store. Loading checks shapes;
// with allow_missing, store entries absent from the checkpoint are left
// untouched (used for backbone-only pretrained archives).
Checkpoint snapshot_params(const ParamStore& ps);
int load_params(const Checkpoint& ckpt, ParamStore& ps, bool allow_missing = false);

bool checkpoint_equal(const Checkpoint& a, const Checkpoint& b);

}  // namespace dpanet
