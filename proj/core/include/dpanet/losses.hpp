// This source code is licensed under the Apache License, Version 2.0
// found in the LICENSE file in the root directory of this source tree.

#pragma once

#include <array>
#include <vector>

#include "dpanet/autograd.hpp"
#include "dpanet/image.hpp"

namespace dpanet {

struct LossWeights {
    // bound as (rgb rd5..rd2, depth dd5..dd2)
    std::array<double, 8> lambda_aux{1.0, 0.8, 0.6, 0.4, 1.0, 0.8, 0.6, 0.4};
    double lambda_reg = 1.0;
};

// Mean pixel-wise binary cross entropy; predictions clamped to [eps, 1-eps].
Variable bce_loss(const Variable& pred, const Tensor& gt, double eps = 1e-7);

// l_dom + sum_i lambda_i * l_aux_i; requires exactly 8 auxiliary maps.
Variable classification_loss(const Variable& dominant, const std::vector<Variable>& aux,
                             const Tensor& gt, const LossWeights& weights);

// 0.5 (g - g_hat)^2 when |g - g_hat| < 1, else |g - g_hat| - 0.5.
Variable smooth_l1(const Variable& g_hat, double g);

// cls + lambda_reg * reg
Variable final_loss(const Variable& cls, const Variable& reg, double lambda_reg);

// {1,H,W} target tensor from a binary mask.
Tensor mask_to_tensor(const BinaryMask& mask);

}  // namespace dpanet
