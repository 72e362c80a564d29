// This source code is licensed under the Apache License, Version 2.0
// found in the LICENSE file in the root directory of this source tree.

#include "dpanet/losses.hpp"

#include <stdexcept>

namespace dpanet {

Variable bce_loss(const Variable& pred, const Tensor& gt, double eps) {
    return bce_mean(pred, gt, eps);
}

Variable classification_loss(const Variable& dominant, const std::vector<Variable>& aux,
                             const Tensor& gt, const LossWeights& weights) {
    if (aux.size() != 8)
        throw std::invalid_argument("classification_loss: expected 8 auxiliary maps, got " +
                                    std::to_string(aux.size()));
    Variable total = bce_loss(dominant, gt);
    for (size_t i = 0; i < 8; ++i) {
        const double w = weights.lambda_aux[i];
        if (w < 0.0) throw std::invalid_argument("classification_loss: negative loss weight");
        if (w == 0.0) continue;
        total = add(total, mul_scalar(bce_loss(aux[i], gt), w));
    }
    return total;
}

Variable smooth_l1(const Variable& g_hat, double g) { return smooth_l1_to(g_hat, g); }

Variable final_loss(const Variable& cls, const Variable& reg, double lambda_reg) {
    if (lambda_reg < 0.0) throw std::invalid_argument("final_loss: lambda_reg must be >= 0");
    if (!reg.defined() || lambda_reg == 0.0) return cls;
    return add(cls, mul_scalar(reg, lambda_reg));
}

Tensor mask_to_tensor(const BinaryMask& mask) {
    Tensor t({1, mask.height, mask.width});
    for (size_t i = 0; i < mask.values.size(); ++i) t[static_cast<int64_t>(i)] = mask.values[i];
    return t;
}

}  // namespace dpanet
