// This source code is licensed under the Apache License, Version 2.0
// found in the LICENSE file in the root directory of this source tree.

#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "dpanet/nn.hpp"

namespace dpanet {

struct GradCheckEntry {
    std::string param;
    double max_abs_diff = 0.0;
    double max_rel_err = 0.0;  // |analytic - numeric| / max(1, |analytic|, |numeric|)
    bool pass = true;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> entries;
    double worst_rel_err = 0.0;
    std::string worst_param;
    bool pass = true;
};

// Compares reverse-mode gradients of loss_fn() against central finite
// differences, perturbing each checked coordinate by step*max(1,|theta|).
// loss_fn must rebuild the graph from the parameters' current values.
// max_checks_per_param = 0 checks every coordinate; otherwise an evenly
// strided subset.
GradCheckReport grad_check(const std::vector<std::pair<std::string, Variable>>& params,
                           const std::function<Variable()>& loss_fn, double step = 1e-6,
                           double tol = 1e-4, int max_checks_per_param = 0);

// Canned per-module suite at toy sizes (C <= 8, H = W <= 4): spatial
// attention, cross-modal attention, gated combination, fusion blocks in all
// three modes, the fusion/aux/gate/alpha heads, and every loss. A non-empty
// filter keeps only modules whose name contains it.
std::vector<std::pair<std::string, GradCheckReport>> run_module_gradchecks(
    uint64_t seed, const std::string& filter = "");

}  // namespace dpanet
