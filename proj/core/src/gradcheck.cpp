// This source code is licensed under the Apache License, Version 2.0
// found in the LICENSE file in the root directory of this source tree.

#include "dpanet/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "dpanet/decoder.hpp"
#include "dpanet/gma.hpp"
#include "dpanet/heads.hpp"
#include "dpanet/losses.hpp"

namespace dpanet {

GradCheckReport grad_check(const std::vector<std::pair<std::string, Variable>>& params,
                           const std::function<Variable()>& loss_fn, double step, double tol,
                           int max_checks_per_param) {
    for (const auto& [name, v] : params) {
        Variable h = v;
        h.zero_grad();
    }
    Variable loss = loss_fn();
    loss.backward();

    std::vector<Tensor> analytic;
    analytic.reserve(params.size());
    for (const auto& [name, v] : params) analytic.push_back(v.grad());

    GradCheckReport report;
    for (size_t p = 0; p < params.size(); ++p) {
        Variable var = params[p].second;
        Tensor& theta = var.mutable_value();
        const int64_t n = theta.numel();
        int64_t stride = 1;
        if (max_checks_per_param > 0 && n > max_checks_per_param)
            stride = (n + max_checks_per_param - 1) / max_checks_per_param;

        GradCheckEntry entry;
        entry.param = params[p].first;
        for (int64_t j = 0; j < n; j += stride) {
            const double saved = theta[j];
            const double h = step * std::max(1.0, std::fabs(saved));
            theta[j] = saved + h;
            const double up = loss_fn().value()[0];
            theta[j] = saved - h;
            const double down = loss_fn().value()[0];
            theta[j] = saved;
            const double numeric = (up - down) / (2.0 * h);
            const double a = analytic[p][j];
            const double diff = std::fabs(a - numeric);
            const double rel = diff / std::max({1.0, std::fabs(a), std::fabs(numeric)});
            if (diff > entry.max_abs_diff) entry.max_abs_diff = diff;
            if (rel > entry.max_rel_err) entry.max_rel_err = rel;
        }
        entry.pass = entry.max_rel_err <= tol;
        if (entry.max_rel_err > report.worst_rel_err) {
            report.worst_rel_err = entry.max_rel_err;
            report.worst_param = entry.param;
        }
        report.pass = report.pass && entry.pass;
        report.entries.push_back(std::move(entry));
    }
    return report;
}

// ---- canned module suite -------------------------------------------------------

namespace {

Tensor random_tensor(Rng& rng, std::vector<int> shape, double lo = -1.0, double hi = 1.0) {
    Tensor t(std::move(shape));
    for (int64_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(lo, hi);
    return t;
}

}  // namespace

std::vector<std::pair<std::string, GradCheckReport>> run_module_gradchecks(
    uint64_t seed, const std::string& filter) {
    std::vector<std::pair<std::string, GradCheckReport>> results;
    constexpr int C = 8, H = 4, W = 4;
    const auto want = [&filter](const char* name) {
        return filter.empty() || std::string(name).find(filter) != std::string::npos;
    };

    if (want("spatial_attention")) {
        ParamStore ps;
        Rng rng(seed);
        SpatialAttention sa(ps, rng, "sa", 6, C);
        Variable x = Variable::constant(random_tensor(rng, {6, H, W}));
        Rng probe_rng(seed + 1);
        Tensor w(std::vector<int>{C, H, W});
        for (int64_t i = 0; i < w.numel(); ++i) w[i] = probe_rng.uniform(0.25, 1.0);
        results.emplace_back("spatial_attention",
                             grad_check(ps.entries(), [&] {
                                 return sum_all(mul(sa(x), Variable::constant(w)));
                             }));
    }
    if (want("cross_modal_attention")) {
        ParamStore ps;
        Rng rng(seed + 2);
        CrossModalAttention cm(ps, rng, "cm", C);
        Variable q = Variable::constant(random_tensor(rng, {C, H, W}));
        Variable v = Variable::constant(random_tensor(rng, {C, H, W}));
        Rng probe_rng(seed + 3);
        Tensor w(std::vector<int>{C, H, W});
        for (int64_t i = 0; i < w.numel(); ++i) w[i] = probe_rng.uniform(0.25, 1.0);
        results.emplace_back("cross_modal_attention",
                             grad_check(ps.entries(), [&] {
                                 return sum_all(mul(cm(q, v), Variable::constant(w)));
                             }));
    }
    if (want("gma_stage")) {
        ParamStore ps;
        Rng rng(seed + 4);
        GmaStage gma(ps, rng, "gma", 6, 6, C);
        Variable gate_logit = ps.create("gate_logit", Tensor::scalar(0.3));
        Variable rb = Variable::constant(random_tensor(rng, {6, H, W}));
        Variable db = Variable::constant(random_tensor(rng, {6, H, W}));
        Rng probe_rng(seed + 5);
        Tensor w1(std::vector<int>{C, H, W}), w2(std::vector<int>{C, H, W});
        for (int64_t i = 0; i < w1.numel(); ++i) w1[i] = probe_rng.uniform(0.25, 1.0);
        for (int64_t i = 0; i < w2.numel(); ++i) w2[i] = probe_rng.uniform(0.25, 1.0);
        results.emplace_back("gma_stage", grad_check(ps.entries(), [&] {
                                 auto o = gma(rb, db, sigmoid(gate_logit));
                                 return add(sum_all(mul(o.rf, Variable::constant(w1))),
                                            sum_all(mul(o.df, Variable::constant(w2))));
                             }));
    }
    for (FusionMode mode : {FusionMode::multiply, FusionMode::concat, FusionMode::sum}) {
        if (!want("multi_scale_fuse")) break;
        ParamStore ps;
        Rng rng(seed + 6);
        MultiScaleFuse fuse(ps, rng, "fuse", C, mode);
        Variable high = Variable::constant(random_tensor(rng, {C, H / 2, W / 2}));
        Variable low = Variable::constant(random_tensor(rng, {C, H, W}));
        Rng probe_rng(seed + 7);
        Tensor w(std::vector<int>{C, H, W});
        for (int64_t i = 0; i < w.numel(); ++i) w[i] = probe_rng.uniform(0.25, 1.0);
        const char* name = mode == FusionMode::multiply ? "multi_scale_fuse[multiply]"
                           : mode == FusionMode::concat ? "multi_scale_fuse[concat]"
                                                        : "multi_scale_fuse[sum]";
        results.emplace_back(name, grad_check(ps.entries(), [&] {
                                 return sum_all(mul(fuse(high, low), Variable::constant(w)));
                             }));
    }
    if (want("multi_modality_fuse")) {
        ParamStore ps;
        Rng rng(seed + 8);
        FusionHead head(ps, rng, "head", C);
        Variable alpha_logit = ps.create("alpha_logit", random_tensor(rng, {C}, -0.5, 0.5));
        Variable gate_logit = ps.create("gate_logit", Tensor::scalar(-0.2));
        Variable rd2 = Variable::constant(random_tensor(rng, {C, H, W}));
        Variable dd2 = Variable::constant(random_tensor(rng, {C, H, W}));
        Rng probe_rng(seed + 9);
        Tensor w(std::vector<int>{1, 2 * H, 2 * W});
        for (int64_t i = 0; i < w.numel(); ++i) w[i] = probe_rng.uniform(0.25, 1.0);
        results.emplace_back("multi_modality_fuse",
                             grad_check(ps.entries(), [&] {
                                 auto o = head(rd2, dd2, sigmoid(alpha_logit), sigmoid(gate_logit),
                                               2 * H, 2 * W);
                                 return sum_all(mul(o.saliency, Variable::constant(w)));
                             }));
    }
    if (want("aux_head")) {
        ParamStore ps;
        Rng rng(seed + 10);
        AuxHead aux(ps, rng, "aux", C);
        Variable feat = Variable::constant(random_tensor(rng, {C, H, W}));
        Rng probe_rng(seed + 11);
        Tensor w(std::vector<int>{1, 2 * H, 2 * W});
        for (int64_t i = 0; i < w.numel(); ++i) w[i] = probe_rng.uniform(0.25, 1.0);
        results.emplace_back("aux_head", grad_check(ps.entries(), [&] {
                                 return sum_all(mul(aux(feat, 2 * H, 2 * W), Variable::constant(w)));
                             }));
    }
    if (want("gate_head")) {
        ParamStore ps;
        Rng rng(seed + 12);
        GateHead gate(ps, rng, "gate", C, 16);
        Variable rb5 = Variable::constant(random_tensor(rng, {C, H, W}));
        Variable db5 = Variable::constant(random_tensor(rng, {C, H, W}));
        results.emplace_back("gate_head",
                             grad_check(ps.entries(), [&] { return gate(rb5, db5); }));
    }
    if (want("alpha_head")) {
        ParamStore ps;
        Rng rng(seed + 13);
        AlphaHead alpha(ps, rng, "alpha", C, C);
        Variable rb5 = Variable::constant(random_tensor(rng, {C, H, W}));
        Variable db5 = Variable::constant(random_tensor(rng, {C, H, W}));
        Rng probe_rng(seed + 14);
        Tensor w(std::vector<int>{C});
        for (int64_t i = 0; i < w.numel(); ++i) w[i] = probe_rng.uniform(0.25, 1.0);
        results.emplace_back("alpha_head", grad_check(ps.entries(), [&] {
                                 return sum_all(mul(alpha(rb5, db5), Variable::constant(w)));
                             }));
    }
    if (want("bce_loss")) {
        ParamStore ps;
        Rng rng(seed + 15);
        Variable logits = ps.create("logits", random_tensor(rng, {1, H, W}, -2.0, 2.0));
        Tensor gt(std::vector<int>{1, H, W});
        for (int64_t i = 0; i < gt.numel(); ++i) gt[i] = rng.bernoulli(0.5) ? 1.0 : 0.0;
        results.emplace_back("bce_loss",
                             grad_check(ps.entries(), [&] { return bce_loss(sigmoid(logits), gt); }));
    }
    if (want("classification_loss")) {
        ParamStore ps;
        Rng rng(seed + 16);
        Variable dom_logit = ps.create("dom", random_tensor(rng, {1, H, W}, -2.0, 2.0));
        std::vector<Variable> aux_logits;
        for (int i = 0; i < 8; ++i)
            aux_logits.push_back(
                ps.create("aux" + std::to_string(i), random_tensor(rng, {1, H, W}, -2.0, 2.0)));
        Tensor gt(std::vector<int>{1, H, W});
        for (int64_t i = 0; i < gt.numel(); ++i) gt[i] = rng.bernoulli(0.5) ? 1.0 : 0.0;
        LossWeights weights;
        results.emplace_back("classification_loss", grad_check(ps.entries(), [&] {
                                 std::vector<Variable> aux;
                                 for (auto& l : aux_logits) aux.push_back(sigmoid(l));
                                 return classification_loss(sigmoid(dom_logit), aux, gt, weights);
                             }));
    }
    if (want("smooth_l1")) {
        ParamStore ps;
        Variable g1 = ps.create("g_near", Tensor::scalar(0.6));
        Variable g2 = ps.create("g_far", Tensor::scalar(-0.7));
        results.emplace_back("smooth_l1", grad_check(ps.entries(), [&] {
                                 return add(smooth_l1(g1, 1.0), smooth_l1(g2, 1.0));
                             }));
    }
    return results;
}

}  // namespace dpanet
