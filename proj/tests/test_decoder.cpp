#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>

#include "dpanet/gradcheck.hpp"
#include "dpanet/losses.hpp"
#include "dpanet/network.hpp"
#include "test_util.hpp"

using namespace dpanet;

TEST_CASE("multi_scale_fuse: zero operands propagate through the products") {
    ParamStore ps;
    Rng rng(101);
    MultiScaleFuse fuse(ps, rng, "fuse", 8, FusionMode::multiply);
    Variable low = Variable::constant(testutil::random_tensor(rng, {8, 4, 4}));
    Variable zero_high = Variable::constant(Tensor({8, 2, 2}));

    // conv weights are bias-free and followed by norm; zero input keeps zero
    Variable out = fuse(zero_high, Variable::constant(Tensor({8, 4, 4})));
    CHECK(out.value().abs_max() == 0.0);

    // zero high against nonzero low: both f1 and f2 vanish multiplicatively
    Variable out2 = fuse(zero_high, low);
    CHECK(out2.value().abs_max() == 0.0);
}

TEST_CASE("multi_scale_fuse matches hand-evaluated formulas on a toy case") {
    ParamStore ps;
    Rng rng(102);
    MultiScaleFuse fuse(ps, rng, "fuse", 2, FusionMode::multiply);
    Variable high = Variable::constant(testutil::random_tensor(rng, {2, 1, 1}));
    Variable low = Variable::constant(testutil::random_tensor(rng, {2, 2, 2}));

    Variable f1 = relu(mul(upsample_bilinear(fuse.conv3(high), 2, 2), low));
    Variable f2 = relu(mul(fuse.conv4(low), upsample_bilinear(high, 2, 2)));
    Variable expect = relu(fuse.conv5(concat_channels(f1, f2)));

    Variable got = fuse(high, low);
    for (int64_t i = 0; i < got.numel(); ++i)
        CHECK(got.value()[i] == doctest::Approx(expect.value()[i]).epsilon(1e-12));
}

TEST_CASE("fusion mode variants share the output shape contract") {
    Rng rng(103);
    for (FusionMode mode : {FusionMode::multiply, FusionMode::concat, FusionMode::sum}) {
        ParamStore ps;
        Rng local(104);
        MultiScaleFuse fuse(ps, local, "fuse", 8, mode);
        Variable high = Variable::constant(testutil::random_tensor(rng, {8, 2, 2}));
        Variable low = Variable::constant(testutil::random_tensor(rng, {8, 4, 4}));
        Variable out = fuse(high, low);
        CHECK(out.value().shape() == std::vector<int>{8, 4, 4});
        CHECK(out.value().all_finite());
    }
}

TEST_CASE("multi_scale_fuse rejects channel mismatches") {
    ParamStore ps;
    Rng rng(105);
    MultiScaleFuse fuse(ps, rng, "fuse", 8, FusionMode::multiply);
    CHECK_THROWS_AS(fuse(Variable::constant(Tensor({4, 2, 2})), Variable::constant(Tensor({8, 4, 4}))),
                    std::invalid_argument);
}

TEST_CASE("decode_branch: rd5 = rf5, shapes follow encoder stages, zero propagates") {
    ParamStore ps;
    Rng rng(106);
    BranchDecoder dec(ps, rng, "dec", 8, FusionMode::multiply);

    std::array<Variable, 4> rf;
    rf[0] = Variable::constant(testutil::random_tensor(rng, {8, 16, 16}));
    rf[1] = Variable::constant(testutil::random_tensor(rng, {8, 8, 8}));
    rf[2] = Variable::constant(testutil::random_tensor(rng, {8, 4, 4}));
    rf[3] = Variable::constant(testutil::random_tensor(rng, {8, 2, 2}));
    auto rd = dec(rf);

    CHECK(std::memcmp(rd[3].value().data(), rf[3].value().data(),
                      static_cast<size_t>(rf[3].numel()) * 8) == 0);
    CHECK(rd[2].value().shape() == std::vector<int>{8, 4, 4});
    CHECK(rd[1].value().shape() == std::vector<int>{8, 8, 8});
    CHECK(rd[0].value().shape() == std::vector<int>{8, 16, 16});

    // single decoding step equals calling the fuse block directly
    Variable direct = dec.fuses[0](rd[3], rf[2]);
    for (int64_t i = 0; i < direct.numel(); ++i)
        CHECK(direct.value()[i] == doctest::Approx(rd[2].value()[i]).epsilon(1e-12));

    std::array<Variable, 4> zeros;
    zeros[0] = Variable::constant(Tensor({8, 16, 16}));
    zeros[1] = Variable::constant(Tensor({8, 8, 8}));
    zeros[2] = Variable::constant(Tensor({8, 4, 4}));
    zeros[3] = Variable::constant(Tensor({8, 2, 2}));
    auto rd0 = dec(zeros);
    for (const auto& v : rd0) CHECK(v.value().abs_max() == 0.0);

    std::array<Variable, 4> missing = rf;
    missing[2] = Variable();
    CHECK_THROWS_AS(dec(missing), std::invalid_argument);
}

TEST_CASE("multi-modality fusion gating identities") {
    ParamStore ps;
    Rng rng(107);
    FusionHead head(ps, rng, "head", 4);
    Variable rd2 = Variable::constant(testutil::random_tensor(rng, {4, 3, 3}));
    Variable dd2 = Variable::constant(testutil::random_tensor(rng, {4, 3, 3}));
    Variable alpha = Variable::constant(testutil::random_tensor(rng, {4}, 0.1, 0.9));
    Variable ones = Variable::constant(Tensor::full({4}, 1.0));
    Variable g0 = Variable::constant(Tensor::scalar(0.0));
    Variable g1 = Variable::constant(Tensor::scalar(1.0));

    // g = 0 drops the depth term entirely
    auto at0 = head(rd2, dd2, alpha, g0, 6, 6);
    Tensor f3_expect(rd2.value().shape());
    for (int c = 0; c < 4; ++c)
        for (int i = 0; i < 9; ++i)
            f3_expect[c * 9 + i] = alpha.value()[c] * rd2.value()[c * 9 + i];
    for (int64_t i = 0; i < f3_expect.numel(); ++i)
        CHECK(at0.f3.value()[i] == doctest::Approx(f3_expect[i]).epsilon(1e-12));

    // alpha = 1 ignores the gate and passes rd2
    auto at_ones = head(rd2, dd2, ones, Variable::constant(Tensor::scalar(0.42)), 6, 6);
    for (int64_t i = 0; i < rd2.numel(); ++i)
        CHECK(at_ones.f3.value()[i] == doctest::Approx(rd2.value()[i]).epsilon(1e-12));

    // dd2 = 0 kills the common-response product
    auto at_zero_dd = head(rd2, Variable::constant(Tensor({4, 3, 3})), alpha, g1, 6, 6);
    CHECK(at_zero_dd.f4.value().abs_max() == 0.0);

    // convexity per channel at g = 1: f3 between min and max of the operands
    auto at1 = head(rd2, dd2, alpha, g1, 6, 6);
    for (int c = 0; c < 4; ++c)
        for (int i = 0; i < 9; ++i) {
            const double a = rd2.value()[c * 9 + i], b = dd2.value()[c * 9 + i];
            const double f = at1.f3.value()[c * 9 + i];
            CHECK(f >= std::min(a, b) - 1e-12);
            CHECK(f <= std::max(a, b) + 1e-12);
        }

    // saliency map obeys the output contract
    CHECK(at1.saliency.value().shape() == std::vector<int>{1, 6, 6});
    for (int64_t i = 0; i < at1.saliency.numel(); ++i) {
        CHECK(at1.saliency.value()[i] > 0.0);
        CHECK(at1.saliency.value()[i] < 1.0);
    }

    Variable bad_alpha = Variable::constant(Tensor::full({4}, 1.5));
    CHECK_THROWS_AS(head(rd2, dd2, bad_alpha, g1, 6, 6), std::invalid_argument);
    CHECK_THROWS_AS(head(rd2, dd2, alpha, Variable::constant(Tensor::scalar(-0.1)), 6, 6),
                    std::invalid_argument);
}

TEST_CASE("aux head: zero conv gives a constant 0.5 map of the target size") {
    ParamStore ps;
    Rng rng(108);
    AuxHead aux(ps, rng, "aux", 4);
    {
        Variable w = aux.conv.w;
        w.mutable_value().fill(0.0);
        Variable b = aux.conv.b;
        b.mutable_value().fill(0.0);
    }
    Variable out = aux(Variable::constant(testutil::random_tensor(rng, {4, 3, 3})), 12, 10);
    CHECK(out.value().shape() == std::vector<int>{1, 12, 10});
    for (int64_t i = 0; i < out.numel(); ++i)
        CHECK(out.value()[i] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("aux head is monotone in its logits") {
    ParamStore ps;
    Rng rng(109);
    AuxHead aux(ps, rng, "aux", 2);
    Tensor feat = testutil::random_tensor(rng, {2, 2, 2});
    Tensor base = aux(Variable::constant(feat), 2, 2).value();
    // push the bias up -> every sigmoid output rises
    {
        Variable b = aux.conv.b;
        b.mutable_value()[0] += 0.75;
    }
    Tensor shifted = aux(Variable::constant(feat), 2, 2).value();
    for (int64_t i = 0; i < base.numel(); ++i) CHECK(shifted[i] > base[i]);
}

TEST_CASE("network forward: shape, range and finiteness") {
    ParamStore ps;
    Rng rng(110);
    ModelConfig cfg = toy_model_config(64, 16);
    DpaNet net(cfg, ps, rng);
    Rng data(111);
    Tensor rgb = testutil::random_tensor(data, {3, 64, 64}, -1.0, 1.0);
    Tensor depth = testutil::random_tensor(data, {3, 64, 64}, -1.0, 1.0);

    ForwardResult out = net.forward(rgb, depth, /*training=*/true);
    CHECK(out.saliency.value().shape() == std::vector<int>{1, 64, 64});
    CHECK(out.saliency.value().min() > 0.0);
    CHECK(out.saliency.value().max() < 1.0);
    CHECK(out.saliency.value().all_finite());
    REQUIRE(out.aux.size() == 8);
    for (const auto& m : out.aux) {
        CHECK(m.value().shape() == std::vector<int>{1, 64, 64});
        CHECK(m.value().all_finite());
    }
    CHECK(out.g_hat.value()[0] > 0.0);
    CHECK(out.g_hat.value()[0] < 1.0);
    CHECK(out.alpha.value().dim(0) == 16);
    CHECK(out.stages.size() == 4);

    ForwardResult infer = net.forward(rgb, depth, /*training=*/false);
    CHECK(infer.aux.empty());
}

TEST_CASE("depth_branch=off output is bit-equal under depth perturbation") {
    ParamStore ps;
    Rng rng(112);
    ModelConfig cfg = toy_model_config(64, 16);
    cfg.depth_branch = false;
    DpaNet net(cfg, ps, rng);
    Rng data(113);
    Tensor rgb = testutil::random_tensor(data, {3, 64, 64});
    Tensor depth_a = testutil::random_tensor(data, {3, 64, 64});
    Tensor depth_b = testutil::random_tensor(data, {3, 64, 64});

    ForwardResult a = net.forward(rgb, depth_a, true);
    ForwardResult b = net.forward(rgb, depth_b, true);
    CHECK(std::memcmp(a.saliency.value().data(), b.saliency.value().data(),
                      static_cast<size_t>(a.saliency.numel()) * 8) == 0);
    CHECK(a.aux.size() == 4);
    CHECK(a.g_hat.value()[0] == 1.0);
}

TEST_CASE("full network gradient check at micro scale") {
    ParamStore ps;
    Rng rng(114);
    ModelConfig cfg = toy_model_config(32, 8);
    cfg.toy_channels = {4, 4, 6, 6, 8};
    cfg.gate_hidden = 8;
    DpaNet net(cfg, ps, rng);
    // random parameter point keeps pre-activations off the relu kink
    for (const auto& [name, v] : ps.entries()) {
        Variable h = v;
        for (int64_t i = 0; i < h.numel(); ++i) h.mutable_value()[i] = rng.uniform(-0.4, 0.4);
    }
    Rng data(115);
    Tensor rgb = testutil::random_tensor(data, {3, 32, 32}, -0.5, 0.5);
    Tensor depth = testutil::random_tensor(data, {3, 32, 32}, -0.5, 0.5);
    Tensor gt({1, 32, 32});
    for (int64_t i = 0; i < gt.numel(); ++i) gt[i] = data.bernoulli(0.3) ? 1.0 : 0.0;

    LossWeights weights;
    auto loss = [&] {
        ForwardResult out = net.forward(rgb, depth, true);
        Variable cls = classification_loss(out.saliency, out.aux, gt, weights);
        Variable reg = smooth_l1(out.g_hat, 0.8);
        return final_loss(cls, reg, 1.0);
    };
    auto report = grad_check(ps.entries(), loss, 1e-6, 1e-4, 3);
    INFO("worst " << report.worst_param << " rel err " << report.worst_rel_err);
    CHECK(report.pass);
}

TEST_CASE("fusion-block gradient suite passes") {
    int seen = 0;
    for (const std::string filter : {"multi_scale_fuse", "multi_modality_fuse", "aux_head"}) {
        for (const auto& [name, report] : run_module_gradchecks(29, filter)) {
            INFO(name << " worst " << report.worst_param << " rel " << report.worst_rel_err);
            CHECK(report.pass);
            ++seen;
        }
    }
    CHECK(seen == 5);
}
