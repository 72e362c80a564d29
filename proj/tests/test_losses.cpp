#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dpanet/gradcheck.hpp"
#include "dpanet/losses.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace dpanet;

TEST_CASE("bce_loss analytic values") {
    // 1x1, G = 1, S = 0.5 -> ln 2
    Variable half = Variable::constant(Tensor({1, 1, 1}, {0.5}));
    CHECK(bce_loss(half, Tensor({1, 1, 1}, {1.0})).value()[0] ==
          doctest::Approx(std::log(2.0)).epsilon(1e-12));

    // perfect prediction (clamped) stays below -ln(1 - eps) ~ 1e-7
    Tensor gt({1, 2, 2}, {1.0, 0.0, 1.0, 0.0});
    Variable perfect = Variable::constant(Tensor({1, 2, 2}, {1.0, 0.0, 1.0, 0.0}));
    CHECK(bce_loss(perfect, gt).value()[0] <= 1.001e-7);
    CHECK(bce_loss(perfect, gt).value()[0] >= 0.0);

    // random pair matches the per-pixel summation oracle
    Rng rng(61);
    Tensor pred({1, 8, 8});
    Tensor target({1, 8, 8});
    for (int64_t i = 0; i < 64; ++i) {
        pred[i] = rng.uniform(0.001, 0.999);
        target[i] = rng.bernoulli(0.5) ? 1.0 : 0.0;
    }
    std::vector<double> pv(pred.data(), pred.data() + 64), tv(target.data(), target.data() + 64);
    CHECK(bce_loss(Variable::constant(pred), target).value()[0] ==
          doctest::Approx(oracle::bce_loop(pv, tv, 1e-7)).epsilon(1e-12));

    CHECK_THROWS_AS(bce_loss(Variable::constant(Tensor({1, 2, 2})), Tensor({1, 3, 3})),
                    std::invalid_argument);
}

TEST_CASE("classification_loss composes dominant and weighted auxiliaries") {
    Rng rng(62);
    Tensor gt({1, 4, 4});
    for (int64_t i = 0; i < 16; ++i) gt[i] = rng.bernoulli(0.5) ? 1.0 : 0.0;
    Tensor pred_t({1, 4, 4});
    for (int64_t i = 0; i < 16; ++i) pred_t[i] = rng.uniform(0.05, 0.95);
    Variable pred = Variable::constant(pred_t);
    std::vector<Variable> aux(8, pred);

    LossWeights zero_aux;
    zero_aux.lambda_aux.fill(0.0);
    CHECK(classification_loss(pred, aux, gt, zero_aux).value()[0] ==
          doctest::Approx(bce_loss(pred, gt).value()[0]).epsilon(1e-12));

    // nine identical maps with default weights -> 6.6x the single loss
    LossWeights def;
    const double v = bce_loss(pred, gt).value()[0];
    CHECK(classification_loss(pred, aux, gt, def).value()[0] ==
          doctest::Approx(6.6 * v).epsilon(1e-12));

    // perfect predictions give (near) zero
    Variable perfect = Variable::constant(gt);
    std::vector<Variable> aux_p(8, perfect);
    CHECK(classification_loss(perfect, aux_p, gt, def).value()[0] <= 1e-6);

    std::vector<Variable> seven(7, pred);
    CHECK_THROWS_AS(classification_loss(pred, seven, gt, def), std::invalid_argument);
}

TEST_CASE("smooth_l1 analytic points and C1 continuity at the kink") {
    Variable g0 = Variable::constant(Tensor::scalar(0.7));
    CHECK(smooth_l1(g0, 0.7).value()[0] == 0.0);

    CHECK(smooth_l1(Variable::constant(Tensor::scalar(1.0)), 0.5).value()[0] ==
          doctest::Approx(0.125).epsilon(1e-12));  // |d| = 0.5
    CHECK(smooth_l1(Variable::constant(Tensor::scalar(2.5)), 0.5).value()[0] ==
          doctest::Approx(1.5).epsilon(1e-12));  // |d| = 2

    // value and slope agree across |d| = 1
    const double eps = 1e-7;
    const double below = smooth_l1(Variable::constant(Tensor::scalar(1.0 - eps)), 0.0).value()[0];
    const double above = smooth_l1(Variable::constant(Tensor::scalar(1.0 + eps)), 0.0).value()[0];
    CHECK(below == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(above == doctest::Approx(0.5).epsilon(1e-6));
    CHECK((above - below) / (2 * eps) == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("final_loss is cls + lambda * reg") {
    Variable cls = Variable::constant(Tensor::scalar(1.0));
    Variable reg = Variable::constant(Tensor::scalar(0.5));
    CHECK(final_loss(cls, reg, 0.0).value()[0] == 1.0);
    CHECK(final_loss(cls, reg, 1.0).value()[0] == doctest::Approx(1.5).epsilon(1e-12));
    CHECK(final_loss(cls, Variable(), 1.0).value()[0] == 1.0);  // no gate supervision
    CHECK_THROWS_AS(final_loss(cls, reg, -1.0), std::invalid_argument);
}

TEST_CASE("loss gradients match finite differences") {
    int seen = 0;
    for (const std::string filter : {"bce_loss", "classification_loss", "smooth_l1"}) {
        for (const auto& [name, report] : run_module_gradchecks(7, filter)) {
            INFO(name << " worst " << report.worst_param << " rel " << report.worst_rel_err);
            CHECK(report.pass);
            ++seen;
        }
    }
    CHECK(seen == 3);
}

TEST_CASE("mask_to_tensor carries {0,1} values") {
    BinaryMask m = make_mask(2, 3);
    m.at(0, 1) = 1;
    m.at(1, 2) = 1;
    Tensor t = mask_to_tensor(m);
    REQUIRE(t.shape() == std::vector<int>{1, 2, 3});
    CHECK(t[1] == 1.0);
    CHECK(t[5] == 1.0);
    CHECK(t.sum() == 2.0);
}
