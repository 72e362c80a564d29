#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <opencv2/imgcodecs.hpp>

#include "dpanet/image.hpp"
#include "dpanet/image_io.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace dpanet;

TEST_CASE("load_gray decodes 8-bit PNG bytes losslessly") {
    testutil::TempDir tmp("imaging");
    cv::Mat m(2, 2, CV_8U);
    m.at<uint8_t>(0, 0) = 0;
    m.at<uint8_t>(0, 1) = 128;
    m.at<uint8_t>(1, 0) = 128;
    m.at<uint8_t>(1, 1) = 255;
    cv::imwrite(tmp.str("g.png"), m);

    GrayImage img = load_gray(tmp.str("g.png"));
    REQUIRE(img.height == 2);
    REQUIRE(img.width == 2);
    CHECK(img.at(0, 0) == 0);
    CHECK(img.at(0, 1) == 128);
    CHECK(img.at(1, 0) == 128);
    CHECK(img.at(1, 1) == 255);

    // identical bytes decode identically
    GrayImage again = load_gray(tmp.str("g.png"));
    CHECK(again.values == img.values);
}

TEST_CASE("load_gray rejects missing and undecodable files") {
    testutil::TempDir tmp("imaging_err");
    CHECK_THROWS_AS(load_gray(tmp.str("nope.png")), std::runtime_error);
    {
        std::ofstream os(tmp.str("junk.png"), std::ios::binary);
        os << "this is not a png";
    }
    CHECK_THROWS_AS(load_gray(tmp.str("junk.png")), std::runtime_error);
}

TEST_CASE("16-bit depth PNG rescales by format-max division") {
    testutil::TempDir tmp("imaging16");
    cv::Mat m(2, 3, CV_16U);
    const uint16_t vals[6] = {0, 257, 32768, 65535, 1000, 43210};
    for (int i = 0; i < 6; ++i) m.at<uint16_t>(i / 3, i % 3) = vals[i];
    cv::imwrite(tmp.str("d.png"), m);

    GrayImage img = load_gray(tmp.str("d.png"));
    for (int i = 0; i < 6; ++i) {
        const double expected = std::round(vals[i] * 255.0 / 65535.0);  // per-pixel rescale oracle
        CHECK(img.values[static_cast<size_t>(i)] == expected);
    }
    CHECK(img.values[3] == 255.0);
}

TEST_CASE("resize_bilinear identity and constant cases") {
    Rng rng(31);
    GrayImage img = testutil::random_gray(rng, 5, 7);
    GrayImage same = resize_bilinear(img, 5, 7);
    CHECK(same.values == img.values);

    GrayImage c = make_gray(4, 4);
    for (double& v : c.values) v = 42.0;
    GrayImage up = resize_bilinear(c, 9, 3);
    for (double v : up.values) CHECK(v == doctest::Approx(42.0).epsilon(1e-12));
}

TEST_CASE("resize_bilinear 2x2 -> 4x4 matches the weight-formula oracle") {
    GrayImage img = make_gray(2, 2);
    img.at(0, 0) = 0;
    img.at(0, 1) = 100;
    img.at(1, 0) = 100;
    img.at(1, 1) = 200;
    GrayImage out = resize_bilinear(img, 4, 4);

    // frozen from the double-precision bilinear formula
    const double expected[16] = {0,   25,  75,  100, 25,  50,  100, 125,
                                 75,  100, 150, 175, 100, 125, 175, 200};
    for (int i = 0; i < 16; ++i)
        CHECK(out.values[static_cast<size_t>(i)] == doctest::Approx(expected[i]).epsilon(1e-12));

    auto ref = oracle::bilinear_reference(img.values, 2, 2, 4, 4);
    for (int i = 0; i < 16; ++i)
        CHECK(out.values[static_cast<size_t>(i)] ==
              doctest::Approx(ref[static_cast<size_t>(i)]).epsilon(1e-12));
}

TEST_CASE("resize_bilinear stays within input bounds (property)") {
    Rng rng(32);
    for (int trial = 0; trial < 20; ++trial) {
        GrayImage img = testutil::random_gray(rng, rng.uniform_int(1, 12), rng.uniform_int(1, 12));
        GrayImage out = resize_bilinear(img, rng.uniform_int(1, 20), rng.uniform_int(1, 20));
        double lo = 1e18, hi = -1e18;
        for (double v : img.values) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        for (double v : out.values) {
            CHECK(v >= lo - 1e-9);
            CHECK(v <= hi + 1e-9);
        }
    }
    CHECK_THROWS_AS(resize_bilinear(make_gray(2, 2), 0, 4), std::invalid_argument);
}

TEST_CASE("to_binary enumerates the > threshold rule") {
    GrayImage zero = make_gray(3, 3);
    BinaryMask m0 = to_binary(zero, 0.0);
    for (auto v : m0.values) CHECK(v == 0);

    GrayImage two = make_gray(1, 2);
    two.at(0, 0) = 0;
    two.at(0, 1) = 255;
    BinaryMask m1 = to_binary(two, 127.0);
    CHECK(m1.at(0, 0) == 0);
    CHECK(m1.at(0, 1) == 1);

    Rng rng(33);
    GrayImage img = testutil::random_gray(rng, 8, 8);
    BinaryMask m = to_binary(img, 100.0);
    for (size_t i = 0; i < img.values.size(); ++i)
        CHECK(m.values[i] == (img.values[i] > 100.0 ? 1 : 0));

    // only {0,1} ever appear
    for (int trial = 0; trial < 10; ++trial) {
        GrayImage r = testutil::random_gray(rng, 6, 6);
        BinaryMask mm = to_binary(r, rng.uniform_int(0, 255));
        for (auto v : mm.values) CHECK((v == 0 || v == 1));
    }
}

TEST_CASE("flip_horizontal is an involution and reverses columns") {
    GrayImage row = make_gray(1, 3);
    row.at(0, 0) = 1;
    row.at(0, 1) = 2;
    row.at(0, 2) = 3;
    GrayImage f = flip_horizontal(row);
    CHECK(f.at(0, 0) == 3);
    CHECK(f.at(0, 1) == 2);
    CHECK(f.at(0, 2) == 1);

    Rng rng(34);
    GrayImage img = testutil::random_gray(rng, 7, 9);
    CHECK(flip_horizontal(flip_horizontal(img)).values == img.values);

    ColorImage cimg = make_color(3, 4);
    for (double& v : cimg.values) v = rng.uniform_int(0, 255);
    CHECK(flip_horizontal(flip_horizontal(cimg)).values == cimg.values);

    // symmetric image unchanged
    GrayImage sym = make_gray(2, 3);
    sym.at(0, 0) = 5;
    sym.at(0, 1) = 9;
    sym.at(0, 2) = 5;
    sym.at(1, 0) = 1;
    sym.at(1, 1) = 2;
    sym.at(1, 2) = 1;
    CHECK(flip_horizontal(sym).values == sym.values);
}

TEST_CASE("normalize applies (v/255 - mean)/std per channel") {
    ColorImage img = make_color(1, 1);
    img.at(0, 0, 0) = 127.5;
    img.at(1, 0, 0) = 127.5;
    img.at(2, 0, 0) = 127.5;
    ColorImage out = normalize(img, {0.5, 0.5, 0.5}, {1.0, 1.0, 1.0});
    for (int c = 0; c < 3; ++c) CHECK(out.at(c, 0, 0) == doctest::Approx(0.0).epsilon(1e-12));

    ColorImage id = normalize(img, {0.0, 0.0, 0.0}, {1.0, 1.0, 1.0});
    for (int c = 0; c < 3; ++c) CHECK(id.at(c, 0, 0) == doctest::Approx(0.5).epsilon(1e-12));

    Rng rng(35);
    ColorImage r = make_color(2, 2);
    for (double& v : r.values) v = rng.uniform_int(0, 255);
    const std::array<double, 3> mean{0.4, 0.45, 0.5}, stddev{0.2, 0.25, 0.3};
    ColorImage n = normalize(r, mean, stddev);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < 2; ++y)
            for (int x = 0; x < 2; ++x)
                CHECK(n.at(c, y, x) ==
                      doctest::Approx((r.at(c, y, x) / 255.0 - mean[static_cast<size_t>(c)]) /
                                      stddev[static_cast<size_t>(c)])
                          .epsilon(1e-12));

    CHECK_THROWS_AS(normalize(r, mean, {0.0, 1.0, 1.0}), std::invalid_argument);
}

TEST_CASE("saliency PNG write round-trips 8-bit quantization") {
    testutil::TempDir tmp("imaging_rt");
    Rng rng(36);
    GrayImage map = testutil::random_unit_map(rng, 6, 5);
    save_saliency_png(tmp.str("s.png"), map);
    GrayImage back = load_gray(tmp.str("s.png"));
    for (size_t i = 0; i < map.values.size(); ++i)
        CHECK(back.values[i] == std::lround(map.values[i] * 255.0));
}
