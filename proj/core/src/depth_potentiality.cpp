// This source code is licensed under the Apache License, Version 2.0
// found in the LICENSE file in the root directory of this source tree.

#include "dpanet/depth_potentiality.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <ostream>
#include <stdexcept>

namespace dpanet {

namespace {

std::array<int64_t, 256> histogram256(const GrayImage& img) {
    if (img.mode != PixelMode::byte_range)
        throw std::invalid_argument("otsu_threshold expects a byte-range image");
    std::array<int64_t, 256> hist{};
    for (double v : img.values) {
        const int bin = static_cast<int>(std::clamp(std::lround(v), 0L, 255L));
        ++hist[static_cast<size_t>(bin)];
    }
    return hist;
}

void require_same_dims(const BinaryMask& a, const BinaryMask& b, const char* op) {
    if (a.height != b.height || a.width != b.width)
        throw std::invalid_argument(std::string(op) + ": mask dimensions differ");
}

}  // namespace

int otsu_threshold(const GrayImage& depth) {
    const auto hist = histogram256(depth);
    const int64_t total = static_cast<int64_t>(depth.pixels());
    int64_t sum_total = 0;
    for (int v = 0; v < 256; ++v) sum_total += hist[static_cast<size_t>(v)] * v;

    int best_t = -1;
    double best_var = 0.0;
    int64_t cnt0 = 0, sum0 = 0;
    for (int t = 0; t < 256; ++t) {
        cnt0 += hist[static_cast<size_t>(t)];
        sum0 += hist[static_cast<size_t>(t)] * t;
        const int64_t cnt1 = total - cnt0;
        if (cnt0 == 0 || cnt1 == 0) continue;
        const double w0 = static_cast<double>(cnt0) / static_cast<double>(total);
        const double w1 = static_cast<double>(cnt1) / static_cast<double>(total);
        const double mu0 = static_cast<double>(sum0) / static_cast<double>(cnt0);
        const double mu1 = static_cast<double>(sum_total - sum0) / static_cast<double>(cnt1);
        const double var = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
        if (var > best_var) {
            best_var = var;
            best_t = t;
        }
    }
    if (best_t < 0) {
        // constant image: return the single occupied level; "> t" never fires
        for (int v = 0; v < 256; ++v)
            if (hist[static_cast<size_t>(v)] > 0) return v;
        return 0;  // unreachable for valid images
    }
    return best_t;
}

BinaryMask binarize_depth(const GrayImage& depth) {
    return to_binary(depth, static_cast<double>(otsu_threshold(depth)));
}

double d_iou(const BinaryMask& pred, const BinaryMask& gt) {
    require_same_dims(pred, gt, "d_iou");
    int64_t inter = 0, uni = 0;
    for (size_t i = 0; i < pred.values.size(); ++i) {
        inter += pred.values[i] & gt.values[i];
        uni += pred.values[i] | gt.values[i];
    }
    return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

double d_cov(const BinaryMask& pred, const BinaryMask& gt) {
    require_same_dims(pred, gt, "d_cov");
    int64_t inter = 0, gt_area = 0;
    for (size_t i = 0; i < pred.values.size(); ++i) {
        inter += pred.values[i] & gt.values[i];
        gt_area += gt.values[i];
    }
    return gt_area == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(gt_area);
}

DepthPotentialityLabel dp_score(const BinaryMask& pred, const BinaryMask& gt, double gamma) {
    if (gamma <= 0.0) throw std::invalid_argument("dp_score: gamma must be > 0");
    DepthPotentialityLabel out;
    out.gamma = gamma;
    out.d_iou = d_iou(pred, gt);
    out.d_cov = d_cov(pred, gt);
    const double num = (1.0 + gamma) * out.d_iou * out.d_cov;
    out.g = num == 0.0 ? 0.0 : num / (out.d_iou + gamma * out.d_cov);
    return out;
}

DepthPotentialityLabel dp_label(const GrayImage& depth, const BinaryMask& gt, double gamma) {
    return dp_score(binarize_depth(depth), gt, gamma);
}

DpReport dataset_dp_report(const std::vector<DpSample>& samples, double gamma) {
    if (samples.empty()) throw std::invalid_argument("dataset_dp_report: empty sample sequence");
    DpReport report;
    report.samples.reserve(samples.size());
    double acc = 0.0;
    for (const auto& s : samples) {
        DepthPotentialityLabel label = dp_label(s.depth, s.gt, gamma);
        acc += label.g;
        report.samples.push_back({s.id, label});
    }
    report.mean_g = acc / static_cast<double>(samples.size());
    return report;
}

void write_dp_csv(std::ostream& os, const DpReport& report) {
    os << "sample_id,d_iou,d_cov,g\n";
    os.precision(9);
    for (const auto& row : report.samples) {
        os << row.id << ',' << row.label.d_iou << ',' << row.label.d_cov << ',' << row.label.g
           << '\n';
    }
}

}  // namespace dpanet
