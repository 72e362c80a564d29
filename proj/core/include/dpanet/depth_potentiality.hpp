// This source code is licensed under the Apache License, Version 2.0
// found in the LICENSE file in the root directory of this source tree.

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "dpanet/image.hpp"

namespace dpanet {

// Saliency-oriented depth-quality pseudo label computed against ground truth.
struct DepthPotentialityLabel {
    double d_iou = 0.0;
    double d_cov = 0.0;
    double g = 0.0;
    double gamma = 0.3;
};

// Threshold in [0,255] maximizing the between-class variance of the 256-bin
// histogram; ties resolved to the smallest threshold. A constant image (zero
// variance at every threshold) returns the constant value itself so the
// binarized map is empty.
int otsu_threshold(const GrayImage& depth);

// to_binary(depth, otsu_threshold(depth))
BinaryMask binarize_depth(const GrayImage& depth);

// |pred ∩ gt| / |pred ∪ gt|; 0 when the union is empty.
double d_iou(const BinaryMask& pred, const BinaryMask& gt);

// |pred ∩ gt| / |gt|; 0 when gt is empty.
double d_cov(const BinaryMask& pred, const BinaryMask& gt);

// g = (1+gamma) * d_iou * d_cov / (d_iou + gamma * d_cov); 0 when the
// numerator vanishes.
DepthPotentialityLabel dp_score(const BinaryMask& pred, const BinaryMask& gt, double gamma = 0.3);

DepthPotentialityLabel dp_label(const GrayImage& depth, const BinaryMask& gt, double gamma = 0.3);

struct DpSample {
    std::string id;
    GrayImage depth;
    BinaryMask gt;
};

struct DpReport {
    struct Row {
        std::string id;
        DepthPotentialityLabel label;
    };
    std::vector<Row> samples;
    double mean_g = 0.0;
};

DpReport dataset_dp_report(const std::vector<DpSample>& samples, double gamma = 0.3);

// CSV columns: sample_id, d_iou, d_cov, g
void write_dp_csv(std::ostream& os, const DpReport& report);

}  // namespace dpanet
