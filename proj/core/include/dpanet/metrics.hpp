// This source code is licensed under the Apache License, Version 2.0
// found in the LICENSE file in the root directory of this source tree.

#pragma once

#include <array>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dpanet/image.hpp"

namespace dpanet {

// Precision/recall at the 256 integer thresholds of the 8-bit-quantized map.
// Binarization at threshold t keeps pixels with round(255*S) > t.
struct PrCurve {
    std::array<double, 256> precision{};
    std::array<double, 256> recall{};
};

// pred: saliency map in [0,1] (unit_range GrayImage); gt must be non-empty.
PrCurve pr_curve(const GrayImage& pred, const BinaryMask& gt);

// max over thresholds of (1+b2)PR/(b2*P+R); a threshold contributes 0 where
// the denominator vanishes.
double max_f_measure(const PrCurve& curve, double beta_sq = 0.3);

// mean |S - G|
double mae(const GrayImage& pred, const BinaryMask& gt);

// Structure measure S = alpha*S_o + (1-alpha)*S_r following the reference
// formulation cited by saliency benchmarks (object-aware + region-aware
// similarity, centroid-split quadrants).
double s_measure(const GrayImage& pred, const BinaryMask& gt, double alpha = 0.5);

struct EvalRow {
    std::string id;
    double mae = 0.0;
    double s_measure = 0.0;
    double max_f = 0.0;  // per-sample curve; informative only
    std::optional<double> g_hat;
    bool empty_gt = false;
};

struct EvalReport {
    double max_f = 0.0;      // max over the dataset-mean PR curve
    double mae = 0.0;        // mean over all samples
    double s_measure = 0.0;  // mean excluding empty-GT samples
    PrCurve mean_curve;
    std::array<double, 256> f_curve{};
    std::vector<EvalRow> rows;
    int empty_gt_samples = 0;
};

// Streaming dataset evaluation. Empty-GT samples are excluded from F and S
// averaging and still counted in MAE.
class EvalAccumulator {
public:
    void add(const std::string& id, const GrayImage& pred, const BinaryMask& gt,
             std::optional<double> g_hat = std::nullopt);
    EvalReport finalize() const;

private:
    std::vector<EvalRow> rows_;
    std::array<double, 256> prec_sum_{};
    std::array<double, 256> rec_sum_{};
    double mae_sum_ = 0.0;
    double s_sum_ = 0.0;
    int curve_samples_ = 0;
    int total_samples_ = 0;
};

// report.csv: comment header stating conventions, then one row per sample.
void write_eval_csv(std::ostream& os, const EvalReport& report);
// pr.csv: threshold, precision, recall, f
void write_curves_csv(std::ostream& os, const EvalReport& report);

// Simple line plots rendered to PNG files.
void write_pr_plot(const std::string& path, const PrCurve& curve);
void write_f_threshold_plot(const std::string& path, const std::array<double, 256>& f_curve);

}  // namespace dpanet
