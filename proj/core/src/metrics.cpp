// This source code is licensed under the Apache License, Version 2.0
// found in the LICENSE file in the root directory of this source tree.

#include "dpanet/metrics.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace dpanet {

namespace {

constexpr double kEps = 2.220446049250313e-16;  // IEEE double epsilon

void require_same_dims(const GrayImage& pred, const BinaryMask& gt, const char* op) {
    if (pred.height != gt.height || pred.width != gt.width)
        throw std::invalid_argument(std::string(op) + ": pred/gt dimensions differ");
}

int quantize8(double v) {
    return static_cast<int>(std::lround(255.0 * std::clamp(v, 0.0, 1.0)));
}

}  // namespace

PrCurve pr_curve(const GrayImage& pred, const BinaryMask& gt) {
    require_same_dims(pred, gt, "pr_curve");
    const size_t gt_area = gt.area();
    if (gt_area == 0) throw std::invalid_argument("pr_curve: empty ground truth");

    // histogram of quantized prediction, split by gt label
    std::array<int64_t, 256> hist_pos{}, hist_all{};
    for (size_t i = 0; i < pred.values.size(); ++i) {
        const int q = quantize8(pred.values[i]);
        ++hist_all[static_cast<size_t>(q)];
        if (gt.values[i]) ++hist_pos[static_cast<size_t>(q)];
    }
    // suffix sums give counts with quantized value > t
    PrCurve out;
    int64_t tp = 0, pp = 0;
    for (int t = 255; t >= 0; --t) {
        if (t < 255) {
            tp += hist_pos[static_cast<size_t>(t + 1)];
            pp += hist_all[static_cast<size_t>(t + 1)];
        }
        out.precision[static_cast<size_t>(t)] =
            pp == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(pp);
        out.recall[static_cast<size_t>(t)] = static_cast<double>(tp) / static_cast<double>(gt_area);
    }
    return out;
}

double max_f_measure(const PrCurve& curve, double beta_sq) {
    double best = 0.0;
    for (int t = 0; t < 256; ++t) {
        const double p = curve.precision[static_cast<size_t>(t)];
        const double r = curve.recall[static_cast<size_t>(t)];
        const double den = beta_sq * p + r;
        const double f = den == 0.0 ? 0.0 : (1.0 + beta_sq) * p * r / den;
        best = std::max(best, f);
    }
    return best;
}

double mae(const GrayImage& pred, const BinaryMask& gt) {
    require_same_dims(pred, gt, "mae");
    double acc = 0.0;
    for (size_t i = 0; i < pred.values.size(); ++i)
        acc += std::fabs(pred.values[i] - static_cast<double>(gt.values[i]));
    return acc / static_cast<double>(pred.values.size());
}

// ---- structure measure -------------------------------------------------------

namespace {

double mask_mean(const BinaryMask& gt) {
    return static_cast<double>(gt.area()) / static_cast<double>(gt.pixels());
}

// mean/sample-std of pred over the region where sel(i) holds
struct RegionStats {
    double mean = 0.0;
    double stddev = 0.0;
    int64_t n = 0;
};

template <typename Sel>
RegionStats region_stats(const GrayImage& pred, Sel sel) {
    RegionStats st;
    double sum = 0.0;
    for (size_t i = 0; i < pred.values.size(); ++i) {
        if (sel(i)) {
            sum += pred.values[i];
            ++st.n;
        }
    }
    if (st.n == 0) return st;
    st.mean = sum / static_cast<double>(st.n);
    if (st.n > 1) {
        double ss = 0.0;
        for (size_t i = 0; i < pred.values.size(); ++i) {
            if (sel(i)) {
                const double d = pred.values[i] - st.mean;
                ss += d * d;
            }
        }
        st.stddev = std::sqrt(ss / static_cast<double>(st.n - 1));
    }
    return st;
}

double object_score(double mean, double stddev) {
    return 2.0 * mean / (mean * mean + 1.0 + stddev + kEps);
}

double s_object(const GrayImage& pred, const BinaryMask& gt) {
    const auto fg = region_stats(pred, [&](size_t i) { return gt.values[i] != 0; });
    GrayImage inv = pred;
    for (double& v : inv.values) v = 1.0 - v;
    const auto bg = region_stats(inv, [&](size_t i) { return gt.values[i] == 0; });
    const double u = mask_mean(gt);
    return u * object_score(fg.mean, fg.stddev) + (1.0 - u) * object_score(bg.mean, bg.stddev);
}

// 1-based centroid of the mask, rounded half away from zero
void centroid_1based(const BinaryMask& gt, int& cx, int& cy) {
    const int64_t total = static_cast<int64_t>(gt.area());
    if (total == 0) {
        cx = static_cast<int>(std::round(gt.width / 2.0));
        cy = static_cast<int>(std::round(gt.height / 2.0));
        return;
    }
    double sx = 0.0, sy = 0.0;
    for (int y = 0; y < gt.height; ++y)
        for (int x = 0; x < gt.width; ++x)
            if (gt.at(y, x)) {
                sx += x + 1;
                sy += y + 1;
            }
    cx = static_cast<int>(std::round(sx / static_cast<double>(total)));
    cy = static_cast<int>(std::round(sy / static_cast<double>(total)));
}

// region-similarity of one quadrant: rows [y0,y1), cols [x0,x1)
double quadrant_ssim(const GrayImage& pred, const BinaryMask& gt, int y0, int y1, int x0, int x1) {
    const int64_t n = static_cast<int64_t>(y1 - y0) * (x1 - x0);
    if (n <= 0) return 0.0;  // zero-weight quadrant
    double sp = 0.0, sg = 0.0;
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) {
            sp += pred.at(y, x);
            sg += static_cast<double>(gt.at(y, x));
        }
    const double mp = sp / static_cast<double>(n);
    const double mg = sg / static_cast<double>(n);
    double vp = 0.0, vg = 0.0, cov = 0.0;
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) {
            const double dp = pred.at(y, x) - mp;
            const double dg = static_cast<double>(gt.at(y, x)) - mg;
            vp += dp * dp;
            vg += dg * dg;
            cov += dp * dg;
        }
    const double denom_n = static_cast<double>(n) - 1.0 + kEps;
    vp /= denom_n;
    vg /= denom_n;
    cov /= denom_n;
    const double a = 4.0 * mp * mg * cov;
    const double b = (mp * mp + mg * mg) * (vp + vg);
    if (a != 0.0) return a / (b + kEps);
    return b == 0.0 ? 1.0 : 0.0;
}

double s_region(const GrayImage& pred, const BinaryMask& gt) {
    int cx = 0, cy = 0;
    centroid_1based(gt, cx, cy);
    const int h = gt.height, w = gt.width;
    const double area = static_cast<double>(h) * w;
    const double w1 = (static_cast<double>(cx) * cy) / area;
    const double w2 = (static_cast<double>(w - cx) * cy) / area;
    const double w3 = (static_cast<double>(cx) * (h - cy)) / area;
    const double w4 = 1.0 - w1 - w2 - w3;
    double q = 0.0;
    q += w1 * quadrant_ssim(pred, gt, 0, cy, 0, cx);
    q += w2 * quadrant_ssim(pred, gt, 0, cy, cx, w);
    q += w3 * quadrant_ssim(pred, gt, cy, h, 0, cx);
    q += w4 * quadrant_ssim(pred, gt, cy, h, cx, w);
    return q;
}

}  // namespace

double s_measure(const GrayImage& pred, const BinaryMask& gt, double alpha) {
    require_same_dims(pred, gt, "s_measure");
    const double y = mask_mean(gt);
    double mean_pred = 0.0;
    for (double v : pred.values) mean_pred += v;
    mean_pred /= static_cast<double>(pred.values.size());
    if (y == 0.0) return 1.0 - mean_pred;
    if (y == 1.0) return mean_pred;
    const double q = alpha * s_object(pred, gt) + (1.0 - alpha) * s_region(pred, gt);
    return std::max(q, 0.0);
}

// ---- dataset aggregation -------------------------------------------------------

void EvalAccumulator::add(const std::string& id, const GrayImage& pred, const BinaryMask& gt,
                          std::optional<double> g_hat) {
    EvalRow row;
    row.id = id;
    row.g_hat = g_hat;
    row.mae = mae(pred, gt);
    row.s_measure = s_measure(pred, gt);
    mae_sum_ += row.mae;
    ++total_samples_;
    if (gt.area() == 0) {
        row.empty_gt = true;
    } else {
        const PrCurve c = pr_curve(pred, gt);
        row.max_f = max_f_measure(c);
        for (int t = 0; t < 256; ++t) {
            prec_sum_[static_cast<size_t>(t)] += c.precision[static_cast<size_t>(t)];
            rec_sum_[static_cast<size_t>(t)] += c.recall[static_cast<size_t>(t)];
        }
        s_sum_ += row.s_measure;
        ++curve_samples_;
    }
    rows_.push_back(std::move(row));
}

EvalReport EvalAccumulator::finalize() const {
    if (total_samples_ == 0) throw std::logic_error("EvalAccumulator: no samples added");
    EvalReport r;
    r.rows = rows_;
    r.mae = mae_sum_ / static_cast<double>(total_samples_);
    r.empty_gt_samples = total_samples_ - curve_samples_;
    if (curve_samples_ > 0) {
        for (int t = 0; t < 256; ++t) {
            r.mean_curve.precision[static_cast<size_t>(t)] =
                prec_sum_[static_cast<size_t>(t)] / curve_samples_;
            r.mean_curve.recall[static_cast<size_t>(t)] =
                rec_sum_[static_cast<size_t>(t)] / curve_samples_;
        }
        for (int t = 0; t < 256; ++t) {
            const double p = r.mean_curve.precision[static_cast<size_t>(t)];
            const double rec = r.mean_curve.recall[static_cast<size_t>(t)];
            const double den = 0.3 * p + rec;
            r.f_curve[static_cast<size_t>(t)] = den == 0.0 ? 0.0 : 1.3 * p * rec / den;
        }
        r.max_f = *std::max_element(r.f_curve.begin(), r.f_curve.end());
        r.s_measure = s_sum_ / static_cast<double>(curve_samples_);
    }
    return r;
}

void write_eval_csv(std::ostream& os, const EvalReport& report) {
    os << "# f_convention=max-F over dataset-mean PR curve; 256 integer thresholds\n";
    os << "# empty-GT samples excluded from F and S averaging, included in MAE\n";
    os.precision(9);
    os << "# dataset: max_f=" << report.max_f << " s_measure=" << report.s_measure
       << " mae=" << report.mae << " empty_gt_samples=" << report.empty_gt_samples << "\n";
    os << "sample_id,mae,s_measure,max_f,g_hat,empty_gt\n";
    for (const auto& row : report.rows) {
        os << row.id << ',' << row.mae << ',' << row.s_measure << ',' << row.max_f << ',';
        if (row.g_hat) os << *row.g_hat;
        os << ',' << (row.empty_gt ? 1 : 0) << '\n';
    }
}

void write_curves_csv(std::ostream& os, const EvalReport& report) {
    os << "threshold,precision,recall,f\n";
    os.precision(9);
    for (int t = 0; t < 256; ++t) {
        os << t << ',' << report.mean_curve.precision[static_cast<size_t>(t)] << ','
           << report.mean_curve.recall[static_cast<size_t>(t)] << ','
           << report.f_curve[static_cast<size_t>(t)] << '\n';
    }
}

// ---- plots ------------------------------------------------------------------

namespace {

constexpr int kPlotSize = 512;
constexpr int kMargin = 48;

cv::Mat plot_canvas() {
    cv::Mat img(kPlotSize, kPlotSize, CV_8UC3, cv::Scalar(255, 255, 255));
    const int lo = kMargin, hi = kPlotSize - kMargin;
    cv::rectangle(img, {lo, lo}, {hi, hi}, cv::Scalar(0, 0, 0), 1);
    for (int i = 1; i < 4; ++i) {
        const int p = lo + i * (hi - lo) / 4;
        cv::line(img, {p, lo}, {p, hi}, cv::Scalar(220, 220, 220), 1);
        cv::line(img, {lo, p}, {hi, p}, cv::Scalar(220, 220, 220), 1);
    }
    return img;
}

cv::Point to_px(double x, double y) {
    const int lo = kMargin, hi = kPlotSize - kMargin;
    return {lo + static_cast<int>(std::lround(x * (hi - lo))),
            hi - static_cast<int>(std::lround(y * (hi - lo)))};
}

void polyline(cv::Mat& img, const std::vector<cv::Point2d>& pts) {
    for (size_t i = 1; i < pts.size(); ++i)
        cv::line(img, to_px(pts[i - 1].x, pts[i - 1].y), to_px(pts[i].x, pts[i].y),
                 cv::Scalar(180, 60, 20), 2, cv::LINE_AA);
}

}  // namespace

void write_pr_plot(const std::string& path, const PrCurve& curve) {
    cv::Mat img = plot_canvas();
    std::vector<cv::Point2d> pts;
    for (int t = 0; t < 256; ++t)
        pts.emplace_back(curve.recall[static_cast<size_t>(t)],
                         curve.precision[static_cast<size_t>(t)]);
    polyline(img, pts);
    cv::putText(img, "recall", {kPlotSize / 2 - 30, kPlotSize - 12}, cv::FONT_HERSHEY_SIMPLEX, 0.5,
                cv::Scalar(0, 0, 0));
    cv::putText(img, "precision", {4, 24}, cv::FONT_HERSHEY_SIMPLEX, 0.5, cv::Scalar(0, 0, 0));
    if (!cv::imwrite(path, img)) throw std::runtime_error("cannot write plot: " + path);
}

void write_f_threshold_plot(const std::string& path, const std::array<double, 256>& f_curve) {
    cv::Mat img = plot_canvas();
    std::vector<cv::Point2d> pts;
    for (int t = 0; t < 256; ++t)
        pts.emplace_back(t / 255.0, f_curve[static_cast<size_t>(t)]);
    polyline(img, pts);
    cv::putText(img, "threshold/255", {kPlotSize / 2 - 50, kPlotSize - 12},
                cv::FONT_HERSHEY_SIMPLEX, 0.5, cv::Scalar(0, 0, 0));
    cv::putText(img, "F", {4, 24}, cv::FONT_HERSHEY_SIMPLEX, 0.5, cv::Scalar(0, 0, 0));
    if (!cv::imwrite(path, img)) throw std::runtime_error("cannot write plot: " + path);
}

}  // namespace dpanet
