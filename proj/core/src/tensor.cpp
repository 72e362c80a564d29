// This source code is licensed under the Apache License, Version 2.0
// found in the LICENSE file in the root directory of this source tree.

#include "dpanet/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace dpanet {

int64_t checked_numel(const std::vector<int>& shape) {
    if (shape.empty()) throw std::invalid_argument("tensor shape must be non-empty");
    int64_t n = 1;
    for (int d : shape) {
        if (d < 1) throw std::invalid_argument("tensor dims must be >= 1");
        n *= d;
    }
    return n;
}

Tensor::Tensor(std::vector<int> shape)
    : shape_(std::move(shape)), data_(static_cast<size_t>(checked_numel(shape_)), 0.0) {}

Tensor::Tensor(std::vector<int> shape, std::vector<double> data) : shape_(std::move(shape)) {
    if (checked_numel(shape_) != static_cast<int64_t>(data.size()))
        throw std::invalid_argument("tensor data size does not match shape");
    data_ = std::move(data);
}

Tensor Tensor::scalar(double v) { return Tensor({1}, {v}); }

Tensor Tensor::full(std::vector<int> shape, double v) {
    Tensor t(std::move(shape));
    t.fill(v);
    return t;
}

Tensor Tensor::reshaped(std::vector<int> shape) const {
    if (checked_numel(shape) != numel())
        throw std::invalid_argument("reshape changes element count");
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_ = data_;
    return t;
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

double Tensor::sum() const {
    double s = 0.0;
    for (double v : data_) s += v;
    return s;
}

double Tensor::mean() const { return data_.empty() ? 0.0 : sum() / static_cast<double>(data_.size()); }

double Tensor::min() const {
    double m = std::numeric_limits<double>::infinity();
    for (double v : data_) m = std::min(m, v);
    return m;
}

double Tensor::max() const {
    double m = -std::numeric_limits<double>::infinity();
    for (double v : data_) m = std::max(m, v);
    return m;
}

double Tensor::abs_max() const {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::fabs(v));
    return m;
}

bool Tensor::all_finite() const {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

std::string Tensor::shape_str() const {
    std::ostringstream os;
    os << "(";
    for (size_t i = 0; i < shape_.size(); ++i) os << (i ? "," : "") << shape_[i];
    os << ")";
    return os.str();
}

namespace {

int max_threads() {
    unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<int>(hc);
}

constexpr int64_t kParallelCostThreshold = 1 << 21;  // ~2M scalar ops

thread_local bool tls_parallel_enabled = true;

}  // namespace

void set_thread_parallelism(bool enabled) { tls_parallel_enabled = enabled; }

void parallel_for(int64_t n, int64_t cost, const std::function<void(int64_t, int64_t)>& fn) {
    if (n <= 0) return;
    int nt = max_threads();
    if (nt <= 1 || !tls_parallel_enabled || cost < kParallelCostThreshold || n < 2) {
        fn(0, n);
        return;
    }
    nt = static_cast<int>(std::min<int64_t>(nt, n));
    std::vector<std::thread> workers;
    workers.reserve(static_cast<size_t>(nt - 1));
    int64_t chunk = (n + nt - 1) / nt;
    for (int t = 1; t < nt; ++t) {
        int64_t b = t * chunk, e = std::min(n, (t + 1) * chunk);
        if (b >= e) break;
        workers.emplace_back([&fn, b, e] { fn(b, e); });
    }
    fn(0, std::min(n, chunk));
    for (auto& w : workers) w.join();
}

namespace {

void require_2d(const Tensor& t, const char* name) {
    if (t.ndim() != 2) throw std::invalid_argument(std::string(name) + " must be 2-D, got " + t.shape_str());
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_2d(a, "matmul lhs");
    require_2d(b, "matmul rhs");
    const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
    if (b.dim(0) != k)
        throw std::invalid_argument("matmul inner dims mismatch: " + a.shape_str() + " x " + b.shape_str());
    Tensor c({m, n});
    const double* pa = a.data();
    const double* pb = b.data();
    double* pc = c.data();
    parallel_for(m, static_cast<int64_t>(m) * n * k, [&](int64_t r0, int64_t r1) {
        for (int64_t i = r0; i < r1; ++i) {
            double* crow = pc + i * n;
            const double* arow = pa + i * k;
            for (int kk = 0; kk < k; ++kk) {
                const double av = arow[kk];
                if (av == 0.0) continue;
                const double* brow = pb + static_cast<int64_t>(kk) * n;
                for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
            }
        }
    });
    return c;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
    require_2d(a, "matmul_tn lhs");
    require_2d(b, "matmul_tn rhs");
    const int k = a.dim(0), m = a.dim(1), n = b.dim(1);
    if (b.dim(0) != k)
        throw std::invalid_argument("matmul_tn inner dims mismatch: " + a.shape_str() + " x " + b.shape_str());
    Tensor c({m, n});
    const double* pa = a.data();
    const double* pb = b.data();
    double* pc = c.data();
    parallel_for(m, static_cast<int64_t>(m) * n * k, [&](int64_t r0, int64_t r1) {
        for (int64_t i = r0; i < r1; ++i) {
            double* crow = pc + i * n;
            for (int kk = 0; kk < k; ++kk) {
                const double av = pa[static_cast<int64_t>(kk) * m + i];
                if (av == 0.0) continue;
                const double* brow = pb + static_cast<int64_t>(kk) * n;
                for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
            }
        }
    });
    return c;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    require_2d(a, "matmul_nt lhs");
    require_2d(b, "matmul_nt rhs");
    const int m = a.dim(0), k = a.dim(1), n = b.dim(0);
    if (b.dim(1) != k)
        throw std::invalid_argument("matmul_nt inner dims mismatch: " + a.shape_str() + " x " + b.shape_str());
    Tensor c({m, n});
    const double* pa = a.data();
    const double* pb = b.data();
    double* pc = c.data();
    parallel_for(m, static_cast<int64_t>(m) * n * k, [&](int64_t r0, int64_t r1) {
        for (int64_t i = r0; i < r1; ++i) {
            const double* arow = pa + i * k;
            double* crow = pc + i * n;
            for (int j = 0; j < n; ++j) {
                const double* brow = pb + static_cast<int64_t>(j) * k;
                double acc = 0.0;
                for (int kk = 0; kk < k; ++kk) acc += arow[kk] * brow[kk];
                crow[j] = acc;
            }
        }
    });
    return c;
}

}  // namespace dpanet
