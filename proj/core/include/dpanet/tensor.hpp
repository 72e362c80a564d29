// This source code is licensed under the Apache License, Version 2.0
// found in the LICENSE file in the root directory of this source tree.

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace dpanet {

// Dense row-major tensor of doubles. Shapes used throughout the library:
// scalars {1}, vectors {n}, matrices {r,c}, feature maps {c,h,w}.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<int> shape);
    Tensor(std::vector<int> shape, std::vector<double> data);

    static Tensor scalar(double v);
    static Tensor full(std::vector<int> shape, double v);

    const std::vector<int>& shape() const { return shape_; }
    int ndim() const { return static_cast<int>(shape_.size()); }
    int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
    int64_t numel() const { return static_cast<int64_t>(data_.size()); }
    bool empty() const { return data_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    double& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
    double operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

    // Matrix element (r,c); requires ndim == 2.
    double& at(int r, int c) { return data_[static_cast<size_t>(r) * shape_[1] + c]; }
    double at(int r, int c) const { return data_[static_cast<size_t>(r) * shape_[1] + c]; }
    // Feature-map element (c,h,w); requires ndim == 3.
    double& at(int c, int h, int w) {
        return data_[(static_cast<size_t>(c) * shape_[1] + h) * shape_[2] + w];
    }
    double at(int c, int h, int w) const {
        return data_[(static_cast<size_t>(c) * shape_[1] + h) * shape_[2] + w];
    }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
    Tensor reshaped(std::vector<int> shape) const;

    void fill(double v);
    double sum() const;
    double mean() const;
    double min() const;
    double max() const;
    double abs_max() const;
    bool all_finite() const;

    std::string shape_str() const;

private:
    std::vector<int> shape_;
    std::vector<double> data_;
};

// C = A * B for 2-D tensors, with explicit transpose variants used by
// backward passes. Every output element is a serial dot product, so results
// are identical at any thread count.
Tensor matmul(const Tensor& a, const Tensor& b);     // (m,k) x (k,n)
Tensor matmul_tn(const Tensor& a, const Tensor& b);  // (k,m) x (k,n) -> a^T b
Tensor matmul_nt(const Tensor& a, const Tensor& b);  // (m,k) x (n,k) -> a b^T

// Runs fn over [0,n) split into contiguous chunks, possibly on worker
// threads. `cost` is an estimate of total scalar ops; small jobs stay on the
// calling thread.
void parallel_for(int64_t n, int64_t cost, const std::function<void(int64_t, int64_t)>& fn);

// Per-thread switch; the trainer disables op-level parallelism inside its own
// worker threads to avoid oversubscription.
void set_thread_parallelism(bool enabled);

int64_t checked_numel(const std::vector<int>& shape);

}  // namespace dpanet
