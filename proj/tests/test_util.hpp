#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "dpanet/image.hpp"
#include "dpanet/rng.hpp"
#include "dpanet/tensor.hpp"

namespace testutil {

inline dpanet::GrayImage random_gray(dpanet::Rng& rng, int h, int w) {
    dpanet::GrayImage img = dpanet::make_gray(h, w);
    for (double& v : img.values) v = rng.uniform_int(0, 255);
    return img;
}

inline dpanet::GrayImage random_unit_map(dpanet::Rng& rng, int h, int w) {
    dpanet::GrayImage img = dpanet::make_gray(h, w, dpanet::PixelMode::unit_range);
    for (double& v : img.values) v = rng.uniform(0.0, 1.0);
    return img;
}

inline dpanet::BinaryMask random_mask(dpanet::Rng& rng, int h, int w, double p = 0.5) {
    dpanet::BinaryMask m = dpanet::make_mask(h, w);
    for (auto& v : m.values) v = rng.bernoulli(p) ? 1 : 0;
    return m;
}

inline dpanet::Tensor random_tensor(dpanet::Rng& rng, std::vector<int> shape, double lo = -1.0,
                                    double hi = 1.0) {
    dpanet::Tensor t(std::move(shape));
    for (int64_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(lo, hi);
    return t;
}

// scratch directory under the system tmp, unique per call
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::mt19937_64 gen{std::random_device{}()};
        path_ = std::filesystem::temp_directory_path() /
                ("dpanet_" + tag + "_" + std::to_string(gen()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }
    std::string str(const std::string& rel = "") const { return (path_ / rel).string(); }

private:
    std::filesystem::path path_;
};

}  // namespace testutil
