// This source code is licensed under the Apache License, Version 2.0
// found in the LICENSE file in the root directory of this source tree.

#include "dpanet/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace dpanet {

namespace {

constexpr char kMagic[4] = {'D', 'P', 'A', 'N'};

void write_u32(std::ostream& os, uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }
void write_u64(std::ostream& os, uint64_t v) { os.write(reinterpret_cast<const char*>(&v), 8); }
void write_str(std::ostream& os, const std::string& s) {
    write_u32(os, static_cast<uint32_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

uint32_t read_u32(std::istream& is) {
    uint32_t v = 0;
    if (!is.read(reinterpret_cast<char*>(&v), 4)) throw std::runtime_error("truncated checkpoint");
    return v;
}
uint64_t read_u64(std::istream& is) {
    uint64_t v = 0;
    if (!is.read(reinterpret_cast<char*>(&v), 8)) throw std::runtime_error("truncated checkpoint");
    return v;
}
std::string read_str(std::istream& is) {
    const uint32_t n = read_u32(is);
    if (n > (1u << 20)) throw std::runtime_error("corrupted checkpoint: absurd string length");
    std::string s(n, '\0');
    if (!is.read(s.data(), n)) throw std::runtime_error("truncated checkpoint");
    return s;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open checkpoint for writing: " + path);
    os.write(kMagic, 4);
    write_u32(os, ckpt.version);
    write_u64(os, static_cast<uint64_t>(ckpt.iteration));
    write_u32(os, static_cast<uint32_t>(ckpt.config.size()));
    for (const auto& [k, v] : ckpt.config) {
        write_str(os, k);
        write_str(os, v);
    }
    write_u32(os, static_cast<uint32_t>(ckpt.arrays.size()));
    for (const auto& [name, t] : ckpt.arrays) {
        write_str(os, name);
        write_u32(os, static_cast<uint32_t>(t.ndim()));
        for (int d = 0; d < t.ndim(); ++d) write_u32(os, static_cast<uint32_t>(t.dim(d)));
        os.write(reinterpret_cast<const char*>(t.data()),
                 static_cast<std::streamsize>(t.numel() * 8));
    }
    if (!os) throw std::runtime_error("checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("corrupted checkpoint: bad magic");
    Checkpoint ckpt;
    ckpt.version = read_u32(is);
    if (ckpt.version != kCheckpointVersion)
        throw std::runtime_error("checkpoint version mismatch: file has version " +
                                 std::to_string(ckpt.version) + ", expected " +
                                 std::to_string(kCheckpointVersion));
    ckpt.iteration = static_cast<int64_t>(read_u64(is));
    const uint32_t n_config = read_u32(is);
    for (uint32_t i = 0; i < n_config; ++i) {
        std::string k = read_str(is);
        std::string v = read_str(is);
        ckpt.config.emplace_back(std::move(k), std::move(v));
    }
    const uint32_t n_arrays = read_u32(is);
    for (uint32_t i = 0; i < n_arrays; ++i) {
        std::string name = read_str(is);
        const uint32_t ndim = read_u32(is);
        if (ndim == 0 || ndim > 8) throw std::runtime_error("corrupted checkpoint: bad rank");
        std::vector<int> shape(ndim);
        for (uint32_t d = 0; d < ndim; ++d) shape[d] = static_cast<int>(read_u32(is));
        Tensor t(shape);
        if (!is.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.numel() * 8)))
            throw std::runtime_error("truncated checkpoint");
        ckpt.arrays.emplace_back(std::move(name), std::move(t));
    }
    return ckpt;
}

Checkpoint snapshot_params(const ParamStore& ps) {
    Checkpoint ckpt;
    for (const auto& [name, var] : ps.entries()) ckpt.arrays.emplace_back(name, var.value());
    return ckpt;
}

int load_params(const Checkpoint& ckpt, ParamStore& ps, bool allow_missing) {
    std::unordered_map<std::string, const Tensor*> by_name;
    for (const auto& [name, t] : ckpt.arrays) by_name[name] = &t;
    int loaded = 0;
    for (const auto& [name, var] : ps.entries()) {
        auto it = by_name.find(name);
        if (it == by_name.end()) {
            if (allow_missing) continue;
            throw std::runtime_error("checkpoint missing parameter: " + name);
        }
        if (!(it->second->shape() == var.value().shape()))
            throw std::runtime_error("checkpoint shape mismatch for " + name);
        Variable handle = var;  // shares the leaf node
        handle.mutable_value() = *it->second;
        ++loaded;
    }
    return loaded;
}

bool checkpoint_equal(const Checkpoint& a, const Checkpoint& b) {
    if (a.version != b.version || a.iteration != b.iteration || a.config != b.config ||
        a.arrays.size() != b.arrays.size())
        return false;
    for (size_t i = 0; i < a.arrays.size(); ++i) {
        if (a.arrays[i].first != b.arrays[i].first) return false;
        const Tensor& x = a.arrays[i].second;
        const Tensor& y = b.arrays[i].second;
        if (!(x.shape() == y.shape())) return false;
        if (std::memcmp(x.data(), y.data(), static_cast<size_t>(x.numel()) * 8) != 0) return false;
    }
    return true;
}

}  // namespace dpanet
