#pragma once

#include "tstcc/tensor.hpp"

#include <string>
#include <utility>
#include <vector>

namespace tstcc {

// Everything a training phase hands to the next one: the config snapshot that
// produced the parameters, the parameters themselves, optimizer moments, batch
// norm buffers and normalization statistics, all as named float32 tensors.
//
// File format (little-endian): "TSCK", u32 version=1, u64 config length +
// UTF-8 bytes, u64 tensor count, then per tensor: u64 name length + bytes,
// u32 rank, u64 dims[rank], float32 payload.
struct Checkpoint {
    std::string config_snapshot;
    std::vector<std::pair<std::string, Tensor<float>>> tensors;

    const Tensor<float>* find(const std::string& name) const {
        for (const auto& [n, t] : tensors)
            if (n == name) return &t;
        return nullptr;
    }

    void put(const std::string& name, Tensor<float> t) {
        for (auto& [n, existing] : tensors)
            if (n == name) {
                existing = std::move(t);
                return;
            }
        tensors.emplace_back(name, std::move(t));
    }
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace tstcc
