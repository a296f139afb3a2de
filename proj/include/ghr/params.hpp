// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "ghr/tensor.hpp"

namespace ghr {

/// Named learnable tensors in registration order.
template <typename T>
class ParamStore {
public:
    /// Registers a leaf tensor and marks it as requiring gradients.
    Tensor<T>& add(const std::string& name, Tensor<T> tensor);
    const Tensor<T>& get(const std::string& name) const;
    Tensor<T>& get(const std::string& name);
    bool contains(const std::string& name) const { return index_.count(name) != 0; }

    std::size_t size() const { return tensors_.size(); }
    std::size_t total_elements() const;
    const std::vector<std::string>& names() const { return names_; }
    const std::vector<Tensor<T>>& tensors() const { return tensors_; }
    std::vector<Tensor<T>>& tensors() { return tensors_; }

    /// Deep copy with converted element type.
    template <typename U>
    ParamStore<U> cast() const {
        ParamStore<U> out;
        for (std::size_t i = 0; i < tensors_.size(); ++i) {
            out.add(names_[i], tensor_cast<U>(tensors_[i]));
        }
        return out;
    }
    ParamStore clone() const { return cast<T>(); }

private:
    std::vector<std::string> names_;
    std::vector<Tensor<T>> tensors_;
    std::unordered_map<std::string, std::size_t> index_;
};

/// Seeded initializers.
class ParamInit {
public:
    explicit ParamInit(std::uint64_t seed) : rng_(seed) {}

    /// uniform(-a, a) with a = sqrt(6 / (fan_in + fan_out)) for an [in x out] matrix.
    Tensor<float> xavier(std::size_t fan_in, std::size_t fan_out);
    Tensor<float> zeros(Shape shape);
    /// normal(0, 0.02) embedding table.
    Tensor<float> embedding(std::size_t rows, std::size_t cols);

private:
    std::mt19937_64 rng_;
};

/// "GHRC" v1: magic, u8 version, u32 count, then per tensor u16 name length,
/// name, u8 rank, u32 dims, little-endian float32 data.
inline constexpr std::uint8_t kCheckpointVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(const ParamStore<float>& params);
ParamStore<float> decode_checkpoint(std::vector<std::uint8_t> bytes, const std::string& source);

void save_checkpoint(const std::filesystem::path& path, const ParamStore<float>& params);
ParamStore<float> load_checkpoint(const std::filesystem::path& path);

/// Loads `path` into `target`, which fixes the expected names and shapes.
/// Either every tensor is replaced or `target` is left untouched.
void load_checkpoint_into(const std::filesystem::path& path, ParamStore<float>& target);
void assign_checked(const ParamStore<float>& source, ParamStore<float>& target);

}  // namespace ghr
