// SPDX-License-Identifier: Apache-2.0
#include "ghr/params.hpp"

#include <cmath>

#include "ghr/binary_io.hpp"
#include "ghr/error.hpp"

namespace ghr {

template <typename T>
Tensor<T>& ParamStore<T>::add(const std::string& name, Tensor<T> tensor) {
    if (index_.count(name)) {
        throw Error(ErrorCode::DuplicateId, "parameter \"" + name + "\" registered twice");
    }
    tensor.set_requires_grad(true);
    index_.emplace(name, tensors_.size());
    names_.push_back(name);
    tensors_.push_back(std::move(tensor));
    return tensors_.back();
}

template <typename T>
const Tensor<T>& ParamStore<T>::get(const std::string& name) const {
    const auto it = index_.find(name);
    if (it == index_.end()) {
        throw Error(ErrorCode::MissingTensor, "parameter \"" + name + "\"");
    }
    return tensors_[it->second];
}

template <typename T>
Tensor<T>& ParamStore<T>::get(const std::string& name) {
    return const_cast<Tensor<T>&>(static_cast<const ParamStore&>(*this).get(name));
}

template <typename T>
std::size_t ParamStore<T>::total_elements() const {
    std::size_t n = 0;
    for (const auto& t : tensors_) n += t.numel();
    return n;
}

template class ParamStore<float>;
template class ParamStore<double>;

Tensor<float> ParamInit::xavier(std::size_t fan_in, std::size_t fan_out) {
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-a, a);
    std::vector<float> v(fan_in * fan_out);
    for (auto& x : v) x = static_cast<float>(dist(rng_));
    return Tensor<float>({fan_in, fan_out}, std::move(v));
}

Tensor<float> ParamInit::zeros(Shape shape) { return Tensor<float>::zeros(std::move(shape)); }

Tensor<float> ParamInit::embedding(std::size_t rows, std::size_t cols) {
    std::normal_distribution<double> dist(0.0, 0.02);
    std::vector<float> v(rows * cols);
    for (auto& x : v) x = static_cast<float>(dist(rng_));
    return Tensor<float>({rows, cols}, std::move(v));
}

std::vector<std::uint8_t> encode_checkpoint(const ParamStore<float>& params) {
    io::ByteWriter w;
    w.magic("GHRC");
    w.u8(kCheckpointVersion);
    w.u32(static_cast<std::uint32_t>(params.size()));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& t = params.tensors()[i];
        w.str16(params.names()[i]);
        w.u8(static_cast<std::uint8_t>(t.rank()));
        for (std::size_t d : t.shape()) w.u32(static_cast<std::uint32_t>(d));
        w.bytes(t.data().data(), t.numel() * sizeof(float));
    }
    return w.buffer();
}

ParamStore<float> decode_checkpoint(std::vector<std::uint8_t> bytes, const std::string& source) {
    io::ByteReader r(std::move(bytes), ErrorCode::MalformedFile, source);
    r.expect_magic("GHRC");
    const std::uint8_t version = r.u8();
    if (version != kCheckpointVersion) {
        throw Error(ErrorCode::VersionMismatch,
                    source + ": checkpoint version " + std::to_string(version) + ", expected " +
                        std::to_string(kCheckpointVersion));
    }
    const std::uint32_t count = r.u32();
    ParamStore<float> out;
    for (std::uint32_t i = 0; i < count; ++i) {
        std::string name = r.str16();
        const std::uint8_t rank = r.u8();
        if (rank == 0) r.fail("tensor \"" + name + "\" has rank 0");
        Shape shape;
        for (std::uint8_t d = 0; d < rank; ++d) {
            const std::uint32_t dim = r.u32();
            if (dim == 0) r.fail("tensor \"" + name + "\" has a zero dimension");
            shape.push_back(dim);
        }
        const std::size_t n = shape_numel(shape);
        if (n > r.remaining() / sizeof(float)) r.fail("tensor \"" + name + "\" is truncated");
        std::vector<float> data(n);
        r.floats(data.data(), n);
        out.add(name, Tensor<float>(std::move(shape), std::move(data)));
    }
    if (r.remaining() != 0) r.fail("trailing bytes after last tensor");
    return out;
}

void save_checkpoint(const std::filesystem::path& path, const ParamStore<float>& params) {
    io::write_file_atomic(path, encode_checkpoint(params));
}

ParamStore<float> load_checkpoint(const std::filesystem::path& path) {
    return decode_checkpoint(io::read_file(path), path.string());
}

void assign_checked(const ParamStore<float>& source, ParamStore<float>& target) {
    std::string missing;
    std::string mismatched;
    for (std::size_t i = 0; i < target.size(); ++i) {
        const auto& name = target.names()[i];
        if (!source.contains(name)) {
            missing += (missing.empty() ? "" : ", ") + name;
        } else if (source.get(name).shape() != target.tensors()[i].shape()) {
            mismatched += (mismatched.empty() ? "" : ", ") + name + " " +
                          shape_string(source.get(name).shape()) + " vs expected " +
                          shape_string(target.tensors()[i].shape());
        }
    }
    if (!missing.empty()) throw Error(ErrorCode::MissingTensor, missing);
    if (!mismatched.empty()) throw Error(ErrorCode::ShapeMismatch, mismatched);
    for (std::size_t i = 0; i < source.size(); ++i) {
        if (!target.contains(source.names()[i])) {
            throw Error(ErrorCode::ShapeMismatch,
                        "unexpected tensor \"" + source.names()[i] + "\" in checkpoint");
        }
    }
    for (std::size_t i = 0; i < target.size(); ++i) {
        const auto& src = source.get(target.names()[i]);
        auto dst = target.tensors()[i].mutable_data();
        std::copy(src.data().begin(), src.data().end(), dst.begin());
    }
}

void load_checkpoint_into(const std::filesystem::path& path, ParamStore<float>& target) {
    assign_checked(load_checkpoint(path), target);
}

}  // namespace ghr
