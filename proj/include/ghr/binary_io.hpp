// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "ghr/error.hpp"

namespace ghr::io {

static_assert(std::endian::native == std::endian::little, "little-endian host required");

/// Appends little-endian primitives to a byte buffer.
class ByteWriter {
public:
    void bytes(const void* data, std::size_t n) {
        const auto* p = static_cast<const std::uint8_t*>(data);
        buf_.insert(buf_.end(), p, p + n);
    }
    void magic(std::string_view m) { bytes(m.data(), m.size()); }
    void u8(std::uint8_t v) { buf_.push_back(v); }
    void u16(std::uint16_t v) { bytes(&v, sizeof v); }
    void u32(std::uint32_t v) { bytes(&v, sizeof v); }
    void i32(std::int32_t v) { bytes(&v, sizeof v); }
    void f32(float v) { bytes(&v, sizeof v); }
    void f64(double v) { bytes(&v, sizeof v); }
    void str16(std::string_view s);

    const std::vector<std::uint8_t>& buffer() const { return buf_; }

private:
    std::vector<std::uint8_t> buf_;
};

/// Bounds-checked reader; any overrun raises `overrun_code`.
class ByteReader {
public:
    ByteReader(std::vector<std::uint8_t> data, ErrorCode overrun_code, std::string what)
        : data_(std::move(data)), code_(overrun_code), what_(std::move(what)) {}

    void expect_magic(std::string_view m);
    std::uint8_t u8() { return pod<std::uint8_t>(); }
    std::uint16_t u16() { return pod<std::uint16_t>(); }
    std::uint32_t u32() { return pod<std::uint32_t>(); }
    std::int32_t i32() { return pod<std::int32_t>(); }
    float f32() { return pod<float>(); }
    double f64() { return pod<double>(); }
    std::string str16();
    void floats(float* out, std::size_t n);

    std::size_t remaining() const { return data_.size() - pos_; }
    [[noreturn]] void fail(const std::string& why) const;

private:
    template <typename P>
    P pod() {
        need(sizeof(P));
        P v;
        std::memcpy(&v, data_.data() + pos_, sizeof(P));
        pos_ += sizeof(P);
        return v;
    }
    void need(std::size_t n) const;

    std::vector<std::uint8_t> data_;
    std::size_t pos_ = 0;
    ErrorCode code_;
    std::string what_;
};

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
/// Writes through a temporary file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::vector<std::uint8_t>& data);

}  // namespace ghr::io
