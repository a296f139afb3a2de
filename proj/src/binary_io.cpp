// SPDX-License-Identifier: Apache-2.0
#include "ghr/binary_io.hpp"

#include <fstream>
#include <iterator>

namespace ghr::io {

void ByteWriter::str16(std::string_view s) {
    if (s.size() > 0xffff) {
        throw Error(ErrorCode::InvalidArgument, "string longer than 65535 bytes");
    }
    u16(static_cast<std::uint16_t>(s.size()));
    bytes(s.data(), s.size());
}

void ByteReader::need(std::size_t n) const {
    if (n > data_.size() - pos_) fail("unexpected end of data");
}

void ByteReader::fail(const std::string& why) const {
    throw Error(code_, what_ + ": " + why + " at byte " + std::to_string(pos_));
}

void ByteReader::expect_magic(std::string_view m) {
    if (data_.size() - pos_ < m.size() ||
        std::memcmp(data_.data() + pos_, m.data(), m.size()) != 0) {
        throw Error(ErrorCode::BadMagic, what_ + ": expected magic \"" + std::string(m) + "\"");
    }
    pos_ += m.size();
}

std::string ByteReader::str16() {
    const std::size_t n = u16();
    need(n);
    std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
    pos_ += n;
    return s;
}

void ByteReader::floats(float* out, std::size_t n) {
    if (n > remaining() / sizeof(float)) fail("unexpected end of data");
    std::memcpy(out, data_.data() + pos_, n * sizeof(float));
    pos_ += n * sizeof(float);
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::MalformedFile, "cannot open " + path.string());
    }
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_file_atomic(const std::filesystem::path& path, const std::vector<std::uint8_t>& data) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw Error(ErrorCode::MalformedFile, "cannot write " + tmp.string());
        }
        out.write(reinterpret_cast<const char*>(data.data()),
                  static_cast<std::streamsize>(data.size()));
        if (!out) {
            throw Error(ErrorCode::MalformedFile, "short write to " + tmp.string());
        }
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace ghr::io
