// SPDX-License-Identifier: Apache-2.0
#include "ghr/question.hpp"

#include <cctype>
#include <cmath>

#include "ghr/binary_io.hpp"
#include "ghr/error.hpp"

namespace ghr {

namespace {

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;
constexpr std::uint64_t kTokenSeed = 0x6768722d76716121ULL;

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = kFnvOffset ^ kTokenSeed;
    for (unsigned char c : s) {
        h ^= c;
        h *= kFnvPrime;
    }
    return h;
}

std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

bool is_space(unsigned char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }
bool is_alnum(unsigned char c) { return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || c >= 0x80; }

}  // namespace

void write_embeddings(const std::filesystem::path& path,
                      const std::vector<std::pair<std::string, std::vector<float>>>& rows) {
    const std::size_t dim = rows.empty() ? 0 : rows.front().second.size();
    io::ByteWriter w;
    w.magic("GHRQ");
    w.u8(kEmbeddingFileVersion);
    w.u32(static_cast<std::uint32_t>(rows.size()));
    w.u32(static_cast<std::uint32_t>(dim));
    for (const auto& [id, v] : rows) {
        if (v.size() != dim) {
            throw Error(ErrorCode::DimensionMismatch, "embedding \"" + id + "\" has dim " +
                                                          std::to_string(v.size()));
        }
        w.str16(id);
        w.bytes(v.data(), v.size() * sizeof(float));
    }
    io::write_file_atomic(path, w.buffer());
}

EmbeddingMap load_embeddings(const std::filesystem::path& path, std::size_t expected_dim) {
    io::ByteReader r(io::read_file(path), ErrorCode::MalformedFile, path.string());
    try {
        r.expect_magic("GHRQ");
    } catch (const Error& e) {
        throw Error(ErrorCode::MalformedFile, e.what());
    }
    const std::uint8_t version = r.u8();
    if (version != kEmbeddingFileVersion) {
        throw Error(ErrorCode::MalformedFile,
                    path.string() + ": unsupported version " + std::to_string(version));
    }
    const std::uint32_t count = r.u32();
    const std::uint32_t dim = r.u32();
    if (count > 0 && dim != expected_dim) {
        throw Error(ErrorCode::DimensionMismatch, path.string() + ": dim " + std::to_string(dim) +
                                                      ", expected " + std::to_string(expected_dim));
    }
    EmbeddingMap out;
    for (std::uint32_t i = 0; i < count; ++i) {
        std::string id = r.str16();
        std::vector<float> v(dim);
        r.floats(v.data(), dim);
        for (float x : v) {
            if (!std::isfinite(x)) r.fail("non-finite value in \"" + id + "\"");
        }
        if (out.count(id)) {
            throw Error(ErrorCode::DuplicateId, path.string() + ": qa_id \"" + id + "\" repeated");
        }
        QuestionEmbedding q{id, Tensor<float>::vector(std::move(v)), EmbeddingSource::Precomputed};
        out.emplace(std::move(id), std::move(q));
    }
    if (r.remaining() != 0) r.fail("trailing bytes");
    return out;
}

std::vector<std::string> tokenize_question(std::string_view question) {
    std::vector<std::string> tokens;
    std::string current;
    auto flush = [&] {
        std::size_t b = 0, e = current.size();
        while (b < e && !is_alnum(static_cast<unsigned char>(current[b]))) ++b;
        while (e > b && !is_alnum(static_cast<unsigned char>(current[e - 1]))) --e;
        if (e > b) tokens.push_back(current.substr(b, e - b));
        current.clear();
    };
    for (char ch : question) {
        const auto c = static_cast<unsigned char>(ch);
        if (is_space(c)) {
            flush();
        } else {
            current.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : ch);
        }
    }
    flush();
    return tokens;
}

QuestionEmbedding toy_embed(std::string_view question, std::size_t dim, std::string qa_id) {
    if (dim < 8) {
        throw Error(ErrorCode::InvalidArgument, "toy embedding dim must be at least 8");
    }
    const auto tokens = tokenize_question(question);
    if (tokens.empty()) {
        throw Error(ErrorCode::EmptyQuestion, "question has no tokens");
    }
    std::vector<double> acc(dim, 0.0);
    std::vector<double> tok(dim);
    for (const auto& t : tokens) {
        std::uint64_t state = fnv1a(t);
        double norm = 0.0;
        for (auto& x : tok) {
            // uniform in [-1, 1) from the top 53 bits
            x = static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-52 - 1.0;
            norm += x * x;
        }
        norm = std::sqrt(norm);
        for (std::size_t i = 0; i < dim; ++i) acc[i] += tok[i] / norm;
    }
    double norm = 0.0;
    for (double x : acc) norm += x * x;
    norm = std::sqrt(norm);
    std::vector<float> v(dim);
    for (std::size_t i = 0; i < dim; ++i) v[i] = static_cast<float>(acc[i] / norm);
    return QuestionEmbedding{std::move(qa_id), Tensor<float>::vector(std::move(v)),
                             EmbeddingSource::ToyHash};
}

}  // namespace ghr
