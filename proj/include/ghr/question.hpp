// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "ghr/tensor.hpp"

namespace ghr {

enum class EmbeddingSource { Precomputed, ToyHash };

struct QuestionEmbedding {
    std::string qa_id;
    Tensor<float> vector;  // shape [d_q]
    EmbeddingSource source = EmbeddingSource::Precomputed;
};

using EmbeddingMap = std::map<std::string, QuestionEmbedding>;

/// "GHRQ": magic, u8 version, u32 count, u32 dim; per entry u16 id length,
/// UTF-8 id, dim float32 values.
inline constexpr std::uint8_t kEmbeddingFileVersion = 1;

void write_embeddings(const std::filesystem::path& path,
                      const std::vector<std::pair<std::string, std::vector<float>>>& rows);
EmbeddingMap load_embeddings(const std::filesystem::path& path, std::size_t expected_dim);

/// Lowercased (ASCII) whitespace tokens with leading/trailing punctuation
/// removed.
std::vector<std::string> tokenize_question(std::string_view question);

/// Bag of hashed tokens: every token maps to a pseudo-random unit vector
/// derived from its FNV-1a hash; the mean is L2-normalized.
QuestionEmbedding toy_embed(std::string_view question, std::size_t dim,
                            std::string qa_id = {});

}  // namespace ghr
