#pragma once

#include <string>
#include <vector>

#include "reasonbreak/embedding/encoder.hpp"

namespace reasonbreak {

/// Frozen vocabulary of unit-normalized image embeddings for prior search.
struct EmbeddingBank {
    int dim = 0;
    std::vector<std::vector<double>> vectors;
    std::vector<std::string> provenance;

    size_t size() const { return vectors.size(); }
};

struct PriorSelection {
    int index = -1;
    std::vector<double> embedding;
    double score = 0.0;  // the minimax value, in [-1, 1]
};

EmbeddingBank build_bank(const std::vector<ImageBuffer>& images, const Encoder& encoder,
                         const std::vector<std::string>& ids = {});

// argmin over bank entries e of max over concepts c of cos(text(c), e).
// Ties resolved to the lowest bank index.
PriorSelection select_prior(const std::vector<std::string>& concept_phrases,
                            const EmbeddingBank& bank, const Encoder& encoder);

// Same search over pre-computed unit text embeddings.
PriorSelection select_prior_embedded(const std::vector<std::vector<double>>& concept_embeddings,
                                     const EmbeddingBank& bank);

namespace serial {
PriorSelection select_prior_embedded(const std::vector<std::vector<double>>& concept_embeddings,
                                     const EmbeddingBank& bank);
}

// Binary bank container: magic "RBNK", u32 version, u64 entry count, u32 dim,
// row-major little-endian float32, then newline-delimited provenance ids.
void save_bank(const EmbeddingBank& bank, const std::string& path);
EmbeddingBank load_bank(const std::string& path);

}  // namespace reasonbreak
