#include "reasonbreak/embedding/bank.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "reasonbreak/core/tensor.hpp"

namespace reasonbreak {

namespace {
constexpr char kMagic[4] = {'R', 'B', 'N', 'K'};
constexpr uint32_t kVersion = 1;

double minimax_score(const std::vector<std::vector<double>>& concepts,
                     const std::vector<double>& entry) {
    double worst = -std::numeric_limits<double>::infinity();
    for (const auto& c : concepts) worst = std::max(worst, dot(c, entry));
    return worst;
}
}  // namespace

EmbeddingBank build_bank(const std::vector<ImageBuffer>& images, const Encoder& encoder,
                         const std::vector<std::string>& ids) {
    if (images.empty()) throw std::invalid_argument("build_bank: image list is empty");
    if (!ids.empty() && ids.size() != images.size())
        throw std::invalid_argument("build_bank: id count does not match image count");
    EmbeddingBank bank;
    bank.dim = encoder.embed_dim();
    bank.vectors.reserve(images.size());
    for (size_t i = 0; i < images.size(); ++i) {
        bank.vectors.push_back(encoder.encode_image(images[i]));
        bank.provenance.push_back(ids.empty() ? "img-" + std::to_string(i) : ids[i]);
    }
    return bank;
}

PriorSelection select_prior(const std::vector<std::string>& concept_phrases,
                            const EmbeddingBank& bank, const Encoder& encoder) {
    if (concept_phrases.empty()) throw std::invalid_argument("select_prior: empty concept list");
    std::vector<std::vector<double>> embs;
    embs.reserve(concept_phrases.size());
    for (const auto& p : concept_phrases) embs.push_back(encoder.encode_text(p));
    return select_prior_embedded(embs, bank);
}

PriorSelection select_prior_embedded(const std::vector<std::vector<double>>& concept_embeddings,
                                     const EmbeddingBank& bank) {
    if (bank.vectors.empty()) throw std::invalid_argument("select_prior: bank is empty");
    if (concept_embeddings.empty()) throw std::invalid_argument("select_prior: empty concept list");

    const int count = static_cast<int>(bank.vectors.size());
    std::vector<double> scores(count);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < count; ++i)
        scores[i] = minimax_score(concept_embeddings, bank.vectors[i]);

    // Serial argmin keeps the lowest-index tie-break deterministic.
    int best = 0;
    for (int i = 1; i < count; ++i)
        if (scores[i] < scores[best]) best = i;
    return PriorSelection{best, bank.vectors[best], scores[best]};
}

namespace serial {
PriorSelection select_prior_embedded(const std::vector<std::vector<double>>& concept_embeddings,
                                     const EmbeddingBank& bank) {
    if (bank.vectors.empty()) throw std::invalid_argument("select_prior: bank is empty");
    if (concept_embeddings.empty()) throw std::invalid_argument("select_prior: empty concept list");
    int best = -1;
    double best_score = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < bank.vectors.size(); ++i) {
        double s = minimax_score(concept_embeddings, bank.vectors[i]);
        if (s < best_score) {
            best_score = s;
            best = static_cast<int>(i);
        }
    }
    return PriorSelection{best, bank.vectors[best], best_score};
}
}  // namespace serial

void save_bank(const EmbeddingBank& bank, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write bank file: " + path);
    out.write(kMagic, 4);
    uint32_t version = kVersion;
    uint64_t count = bank.vectors.size();
    uint32_t dim = static_cast<uint32_t>(bank.dim);
    out.write(reinterpret_cast<const char*>(&version), sizeof(version));
    out.write(reinterpret_cast<const char*>(&count), sizeof(count));
    out.write(reinterpret_cast<const char*>(&dim), sizeof(dim));
    std::vector<float> row(bank.dim);
    for (const auto& v : bank.vectors) {
        for (int d = 0; d < bank.dim; ++d) row[d] = static_cast<float>(v[d]);
        out.write(reinterpret_cast<const char*>(row.data()), sizeof(float) * row.size());
    }
    for (const auto& id : bank.provenance) out << id << "\n";
}

EmbeddingBank load_bank(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open bank file: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("bank file has wrong magic: " + path);
    uint32_t version = 0, dim = 0;
    uint64_t count = 0;
    in.read(reinterpret_cast<char*>(&version), sizeof(version));
    in.read(reinterpret_cast<char*>(&count), sizeof(count));
    in.read(reinterpret_cast<char*>(&dim), sizeof(dim));
    if (!in || version != kVersion)
        throw std::runtime_error("bank file has unsupported version: " + path);

    EmbeddingBank bank;
    bank.dim = static_cast<int>(dim);
    bank.vectors.resize(count);
    std::vector<float> row(dim);
    for (uint64_t i = 0; i < count; ++i) {
        in.read(reinterpret_cast<char*>(row.data()), sizeof(float) * row.size());
        if (!in) throw std::runtime_error("bank file truncated: " + path);
        bank.vectors[i].assign(row.begin(), row.end());
        normalize(bank.vectors[i]);  // undo float32 rounding drift
    }
    std::string id;
    while (std::getline(in, id))
        if (!id.empty()) bank.provenance.push_back(id);
    if (bank.provenance.size() != count)
        bank.provenance.resize(count);
    return bank;
}

}  // namespace reasonbreak
