#include "reasonbreak/pipeline/pipeline.hpp"

#include <algorithm>
#include <stdexcept>

#include <json.hpp>

#include "reasonbreak/tiling/tiling.hpp"

namespace reasonbreak {

ProtectResult protect(const ProtectRequest& request, const EmbeddingBank& bank,
                      const std::shared_ptr<Encoder>& frozen_encoder, Decoder& decoder) {
    if (request.annotations.empty())
        throw std::invalid_argument("protect: image has no concept annotations");
    if (bank.vectors.empty()) throw std::invalid_argument("protect: bank is empty");
    if (request.epsilon <= 0.0) throw std::invalid_argument("protect: epsilon must be positive");
    if (bank.dim != decoder.config().embed_dim)
        throw std::invalid_argument("protect: bank dim does not match decoder embed_dim");

    const ImageBuffer& image = request.image;
    GridSpec grid =
        plan_grid(image.width, image.height, request.n_max, decoder.config().block_side);
    BlockSet blocks = decompose(image, grid);
    BlockConceptMap cmap = assign_concepts(grid, image.width, image.height, request.annotations);

    std::vector<std::vector<double>> text_embs;
    for (const auto& a : request.annotations)
        text_embs.push_back(frozen_encoder->encode_text(a.phrase));

    ProtectResult result;
    result.report.grid = grid;
    std::vector<PerturbationField> deltas;
    deltas.reserve(blocks.blocks.size());

    for (size_t k = 0; k < blocks.blocks.size(); ++k) {
        BlockReport br;
        br.concept_count = static_cast<int>(cmap.concept_indices[k].size());
        br.fallback = cmap.fallback[k];

        std::vector<double> prior;
        if (request.minimax_enabled) {
            std::vector<std::vector<double>> subset;
            for (int ci : cmap.concept_indices[k]) subset.push_back(text_embs[ci]);
            PriorSelection sel = select_prior_embedded(subset, bank);
            br.prior_index = sel.index;
            br.prior_score = sel.score;
            prior = std::move(sel.embedding);
        } else {
            // Untargeted ablation baseline: the block's own image embedding.
            prior = frozen_encoder->encode_image(blocks.blocks[k]);
        }

        PerturbationField delta = decoder.synthesize(prior, request.epsilon);
        // Block-level L-inf clip; the budget is re-enforced after reassembly.
        for (double& d : delta.data) d = std::clamp(d, -request.epsilon, request.epsilon);
        deltas.push_back(std::move(delta));
        result.report.blocks.push_back(br);
    }

    PerturbationField field = assemble_perturbation(deltas, grid, image.width, image.height);
    result.image = apply_budget(image, field, request.epsilon);
    result.report.max_deviation = max_abs_deviation(result.image, image);
    return result;
}

std::string report_to_json(const ProtectReport& report) {
    nlohmann::json blocks = nlohmann::json::array();
    for (const auto& b : report.blocks) {
        blocks.push_back({{"concept_count", b.concept_count},
                          {"fallback", b.fallback},
                          {"prior_index", b.prior_index},
                          {"prior_score", b.prior_score}});
    }
    nlohmann::json j{{"grid", {{"m", report.grid.m}, {"n", report.grid.n},
                               {"block_side", report.grid.block_side}}},
                     {"blocks", blocks},
                     {"max_deviation", report.max_deviation}};
    return j.dump(2);
}

std::vector<SweepRow> ablation_sweep(const std::vector<ProtectRequest>& corpus,
                                     const std::vector<int>& n_max_values,
                                     const EmbeddingBank& bank,
                                     const std::shared_ptr<Encoder>& frozen_encoder,
                                     Decoder& decoder, const SweepEvaluator& evaluator) {
    if (corpus.empty() || n_max_values.empty())
        throw std::invalid_argument("ablation_sweep: corpus and value list must be non-empty");

    std::vector<SweepRow> rows;
    for (int n_max : n_max_values) {
        SweepRow row;
        row.n_max = n_max;
        try {
            std::vector<ProtectResult> results;
            for (const auto& base : corpus) {
                ProtectRequest req = base;
                req.n_max = n_max;
                results.push_back(protect(req, bank, frozen_encoder, decoder));
            }
            row.grid = results.front().report.grid;
            row.ppr = evaluator(n_max, results);
        } catch (const std::exception& e) {
            row.evaluator_ok = false;
            row.error = e.what();
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace reasonbreak
