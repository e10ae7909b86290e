#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "reasonbreak/concepts/concepts.hpp"
#include "reasonbreak/decoder/decoder.hpp"
#include "reasonbreak/embedding/bank.hpp"

namespace reasonbreak {

struct ProtectRequest {
    ImageBuffer image;
    std::vector<ConceptAnnotation> annotations;
    double epsilon = 16.0 / 255.0;
    int n_max = 64;
    bool minimax_enabled = true;
};

struct BlockReport {
    int concept_count = 0;
    bool fallback = false;
    int prior_index = -1;  // -1 when the minimax search is disabled
    double prior_score = 0.0;
};

struct ProtectReport {
    GridSpec grid;
    std::vector<BlockReport> blocks;
    double max_deviation = 0.0;  // measured pre-quantization
};

struct ProtectResult {
    ImageBuffer image;
    ProtectReport report;
};

// Full generation path: plan grid, decompose, assign concepts, select a prior
// per block, synthesize, clip, reassemble, enforce the budget at original
// resolution. Refuses images without annotations.
ProtectResult protect(const ProtectRequest& request, const EmbeddingBank& bank,
                      const std::shared_ptr<Encoder>& frozen_encoder, Decoder& decoder);

std::string report_to_json(const ProtectReport& report);

struct SweepRow {
    int n_max = 0;
    GridSpec grid;
    bool evaluator_ok = true;
    std::string error;
    double ppr = 0.0;
};

// Evaluator hook: receives (n_max, protected images) and returns a PPR value.
using SweepEvaluator =
    std::function<double(int n_max, const std::vector<ProtectResult>& results)>;

std::vector<SweepRow> ablation_sweep(const std::vector<ProtectRequest>& corpus,
                                     const std::vector<int>& n_max_values,
                                     const EmbeddingBank& bank,
                                     const std::shared_ptr<Encoder>& frozen_encoder,
                                     Decoder& decoder, const SweepEvaluator& evaluator);

}  // namespace reasonbreak
