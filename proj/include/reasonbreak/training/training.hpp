#pragma once

#include <memory>
#include <string>
#include <vector>

#include "reasonbreak/concepts/concepts.hpp"
#include "reasonbreak/decoder/decoder.hpp"
#include "reasonbreak/embedding/bank.hpp"

namespace reasonbreak {

struct TrainConfig {
    int epochs = 2;
    double learning_rate = 1e-5;
    int n_max = 64;
    double epsilon = 16.0 / 255.0;
    int batch_blocks = 64;  // blocks of one image form one batch
    uint64_t seed = 0;
    double weight_decay = 0.0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
};

TrainConfig load_train_config(const std::string& path);
void save_train_config(const TrainConfig& config, const std::string& path);

struct TrainRecord {
    int step = 0;
    double loss = 0.0;  // mean of per_surrogate
    std::vector<double> per_surrogate;
};

void write_loss_history(const std::vector<TrainRecord>& records, const std::string& path);

/// Decoupled-weight-decay adaptive gradient optimizer over named param groups.
class AdamW {
public:
    AdamW(std::vector<Param*> params, double lr, double beta1, double beta2, double eps,
          double weight_decay);
    void step();
    void set_learning_rate(double lr) { lr_ = lr; }

private:
    std::vector<Param*> params_;
    std::vector<std::vector<double>> m_, v_;
    double lr_, beta1_, beta2_, eps_, wd_;
    long t_ = 0;
};

struct AnnotatedImage {
    std::string id;
    ImageBuffer image;
    std::vector<ConceptAnnotation> annotations;
};

using EncoderList = std::vector<std::shared_ptr<Encoder>>;
using SurrogateList = std::vector<std::shared_ptr<DifferentiableEncoder>>;

// Mean over surrogates s and aligned block pairs k of cos(psi_s(B_k), psi_s(B'_k)).
double ensemble_loss(const std::vector<ImageBuffer>& clean_blocks,
                     const std::vector<ImageBuffer>& adv_blocks, const EncoderList& surrogates,
                     std::vector<double>* per_surrogate = nullptr);

// Same value plus d(loss)/d(adv pixel); used by the training loop and the
// finite-difference checks.
double ensemble_loss_with_grad(const std::vector<ImageBuffer>& clean_blocks,
                               const std::vector<ImageBuffer>& adv_blocks,
                               const SurrogateList& surrogates,
                               std::vector<ImageBuffer>& grad_adv,
                               std::vector<double>* per_surrogate = nullptr);

struct TrainResult {
    std::vector<TrainRecord> history;
    int skipped_images = 0;
};

// One optimizer step per image batch: decompose, assign concepts, select a
// prior per block, synthesize deltas, clip to [0,1] (straight-through), and
// descend the ensemble loss. Images without annotations are skipped.
TrainResult train(Decoder& decoder, const std::vector<AnnotatedImage>& corpus,
                  const EmbeddingBank& bank, const std::shared_ptr<Encoder>& frozen_encoder,
                  const SurrogateList& surrogates, const TrainConfig& config,
                  int max_steps = -1);

}  // namespace reasonbreak
