#include "reasonbreak/training/training.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <stdexcept>

#include <json.hpp>

#include "reasonbreak/tiling/tiling.hpp"

namespace reasonbreak {

TrainConfig load_train_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open train config: " + path);
    nlohmann::json j = nlohmann::json::parse(in);
    if (j.value("version", 0) != 1)
        throw std::runtime_error("train config has unsupported version: " + path);
    TrainConfig c;
    c.epochs = j.value("epochs", c.epochs);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.n_max = j.value("n_max", c.n_max);
    c.epsilon = j.value("epsilon", c.epsilon);
    c.batch_blocks = j.value("batch_blocks", c.batch_blocks);
    c.seed = j.value("seed", c.seed);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    return c;
}

void save_train_config(const TrainConfig& c, const std::string& path) {
    nlohmann::json j{{"version", 1},
                     {"epochs", c.epochs},
                     {"learning_rate", c.learning_rate},
                     {"n_max", c.n_max},
                     {"epsilon", c.epsilon},
                     {"batch_blocks", c.batch_blocks},
                     {"seed", c.seed},
                     {"weight_decay", c.weight_decay}};
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write train config: " + path);
    out << j.dump(2) << "\n";
}

void write_loss_history(const std::vector<TrainRecord>& records, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write loss history: " + path);
    for (const auto& r : records) {
        nlohmann::json j{{"step", r.step}, {"loss", r.loss}, {"per_surrogate", r.per_surrogate}};
        out << j.dump() << "\n";
    }
}

AdamW::AdamW(std::vector<Param*> params, double lr, double beta1, double beta2, double eps,
             double weight_decay)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps),
      wd_(weight_decay) {
    for (const Param* p : params_) {
        m_.emplace_back(p->w.size(), 0.0);
        v_.emplace_back(p->w.size(), 0.0);
    }
}

void AdamW::step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (size_t pi = 0; pi < params_.size(); ++pi) {
        Param& p = *params_[pi];
        auto& m = m_[pi];
        auto& v = v_[pi];
        for (size_t i = 0; i < p.w.size(); ++i) {
            const double g = p.g[i];
            m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
            v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            p.w[i] -= lr_ * (mhat / (std::sqrt(vhat) + eps_) + wd_ * p.w[i]);
        }
    }
}

double ensemble_loss(const std::vector<ImageBuffer>& clean_blocks,
                     const std::vector<ImageBuffer>& adv_blocks, const EncoderList& surrogates,
                     std::vector<double>* per_surrogate) {
    if (clean_blocks.size() != adv_blocks.size() || clean_blocks.empty())
        throw std::invalid_argument("ensemble_loss: block lists must be aligned and non-empty");
    if (surrogates.empty()) throw std::invalid_argument("ensemble_loss: need at least one surrogate");

    double total = 0.0;
    if (per_surrogate) per_surrogate->clear();
    for (const auto& enc : surrogates) {
        double s = 0.0;
        for (size_t k = 0; k < clean_blocks.size(); ++k) {
            auto ec = enc->encode_image(clean_blocks[k]);
            auto ea = enc->encode_image(adv_blocks[k]);
            s += dot(ec, ea);
        }
        s /= static_cast<double>(clean_blocks.size());
        if (per_surrogate) per_surrogate->push_back(s);
        total += s;
    }
    return total / static_cast<double>(surrogates.size());
}

double ensemble_loss_with_grad(const std::vector<ImageBuffer>& clean_blocks,
                               const std::vector<ImageBuffer>& adv_blocks,
                               const SurrogateList& surrogates,
                               std::vector<ImageBuffer>& grad_adv,
                               std::vector<double>* per_surrogate) {
    if (clean_blocks.size() != adv_blocks.size() || clean_blocks.empty())
        throw std::invalid_argument("ensemble_loss: block lists must be aligned and non-empty");
    if (surrogates.empty()) throw std::invalid_argument("ensemble_loss: need at least one surrogate");

    grad_adv.clear();
    for (const auto& b : adv_blocks) grad_adv.emplace_back(b.height, b.width);

    const double inv_kn =
        1.0 / (static_cast<double>(surrogates.size()) * static_cast<double>(clean_blocks.size()));
    double total = 0.0;
    if (per_surrogate) per_surrogate->clear();
    for (const auto& enc : surrogates) {
        double s = 0.0;
        for (size_t k = 0; k < clean_blocks.size(); ++k) {
            auto ec = enc->encode_image(clean_blocks[k]);
            auto ea = enc->encode_image(adv_blocks[k]);
            s += dot(ec, ea);
            // d cos / d e_adv = e_clean; weight by the double mean.
            std::vector<double> ge(ec.size());
            for (size_t d = 0; d < ec.size(); ++d) ge[d] = ec[d] * inv_kn;
            ImageBuffer gpix = enc->encode_image_adjoint(adv_blocks[k], ge);
            for (size_t i = 0; i < gpix.data.size(); ++i) grad_adv[k].data[i] += gpix.data[i];
        }
        s /= static_cast<double>(clean_blocks.size());
        if (per_surrogate) per_surrogate->push_back(s);
        total += s;
    }
    return total / static_cast<double>(surrogates.size());
}

TrainResult train(Decoder& decoder, const std::vector<AnnotatedImage>& corpus,
                  const EmbeddingBank& bank, const std::shared_ptr<Encoder>& frozen_encoder,
                  const SurrogateList& surrogates, const TrainConfig& config, int max_steps) {
    if (corpus.empty()) throw std::invalid_argument("train: corpus is empty");
    if (bank.vectors.empty()) throw std::invalid_argument("train: bank is empty");
    if (surrogates.empty()) throw std::invalid_argument("train: no surrogates");

    AdamW optimizer(decoder.params(), config.learning_rate, config.beta1, config.beta2,
                    config.adam_eps, config.weight_decay);
    decoder.set_training(true);

    TrainResult result;
    int step = 0;
    bool done = false;
    for (int epoch = 0; epoch < config.epochs && !done; ++epoch) {
        for (const auto& item : corpus) {
            if (max_steps >= 0 && step >= max_steps) {
                done = true;
                break;
            }
            if (item.annotations.empty()) {
                if (epoch == 0)
                    std::cerr << "warning: skipping unannotated image " << item.id << "\n";
                ++result.skipped_images;
                continue;
            }

            GridSpec grid = plan_grid(item.image.width, item.image.height, config.n_max,
                                      decoder.config().block_side);
            BlockSet blocks = decompose(item.image, grid);
            BlockConceptMap cmap = assign_concepts(grid, item.image.width, item.image.height,
                                                   item.annotations);

            std::vector<std::vector<double>> text_embs;
            for (const auto& a : item.annotations)
                text_embs.push_back(frozen_encoder->encode_text(a.phrase));

            const int nblocks = static_cast<int>(blocks.blocks.size());
            Tensor priors(nblocks, decoder.config().embed_dim, 1, 1);
            for (int k = 0; k < nblocks; ++k) {
                std::vector<std::vector<double>> subset;
                for (int ci : cmap.concept_indices[k]) subset.push_back(text_embs[ci]);
                PriorSelection sel = select_prior_embedded(subset, bank);
                for (int d = 0; d < decoder.config().embed_dim; ++d)
                    priors.at(k, d, 0, 0) = sel.embedding[d];
            }

            Tensor deltas = decoder.forward(priors, config.epsilon, true);

            std::vector<ImageBuffer> adv;
            adv.reserve(nblocks);
            for (int k = 0; k < nblocks; ++k) {
                ImageBuffer d = tensor_slice_to_image(deltas, k);
                ImageBuffer b = blocks.blocks[k];
                for (size_t i = 0; i < b.data.size(); ++i)
                    b.data[i] = std::clamp(b.data[i] + d.data[i], 0.0, 1.0);
                adv.push_back(std::move(b));
            }

            std::vector<ImageBuffer> grad_adv;
            std::vector<double> per_surrogate;
            double loss = ensemble_loss_with_grad(blocks.blocks, adv, surrogates, grad_adv,
                                                  &per_surrogate);

            // Straight-through at the [0,1] boundary: pass gradients through
            // the clip unchanged.
            Tensor grad_delta(nblocks, 3, decoder.config().block_side, decoder.config().block_side);
            for (int k = 0; k < nblocks; ++k) {
                Tensor g = image_to_tensor_slice(grad_adv[k]);
                std::copy(g.v.begin(), g.v.end(),
                          grad_delta.v.begin() + static_cast<size_t>(k) * g.v.size());
            }

            decoder.zero_grad();
            decoder.backward(grad_delta);
            optimizer.step();

            ++step;
            result.history.push_back(TrainRecord{step, loss, per_surrogate});
        }
    }
    decoder.set_training(false);
    return result;
}

}  // namespace reasonbreak
