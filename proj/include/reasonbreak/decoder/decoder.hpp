#pragma once

#include <string>
#include <vector>

#include "reasonbreak/core/image.hpp"
#include "reasonbreak/core/tensor.hpp"

namespace reasonbreak {

struct Param {
    std::string name;
    std::vector<int> shape;
    std::vector<double> w;
    std::vector<double> g;

    void resize(std::vector<int> s) {
        shape = std::move(s);
        size_t total = 1;
        for (int d : shape) total *= static_cast<size_t>(d);
        w.assign(total, 0.0);
        g.assign(total, 0.0);
    }
};

struct Conv2d {
    int in_ch = 0, out_ch = 0, k = 3, pad = 1;
    Param weight, bias;
    Tensor cache_x;

    void configure(const std::string& name, int in_ch_, int out_ch_, int k_, int pad_, Rng& rng);
    Tensor forward(const Tensor& x, bool keep_cache);
    Tensor backward(const Tensor& grad_y);
    void collect(std::vector<Param*>& out) {
        out.push_back(&weight);
        out.push_back(&bias);
    }
};

struct BatchNorm2d {
    int ch = 0;
    double eps = 1e-5, momentum = 0.1;
    Param gamma, beta;
    std::vector<double> running_mean, running_var;
    bool training = false;

    Tensor cache_xhat;
    std::vector<double> cache_invstd;

    void configure(const std::string& name, int ch_);
    Tensor forward(const Tensor& x, bool keep_cache);
    Tensor backward(const Tensor& grad_y);
    void collect(std::vector<Param*>& out) {
        out.push_back(&gamma);
        out.push_back(&beta);
    }
};

struct LeakyReLU {
    double slope = 0.2;
    Tensor cache_x;
    Tensor forward(const Tensor& x, bool keep_cache);
    Tensor backward(const Tensor& grad_y);
};

// Linear-complexity global attention: keys softmaxed over spatial positions,
// queries softmaxed over channels, values aggregated into a channel-context
// matrix, output projected and added residually.
struct EfficientAttention {
    int ch = 0;
    Conv2d proj_q, proj_k, proj_v, proj_o;
    Tensor cache_x, cache_qs, cache_ks, cache_v;
    std::vector<double> cache_ctx;  // per sample: ch x ch

    void configure(const std::string& name, int ch_, Rng& rng);
    Tensor forward(const Tensor& x, bool keep_cache);
    Tensor backward(const Tensor& grad_y);
    void collect(std::vector<Param*>& out);
};

struct ResBlock {
    Conv2d skip, conv1, conv2;
    BatchNorm2d bn1, bn2;
    EfficientAttention attn;
    LeakyReLU act_mid, act_out;
    Tensor cache_sum;

    void configure(const std::string& name, int in_ch, int out_ch, Rng& rng);
    Tensor forward(const Tensor& x, bool keep_cache);
    Tensor backward(const Tensor& grad_y);
    void collect(std::vector<Param*>& out);
    void set_training(bool t) {
        bn1.training = t;
        bn2.training = t;
    }
};

struct UpBlock {
    Conv2d conv;
    BatchNorm2d bn;
    LeakyReLU act;

    void configure(const std::string& name, int in_ch, int out_ch, Rng& rng);
    Tensor forward(const Tensor& x, bool keep_cache);
    Tensor backward(const Tensor& grad_y);
    void collect(std::vector<Param*>& out);
    void set_training(bool t) { bn.training = t; }
};

struct Linear {
    int in = 0, out = 0;
    Param weight, bias;
    Tensor cache_x;

    void configure(const std::string& name, int in_, int out_, Rng& rng);
    Tensor forward(const Tensor& x, bool keep_cache);  // (N, in, 1, 1) -> (N, out, 1, 1)
    Tensor backward(const Tensor& grad_y);
    void collect(std::vector<Param*>& out) {
        out.push_back(&weight);
        out.push_back(&bias);
    }
};

struct DecoderConfig {
    int embed_dim = 512;
    int block_side = 224;  // must be divisible by 16
    int channels = 3;
    uint64_t seed = 0;
};

/// Prior-conditioned perturbation generator. Channel schedule
/// 256 -> 256 -> 128 -> 128 -> 64 -> 64 -> 32 -> 32 -> 16 -> 16 -> 3,
/// spatial side/16 doubled by each of the four upsampling stages.
class Decoder {
public:
    explicit Decoder(const DecoderConfig& config);

    const DecoderConfig& config() const { return config_; }

    // priors: (B, embed_dim, 1, 1); returns (B, channels, side, side),
    // values eps * tanh(.) so the output lies in [-eps, eps].
    Tensor forward(const Tensor& priors, double epsilon, bool keep_cache = false);
    Tensor backward(const Tensor& grad_delta);  // accumulates parameter grads

    PerturbationField synthesize(const std::vector<double>& prior, double epsilon);

    void set_training(bool t);
    bool training() const { return training_; }
    void zero_grad();
    std::vector<Param*> params();

    // Per-stage spatial sizes of the forward pass: side/16 * 2^j, j in 0..4.
    std::vector<int> stage_spatial_sizes() const;

    void save_checkpoint(const std::string& path) const;
    static Decoder load_checkpoint(const std::string& path);

private:
    DecoderConfig config_;
    bool training_ = false;
    double cache_epsilon_ = 0.0;
    Tensor cache_pre_tanh_;

    Linear input_;
    ResBlock res_[5];
    UpBlock up_[4];
    Conv2d out_conv_;
};

ImageBuffer tensor_slice_to_image(const Tensor& t, int batch_index);
Tensor image_to_tensor_slice(const ImageBuffer& img);

}  // namespace reasonbreak
