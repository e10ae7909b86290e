#include "reasonbreak/decoder/decoder.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "reasonbreak/decoder/kernels.hpp"

namespace reasonbreak {

namespace {

void init_uniform_fanin(Param& p, size_t fan_in, Rng& rng) {
    double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (auto& w : p.w) w = dist(rng);
}

}  // namespace

// ---- Conv2d ----

void Conv2d::configure(const std::string& name, int in_ch_, int out_ch_, int k_, int pad_, Rng& rng) {
    in_ch = in_ch_;
    out_ch = out_ch_;
    k = k_;
    pad = pad_;
    weight.name = name + ".weight";
    weight.resize({out_ch, in_ch, k, k});
    bias.name = name + ".bias";
    bias.resize({out_ch});
    const size_t fan_in = static_cast<size_t>(in_ch) * k * k;
    init_uniform_fanin(weight, fan_in, rng);
    init_uniform_fanin(bias, fan_in, rng);
}

Tensor Conv2d::forward(const Tensor& x, bool keep_cache) {
    if (x.c != in_ch) throw std::invalid_argument("conv2d: channel mismatch");
    Tensor y;
    kernels::conv2d_forward(x, weight.w, bias.w, out_ch, k, pad, y);
    if (keep_cache) cache_x = x;
    return y;
}

Tensor Conv2d::backward(const Tensor& grad_y) {
    kernels::conv2d_backward_params(cache_x, grad_y, k, pad, weight.g, bias.g);
    Tensor gx;
    kernels::conv2d_backward_input(grad_y, weight.w, in_ch, k, pad, gx);
    return gx;
}

// ---- BatchNorm2d ----

void BatchNorm2d::configure(const std::string& name, int ch_) {
    ch = ch_;
    gamma.name = name + ".gamma";
    gamma.resize({ch});
    std::fill(gamma.w.begin(), gamma.w.end(), 1.0);
    beta.name = name + ".beta";
    beta.resize({ch});
    running_mean.assign(ch, 0.0);
    running_var.assign(ch, 1.0);
}

Tensor BatchNorm2d::forward(const Tensor& x, bool keep_cache) {
    if (x.c != ch) throw std::invalid_argument("batchnorm: channel mismatch");
    Tensor y(x.n, x.c, x.h, x.w);
    const size_t plane = static_cast<size_t>(x.h) * x.w;
    const size_t m = static_cast<size_t>(x.n) * plane;

    if (keep_cache) {
        cache_xhat = Tensor(x.n, x.c, x.h, x.w);
        cache_invstd.assign(ch, 0.0);
    }

    for (int c = 0; c < ch; ++c) {
        double mean, var;
        if (training) {
            double s = 0.0, s2 = 0.0;
            for (int in = 0; in < x.n; ++in)
                for (int iy = 0; iy < x.h; ++iy)
                    for (int ix = 0; ix < x.w; ++ix) {
                        double v = x.at(in, c, iy, ix);
                        s += v;
                        s2 += v * v;
                    }
            mean = s / static_cast<double>(m);
            var = s2 / static_cast<double>(m) - mean * mean;
            if (var < 0.0) var = 0.0;
            const double unbiased = m > 1 ? var * static_cast<double>(m) / (m - 1) : var;
            running_mean[c] = (1.0 - momentum) * running_mean[c] + momentum * mean;
            running_var[c] = (1.0 - momentum) * running_var[c] + momentum * unbiased;
        } else {
            mean = running_mean[c];
            var = running_var[c];
        }
        const double invstd = 1.0 / std::sqrt(var + eps);
        if (keep_cache) cache_invstd[c] = invstd;
        for (int in = 0; in < x.n; ++in)
            for (int iy = 0; iy < x.h; ++iy)
                for (int ix = 0; ix < x.w; ++ix) {
                    double xhat = (x.at(in, c, iy, ix) - mean) * invstd;
                    if (keep_cache) cache_xhat.at(in, c, iy, ix) = xhat;
                    y.at(in, c, iy, ix) = gamma.w[c] * xhat + beta.w[c];
                }
    }
    return y;
}

Tensor BatchNorm2d::backward(const Tensor& gy) {
    Tensor gx(gy.n, gy.c, gy.h, gy.w);
    const size_t m = static_cast<size_t>(gy.n) * gy.h * gy.w;
    for (int c = 0; c < ch; ++c) {
        double sum_gy = 0.0, sum_gy_xhat = 0.0;
        for (int in = 0; in < gy.n; ++in)
            for (int iy = 0; iy < gy.h; ++iy)
                for (int ix = 0; ix < gy.w; ++ix) {
                    double g = gy.at(in, c, iy, ix);
                    sum_gy += g;
                    sum_gy_xhat += g * cache_xhat.at(in, c, iy, ix);
                }
        gamma.g[c] += sum_gy_xhat;
        beta.g[c] += sum_gy;

        const double invstd = cache_invstd[c];
        if (training) {
            const double mean_gy = sum_gy / static_cast<double>(m);
            const double mean_gy_xhat = sum_gy_xhat / static_cast<double>(m);
            for (int in = 0; in < gy.n; ++in)
                for (int iy = 0; iy < gy.h; ++iy)
                    for (int ix = 0; ix < gy.w; ++ix) {
                        double g = gy.at(in, c, iy, ix);
                        double xhat = cache_xhat.at(in, c, iy, ix);
                        gx.at(in, c, iy, ix) =
                            gamma.w[c] * invstd * (g - mean_gy - xhat * mean_gy_xhat);
                    }
        } else {
            for (int in = 0; in < gy.n; ++in)
                for (int iy = 0; iy < gy.h; ++iy)
                    for (int ix = 0; ix < gy.w; ++ix)
                        gx.at(in, c, iy, ix) = gy.at(in, c, iy, ix) * gamma.w[c] * invstd;
        }
    }
    return gx;
}

// ---- LeakyReLU ----

Tensor LeakyReLU::forward(const Tensor& x, bool keep_cache) {
    Tensor y(x.n, x.c, x.h, x.w);
    for (size_t i = 0; i < x.v.size(); ++i) y.v[i] = x.v[i] >= 0.0 ? x.v[i] : slope * x.v[i];
    if (keep_cache) cache_x = x;
    return y;
}

Tensor LeakyReLU::backward(const Tensor& gy) {
    Tensor gx(gy.n, gy.c, gy.h, gy.w);
    for (size_t i = 0; i < gy.v.size(); ++i)
        gx.v[i] = cache_x.v[i] >= 0.0 ? gy.v[i] : slope * gy.v[i];
    return gx;
}

// ---- EfficientAttention ----

void EfficientAttention::configure(const std::string& name, int ch_, Rng& rng) {
    ch = ch_;
    proj_q.configure(name + ".q", ch, ch, 1, 0, rng);
    proj_k.configure(name + ".k", ch, ch, 1, 0, rng);
    proj_v.configure(name + ".v", ch, ch, 1, 0, rng);
    proj_o.configure(name + ".o", ch, ch, 1, 0, rng);
}

Tensor EfficientAttention::forward(const Tensor& x, bool keep_cache) {
    Tensor q = proj_q.forward(x, keep_cache);
    Tensor k = proj_k.forward(x, keep_cache);
    Tensor v = proj_v.forward(x, keep_cache);
    const int P = x.h * x.w;

    // Keys: softmax over spatial positions per channel.
    Tensor ks(x.n, x.c, x.h, x.w);
    for (int in = 0; in < x.n; ++in)
        for (int c = 0; c < ch; ++c) {
            const size_t base = (static_cast<size_t>(in) * ch + c) * P;
            double mx = k.v[base];
            for (int p = 1; p < P; ++p) mx = std::max(mx, k.v[base + p]);
            double z = 0.0;
            for (int p = 0; p < P; ++p) {
                ks.v[base + p] = std::exp(k.v[base + p] - mx);
                z += ks.v[base + p];
            }
            for (int p = 0; p < P; ++p) ks.v[base + p] /= z;
        }

    // Queries: softmax over channels per position.
    Tensor qs(x.n, x.c, x.h, x.w);
    for (int in = 0; in < x.n; ++in)
        for (int p = 0; p < P; ++p) {
            const size_t base = static_cast<size_t>(in) * ch * P + p;
            double mx = q.v[base];
            for (int c = 1; c < ch; ++c) mx = std::max(mx, q.v[base + static_cast<size_t>(c) * P]);
            double z = 0.0;
            for (int c = 0; c < ch; ++c) {
                double e = std::exp(q.v[base + static_cast<size_t>(c) * P] - mx);
                qs.v[base + static_cast<size_t>(c) * P] = e;
                z += e;
            }
            for (int c = 0; c < ch; ++c) qs.v[base + static_cast<size_t>(c) * P] /= z;
        }

    // Context: ctx[c, c'] = sum_p ks[c, p] * v[c', p], then a = ctx^T applied to qs.
    std::vector<double> ctx(static_cast<size_t>(x.n) * ch * ch, 0.0);
    Tensor a(x.n, x.c, x.h, x.w);
    for (int in = 0; in < x.n; ++in) {
        double* cm = ctx.data() + static_cast<size_t>(in) * ch * ch;
        for (int c = 0; c < ch; ++c) {
            const size_t kb = (static_cast<size_t>(in) * ch + c) * P;
            for (int cp = 0; cp < ch; ++cp) {
                const size_t vb = (static_cast<size_t>(in) * ch + cp) * P;
                double s = 0.0;
                for (int p = 0; p < P; ++p) s += ks.v[kb + p] * v.v[vb + p];
                cm[static_cast<size_t>(c) * ch + cp] = s;
            }
        }
        for (int cp = 0; cp < ch; ++cp) {
            const size_t ab = (static_cast<size_t>(in) * ch + cp) * P;
            for (int p = 0; p < P; ++p) {
                double s = 0.0;
                for (int c = 0; c < ch; ++c)
                    s += qs.v[(static_cast<size_t>(in) * ch + c) * P + p] *
                         cm[static_cast<size_t>(c) * ch + cp];
                a.v[ab + p] = s;
            }
        }
    }

    Tensor out = proj_o.forward(a, keep_cache);
    for (size_t i = 0; i < out.v.size(); ++i) out.v[i] += x.v[i];

    if (keep_cache) {
        cache_x = x;
        cache_qs = qs;
        cache_ks = ks;
        cache_v = v;
        cache_ctx = std::move(ctx);
    }
    return out;
}

Tensor EfficientAttention::backward(const Tensor& gy) {
    Tensor gx = gy;  // residual branch
    Tensor ga = proj_o.backward(gy);
    const int P = cache_x.h * cache_x.w;
    const int N = cache_x.n;

    Tensor gqs(N, ch, cache_x.h, cache_x.w);
    Tensor gks(N, ch, cache_x.h, cache_x.w);
    Tensor gv(N, ch, cache_x.h, cache_x.w);

    for (int in = 0; in < N; ++in) {
        const double* cm = cache_ctx.data() + static_cast<size_t>(in) * ch * ch;
        std::vector<double> gctx(static_cast<size_t>(ch) * ch, 0.0);
        for (int c = 0; c < ch; ++c) {
            const size_t qb = (static_cast<size_t>(in) * ch + c) * P;
            for (int cp = 0; cp < ch; ++cp) {
                const size_t ab = (static_cast<size_t>(in) * ch + cp) * P;
                double s = 0.0;
                for (int p = 0; p < P; ++p) s += cache_qs.v[qb + p] * ga.v[ab + p];
                gctx[static_cast<size_t>(c) * ch + cp] = s;
            }
        }
        for (int c = 0; c < ch; ++c) {
            const size_t qb = (static_cast<size_t>(in) * ch + c) * P;
            for (int p = 0; p < P; ++p) {
                double s = 0.0;
                for (int cp = 0; cp < ch; ++cp)
                    s += cm[static_cast<size_t>(c) * ch + cp] *
                         ga.v[(static_cast<size_t>(in) * ch + cp) * P + p];
                gqs.v[qb + p] = s;
            }
        }
        for (int c = 0; c < ch; ++c) {
            const size_t kb = (static_cast<size_t>(in) * ch + c) * P;
            for (int p = 0; p < P; ++p) {
                double s = 0.0;
                for (int cp = 0; cp < ch; ++cp)
                    s += gctx[static_cast<size_t>(c) * ch + cp] *
                         cache_v.v[(static_cast<size_t>(in) * ch + cp) * P + p];
                gks.v[kb + p] = s;
            }
        }
        for (int cp = 0; cp < ch; ++cp) {
            const size_t vb = (static_cast<size_t>(in) * ch + cp) * P;
            for (int p = 0; p < P; ++p) {
                double s = 0.0;
                for (int c = 0; c < ch; ++c)
                    s += gctx[static_cast<size_t>(c) * ch + cp] *
                         cache_ks.v[(static_cast<size_t>(in) * ch + c) * P + p];
                gv.v[vb + p] = s;
            }
        }
    }

    // Softmax adjoints.
    Tensor gk(N, ch, cache_x.h, cache_x.w);
    for (int in = 0; in < N; ++in)
        for (int c = 0; c < ch; ++c) {
            const size_t base = (static_cast<size_t>(in) * ch + c) * P;
            double s = 0.0;
            for (int p = 0; p < P; ++p) s += cache_ks.v[base + p] * gks.v[base + p];
            for (int p = 0; p < P; ++p)
                gk.v[base + p] = cache_ks.v[base + p] * (gks.v[base + p] - s);
        }
    Tensor gq(N, ch, cache_x.h, cache_x.w);
    for (int in = 0; in < N; ++in)
        for (int p = 0; p < P; ++p) {
            const size_t base = static_cast<size_t>(in) * ch * P + p;
            double s = 0.0;
            for (int c = 0; c < ch; ++c)
                s += cache_qs.v[base + static_cast<size_t>(c) * P] *
                     gqs.v[base + static_cast<size_t>(c) * P];
            for (int c = 0; c < ch; ++c) {
                const size_t i = base + static_cast<size_t>(c) * P;
                gq.v[i] = cache_qs.v[i] * (gqs.v[i] - s);
            }
        }

    Tensor g1 = proj_q.backward(gq);
    Tensor g2 = proj_k.backward(gk);
    Tensor g3 = proj_v.backward(gv);
    for (size_t i = 0; i < gx.v.size(); ++i) gx.v[i] += g1.v[i] + g2.v[i] + g3.v[i];
    return gx;
}

void EfficientAttention::collect(std::vector<Param*>& out) {
    proj_q.collect(out);
    proj_k.collect(out);
    proj_v.collect(out);
    proj_o.collect(out);
}

// ---- ResBlock ----

void ResBlock::configure(const std::string& name, int in_ch, int out_ch, Rng& rng) {
    skip.configure(name + ".skip", in_ch, out_ch, 1, 0, rng);
    conv1.configure(name + ".conv1", in_ch, out_ch, 3, 1, rng);
    bn1.configure(name + ".bn1", out_ch);
    conv2.configure(name + ".conv2", out_ch, out_ch, 3, 1, rng);
    bn2.configure(name + ".bn2", out_ch);
    attn.configure(name + ".attn", out_ch, rng);
}

Tensor ResBlock::forward(const Tensor& x, bool keep_cache) {
    Tensor r = skip.forward(x, keep_cache);
    Tensor h = conv1.forward(x, keep_cache);
    h = bn1.forward(h, keep_cache);
    h = act_mid.forward(h, keep_cache);
    h = conv2.forward(h, keep_cache);
    h = bn2.forward(h, keep_cache);
    h = attn.forward(h, keep_cache);
    for (size_t i = 0; i < h.v.size(); ++i) h.v[i] += r.v[i];
    return act_out.forward(h, keep_cache);
}

Tensor ResBlock::backward(const Tensor& gy) {
    Tensor g = act_out.backward(gy);
    Tensor gr = skip.backward(g);
    Tensor gh = attn.backward(g);
    gh = bn2.backward(gh);
    gh = conv2.backward(gh);
    gh = act_mid.backward(gh);
    gh = bn1.backward(gh);
    gh = conv1.backward(gh);
    for (size_t i = 0; i < gh.v.size(); ++i) gh.v[i] += gr.v[i];
    return gh;
}

void ResBlock::collect(std::vector<Param*>& out) {
    skip.collect(out);
    conv1.collect(out);
    bn1.collect(out);
    conv2.collect(out);
    bn2.collect(out);
    attn.collect(out);
}

// ---- UpBlock ----

void UpBlock::configure(const std::string& name, int in_ch, int out_ch, Rng& rng) {
    conv.configure(name + ".conv", in_ch, out_ch, 3, 1, rng);
    bn.configure(name + ".bn", out_ch);
}

Tensor UpBlock::forward(const Tensor& x, bool keep_cache) {
    Tensor up;
    kernels::upsample2x_nearest(x, up);
    Tensor h = conv.forward(up, keep_cache);
    h = bn.forward(h, keep_cache);
    return act.forward(h, keep_cache);
}

Tensor UpBlock::backward(const Tensor& gy) {
    Tensor g = act.backward(gy);
    g = bn.backward(g);
    g = conv.backward(g);
    Tensor gx;
    kernels::upsample2x_nearest_backward(g, gx);
    return gx;
}

void UpBlock::collect(std::vector<Param*>& out) {
    conv.collect(out);
    bn.collect(out);
}

// ---- Linear ----

void Linear::configure(const std::string& name, int in_, int out_, Rng& rng) {
    in = in_;
    out = out_;
    weight.name = name + ".weight";
    weight.resize({out, in});
    bias.name = name + ".bias";
    bias.resize({out});
    init_uniform_fanin(weight, static_cast<size_t>(in), rng);
    init_uniform_fanin(bias, static_cast<size_t>(in), rng);
}

Tensor Linear::forward(const Tensor& x, bool keep_cache) {
    if (x.c != in || x.h != 1 || x.w != 1) throw std::invalid_argument("linear: input shape mismatch");
    Tensor y(x.n, out, 1, 1);
#pragma omp parallel for schedule(static)
    for (int o = 0; o < out; ++o) {
        const double* row = weight.w.data() + static_cast<size_t>(o) * in;
        for (int n = 0; n < x.n; ++n) {
            double s = bias.w[o];
            const double* xv = x.v.data() + static_cast<size_t>(n) * in;
            for (int i = 0; i < in; ++i) s += row[i] * xv[i];
            y.v[static_cast<size_t>(n) * out + o] = s;
        }
    }
    if (keep_cache) cache_x = x;
    return y;
}

Tensor Linear::backward(const Tensor& gy) {
    Tensor gx(cache_x.n, in, 1, 1);
    for (int n = 0; n < gy.n; ++n) {
        const double* g = gy.v.data() + static_cast<size_t>(n) * out;
        const double* xv = cache_x.v.data() + static_cast<size_t>(n) * in;
        for (int o = 0; o < out; ++o) {
            bias.g[o] += g[o];
            double* wg = weight.g.data() + static_cast<size_t>(o) * in;
            const double* wr = weight.w.data() + static_cast<size_t>(o) * in;
            double* gxv = gx.v.data() + static_cast<size_t>(n) * in;
            for (int i = 0; i < in; ++i) {
                wg[i] += g[o] * xv[i];
                gxv[i] += wr[i] * g[o];
            }
        }
    }
    return gx;
}

// ---- Decoder ----

Decoder::Decoder(const DecoderConfig& config) : config_(config) {
    if (config.block_side < 16 || config.block_side % 16 != 0)
        throw std::invalid_argument("decoder: block_side must be a positive multiple of 16");
    if (config.embed_dim < 1) throw std::invalid_argument("decoder: embed_dim must be positive");
    if (config.channels != 3) throw std::invalid_argument("decoder: channels must be 3");

    Rng rng(config.seed);
    const int s0 = config.block_side / 16;
    input_.configure("input", config.embed_dim, 256 * s0 * s0, rng);
    static constexpr int kStageCh[5] = {256, 128, 64, 32, 16};
    for (int j = 0; j < 5; ++j)
        res_[j].configure("res" + std::to_string(j), kStageCh[j], kStageCh[j], rng);
    for (int j = 0; j < 4; ++j)
        up_[j].configure("up" + std::to_string(j), kStageCh[j], kStageCh[j + 1], rng);
    out_conv_.configure("out", 16, config.channels, 3, 1, rng);
}

Tensor Decoder::forward(const Tensor& priors, double epsilon, bool keep_cache) {
    if (priors.c != config_.embed_dim || priors.h != 1 || priors.w != 1)
        throw std::invalid_argument("decoder: prior dimension mismatch");
    if (epsilon <= 0.0) throw std::invalid_argument("decoder: epsilon must be positive");

    const int s0 = config_.block_side / 16;
    Tensor x = input_.forward(priors, keep_cache);
    x.c = 256;
    x.h = s0;
    x.w = s0;

    for (int j = 0; j < 5; ++j) {
        x = res_[j].forward(x, keep_cache);
        if (j < 4) x = up_[j].forward(x, keep_cache);
    }
    x = out_conv_.forward(x, keep_cache);

    if (keep_cache) {
        cache_pre_tanh_ = x;
        cache_epsilon_ = epsilon;
    }
    for (auto& v : x.v) v = epsilon * std::tanh(v);
    return x;
}

Tensor Decoder::backward(const Tensor& grad_delta) {
    Tensor g(grad_delta.n, grad_delta.c, grad_delta.h, grad_delta.w);
    for (size_t i = 0; i < g.v.size(); ++i) {
        double t = std::tanh(cache_pre_tanh_.v[i]);
        g.v[i] = grad_delta.v[i] * cache_epsilon_ * (1.0 - t * t);
    }
    g = out_conv_.backward(g);
    for (int j = 4; j >= 0; --j) {
        g = res_[j].backward(g);
        if (j > 0) g = up_[j - 1].backward(g);
    }
    g.c = input_.out;
    g.h = 1;
    g.w = 1;
    return input_.backward(g);
}

PerturbationField Decoder::synthesize(const std::vector<double>& prior, double epsilon) {
    if (static_cast<int>(prior.size()) != config_.embed_dim)
        throw std::invalid_argument("synthesize: prior length must equal embed_dim");
    Tensor p(1, config_.embed_dim, 1, 1);
    p.v = prior;
    Tensor delta = forward(p, epsilon, false);
    return tensor_slice_to_image(delta, 0);
}

void Decoder::set_training(bool t) {
    training_ = t;
    for (auto& r : res_) r.set_training(t);
    for (auto& u : up_) u.set_training(t);
}

void Decoder::zero_grad() {
    for (Param* p : params()) std::fill(p->g.begin(), p->g.end(), 0.0);
}

std::vector<Param*> Decoder::params() {
    std::vector<Param*> out;
    input_.collect(out);
    for (int j = 0; j < 5; ++j) {
        res_[j].collect(out);
        if (j < 4) up_[j].collect(out);
    }
    out_conv_.collect(out);
    return out;
}

std::vector<int> Decoder::stage_spatial_sizes() const {
    std::vector<int> sizes;
    for (int j = 0; j <= 4; ++j) sizes.push_back(config_.block_side / 16 * (1 << j));
    return sizes;
}

// Checkpoint: magic "RBDC", u32 version, config, then named f64 arrays.
namespace {
constexpr char kCkptMagic[4] = {'R', 'B', 'D', 'C'};
constexpr uint32_t kCkptVersion = 1;

void write_u32(std::ostream& out, uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }
uint32_t read_u32(std::istream& in) {
    uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 4);
    return v;
}
}  // namespace

void Decoder::save_checkpoint(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    out.write(kCkptMagic, 4);
    write_u32(out, kCkptVersion);
    write_u32(out, static_cast<uint32_t>(config_.embed_dim));
    write_u32(out, static_cast<uint32_t>(config_.block_side));
    write_u32(out, static_cast<uint32_t>(config_.channels));
    uint64_t seed = config_.seed;
    out.write(reinterpret_cast<const char*>(&seed), 8);

    auto params_copy = const_cast<Decoder*>(this)->params();
    write_u32(out, static_cast<uint32_t>(params_copy.size()));
    for (const Param* p : params_copy) {
        write_u32(out, static_cast<uint32_t>(p->name.size()));
        out.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
        write_u32(out, static_cast<uint32_t>(p->shape.size()));
        for (int d : p->shape) write_u32(out, static_cast<uint32_t>(d));
        out.write(reinterpret_cast<const char*>(p->w.data()),
                  static_cast<std::streamsize>(p->w.size() * sizeof(double)));
    }
}

Decoder Decoder::load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kCkptMagic, 4) != 0)
        throw std::runtime_error("checkpoint has wrong magic: " + path);
    if (read_u32(in) != kCkptVersion)
        throw std::runtime_error("checkpoint has unsupported version: " + path);

    DecoderConfig config;
    config.embed_dim = static_cast<int>(read_u32(in));
    config.block_side = static_cast<int>(read_u32(in));
    config.channels = static_cast<int>(read_u32(in));
    in.read(reinterpret_cast<char*>(&config.seed), 8);

    Decoder decoder(config);
    auto params = decoder.params();
    const uint32_t count = read_u32(in);
    if (count != params.size()) throw std::runtime_error("checkpoint layer count mismatch: " + path);
    for (Param* p : params) {
        uint32_t name_len = read_u32(in);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        if (name != p->name) throw std::runtime_error("checkpoint layer name mismatch: " + name);
        uint32_t ndim = read_u32(in);
        std::vector<int> shape(ndim);
        for (auto& d : shape) d = static_cast<int>(read_u32(in));
        if (shape != p->shape) throw std::runtime_error("checkpoint shape mismatch at " + name);
        in.read(reinterpret_cast<char*>(p->w.data()),
                static_cast<std::streamsize>(p->w.size() * sizeof(double)));
        if (!in) throw std::runtime_error("checkpoint truncated: " + path);
    }
    return decoder;
}

ImageBuffer tensor_slice_to_image(const Tensor& t, int batch_index) {
    ImageBuffer img(t.h, t.w);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < t.h; ++y)
            for (int x = 0; x < t.w; ++x) img.at(y, x, c) = t.at(batch_index, c, y, x);
    return img;
}

Tensor image_to_tensor_slice(const ImageBuffer& img) {
    Tensor t(1, 3, img.height, img.width);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x) t.at(0, c, y, x) = img.at(y, x, c);
    return t;
}

}  // namespace reasonbreak
