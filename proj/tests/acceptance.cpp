// Acceptance gate: one line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <sys/stat.h>
#include <vector>

#include "reasonbreak/annotation/annotation.hpp"
#include "reasonbreak/decoder/decoder.hpp"
#include "reasonbreak/embedding/bank.hpp"
#include "reasonbreak/evaluation/evaluation.hpp"
#include "reasonbreak/pipeline/pipeline.hpp"
#include "reasonbreak/tiling/tiling.hpp"
#include "reasonbreak/training/training.hpp"

using namespace reasonbreak;

namespace {

using Clock = std::chrono::steady_clock;

struct Runner {
    int failures = 0;

    template <typename Fn>
    void criterion(int number, const char* label, double limit_seconds, Fn body) {
        auto start = Clock::now();
        bool ok = false;
        std::string why;
        try {
            ok = body();
        } catch (const std::exception& e) {
            why = e.what();
        }
        double elapsed = std::chrono::duration<double>(Clock::now() - start).count();
        if (ok && limit_seconds > 0 && elapsed > limit_seconds) {
            ok = false;
            why = "time limit exceeded";
        }
        if (!ok) ++failures;
        std::printf("[%s] criterion %2d: %s (%.2fs%s%s)\n", ok ? "PASS" : "FAIL", number, label,
                    elapsed, why.empty() ? "" : "; ", why.c_str());
        std::fflush(stdout);
    }
};

ImageBuffer synth_image(int h, int w, uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double fx = 1.0 + 4.0 * u(rng), fy = 1.0 + 4.0 * u(rng);
    double px = u(rng) * 6.28, py = u(rng) * 6.28;
    ImageBuffer img(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c) {
                double v = 0.5 + 0.2 * std::sin(fx * x / w * 6.28 + px + c) +
                           0.2 * std::cos(fy * y / h * 6.28 + py - c) +
                           0.1 * (static_cast<double>(x) / w - 0.5);
                img.at(y, x, c) = std::min(1.0, std::max(0.0, v));
            }
    return img;
}

std::vector<ConceptAnnotation> synth_annotations(uint64_t seed, int count = 3) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const char* phrases[] = {
        "weathered limestone cathedral facade with twin bell towers",
        "dense deciduous broadleaf forest along a river bend",
        "narrow cobblestone street lined with pastel row houses",
        "snow capped granite ridgeline above an alpine meadow",
        "red brick industrial warehouse district near rail yards",
    };
    const ConceptLevel levels[] = {ConceptLevel::Continental, ConceptLevel::National,
                                   ConceptLevel::City, ConceptLevel::Local};
    std::vector<ConceptAnnotation> out;
    for (int i = 0; i < count; ++i) {
        ConceptAnnotation a;
        a.phrase = phrases[(seed + i) % 5];
        a.level = levels[i % 4];
        a.bbox = {0.2 + 0.6 * u(rng), 0.2 + 0.6 * u(rng), 0.2 + 0.5 * u(rng)};
        a.confidence = 0.3 + 0.7 * u(rng);
        out.push_back(std::move(a));
    }
    return out;
}

// Independent exhaustive comparator over every feasible (m, n).
std::pair<int, int> grid_oracle(int width, int height, int n_max) {
    long long bm = 1, bn = 1;
    long long best_num = -1, best_den = 1;
    for (long long m = 1; m <= n_max; ++m)
        for (long long n = 1; m * n <= n_max; ++n) {
            long long num = std::llabs(width * n - m * height), den = static_cast<long long>(height) * n;
            __int128 lhs = static_cast<__int128>(num) * best_den;
            __int128 rhs = static_cast<__int128>(best_num) * den;
            bool better = best_num < 0 || lhs < rhs ||
                          (lhs == rhs && (m * n > bm * bn || (m * n == bm * bn && m < bm)));
            if (better) {
                bm = m;
                bn = n;
                best_num = num;
                best_den = den;
            }
        }
    return {static_cast<int>(bm), static_cast<int>(bn)};
}

struct Rig {
    std::shared_ptr<ToyLinearEncoder> frozen;
    EmbeddingBank bank;
    DecoderConfig dcfg;

    explicit Rig(int side = 16, int dim = 12, uint64_t seed = 11) {
        frozen = make_toy_encoder("frozen", side, dim, 900);
        std::vector<ImageBuffer> imgs;
        for (int i = 0; i < 8; ++i) imgs.push_back(synth_image(48, 48, 700 + i));
        bank = build_bank(imgs, *frozen);
        dcfg = DecoderConfig{dim, side, 3, seed};
    }
};

// Block-space generation path shared by criteria 6 and 9: mirrors protect()
// but stays at block resolution so the surrogate loss is exact.
std::pair<std::vector<ImageBuffer>, std::vector<ImageBuffer>> generate_block_pairs(
    const ImageBuffer& image, const std::vector<ConceptAnnotation>& annotations, int n_max,
    double epsilon, const Rig& rig, Decoder& decoder) {
    GridSpec grid = plan_grid(image.width, image.height, n_max, decoder.config().block_side);
    BlockSet blocks = decompose(image, grid);
    BlockConceptMap cmap = assign_concepts(grid, image.width, image.height, annotations);
    std::vector<std::vector<double>> text_embs;
    for (const auto& a : annotations) text_embs.push_back(rig.frozen->encode_text(a.phrase));

    std::vector<ImageBuffer> clean, adv;
    for (size_t k = 0; k < blocks.blocks.size(); ++k) {
        std::vector<std::vector<double>> subset;
        for (int ci : cmap.concept_indices[k]) subset.push_back(text_embs[ci]);
        PriorSelection sel = select_prior_embedded(subset, rig.bank);
        PerturbationField delta = decoder.synthesize(sel.embedding, epsilon);
        ImageBuffer b = blocks.blocks[k];
        for (size_t i = 0; i < b.data.size(); ++i)
            b.data[i] = std::clamp(b.data[i] + delta.data[i], 0.0, 1.0);
        clean.push_back(blocks.blocks[k]);
        adv.push_back(std::move(b));
    }
    return {std::move(clean), std::move(adv)};
}

}  // namespace

int main() {
    Runner run;

    run.criterion(1, "grid planner matches the exhaustive oracle on 1000 triples", 10.0, [] {
        std::mt19937_64 rng(1);
        std::uniform_int_distribution<int> dim(1, 8192), cap(1, 256);
        for (int i = 0; i < 1000; ++i) {
            int w = dim(rng), h = dim(rng), nm = cap(rng);
            auto [m, n] = grid_oracle(w, h, nm);
            GridSpec g = plan_grid(w, h, nm);
            if (g.m != m || g.n != n) return false;
        }
        return true;
    });

    run.criterion(2, "prior search matches brute force on 500 random instances", 30.0, [] {
        std::mt19937_64 rng(2);
        std::normal_distribution<double> g(0.0, 1.0);
        for (int trial = 0; trial < 500; ++trial) {
            int dim = 4 + static_cast<int>(rng() % 61);
            int bank_size = 1 + static_cast<int>(rng() % 300);
            int n_concepts = 1 + static_cast<int>(rng() % 32);
            EmbeddingBank bank;
            bank.dim = dim;
            for (int i = 0; i < bank_size; ++i) {
                std::vector<double> v(dim);
                for (auto& x : v) x = g(rng);
                normalize(v);
                bank.vectors.push_back(std::move(v));
                bank.provenance.push_back("");
            }
            std::vector<std::vector<double>> concepts(n_concepts, std::vector<double>(dim));
            for (auto& c : concepts) {
                for (auto& x : c) x = g(rng);
                normalize(c);
            }
            int want = -1;
            double want_score = 1e300;
            for (int i = 0; i < bank_size; ++i) {
                double worst = -1e300;
                for (const auto& c : concepts) worst = std::max(worst, dot(c, bank.vectors[i]));
                if (worst < want_score) {
                    want_score = worst;
                    want = i;
                }
            }
            PriorSelection sel = select_prior_embedded(concepts, bank);
            if (sel.index != want || std::abs(sel.score - want_score) > 1e-9) return false;
        }
        return true;
    });

    run.criterion(3, "pixel budget holds within half a quantization step on 100 images", 120.0, [] {
        Rig rig;
        Decoder dec(rig.dcfg);
        for (int i = 0; i < 100; ++i) {
            double eps = (i % 2 == 0 ? 8.0 : 16.0) / 255.0;
            ProtectRequest req;
            req.image = dequantize_u8(quantize_u8(synth_image(50 + i % 37, 70 + i % 53, i)),
                                      50 + i % 37, 70 + i % 53);
            req.annotations = synth_annotations(i, 3);
            req.epsilon = eps;
            req.n_max = 1 + i % 8;
            ProtectResult res = protect(req, rig.bank, rig.frozen, dec);
            ImageBuffer stored =
                dequantize_u8(quantize_u8(res.image), res.image.height, res.image.width);
            if (max_abs_deviation(stored, req.image) > eps + 1.0 / 510.0 + 1e-12) return false;
        }
        return true;
    });

    run.criterion(4, "generator output shape and range across block sides", 120.0, [] {
        for (int side : {16, 32, 64, 224}) {
            DecoderConfig cfg{side == 224 ? 32 : 64, side, 3, 4};
            Decoder dec(cfg);
            Tensor p(1, cfg.embed_dim, 1, 1);
            Rng rng(5);
            std::uniform_real_distribution<double> u(-1.0, 1.0);
            for (auto& x : p.v) x = u(rng);
            const double eps = 16.0 / 255.0;
            Tensor delta = dec.forward(p, eps);
            if (delta.n != 1 || delta.c != 3 || delta.h != side || delta.w != side) return false;
            for (double v : delta.v)
                if (v < -eps || v > eps) return false;
        }
        try {
            Decoder bad(DecoderConfig{16, 50, 3, 0});
            return false;  // side 50 must be rejected
        } catch (const std::invalid_argument&) {}
        return true;
    });

    run.criterion(5, "analytic gradients agree with finite differences", 120.0, [] {
        Decoder dec(DecoderConfig{8, 16, 3, 3});
        dec.set_training(true);
        Tensor p(2, 8, 1, 1);
        Rng rng(6);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        for (auto& x : p.v) x = u(rng);
        const double eps = 0.05;

        Tensor delta = dec.forward(p, eps, true);
        auto probe = random_uniform(rng, delta.size(), -1.0, 1.0);
        Tensor g(delta.n, delta.c, delta.h, delta.w);
        g.v = probe;
        dec.zero_grad();
        dec.backward(g);

        auto loss = [&](Decoder& d) {
            Tensor y = d.forward(p, eps);
            double s = 0.0;
            for (size_t i = 0; i < y.v.size(); ++i) s += y.v[i] * probe[i];
            return s;
        };

        const double h = 1e-6;
        for (Param* prm : dec.params()) {
            // Unit-norm directional derivative per parameter group.
            auto dir = random_uniform(rng, prm->w.size(), -1.0, 1.0);
            normalize(dir);
            double analytic = dot(prm->g, dir);
            for (size_t j = 0; j < dir.size(); ++j) prm->w[j] += h * dir[j];
            double fp = loss(dec);
            for (size_t j = 0; j < dir.size(); ++j) prm->w[j] -= 2 * h * dir[j];
            double fm = loss(dec);
            for (size_t j = 0; j < dir.size(); ++j) prm->w[j] += h * dir[j];
            double fd = (fp - fm) / (2 * h);
            double scale = std::max({std::abs(analytic), std::abs(fd), 1e-4});
            if (std::abs(analytic - fd) / scale > 1e-3) return false;

            // Two sampled coordinates per group.
            Rng pick(7 + std::hash<std::string>{}(prm->name));
            for (int t = 0; t < 2; ++t) {
                size_t j = pick() % prm->w.size();
                double keep = prm->w[j];
                prm->w[j] = keep + h;
                double lp = loss(dec);
                prm->w[j] = keep - h;
                double lm = loss(dec);
                prm->w[j] = keep;
                double want = (lp - lm) / (2 * h);
                double cscale = std::max({std::abs(prm->g[j]), std::abs(want), 1e-4});
                if (std::abs(prm->g[j] - want) / cscale > 1e-3) return false;
            }
        }
        return true;
    });

    run.criterion(6, "desk-scale training beats its start and a noise baseline", 300.0, [] {
        Rig rig(16, 12, 21);
        SurrogateList surrogates;
        for (int i = 0; i < 3; ++i)
            surrogates.push_back(make_toy_encoder("s" + std::to_string(i), 16, 12, 400 + i));

        std::vector<AnnotatedImage> corpus;
        for (int i = 0; i < 16; ++i) {
            AnnotatedImage a;
            a.id = "img" + std::to_string(i);
            a.image = synth_image(96, 128, 50 + i);
            a.annotations = synth_annotations(50 + i, 3);
            corpus.push_back(std::move(a));
        }

        TrainConfig cfg;
        cfg.epochs = 13;
        cfg.learning_rate = 3e-3;
        cfg.n_max = 4;
        cfg.seed = 9;
        Decoder dec(rig.dcfg);
        TrainResult res = train(dec, corpus, rig.bank, rig.frozen, surrogates, cfg, 200);
        if (res.history.size() != 200) return false;
        double initial = res.history.front().loss;
        double final_loss = res.history.back().loss;
        if (!(final_loss < 0.9 * initial)) return false;

        // Post-training cosine over the whole corpus versus uniform noise.
        EncoderList encoders(surrogates.begin(), surrogates.end());
        std::vector<ImageBuffer> clean_all, adv_all, noise_all;
        std::mt19937_64 nrng(31);
        std::uniform_real_distribution<double> nu(-cfg.epsilon, cfg.epsilon);
        for (const auto& a : corpus) {
            auto [clean, adv] =
                generate_block_pairs(a.image, a.annotations, cfg.n_max, cfg.epsilon, rig, dec);
            for (size_t k = 0; k < clean.size(); ++k) {
                ImageBuffer noisy = clean[k];
                for (auto& v : noisy.data) v = std::clamp(v + nu(nrng), 0.0, 1.0);
                clean_all.push_back(clean[k]);
                adv_all.push_back(adv[k]);
                noise_all.push_back(std::move(noisy));
            }
        }
        double trained = ensemble_loss(clean_all, adv_all, encoders);
        double noise = ensemble_loss(clean_all, noise_all, encoders);
        return trained < noise;
    });

    run.criterion(7, "protection rate arithmetic and extremal benchmark tables", 30.0, [] {
        if (std::abs(ppr(100, 80).clamped - 20.0) > 1e-12) return false;
        if (std::abs(ppr(100, 100).clamped) > 1e-12) return false;
        if (std::abs(ppr(50, 60).raw + 20.0) > 1e-12 || ppr(50, 60).clamped != 0.0) return false;
        if (ppr(0, 3).defined) return false;

        FixtureGeocoder geo;
        geo.add("paris", {"fr-r", "fr-m", "fr-t", "fr-b"});
        geo.add("berlin", {"de-r", "de-m", "de-t", "de-b"});
        ScriptedTargetClient blocked, unchanged;
        std::vector<BenchmarkPair> pairs;
        for (int i = 0; i < 6; ++i) {
            std::string id = "p" + std::to_string(i);
            pairs.push_back({id, "paris"});
            blocked.set_answers(id, Condition::Original, {"paris"});
            blocked.set_answers(id, Condition::Adversarial, {"berlin"});
            unchanged.set_answers(id, Condition::Original, {"paris"});
            unchanged.set_answers(id, Condition::Adversarial, {"paris"});
        }
        BenchmarkTable full = run_benchmark(pairs, blocked, geo);
        for (const auto& c : full.cells)
            if (std::abs(c.clamped - 100.0) > 1e-12) return false;
        FixtureGeocoder geo2 = geo;
        BenchmarkTable none = run_benchmark(pairs, unchanged, geo2);
        for (const auto& c : none.cells)
            if (std::abs(c.clamped) > 1e-12 || !c.defined) return false;
        return full.cells.size() == 8 && none.cells.size() == 8;
    });

    run.criterion(8, "zeroed generator leaves images bitwise unchanged, ten runs", 60.0, [] {
        Rig rig;
        Decoder dec(rig.dcfg);
        for (Param* p : dec.params()) std::fill(p->w.begin(), p->w.end(), 0.0);
        ProtectRequest req;
        req.image = synth_image(120, 180, 8);
        req.annotations = synth_annotations(8, 3);
        for (int i = 0; i < 10; ++i) {
            ProtectResult res = protect(req, rig.bank, rig.frozen, dec);
            if (res.image.data != req.image.data) return false;
            if (res.report.max_deviation != 0.0) return false;
        }
        return true;
    });

    run.criterion(9, "block-budget sweep rows and the prior-search ablation column", 120.0, [] {
        Rig rig;
        Decoder dec(rig.dcfg);
        std::vector<ProtectRequest> corpus;
        for (int i = 0; i < 2; ++i) {
            ProtectRequest req;
            req.image = synth_image(90, 140, 60 + i);
            req.annotations = synth_annotations(60 + i, 3);
            corpus.push_back(std::move(req));
        }
        std::vector<int> budgets = {1, 4, 16, 64, 256};
        auto rows = ablation_sweep(corpus, budgets, rig.bank, rig.frozen, dec,
                                   [](int, const std::vector<ProtectResult>&) { return 1.0; });
        if (rows.size() != budgets.size()) return false;
        for (size_t i = 0; i < rows.size(); ++i) {
            if (rows[i].n_max != budgets[i] || !rows[i].evaluator_ok) return false;
            if (rows[i].grid.m * rows[i].grid.n > budgets[i]) return false;
        }

        ProtectRequest req = corpus[0];
        ProtectResult with = protect(req, rig.bank, rig.frozen, dec);
        req.minimax_enabled = false;
        ProtectResult without = protect(req, rig.bank, rig.frozen, dec);
        if (with.report.blocks.size() != without.report.blocks.size()) return false;
        for (size_t k = 0; k < with.report.blocks.size(); ++k) {
            const auto& a = with.report.blocks[k];
            const auto& b = without.report.blocks[k];
            if (a.concept_count != b.concept_count || a.fallback != b.fallback) return false;
            if (a.prior_index < 0 || b.prior_index != -1) return false;
        }
        return with.report.grid.m == without.report.grid.m &&
               with.report.grid.n == without.report.grid.n;
    });

    run.criterion(10, "offline annotation protocol over twenty fixtures", 60.0, [] {
        const char* stage1 = R"({"keep": true, "reason": "geographic scene"})";
        const char* stage2 =
            R"({"l1": "Built Environment", "l2": "urban/city", "l3": "old town"})";
        const char* stage3 = R"({"concepts": [
            {"level": "city", "phrase": "gothic cathedral spire above tiled rooftops",
             "bbox": [0.5, 0.4, 0.4], "confidence": 0.85},
            {"level": "local", "phrase": "ornate stone fountain in cobbled square",
             "bbox": [0.4, 0.7, 0.2], "confidence": 0.75}]})";

        std::vector<AnnotationJob> jobs;
        for (int i = 0; i < 20; ++i) {
            std::string ref = "fx" + std::to_string(i);
            MockMllmClient client;
            int width = 4096, height = 2160;
            if (i == 0) width = 2047, height = 1200;  // below the boundary
            if (i == 1) width = 2048, height = 1200;  // exactly at the boundary
            if (i % 7 == 3) {
                client.push_response(ref, 1, R"({"keep": false, "reason": "studio shot"})");
            } else if (i % 7 == 5) {
                client.push_response(ref, 1, "not json at all");
            } else {
                client.push_response(ref, 1, stage1);
                client.push_response(ref, 2, stage2);
                client.push_response(ref, 3, stage3);
            }
            jobs.push_back(annotate_image(ref, width, height, client));
        }

        if (jobs[0].status != JobStatus::Rejected) return false;
        if (jobs[1].status != JobStatus::Completed) return false;
        int completed = 0, rejected = 0, quarantined = 0;
        for (const auto& j : jobs) {
            if (j.status == JobStatus::Completed) {
                ++completed;
                if (j.stage3.size() != 2) return false;
                if (!j.difficulty || *j.difficulty != Difficulty::Easy) return false;
                if (j.stage3.front().level != ConceptLevel::City) return false;
            }
            if (j.status == JobStatus::Rejected) ++rejected;
            if (j.status == JobStatus::Quarantined) ++quarantined;
        }
        if (quarantined == 0 || rejected < 2) return false;
        CorpusStats stats = corpus_stats(jobs);
        if (stats.total != completed) return false;
        if (std::abs(stats.scene_shares.at("urban") - 100.0) > 1e-9) return false;
        return stats.phrase_frequency.front().second == completed;
    });

    run.criterion(11, "compression harness rows plus the lossless path", 60.0, [] {
        mkdir("/tmp/rb_acceptance_jpeg", 0755);
        ImageBuffer clean =
            dequantize_u8(quantize_u8(synth_image(96, 128, 12)), 96, 128);
        Rig rig;
        Decoder dec(rig.dcfg);
        ProtectRequest req;
        req.image = clean;
        req.annotations = synth_annotations(12, 3);
        ProtectResult res = protect(req, rig.bank, rig.frozen, dec);
        ImageBuffer stored = dequantize_u8(quantize_u8(res.image), 96, 128);
        const double pre = max_abs_deviation(stored, clean);

        auto rows =
            jpeg_robustness(clean, stored, {100, 95, 75, 50}, "/tmp/rb_acceptance_jpeg", "a");
        if (rows.size() != 4) return false;
        if (!rows[0].lossless || std::abs(rows[0].deviation - pre) > 1e-12) return false;
        int lossy = 0;
        for (size_t i = 1; i < rows.size(); ++i) {
            if (rows[i].lossless) return false;
            if (rows[i].deviation <= 0.0) return false;
            ++lossy;
            std::remove(rows[i].artifact_path.c_str());
        }
        std::remove(rows[0].artifact_path.c_str());
        return lossy == 3;
    });

    if (run.failures == 0) std::printf("all criteria passed\n");
    else std::printf("%d criterion(s) failed\n", run.failures);
    return run.failures == 0 ? 0 : 1;
}
