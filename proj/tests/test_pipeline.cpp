#include <doctest.h>

#include <stdexcept>

#include "helpers.hpp"
#include "reasonbreak/pipeline/pipeline.hpp"
#include "reasonbreak/tiling/tiling.hpp"

using namespace reasonbreak;

namespace {

struct Rig {
    std::shared_ptr<ToyLinearEncoder> frozen;
    EmbeddingBank bank;
    DecoderConfig dcfg;

    Rig(int side = 16, int dim = 12) {
        frozen = make_toy_encoder("frozen", side, dim, 77);
        std::vector<ImageBuffer> bank_imgs;
        for (int i = 0; i < 8; ++i) bank_imgs.push_back(rbtest::synth_image(48, 48, 300 + i));
        bank = build_bank(bank_imgs, *frozen);
        dcfg = DecoderConfig{dim, side, 3, 11};
    }

    ProtectRequest request(uint64_t seed, int h = 100, int w = 150) const {
        ProtectRequest req;
        req.image = rbtest::synth_image(h, w, seed);
        req.annotations = rbtest::synth_annotations(seed, 3);
        req.n_max = 6;
        return req;
    }
};

}  // namespace

TEST_CASE("zeroed decoder parameters give a bitwise-identical image") {
    Rig rig;
    Decoder dec(rig.dcfg);
    for (Param* p : dec.params()) std::fill(p->w.begin(), p->w.end(), 0.0);

    ProtectRequest req = rig.request(1);
    for (int run = 0; run < 10; ++run) {
        ProtectResult res = protect(req, rig.bank, rig.frozen, dec);
        CHECK(res.image.data == req.image.data);
        CHECK(res.report.max_deviation == 0.0);
    }
}

TEST_CASE("budget invariant holds for random images and both epsilons") {
    Rig rig;
    Decoder dec(rig.dcfg);
    for (double eps : {8.0 / 255.0, 16.0 / 255.0}) {
        for (int i = 0; i < 5; ++i) {
            ProtectRequest req = rig.request(20 + i, 60 + 7 * i, 90 + 11 * i);
            req.epsilon = eps;
            ProtectResult res = protect(req, rig.bank, rig.frozen, dec);
            CHECK(res.report.max_deviation <= eps + 1e-12);
            CHECK(max_abs_deviation(res.image, req.image) <= eps + 1e-12);
            for (double v : res.image.data) {
                CHECK(v >= 0.0);
                CHECK(v <= 1.0);
            }
        }
    }
}

TEST_CASE("protect is deterministic across repeated calls") {
    Rig rig;
    Decoder dec(rig.dcfg);
    ProtectRequest req = rig.request(5);
    ProtectResult a = protect(req, rig.bank, rig.frozen, dec);
    ProtectResult b = protect(req, rig.bank, rig.frozen, dec);
    CHECK(a.image.data == b.image.data);
    CHECK(report_to_json(a.report) == report_to_json(b.report));
}

TEST_CASE("disabling the prior search changes only the prior columns") {
    Rig rig;
    Decoder dec(rig.dcfg);
    ProtectRequest req = rig.request(9);
    ProtectResult with = protect(req, rig.bank, rig.frozen, dec);
    req.minimax_enabled = false;
    ProtectResult without = protect(req, rig.bank, rig.frozen, dec);

    CHECK(with.report.grid.m == without.report.grid.m);
    CHECK(with.report.grid.n == without.report.grid.n);
    REQUIRE(with.report.blocks.size() == without.report.blocks.size());
    for (size_t k = 0; k < with.report.blocks.size(); ++k) {
        CHECK(with.report.blocks[k].concept_count == without.report.blocks[k].concept_count);
        CHECK(with.report.blocks[k].fallback == without.report.blocks[k].fallback);
        CHECK(with.report.blocks[k].prior_index >= 0);
        CHECK(without.report.blocks[k].prior_index == -1);
    }
    CHECK(with.image.data != without.image.data);
}

TEST_CASE("reported prior selection matches an independent recomputation") {
    Rig rig;
    Decoder dec(rig.dcfg);
    ProtectRequest req = rig.request(13);
    ProtectResult res = protect(req, rig.bank, rig.frozen, dec);

    GridSpec grid = plan_grid(req.image.width, req.image.height, req.n_max,
                              dec.config().block_side);
    BlockConceptMap cmap =
        assign_concepts(grid, req.image.width, req.image.height, req.annotations);
    std::vector<std::vector<double>> text_embs;
    for (const auto& a : req.annotations) text_embs.push_back(rig.frozen->encode_text(a.phrase));

    REQUIRE(res.report.blocks.size() == cmap.concept_indices.size());
    for (size_t k = 0; k < cmap.concept_indices.size(); ++k) {
        std::vector<std::vector<double>> subset;
        for (int ci : cmap.concept_indices[k]) subset.push_back(text_embs[ci]);
        PriorSelection sel = select_prior_embedded(subset, rig.bank);
        CHECK(res.report.blocks[k].prior_index == sel.index);
        CHECK(res.report.blocks[k].prior_score == doctest::Approx(sel.score).epsilon(1e-12));
        CHECK(res.report.blocks[k].fallback == cmap.fallback[k]);
    }
}

TEST_CASE("protect validates its inputs") {
    Rig rig;
    Decoder dec(rig.dcfg);
    ProtectRequest req = rig.request(2);

    ProtectRequest bare = req;
    bare.annotations.clear();
    CHECK_THROWS_AS(protect(bare, rig.bank, rig.frozen, dec), std::invalid_argument);

    EmbeddingBank empty;
    CHECK_THROWS_AS(protect(req, empty, rig.frozen, dec), std::invalid_argument);

    ProtectRequest zero_eps = req;
    zero_eps.epsilon = 0.0;
    CHECK_THROWS_AS(protect(zero_eps, rig.bank, rig.frozen, dec), std::invalid_argument);

    Decoder wrong(DecoderConfig{8, 16, 3, 1});
    CHECK_THROWS_AS(protect(req, rig.bank, rig.frozen, wrong), std::invalid_argument);
}

TEST_CASE("report JSON carries grid, blocks, and deviation") {
    Rig rig;
    Decoder dec(rig.dcfg);
    ProtectResult res = protect(rig.request(3), rig.bank, rig.frozen, dec);
    std::string json = report_to_json(res.report);
    CHECK(json.find("\"grid\"") != std::string::npos);
    CHECK(json.find("\"prior_index\"") != std::string::npos);
    CHECK(json.find("\"max_deviation\"") != std::string::npos);
}

TEST_CASE("ablation sweep produces one row per block budget") {
    Rig rig;
    Decoder dec(rig.dcfg);
    std::vector<ProtectRequest> corpus = {rig.request(30), rig.request(31)};

    std::vector<int> seen;
    auto evaluator = [&](int n_max, const std::vector<ProtectResult>& results) {
        CHECK(results.size() == 2);
        seen.push_back(n_max);
        return 10.0 * n_max;
    };
    std::vector<int> budgets = {1, 4, 16};
    auto rows = ablation_sweep(corpus, budgets, rig.bank, rig.frozen, dec, evaluator);
    REQUIRE(rows.size() == 3);
    for (size_t i = 0; i < rows.size(); ++i) {
        CHECK(rows[i].n_max == budgets[i]);
        CHECK(rows[i].evaluator_ok);
        CHECK(rows[i].ppr == doctest::Approx(10.0 * budgets[i]));
        CHECK(rows[i].grid.m * rows[i].grid.n <= budgets[i]);
    }
    CHECK(seen == budgets);
}

TEST_CASE("an evaluator failure is recorded and the sweep continues") {
    Rig rig;
    Decoder dec(rig.dcfg);
    std::vector<ProtectRequest> corpus = {rig.request(40)};
    auto evaluator = [](int n_max, const std::vector<ProtectResult>&) -> double {
        if (n_max == 4) throw std::runtime_error("scoring backend offline");
        return 5.0;
    };
    auto rows = ablation_sweep(corpus, {1, 4, 16}, rig.bank, rig.frozen, dec, evaluator);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].evaluator_ok);
    CHECK_FALSE(rows[1].evaluator_ok);
    CHECK(rows[1].error.find("offline") != std::string::npos);
    CHECK(rows[2].evaluator_ok);

    CHECK_THROWS_AS(ablation_sweep({}, {1}, rig.bank, rig.frozen, dec, evaluator),
                    std::invalid_argument);
}
