// Command line front end for the protection toolkit.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "reasonbreak/annotation/annotation.hpp"
#include "reasonbreak/decoder/decoder.hpp"
#include "reasonbreak/embedding/bank.hpp"
#include "reasonbreak/evaluation/evaluation.hpp"
#include "reasonbreak/pipeline/pipeline.hpp"
#include "reasonbreak/tiling/tiling.hpp"
#include "reasonbreak/training/training.hpp"

namespace fs = std::filesystem;
using namespace reasonbreak;

namespace {

struct CommonOpts {
    int epsilon_units = 16;  // in 1/255 units
    int n_max = 64;
    std::string bank_path;
    std::string decoder_path;
    std::string out_dir = ".";
    uint64_t seed = 0;
    bool no_minimax = false;
    bool allow_unannotated = false;
};

void add_common(CLI::App* cmd, CommonOpts& o, bool with_bank = true, bool with_decoder = true) {
    cmd->add_option("--epsilon", o.epsilon_units, "Pixel budget in 1/255 units")
        ->check(CLI::IsMember({8, 16}))
        ->capture_default_str();
    cmd->add_option("--nmax", o.n_max, "Maximum number of blocks")->capture_default_str();
    if (with_bank) cmd->add_option("--bank", o.bank_path, "Embedding bank file");
    if (with_decoder) cmd->add_option("--decoder", o.decoder_path, "Generator checkpoint file");
    cmd->add_option("--out", o.out_dir, "Output directory")->capture_default_str();
    cmd->add_option("--seed", o.seed, "Random seed")->capture_default_str();
    cmd->add_flag("--no-minimax", o.no_minimax, "Disable the hard-negative prior search");
    cmd->add_flag("--allow-unannotated", o.allow_unannotated,
                  "Skip images without annotations instead of failing");
}

std::string annotation_path_for(const std::string& image_path) {
    fs::path p(image_path);
    p.replace_extension(".json");
    return p.string();
}

std::vector<ConceptAnnotation> load_annotations_for(const std::string& image_path,
                                                    bool allow_missing) {
    const std::string apath = annotation_path_for(image_path);
    std::ifstream in(apath);
    if (!in) {
        if (allow_missing) {
            std::cerr << "warning: no annotation file for " << image_path << ", skipping\n";
            return {};
        }
        throw std::runtime_error("missing annotation file " + apath +
                                 " (use --allow-unannotated to skip)");
    }
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_annotations_json(buf.str());
}

// The frozen vocabulary encoder used across subcommands. A stand-in with the
// same contract as a pretrained CLIP-style tower; seeded for reproducibility.
std::shared_ptr<ToyLinearEncoder> frozen_encoder(int side, int dim, uint64_t seed) {
    return make_toy_encoder("frozen", side, dim, seed ^ 0x5eed);
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << content;
}

int run_plan_grid(int width, int height, const CommonOpts& o) {
    GridSpec g = plan_grid(width, height, o.n_max);
    nlohmann::json j{{"width", width},
                     {"height", height},
                     {"nmax", o.n_max},
                     {"m", g.m},
                     {"n", g.n},
                     {"blocks", g.m * g.n}};
    std::cout << j.dump(2) << "\n";
    return 0;
}

int run_build_bank(const std::vector<std::string>& images, int side, int dim,
                   const CommonOpts& o) {
    auto enc = frozen_encoder(side, dim, o.seed);
    std::vector<ImageBuffer> bufs;
    std::vector<std::string> ids;
    for (const auto& path : images) {
        bufs.push_back(load_image(path));
        ids.push_back(fs::path(path).filename().string());
    }
    EmbeddingBank bank = build_bank(bufs, *enc, ids);
    if (o.bank_path.empty()) throw std::runtime_error("--bank output path is required");
    save_bank(bank, o.bank_path);
    std::cout << "wrote bank with " << bank.size() << " entries (dim " << bank.dim << ") to "
              << o.bank_path << "\n";
    return 0;
}

int run_train(const std::vector<std::string>& images, int side, int surrogate_count, int epochs,
              double lr, int max_steps, const CommonOpts& o) {
    if (o.bank_path.empty()) throw std::runtime_error("--bank is required");
    EmbeddingBank bank = load_bank(o.bank_path);
    auto frozen = frozen_encoder(side, bank.dim, o.seed);
    SurrogateList surrogates;
    for (int i = 0; i < surrogate_count; ++i)
        surrogates.push_back(
            make_toy_encoder("surrogate" + std::to_string(i), side, bank.dim, o.seed + 1 + i));

    std::vector<AnnotatedImage> corpus;
    for (const auto& path : images) {
        AnnotatedImage a;
        a.id = fs::path(path).stem().string();
        a.image = load_image(path);
        a.annotations = load_annotations_for(path, o.allow_unannotated);
        corpus.push_back(std::move(a));
    }

    TrainConfig cfg;
    cfg.epochs = epochs;
    cfg.learning_rate = lr;
    cfg.n_max = o.n_max;
    cfg.epsilon = o.epsilon_units / 255.0;
    cfg.seed = o.seed;

    Decoder decoder(DecoderConfig{bank.dim, side, 3, o.seed});
    TrainResult result = train(decoder, corpus, bank, frozen, surrogates, cfg, max_steps);

    fs::create_directories(o.out_dir);
    const std::string ckpt = o.out_dir + "/decoder.rbdc";
    decoder.save_checkpoint(ckpt);
    write_loss_history(result.history, o.out_dir + "/loss_history.ndjson");
    save_train_config(cfg, o.out_dir + "/train_config.json");
    std::cout << "trained for " << result.history.size() << " steps ("
              << result.skipped_images << " images skipped); checkpoint at " << ckpt << "\n";
    if (!result.history.empty())
        std::cout << "loss " << result.history.front().loss << " -> "
                  << result.history.back().loss << "\n";
    return 0;
}

int run_protect(const std::vector<std::string>& images, int side, const CommonOpts& o) {
    if (o.bank_path.empty()) throw std::runtime_error("--bank is required");
    EmbeddingBank bank = load_bank(o.bank_path);
    auto frozen = frozen_encoder(side, bank.dim, o.seed);
    std::unique_ptr<Decoder> decoder;
    if (!o.decoder_path.empty()) {
        decoder = std::make_unique<Decoder>(Decoder::load_checkpoint(o.decoder_path));
    } else {
        std::cerr << "warning: no --decoder checkpoint given, using a freshly seeded generator\n";
        decoder = std::make_unique<Decoder>(DecoderConfig{bank.dim, side, 3, o.seed});
    }

    fs::create_directories(o.out_dir);
    for (const auto& path : images) {
        auto annotations = load_annotations_for(path, o.allow_unannotated);
        if (annotations.empty()) continue;
        ProtectRequest req;
        req.image = load_image(path);
        req.annotations = std::move(annotations);
        req.epsilon = o.epsilon_units / 255.0;
        req.n_max = o.n_max;
        req.minimax_enabled = !o.no_minimax;
        ProtectResult res = protect(req, bank, frozen, *decoder);

        const std::string stem = fs::path(path).stem().string();
        const std::string out_png = o.out_dir + "/" + stem + "_protected.png";
        save_png(res.image, out_png);  // lossless output keeps the budget exact
        write_file(o.out_dir + "/" + stem + "_report.json", report_to_json(res.report));
        std::cout << stem << ": grid " << res.report.grid.m << "x" << res.report.grid.n
                  << ", max deviation " << res.report.max_deviation << ", wrote " << out_png
                  << "\n";
    }
    return 0;
}

int run_annotate(const std::vector<std::string>& refs, const std::string& mock_fixture,
                 const std::string& endpoint_path, int width, int height, const CommonOpts& o) {
    std::unique_ptr<MllmClient> client;
    MockMllmClient mock;
    if (!mock_fixture.empty()) {
        mock = MockMllmClient::from_fixture(mock_fixture);
        client = std::make_unique<MockMllmClient>(mock);
    } else if (!endpoint_path.empty()) {
        client = std::make_unique<HttpMllmClient>(load_endpoint_config(endpoint_path));
    } else {
        throw std::runtime_error("annotate needs --mock or --endpoint");
    }

    fs::create_directories(o.out_dir);
    std::vector<AnnotationJob> jobs;
    for (const auto& ref : refs) {
        int w = width, h = height;
        if (fs::exists(ref)) {
            ImageBuffer img = load_image(ref);
            w = img.width;
            h = img.height;
        }
        AnnotationJob job = annotate_image(ref, w, h, *client);
        const std::string stem = fs::path(ref).stem().string();
        write_file(o.out_dir + "/" + stem + "_job.json", job_to_json(job));
        std::cout << ref << ": " << to_string(job.status) << "\n";
        jobs.push_back(std::move(job));
    }
    CorpusStats stats = corpus_stats(jobs);
    write_file(o.out_dir + "/corpus_stats.json", stats_to_json(stats));
    write_file(o.out_dir + "/corpus_stats.csv", stats_to_csv(stats));
    return 0;
}

std::vector<BenchmarkPair> load_pairs(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open pair list: " + path);
    nlohmann::json j = nlohmann::json::parse(in);
    std::vector<BenchmarkPair> pairs;
    for (const auto& e : j.at("pairs"))
        pairs.push_back({e.at("image_id").get<std::string>(), e.at("truth").get<std::string>()});
    return pairs;
}

int run_evaluate(const std::string& pairs_path, const std::string& answers_path,
                 const std::string& geocoder_path, const CommonOpts& o) {
    auto pairs = load_pairs(pairs_path);
    ScriptedTargetClient client = ScriptedTargetClient::from_file(answers_path);
    FixtureGeocoder geocoder = FixtureGeocoder::from_file(geocoder_path);
    BenchmarkTable table = run_benchmark(pairs, client, geocoder);
    fs::create_directories(o.out_dir);
    write_file(o.out_dir + "/benchmark.json", table_to_json(table));
    write_file(o.out_dir + "/benchmark.csv", table_to_csv(table));
    std::cout << table_to_csv(table);
    return 0;
}

int run_sweep(const std::vector<std::string>& images, int side, std::vector<int> budgets,
              const std::string& answers_path, const std::string& geocoder_path,
              const std::string& pairs_path, const CommonOpts& o) {
    if (o.bank_path.empty()) throw std::runtime_error("--bank is required");
    EmbeddingBank bank = load_bank(o.bank_path);
    auto frozen = frozen_encoder(side, bank.dim, o.seed);
    std::unique_ptr<Decoder> decoder;
    if (!o.decoder_path.empty())
        decoder = std::make_unique<Decoder>(Decoder::load_checkpoint(o.decoder_path));
    else
        decoder = std::make_unique<Decoder>(DecoderConfig{bank.dim, side, 3, o.seed});

    std::vector<ProtectRequest> corpus;
    for (const auto& path : images) {
        auto annotations = load_annotations_for(path, o.allow_unannotated);
        if (annotations.empty()) continue;
        ProtectRequest req;
        req.image = load_image(path);
        req.annotations = std::move(annotations);
        req.epsilon = o.epsilon_units / 255.0;
        req.minimax_enabled = !o.no_minimax;
        corpus.push_back(std::move(req));
    }

    SweepEvaluator evaluator;
    if (!answers_path.empty() && !geocoder_path.empty() && !pairs_path.empty()) {
        auto pairs = load_pairs(pairs_path);
        auto client = std::make_shared<ScriptedTargetClient>(
            ScriptedTargetClient::from_file(answers_path));
        auto geocoder = std::make_shared<FixtureGeocoder>(
            FixtureGeocoder::from_file(geocoder_path));
        evaluator = [pairs, client, geocoder](int, const std::vector<ProtectResult>&) {
            BenchmarkTable t = run_benchmark(pairs, *client, *geocoder);
            return t.cells.empty() ? 0.0 : t.cells.front().clamped;  // region @1
        };
    } else {
        evaluator = [](int, const std::vector<ProtectResult>&) { return 0.0; };
    }

    auto rows = ablation_sweep(corpus, budgets, bank, frozen, *decoder, evaluator);
    nlohmann::json out = nlohmann::json::array();
    for (const auto& r : rows) {
        out.push_back({{"nmax", r.n_max},
                       {"m", r.grid.m},
                       {"n", r.grid.n},
                       {"ok", r.evaluator_ok},
                       {"error", r.error},
                       {"ppr", r.ppr}});
        std::cout << "nmax " << r.n_max << ": grid " << r.grid.m << "x" << r.grid.n
                  << (r.evaluator_ok ? "" : " (failed: " + r.error + ")") << ", ppr " << r.ppr
                  << "\n";
    }
    fs::create_directories(o.out_dir);
    write_file(o.out_dir + "/sweep.json", out.dump(2));
    return 0;
}

int run_jpeg_test(const std::string& clean_path, const std::string& protected_path,
                  std::vector<int> qualities, const CommonOpts& o) {
    ImageBuffer clean = load_image(clean_path);
    ImageBuffer prot = load_image(protected_path);
    fs::create_directories(o.out_dir);
    auto rows = jpeg_robustness(clean, prot, qualities, o.out_dir,
                                fs::path(protected_path).stem().string());
    nlohmann::json out = nlohmann::json::array();
    for (const auto& r : rows) {
        out.push_back({{"quality", r.quality},
                       {"lossless", r.lossless},
                       {"deviation", r.deviation},
                       {"artifact", r.artifact_path}});
        std::cout << "q" << r.quality << (r.lossless ? " (lossless)" : "") << ": deviation "
                  << r.deviation << "\n";
    }
    write_file(o.out_dir + "/jpeg_test.json", out.dump(2));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Concept-aware image protection toolkit"};
    app.require_subcommand(1);

    CommonOpts o;
    int width = 0, height = 0;
    std::vector<std::string> images;
    int side = 224, dim = 512;
    int surrogate_count = 3, epochs = 2, max_steps = -1;
    double lr = 1e-5;
    std::string mock_fixture, endpoint_path;
    std::string pairs_path, answers_path, geocoder_path;
    std::vector<int> budgets = {1, 4, 16, 64, 256};
    std::vector<int> qualities = {100, 95, 75, 50};
    std::string clean_path, protected_path;

    auto* plan = app.add_subcommand("plan-grid", "Choose the block grid for an image size");
    plan->add_option("--width", width, "Image width")->required();
    plan->add_option("--height", height, "Image height")->required();
    add_common(plan, o, false, false);

    auto* bankc = app.add_subcommand("build-bank", "Encode images into an embedding bank");
    bankc->add_option("images", images, "Image files")->required();
    bankc->add_option("--side", side, "Encoder input side")->capture_default_str();
    bankc->add_option("--dim", dim, "Embedding dimension")->capture_default_str();
    add_common(bankc, o, true, false);

    auto* trainc = app.add_subcommand("train", "Train the perturbation generator");
    trainc->add_option("images", images, "Training images (annotation JSON alongside)")
        ->required();
    trainc->add_option("--side", side, "Block side in pixels (multiple of 16)")
        ->capture_default_str();
    trainc->add_option("--surrogates", surrogate_count, "Surrogate encoder count")
        ->capture_default_str();
    trainc->add_option("--epochs", epochs, "Training epochs")->capture_default_str();
    trainc->add_option("--lr", lr, "Learning rate")->capture_default_str();
    trainc->add_option("--max-steps", max_steps, "Stop after this many steps (-1: no cap)")
        ->capture_default_str();
    add_common(trainc, o, true, false);

    auto* protectc = app.add_subcommand("protect", "Apply protective perturbations to images");
    protectc->add_option("images", images, "Images to protect (annotation JSON alongside)")
        ->required();
    protectc->add_option("--side", side, "Block side in pixels")->capture_default_str();
    add_common(protectc, o);

    auto* annotatec = app.add_subcommand("annotate", "Run the three-stage annotation protocol");
    annotatec->add_option("images", images, "Image files or references")->required();
    annotatec->add_option("--mock", mock_fixture, "Scripted response fixture (offline)");
    annotatec->add_option("--endpoint", endpoint_path, "Endpoint config JSON (live)");
    annotatec->add_option("--width", width, "Fallback width for bare references");
    annotatec->add_option("--height", height, "Fallback height for bare references");
    add_common(annotatec, o, false, false);

    auto* evalc = app.add_subcommand("evaluate", "Score protection via a scripted target model");
    evalc->add_option("--pairs", pairs_path, "Image/truth pair list JSON")->required();
    evalc->add_option("--answers", answers_path, "Scripted target answers JSON")->required();
    evalc->add_option("--geocoder", geocoder_path, "Geocoder fixture JSON")->required();
    add_common(evalc, o, false, false);

    auto* sweepc = app.add_subcommand("sweep-nmax", "Ablate the block budget");
    sweepc->add_option("images", images, "Images (annotation JSON alongside)")->required();
    sweepc->add_option("--side", side, "Block side in pixels")->capture_default_str();
    sweepc->add_option("--values", budgets, "Block budgets to sweep")->capture_default_str();
    sweepc->add_option("--pairs", pairs_path, "Image/truth pair list JSON");
    sweepc->add_option("--answers", answers_path, "Scripted target answers JSON");
    sweepc->add_option("--geocoder", geocoder_path, "Geocoder fixture JSON");
    add_common(sweepc, o);

    auto* jpegc = app.add_subcommand("jpeg-test", "Measure perturbation survival under JPEG");
    jpegc->add_option("--clean", clean_path, "Clean image")->required();
    jpegc->add_option("--protected", protected_path, "Protected image")->required();
    jpegc->add_option("--qualities", qualities, "Quality factors")->capture_default_str();
    add_common(jpegc, o, false, false);

    CLI11_PARSE(app, argc, argv);

    try {
        if (plan->parsed()) return run_plan_grid(width, height, o);
        if (bankc->parsed()) return run_build_bank(images, side, dim, o);
        if (trainc->parsed())
            return run_train(images, side, surrogate_count, epochs, lr, max_steps, o);
        if (protectc->parsed()) return run_protect(images, side, o);
        if (annotatec->parsed())
            return run_annotate(images, mock_fixture, endpoint_path, width, height, o);
        if (evalc->parsed()) return run_evaluate(pairs_path, answers_path, geocoder_path, o);
        if (sweepc->parsed())
            return run_sweep(images, side, budgets, answers_path, geocoder_path, pairs_path, o);
        if (jpegc->parsed()) return run_jpeg_test(clean_path, protected_path, qualities, o);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
