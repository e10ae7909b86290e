#include "reasonbreak/evaluation/evaluation.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

namespace reasonbreak {

std::string to_string(Granularity g) {
    switch (g) {
        case Granularity::Region: return "region";
        case Granularity::Metro: return "metro";
        case Granularity::Tract: return "tract";
        case Granularity::Block: return "block";
    }
    return "region";
}

std::string to_string(Condition c) {
    return c == Condition::Original ? "original" : "adversarial";
}

PPRResult ppr(int n_orig, int n_adv) {
    if (n_orig < 0 || n_adv < 0) throw std::invalid_argument("ppr: counts must be non-negative");
    PPRResult r;
    r.n_orig = n_orig;
    r.n_adv = n_adv;
    if (n_orig == 0) {
        r.defined = false;
        return r;
    }
    r.raw = static_cast<double>(n_orig - n_adv) / n_orig * 100.0;
    r.clamped = std::max(r.raw, 0.0);
    return r;
}

const std::string& GeoCodes::at(Granularity g) const {
    switch (g) {
        case Granularity::Region: return region;
        case Granularity::Metro: return metro;
        case Granularity::Tract: return tract;
        case Granularity::Block: return block;
    }
    return region;
}

FixtureGeocoder FixtureGeocoder::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open geocoder fixture: " + path);
    nlohmann::json j = nlohmann::json::parse(in);
    FixtureGeocoder g;
    for (auto& [text, codes] : j.items())
        g.add(text, GeoCodes{codes.value("region", ""), codes.value("metro", ""),
                             codes.value("tract", ""), codes.value("block", "")});
    return g;
}

void FixtureGeocoder::add(const std::string& text, GeoCodes codes) {
    table_[text] = std::move(codes);
}

std::optional<GeoCodes> FixtureGeocoder::resolve(const std::string& text) {
    auto cached = cache_.find(text);
    if (cached != cache_.end()) return cached->second;
    ++lookups_;
    auto it = table_.find(text);
    std::optional<GeoCodes> result =
        it == table_.end() ? std::nullopt : std::optional<GeoCodes>(it->second);
    cache_[text] = result;
    return result;
}

ScriptedTargetClient ScriptedTargetClient::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open target client fixture: " + path);
    nlohmann::json j = nlohmann::json::parse(in);
    ScriptedTargetClient c;
    for (auto& [id, conditions] : j.at("answers").items()) {
        for (const auto& cond : {Condition::Original, Condition::Adversarial}) {
            std::string key = to_string(cond);
            if (!conditions.contains(key)) continue;
            std::vector<std::string> preds;
            for (const auto& p : conditions[key]) preds.push_back(p.get<std::string>());
            c.set_answers(id, cond, std::move(preds));
        }
    }
    if (j.contains("prompt")) c.prompt_ = j["prompt"].get<std::string>();
    return c;
}

void ScriptedTargetClient::set_answers(const std::string& image_id, Condition condition,
                                       std::vector<std::string> predictions) {
    answers_[{image_id, static_cast<int>(condition)}] = std::move(predictions);
}

std::vector<std::string> ScriptedTargetClient::query(const std::string& image_id,
                                                     Condition condition) {
    auto it = answers_.find({image_id, static_cast<int>(condition)});
    if (it == answers_.end())
        throw std::runtime_error("scripted client has no answer for " + image_id);
    return it->second;
}

bool judge(const EvalRecord& record, const GeoCodes& truth, Granularity granularity, int k) {
    const std::string& want = truth.at(granularity);
    if (want.empty()) return false;
    const int limit = std::min<int>(k, static_cast<int>(record.resolved.size()));
    for (int i = 0; i < limit; ++i)
        if (record.resolved[i] && record.resolved[i]->at(granularity) == want) return true;
    return false;
}

BenchmarkTable run_benchmark(const std::vector<BenchmarkPair>& pairs, TargetModelClient& client,
                             Geocoder& geocoder) {
    BenchmarkTable table;
    std::map<std::pair<int, int>, std::pair<int, int>> counts;  // (gran,k) -> (orig,adv)

    for (const auto& pair : pairs) {
        auto truth = geocoder.resolve(pair.truth_text);
        if (!truth) {
            std::cerr << "warning: unresolvable truth for " << pair.image_id << ", excluded\n";
            ++table.failed;
            continue;
        }
        bool client_ok = true;
        std::map<int, EvalRecord> records;
        for (const auto cond : {Condition::Original, Condition::Adversarial}) {
            try {
                EvalRecord rec;
                rec.image_id = pair.image_id;
                rec.condition = cond;
                rec.predictions = client.query(pair.image_id, cond);
                for (const auto& p : rec.predictions) rec.resolved.push_back(geocoder.resolve(p));
                records[static_cast<int>(cond)] = std::move(rec);
            } catch (const std::exception& e) {
                std::cerr << "warning: client failure for " << pair.image_id << " ("
                          << to_string(cond) << "): " << e.what() << "\n";
                client_ok = false;
            }
        }
        // Failures exclude the image from both conditions symmetrically.
        if (!client_ok) {
            ++table.failed;
            continue;
        }
        ++table.evaluated;
        for (const auto g : kGranularities)
            for (int k : {1, 3}) {
                auto& cell = counts[{static_cast<int>(g), k}];
                if (judge(records[0], *truth, g, k)) ++cell.first;
                if (judge(records[1], *truth, g, k)) ++cell.second;
            }
    }

    for (const auto g : kGranularities)
        for (int k : {1, 3}) {
            auto cell = counts[{static_cast<int>(g), k}];
            PPRResult r = ppr(cell.first, cell.second);
            r.granularity = g;
            r.k = k;
            table.cells.push_back(r);
        }
    return table;
}

std::string table_to_json(const BenchmarkTable& table) {
    nlohmann::json cells = nlohmann::json::array();
    for (const auto& c : table.cells) {
        cells.push_back({{"granularity", to_string(c.granularity)},
                         {"k", c.k},
                         {"n_orig", c.n_orig},
                         {"n_adv", c.n_adv},
                         {"raw", c.raw},
                         {"clamped", c.clamped},
                         {"defined", c.defined}});
    }
    nlohmann::json j{{"evaluated", table.evaluated}, {"failed", table.failed}, {"cells", cells}};
    return j.dump(2);
}

std::string table_to_csv(const BenchmarkTable& table) {
    std::ostringstream out;
    out << "granularity,k,n_orig,n_adv,raw,clamped,defined\n";
    for (const auto& c : table.cells)
        out << to_string(c.granularity) << "," << c.k << "," << c.n_orig << "," << c.n_adv << ","
            << c.raw << "," << c.clamped << "," << (c.defined ? 1 : 0) << "\n";
    return out.str();
}

std::vector<JpegRobustnessRow> jpeg_robustness(const ImageBuffer& clean,
                                               const ImageBuffer& protected_image,
                                               const std::vector<int>& quality_factors,
                                               const std::string& out_dir,
                                               const std::string& stem) {
    if (!clean.same_dims(protected_image))
        throw std::invalid_argument("jpeg_robustness: dimension mismatch");
    for (int q : quality_factors)
        if (q < 1 || q > 100) throw std::invalid_argument("jpeg_robustness: quality out of [1,100]");

    std::vector<JpegRobustnessRow> rows;
    for (int q : quality_factors) {
        JpegRobustnessRow row;
        row.quality = q;
        row.lossless = (q == 100);
        if (row.lossless) {
            row.artifact_path = out_dir + "/" + stem + "_q100.png";
            save_png(protected_image, row.artifact_path);
        } else {
            row.artifact_path = out_dir + "/" + stem + "_q" + std::to_string(q) + ".jpg";
            save_jpeg(protected_image, row.artifact_path, q);
        }
        ImageBuffer reread = load_image(row.artifact_path);
        row.deviation = max_abs_deviation(reread, clean);
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace reasonbreak
