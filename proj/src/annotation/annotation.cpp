#include "reasonbreak/annotation/annotation.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

namespace reasonbreak {

bool resolution_filter(int width, int height) { return std::max(width, height) >= 2048; }

std::string to_string(Difficulty d) {
    switch (d) {
        case Difficulty::Easy: return "easy";
        case Difficulty::Medium: return "medium";
        case Difficulty::Hard: return "hard";
    }
    return "hard";
}

Difficulty assess_difficulty(const std::vector<ConceptAnnotation>& annotations,
                             const DifficultyThresholds& thresholds) {
    if (annotations.empty()) throw std::invalid_argument("assess_difficulty: no confidences");
    double sum = 0.0;
    int count = 0;
    for (const auto& a : annotations)
        if (a.level == ConceptLevel::City || a.level == ConceptLevel::Local) {
            sum += a.confidence;
            ++count;
        }
    if (count == 0) {
        for (const auto& a : annotations) sum += a.confidence;
        count = static_cast<int>(annotations.size());
    }
    const double mean = sum / count;
    if (mean >= thresholds.easy) return Difficulty::Easy;
    if (mean >= thresholds.medium) return Difficulty::Medium;
    return Difficulty::Hard;
}

// ---- clients ----

MockMllmClient MockMllmClient::from_fixture(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open mock fixture: " + path);
    nlohmann::json j = nlohmann::json::parse(in);
    MockMllmClient client;
    for (auto& [ref, stages] : j.at("responses").items())
        for (int stage = 1; stage <= 3; ++stage) {
            std::string key = "stage" + std::to_string(stage);
            if (!stages.contains(key)) continue;
            for (const auto& r : stages[key])
                client.push_response(ref, stage, r.is_string() ? r.get<std::string>() : r.dump());
        }
    return client;
}

void MockMllmClient::push_response(const std::string& image_ref, int stage, std::string response) {
    scripted_[{image_ref, stage}].push_back(std::move(response));
}

std::string MockMllmClient::complete(const std::string& prompt, const std::string& image_ref) {
    int stage = 1;
    if (prompt.find("three-level hierarchy") != std::string::npos) stage = 2;
    else if (prompt.find("reasoning analysis") != std::string::npos) stage = 3;
    auto it = scripted_.find({image_ref, stage});
    if (it == scripted_.end() || it->second.empty())
        throw std::runtime_error("mock client has no response for " + image_ref);
    size_t& cur = cursor_[{image_ref, stage}];
    const std::string& r = it->second[std::min(cur, it->second.size() - 1)];
    ++cur;
    return r;
}

EndpointConfig load_endpoint_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open endpoint config: " + path);
    nlohmann::json j = nlohmann::json::parse(in);
    EndpointConfig c;
    c.url = j.at("url").get<std::string>();
    c.model = j.at("model").get<std::string>();
    c.api_key_env = j.value("api_key_env", c.api_key_env);
    c.timeout_seconds = j.value("timeout_seconds", c.timeout_seconds);
    return c;
}

HttpMllmClient::HttpMllmClient(EndpointConfig config) : config_(std::move(config)) {}

std::string HttpMllmClient::complete(const std::string& prompt, const std::string& image_ref) {
    httplib::Client cli(config_.url);
    cli.set_read_timeout(config_.timeout_seconds, 0);
    httplib::Headers headers;
    if (const char* key = std::getenv(config_.api_key_env.c_str()))
        headers.emplace("Authorization", std::string("Bearer ") + key);
    nlohmann::json body{{"model", config_.model}, {"prompt", prompt}, {"image", image_ref}};
    auto res = cli.Post("/v1/annotate", headers, body.dump(), "application/json");
    if (!res || res->status != 200)
        throw std::runtime_error("mllm endpoint error for " + image_ref);
    return res->body;
}

// ---- prompts ----

PromptTemplates default_prompts() {
    PromptTemplates p;
    p.stage1 =
        "Evaluate whether the image contains real-world geographical features (natural or "
        "man-made elements related to places on Earth). Exclude abstract patterns, studio "
        "portraits, or isolated object close-ups. Answer as JSON: "
        "{\"keep\": bool, \"reason\": str}.";
    p.stage2 =
        "Categorize the image using a three-level hierarchy (L1: Environmental Domain, "
        "L2: Contextual Setting, L3: Scene Specification) and capture descriptive attributes "
        "across environmental elements, architectural characteristics, and atmospheric "
        "conditions. Answer as JSON: {\"l1\": str, \"l2\": str, \"l3\": str, "
        "\"attributes\": {str: [str]}}.";
    p.stage3 =
        "Perform hierarchical geographic reasoning analysis (Continental -> National -> City -> "
        "Local), identifying key visual concepts at each level. Each step produces a descriptive "
        "concept phrase (5-10 words) with a normalized square bounding box [center_x, center_y, "
        "size] and a confidence score. Answer as JSON: {\"concepts\": [{\"level\": str, "
        "\"phrase\": str, \"bbox\": [cx, cy, size], \"confidence\": float}]}.";
    return p;
}

// ---- stages ----

namespace {

const std::vector<std::string> kNaturalL2 = {"mountainous",     "forest/woodland", "plains/grassland",
                                             "water body",      "desert",          "coastal"};
const std::vector<std::string> kBuiltL2 = {"urban/city", "rural/suburban",
                                           "transportation infrastructure", "industrial"};

// Runs the request/parse cycle with retries; throws on exhaustion so the
// caller can quarantine the job.
template <typename ParseFn>
auto with_retries(const std::string& image_ref, MllmClient& client, const std::string& prompt,
                  const AnnotateOptions& options, ParseFn parse) {
    std::string last_error;
    for (int attempt = 0; attempt < options.max_retries; ++attempt) {
        if (attempt > 0 && options.backoff_ms > 0)
            std::this_thread::sleep_for(
                std::chrono::milliseconds(options.backoff_ms << (attempt - 1)));
        try {
            return parse(client.complete(prompt, image_ref));
        } catch (const std::exception& e) {
            last_error = e.what();
        }
    }
    throw std::runtime_error("stage failed after retries: " + last_error);
}

}  // namespace

Stage1Result stage1_filter(const std::string& image_ref, MllmClient& client,
                           const AnnotateOptions& options) {
    return with_retries(image_ref, client, options.prompts.stage1, options,
                        [](const std::string& text) {
                            nlohmann::json j = nlohmann::json::parse(text);
                            if (!j.contains("keep") || !j["keep"].is_boolean())
                                throw std::runtime_error("stage1 response missing boolean 'keep'");
                            return Stage1Result{j["keep"].get<bool>(), j.value("reason", "")};
                        });
}

Stage2Result stage2_scene(const std::string& image_ref, MllmClient& client,
                          const AnnotateOptions& options) {
    return with_retries(image_ref, client, options.prompts.stage2, options,
                        [](const std::string& text) {
        nlohmann::json j = nlohmann::json::parse(text);
        Stage2Result r;
        r.l1 = j.at("l1").get<std::string>();
        const std::vector<std::string>* vocab = nullptr;
        if (r.l1 == "Natural Environment") vocab = &kNaturalL2;
        else if (r.l1 == "Built Environment") vocab = &kBuiltL2;
        else throw std::runtime_error("stage2 unknown L1 value: " + r.l1);
        r.l2 = j.at("l2").get<std::string>();
        if (std::find(vocab->begin(), vocab->end(), r.l2) == vocab->end())
            throw std::runtime_error("stage2 L2 value outside vocabulary: " + r.l2);
        r.l3 = j.value("l3", "");
        if (j.contains("attributes"))
            for (auto& [group, items] : j["attributes"].items())
                for (const auto& item : items)
                    r.attributes[group].push_back(item.get<std::string>());
        return r;
    });
}

std::vector<ConceptAnnotation> stage3_chain(const std::string& image_ref, MllmClient& client,
                                            const AnnotateOptions& options) {
    auto parsed = with_retries(image_ref, client, options.prompts.stage3, options,
                               [](const std::string& text) {
        nlohmann::json j = nlohmann::json::parse(text);
        if (!j.contains("concepts") || !j["concepts"].is_array())
            throw std::runtime_error("stage3 response missing 'concepts' array");
        std::vector<ConceptAnnotation> out;
        for (const auto& e : j["concepts"]) {
            ConceptAnnotation a;
            a.level = concept_level_from_string(e.at("level").get<std::string>());
            a.phrase = e.at("phrase").get<std::string>();
            const auto& b = e.at("bbox");
            if (!b.is_array() || b.size() != 3)
                throw std::runtime_error("stage3 bbox must be [center_x, center_y, size]");
            a.bbox = {b[0].get<double>(), b[1].get<double>(), b[2].get<double>()};
            a.confidence = e.at("confidence").get<double>();
            out.push_back(std::move(a));
        }
        return out;
    });

    std::vector<ConceptAnnotation> kept;
    for (auto& a : parsed) {
        if (a.bbox.center_x < 0.0 || a.bbox.center_x > 1.0 || a.bbox.center_y < 0.0 ||
            a.bbox.center_y > 1.0 || a.bbox.size <= 0.0 || a.bbox.size > 1.0) {
            std::cerr << "warning: dropping concept with out-of-range bbox: " << a.phrase << "\n";
            continue;
        }
        if (a.confidence < 0.0 || a.confidence > 1.0) {
            std::cerr << "warning: dropping concept with out-of-range confidence: " << a.phrase
                      << "\n";
            continue;
        }
        int words = 0;
        std::istringstream iss(a.phrase);
        for (std::string w; iss >> w;) ++words;
        if (words < 5 || words > 10)
            std::cerr << "warning: concept phrase outside 5-10 words, kept verbatim: " << a.phrase
                      << "\n";
        kept.push_back(std::move(a));
    }
    std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
        return static_cast<int>(a.level) < static_cast<int>(b.level);
    });
    return kept;
}

AnnotationJob annotate_image(const std::string& image_ref, int width, int height,
                             MllmClient& client, const AnnotateOptions& options) {
    AnnotationJob job;
    job.image_ref = image_ref;
    job.width = width;
    job.height = height;

    if (!resolution_filter(width, height)) {
        job.status = JobStatus::Rejected;
        job.failure = "below resolution threshold";
        return job;
    }
    try {
        job.stage1 = stage1_filter(image_ref, client, options);
        if (!job.stage1->keep) {
            job.status = JobStatus::Rejected;
            return job;
        }
        job.stage2 = stage2_scene(image_ref, client, options);
        job.stage3 = stage3_chain(image_ref, client, options);
        if (!job.stage3.empty())
            job.difficulty = assess_difficulty(job.stage3, options.thresholds);
        job.status = JobStatus::Completed;
    } catch (const std::exception& e) {
        job.status = JobStatus::Quarantined;
        job.failure = e.what();
    }
    return job;
}

// ---- stats & persistence ----

std::string to_string(JobStatus s) {
    switch (s) {
        case JobStatus::Pending: return "pending";
        case JobStatus::Rejected: return "rejected";
        case JobStatus::Quarantined: return "quarantined";
        case JobStatus::Completed: return "completed";
    }
    return "pending";
}

namespace {
JobStatus status_from_string(const std::string& s) {
    if (s == "rejected") return JobStatus::Rejected;
    if (s == "quarantined") return JobStatus::Quarantined;
    if (s == "completed") return JobStatus::Completed;
    return JobStatus::Pending;
}

std::string scene_class(const Stage2Result& s2) {
    if (s2.l1 == "Natural Environment") return "natural";
    if (s2.l2 == "urban/city") return "urban";
    return "mixed";
}
}  // namespace

CorpusStats corpus_stats(const std::vector<AnnotationJob>& jobs) {
    CorpusStats stats;
    std::map<std::string, int> scenes, difficulties;
    std::map<std::string, int> phrases;
    for (const auto& job : jobs) {
        if (job.status != JobStatus::Completed) continue;
        ++stats.total;
        if (job.stage2) ++scenes[scene_class(*job.stage2)];
        if (job.difficulty) ++difficulties[to_string(*job.difficulty)];
        for (const auto& a : job.stage3) ++phrases[a.phrase];
    }
    for (auto& [k, v] : scenes)
        stats.scene_shares[k] = stats.total ? 100.0 * v / stats.total : 0.0;
    for (auto& [k, v] : difficulties)
        stats.difficulty_shares[k] = stats.total ? 100.0 * v / stats.total : 0.0;
    stats.phrase_frequency.assign(phrases.begin(), phrases.end());
    std::sort(stats.phrase_frequency.begin(), stats.phrase_frequency.end(),
              [](const auto& a, const auto& b) {
                  return a.second != b.second ? a.second > b.second : a.first < b.first;
              });
    return stats;
}

std::string job_to_json(const AnnotationJob& job) {
    nlohmann::json j{{"image_ref", job.image_ref},
                     {"width", job.width},
                     {"height", job.height},
                     {"status", to_string(job.status)}};
    if (!job.failure.empty()) j["failure"] = job.failure;
    if (job.stage1) j["stage1"] = {{"keep", job.stage1->keep}, {"reason", job.stage1->reason}};
    if (job.stage2) {
        nlohmann::json attrs = nlohmann::json::object();
        for (const auto& [g, items] : job.stage2->attributes) attrs[g] = items;
        j["stage2"] = {{"l1", job.stage2->l1},
                       {"l2", job.stage2->l2},
                       {"l3", job.stage2->l3},
                       {"attributes", attrs}};
    }
    if (!job.stage3.empty())
        j["stage3"] = nlohmann::json::parse(annotations_to_json(job.stage3));
    if (job.difficulty) j["difficulty"] = to_string(*job.difficulty);
    return j.dump(2);
}

AnnotationJob job_from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    AnnotationJob job;
    job.image_ref = j.at("image_ref").get<std::string>();
    job.width = j.value("width", 0);
    job.height = j.value("height", 0);
    job.status = status_from_string(j.value("status", "pending"));
    job.failure = j.value("failure", "");
    if (j.contains("stage1"))
        job.stage1 = Stage1Result{j["stage1"].value("keep", false), j["stage1"].value("reason", "")};
    if (j.contains("stage2")) {
        Stage2Result s2;
        s2.l1 = j["stage2"].value("l1", "");
        s2.l2 = j["stage2"].value("l2", "");
        s2.l3 = j["stage2"].value("l3", "");
        if (j["stage2"].contains("attributes"))
            for (auto& [g, items] : j["stage2"]["attributes"].items())
                for (const auto& item : items) s2.attributes[g].push_back(item.get<std::string>());
        job.stage2 = std::move(s2);
    }
    if (j.contains("stage3")) job.stage3 = parse_annotations_json(j["stage3"].dump());
    if (j.contains("difficulty")) {
        std::string d = j["difficulty"].get<std::string>();
        job.difficulty = d == "easy" ? Difficulty::Easy
                        : d == "medium" ? Difficulty::Medium : Difficulty::Hard;
    }
    return job;
}

std::string stats_to_json(const CorpusStats& stats) {
    nlohmann::json freq = nlohmann::json::array();
    for (const auto& [phrase, count] : stats.phrase_frequency)
        freq.push_back({{"phrase", phrase}, {"count", count}});
    nlohmann::json j{{"total", stats.total},
                     {"scene_shares", stats.scene_shares},
                     {"difficulty_shares", stats.difficulty_shares},
                     {"phrase_frequency", freq}};
    return j.dump(2);
}

std::string stats_to_csv(const CorpusStats& stats) {
    std::ostringstream out;
    out << "kind,key,value\n";
    for (const auto& [k, v] : stats.scene_shares) out << "scene," << k << "," << v << "\n";
    for (const auto& [k, v] : stats.difficulty_shares) out << "difficulty," << k << "," << v << "\n";
    for (const auto& [phrase, count] : stats.phrase_frequency) {
        std::string quoted = phrase;
        out << "phrase,\"" << quoted << "\"," << count << "\n";
    }
    return out.str();
}

}  // namespace reasonbreak
