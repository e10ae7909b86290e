#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "reasonbreak/concepts/concepts.hpp"

namespace reasonbreak {

bool resolution_filter(int width, int height);  // max dim >= 2048

enum class Difficulty { Easy, Medium, Hard };
std::string to_string(Difficulty d);

struct DifficultyThresholds {
    double easy = 0.8;
    double medium = 0.5;
};

// Mean city+local confidence against the thresholds; falls back to all
// levels when no city/local entry exists.
Difficulty assess_difficulty(const std::vector<ConceptAnnotation>& annotations,
                             const DifficultyThresholds& thresholds = {});

/// Raw-text completion endpoint for a multimodal annotation model.
class MllmClient {
public:
    virtual ~MllmClient() = default;
    virtual std::string complete(const std::string& prompt, const std::string& image_ref) = 0;
};

/// Scripted double: responses keyed by image ref and stage, consumed in order.
class MockMllmClient final : public MllmClient {
public:
    MockMllmClient() = default;
    static MockMllmClient from_fixture(const std::string& path);

    void push_response(const std::string& image_ref, int stage, std::string response);
    std::string complete(const std::string& prompt, const std::string& image_ref) override;

private:
    std::map<std::pair<std::string, int>, std::vector<std::string>> scripted_;
    std::map<std::pair<std::string, int>, size_t> cursor_;
};

struct EndpointConfig {
    std::string url;
    std::string model;
    std::string api_key_env = "RB_MLLM_API_KEY";
    int timeout_seconds = 60;
};

EndpointConfig load_endpoint_config(const std::string& path);

/// Live client. Never exercised by the test suite; the mock carries acceptance.
class HttpMllmClient final : public MllmClient {
public:
    explicit HttpMllmClient(EndpointConfig config);
    std::string complete(const std::string& prompt, const std::string& image_ref) override;

private:
    EndpointConfig config_;
};

struct Stage1Result {
    bool keep = false;
    std::string reason;
};

struct Stage2Result {
    std::string l1;  // "Natural Environment" | "Built Environment"
    std::string l2;
    std::string l3;
    std::map<std::string, std::vector<std::string>> attributes;
};

struct PromptTemplates {
    std::string stage1;
    std::string stage2;
    std::string stage3;
};
PromptTemplates default_prompts();

enum class JobStatus { Pending, Rejected, Quarantined, Completed };
std::string to_string(JobStatus s);

struct AnnotationJob {
    std::string image_ref;
    int width = 0, height = 0;
    JobStatus status = JobStatus::Pending;
    std::optional<Stage1Result> stage1;
    std::optional<Stage2Result> stage2;
    std::vector<ConceptAnnotation> stage3;
    std::optional<Difficulty> difficulty;
    std::string failure;
};

struct AnnotateOptions {
    int max_retries = 3;
    int backoff_ms = 0;  // exponential base; 0 disables sleeping
    DifficultyThresholds thresholds;
    PromptTemplates prompts = default_prompts();
};

// Single-stage entry points; malformed or schema-invalid responses are
// retried up to max_retries, then the job is quarantined.
Stage1Result stage1_filter(const std::string& image_ref, MllmClient& client,
                           const AnnotateOptions& options = {});
Stage2Result stage2_scene(const std::string& image_ref, MllmClient& client,
                          const AnnotateOptions& options = {});
std::vector<ConceptAnnotation> stage3_chain(const std::string& image_ref, MllmClient& client,
                                            const AnnotateOptions& options = {});

// Full three-stage protocol for one image (resolution filter included).
AnnotationJob annotate_image(const std::string& image_ref, int width, int height,
                             MllmClient& client, const AnnotateOptions& options = {});

struct CorpusStats {
    int total = 0;
    std::map<std::string, double> scene_shares;       // natural / urban / mixed
    std::map<std::string, double> difficulty_shares;  // easy / medium / hard
    std::vector<std::pair<std::string, int>> phrase_frequency;  // descending
};

CorpusStats corpus_stats(const std::vector<AnnotationJob>& jobs);

std::string job_to_json(const AnnotationJob& job);
AnnotationJob job_from_json(const std::string& text);
std::string stats_to_json(const CorpusStats& stats);
std::string stats_to_csv(const CorpusStats& stats);

}  // namespace reasonbreak
