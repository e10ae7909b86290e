#pragma once

#include <array>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "reasonbreak/core/image.hpp"

namespace reasonbreak {

enum class Granularity { Region, Metro, Tract, Block };
std::string to_string(Granularity g);
constexpr std::array<Granularity, 4> kGranularities = {Granularity::Region, Granularity::Metro,
                                                       Granularity::Tract, Granularity::Block};

struct PPRResult {
    Granularity granularity = Granularity::Region;
    int k = 1;
    int n_orig = 0;
    int n_adv = 0;
    double raw = 0.0;
    double clamped = 0.0;
    bool defined = true;  // false when n_orig == 0
};

// raw = (n_orig - n_adv) / n_orig * 100; clamped = max(raw, 0).
PPRResult ppr(int n_orig, int n_adv);

struct GeoCodes {
    std::string region, metro, tract, block;
    const std::string& at(Granularity g) const;
};

/// Text-or-coordinates to standardized codes at each granularity.
class Geocoder {
public:
    virtual ~Geocoder() = default;
    virtual std::optional<GeoCodes> resolve(const std::string& text) = 0;
};

/// Deterministic fixture-backed geocoder with an in-memory cache.
class FixtureGeocoder final : public Geocoder {
public:
    static FixtureGeocoder from_file(const std::string& path);
    void add(const std::string& text, GeoCodes codes);
    std::optional<GeoCodes> resolve(const std::string& text) override;
    int lookup_count() const { return lookups_; }

private:
    std::map<std::string, GeoCodes> table_;
    std::map<std::string, std::optional<GeoCodes>> cache_;
    int lookups_ = 0;
};

enum class Condition { Original, Adversarial };
std::string to_string(Condition c);

/// Black-box location query client; identical prompt across conditions.
class TargetModelClient {
public:
    virtual ~TargetModelClient() = default;
    virtual std::vector<std::string> query(const std::string& image_id, Condition condition) = 0;
    virtual const std::string& prompt() const = 0;
};

/// Scripted double keyed by image id and condition.
class ScriptedTargetClient final : public TargetModelClient {
public:
    ScriptedTargetClient() = default;
    static ScriptedTargetClient from_file(const std::string& path);
    void set_answers(const std::string& image_id, Condition condition,
                     std::vector<std::string> predictions);
    std::vector<std::string> query(const std::string& image_id, Condition condition) override;
    const std::string& prompt() const override { return prompt_; }

private:
    std::map<std::pair<std::string, int>, std::vector<std::string>> answers_;
    std::string prompt_ = "Where is it?";
};

struct EvalRecord {
    std::string image_id;
    Condition condition = Condition::Original;
    std::vector<std::string> predictions;
    std::vector<std::optional<GeoCodes>> resolved;
    std::map<Granularity, bool> correct_at_1, correct_at_3;
};

// correct@k iff any of the top-k predictions resolves to the truth code.
bool judge(const EvalRecord& record, const GeoCodes& truth, Granularity granularity, int k);

struct BenchmarkPair {
    std::string image_id;
    std::string truth_text;  // resolved through the geocoder
};

struct BenchmarkTable {
    std::vector<PPRResult> cells;  // granularity x k
    int evaluated = 0;
    int failed = 0;
};

BenchmarkTable run_benchmark(const std::vector<BenchmarkPair>& pairs, TargetModelClient& client,
                             Geocoder& geocoder);

std::string table_to_json(const BenchmarkTable& table);
std::string table_to_csv(const BenchmarkTable& table);

struct JpegRobustnessRow {
    int quality = 0;
    bool lossless = false;
    double deviation = 0.0;  // max |compressed - clean|
    std::string artifact_path;
};

// Compresses the protected image at each quality factor and measures the
// post-compression deviation from the clean image. Quality 100 takes the
// lossless (PNG) path.
std::vector<JpegRobustnessRow> jpeg_robustness(const ImageBuffer& clean,
                                               const ImageBuffer& protected_image,
                                               const std::vector<int>& quality_factors,
                                               const std::string& out_dir,
                                               const std::string& stem);

}  // namespace reasonbreak
