#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "cotjudger/annotator.hpp"
#include "cotjudger/corpus.hpp"
#include "cotjudger/metrics.hpp"
#include "cotjudger/paths.hpp"
#include "cotjudger/verifier.hpp"

namespace cotjudger {

/// Everything a run needs. The semantic fields (everything except
/// parallelism, rate limiting, and directory locations) are hashed into
/// the manifest so resume can refuse mismatched configurations.
struct RunConfig {
    std::filesystem::path dataset;
    std::filesystem::path output_dir;

    bool mock_backend = true;
    std::filesystem::path fixture;  // mock backend script
    HttpBackendConfig http;         // live backend

    std::optional<std::filesystem::path> cache_dir;
    int parallelism = 1;
    double rate_per_second = 0.0;
    int max_in_flight = 8;

    PathCaps caps;
    ExecutionLimits limits;
    std::string interpreter = "python3";
    std::string sandbox_prefix;
    std::string token_counter = "whitespace";
    int uncertainty_threshold = 2;
    int classify_chunk_size = 200;
    std::string model_id = "model";

    nlohmann::json to_json() const;
    std::string semantic_hash() const;
};

struct SampleStatus {
    std::string status;  // "completed" | "failed"
    std::string stage;
    std::string reason;
    double elapsed_ms = 0.0;
};

struct RunManifest {
    nlohmann::json config;
    std::string config_hash;
    std::string backend;
    uint64_t backend_calls = 0;
    uint64_t cache_hits = 0;
    uint64_t network_calls = 0;
    std::map<std::string, SampleStatus> samples;

    size_t completed() const;
    size_t failed() const;
    nlohmann::json to_json() const;
    static RunManifest from_json(const nlohmann::json& doc);
};

struct RunOutcome {
    RunManifest manifest;
    /// 0: all samples completed; 2: some samples failed. Fatal errors
    /// (bad config, unreachable backend) throw instead.
    int exit_code = 0;
};

/// Runs the six-stage pipeline over the whole dataset and emits, under
/// output_dir: graphs/<id>.json, dot/<id>.dot, metrics.jsonl, report.json,
/// report.tsv, and manifest.json. Failures are isolated per sample.
RunOutcome run_pipeline(const RunConfig& config);

/// Re-runs only the samples the previous manifest does not mark completed,
/// then re-emits every aggregate artifact. Refuses when the semantic
/// configuration changed.
RunOutcome resume(const RunConfig& config);

/// Recomputes metrics.jsonl/report.* from the stored per-sample documents.
void recompute_metrics(const std::filesystem::path& output_dir, const RunConfig& config);

/// Re-exports dot files from the stored per-sample documents.
void export_dot_files(const std::filesystem::path& output_dir);

/// Rebuilds report.json/report.tsv from metrics.jsonl.
ModelReport rebuild_report(const std::filesystem::path& output_dir,
                           const std::string& model_id, const std::string& token_counter);

uint64_t count_tokens(const std::string& counter_id, std::string_view text);

/// Full per-sample processing (segment through metrics) for one sample.
/// Exposed for tests; throws StageError and friends on failure.
struct SampleArtifacts {
    nlohmann::json document;      // graphs/<id>.json content
    std::string dot;              // dot/<id>.dot content
    nlohmann::json metrics_line;  // one metrics.jsonl record
};
SampleArtifacts process_sample(const CoTSample& sample, Annotator& annotator,
                               const Verifier& verifier, const RunConfig& config);

}  // namespace cotjudger
