#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "json.hpp"

#include "cotjudger/corpus.hpp"
#include "cotjudger/segmenter.hpp"
#include "cotjudger/stages.hpp"
#include "cotjudger/taxonomy.hpp"

namespace cotjudger {

/// One structured request to an annotation backend.
struct BackendRequest {
    Stage stage = Stage::atomize;
    std::string prompt;     // rendered from the stage template
    std::string schema_id;
    std::string sample_id;
    std::string tag;  // discriminator within a stage (target step id, chunk range)
};

/// Abstract annotation backend. complete() returns the raw response text,
/// which must be a JSON document matching the request's schema.
class Backend {
public:
    virtual ~Backend() = default;
    virtual std::string complete(const BackendRequest& request) = 0;
    /// Cheap reachability check; throws BackendError when the backend
    /// cannot possibly serve requests (unreachable endpoint, ...).
    virtual void preflight() {}
    virtual std::string describe() const = 0;
};

/// Deterministic replay backend over annotation fixtures.
///
/// Stage scripts follow the AnnotationBundle conventions: a plain payload
/// is returned for every call, an array is consumed call by call (and
/// errors when exhausted), and targets scripts are keyed by the request
/// tag (the source step id).
class MockBackend : public Backend {
public:
    explicit MockBackend(std::map<std::string, AnnotationBundle> bundles);

    std::string complete(const BackendRequest& request) override;
    std::string describe() const override { return "mock"; }

private:
    std::map<std::string, AnnotationBundle> bundles_;
    std::map<std::string, size_t> cursor_;  // sample/stage/tag -> next array index
    std::mutex mu_;
};

/// Chat-completions HTTP backend. The credential is read from an
/// environment variable; everything else comes from flags.
struct HttpBackendConfig {
    std::string endpoint;  // e.g. http://localhost:8000/v1
    std::string model;
    double temperature = 0.0;  // greedy decoding
    std::string api_key_env = "COTJUDGER_API_KEY";
    int timeout_seconds = 120;
};

class HttpBackend : public Backend {
public:
    explicit HttpBackend(HttpBackendConfig config);

    std::string complete(const BackendRequest& request) override;
    void preflight() override;
    std::string describe() const override { return "http:" + config_.model; }

    static uint64_t network_calls() { return network_calls_.load(); }
    static void reset_network_calls() { network_calls_.store(0); }

private:
    HttpBackendConfig config_;
    std::string base_;  // scheme://host:port
    std::string path_prefix_;

    static std::atomic<uint64_t> network_calls_;
};

/// Verbatim response store keyed by hash(stage, schema_id, prompt).
/// Entries carry the full request key, so a hash collision degrades to a
/// cache miss instead of returning the wrong response.
class ResponseCache {
public:
    explicit ResponseCache(std::filesystem::path dir);

    std::optional<std::string> get(const BackendRequest& request) const;
    void put(const BackendRequest& request, const std::string& response);

private:
    std::filesystem::path entry_path(const BackendRequest& request) const;

    std::filesystem::path dir_;
    mutable std::shared_mutex mu_;
};

/// Token-bucket limiter; rate <= 0 disables it.
class RateLimiter {
public:
    RateLimiter(double per_second, double burst);
    void acquire();

private:
    double per_second_;
    double burst_;
    double tokens_;
    std::chrono::steady_clock::time_point last_;
    std::mutex mu_;
};

struct AnnotatorOptions {
    std::shared_ptr<Backend> backend;
    std::optional<std::filesystem::path> cache_dir;
    int schema_retries = 1;          // bounded retry on schema violations
    int classify_chunk_size = 200;   // nodes per classification request
    double rate_per_second = 0.0;    // backend request rate; 0 = unlimited
    int max_in_flight = 8;           // concurrent backend requests
};

/// All LLM-backed annotation stages behind one façade: prompt rendering,
/// schema enforcement, bounded retry, caching, and rate limiting.
class Annotator {
public:
    explicit Annotator(AnnotatorOptions options);
    ~Annotator();

    EditPlan atomize(const std::vector<Split>& splits, Domain domain,
                     const std::string& sample_id, const MaskTable& mask = {});

    std::vector<NodeLabel> classify(const std::vector<AtomicNode>& nodes,
                                    const std::string& query, Domain domain,
                                    const std::string& sample_id);

    AnswerDetection detect_answers(const std::vector<AtomicNode>& nodes,
                                   const std::string& query,
                                   const std::optional<std::string>& ground_truth,
                                   Domain domain, const std::string& sample_id);

    /// Skipped (returns empty) unless some node is labeled
    /// Repetition-or-Clarification.
    std::vector<EquivalencePair> detect_repetitions(const std::vector<AtomicNode>& nodes,
                                                    const std::vector<NodeLabel>& labels,
                                                    const std::string& query,
                                                    const std::string& sample_id);

    TargetAssignment identify_target(int node_id, const std::vector<AtomicNode>& nodes,
                                     const std::vector<NodeLabel>& labels,
                                     const std::string& query, const std::string& sample_id);

    PathVerdict validate_path(const std::string& path_text, const std::string& query,
                              const std::string& sample_id, const std::string& tag = "");

    uint64_t backend_calls() const { return backend_calls_.load(); }
    uint64_t cache_hits() const { return cache_hits_.load(); }
    Backend& backend() { return *options_.backend; }

private:
    std::string call_backend(const BackendRequest& request);

    /// Runs prompt -> response -> parse with the bounded retry contract:
    /// one more attempt per allowed retry, the violation appended to the
    /// prompt, then a StageError.
    template <typename Parse>
    auto with_retry(Stage stage, const std::string& sample_id, const std::string& tag,
                    const std::string& prompt, bool programming, Parse parse);

    AnnotatorOptions options_;
    std::optional<ResponseCache> cache_;
    RateLimiter limiter_;
    std::unique_ptr<class Gate> gate_;  // bounds in-flight requests
    std::atomic<uint64_t> backend_calls_{0};
    std::atomic<uint64_t> cache_hits_{0};
};

/// FNV-1a 64-bit over bytes; stable across runs, used for cache keys.
uint64_t fnv1a64(std::string_view bytes);

}  // namespace cotjudger
