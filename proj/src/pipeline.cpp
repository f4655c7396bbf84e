#include "cotjudger/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <fstream>
#include <thread>

#include "cotjudger/errors.hpp"
#include "cotjudger/prompts.hpp"

namespace cotjudger {

namespace fs = std::filesystem;
using nlohmann::json;

uint64_t count_tokens(const std::string& counter_id, std::string_view text) {
    if (counter_id == "whitespace") {
        uint64_t count = 0;
        bool in_token = false;
        for (unsigned char c : text) {
            if (std::isspace(c)) {
                in_token = false;
            } else if (!in_token) {
                in_token = true;
                ++count;
            }
        }
        return count;
    }
    if (counter_id == "chars") return text.size();
    throw ConfigError("unknown token counter '" + counter_id + "'");
}

// ---------------------------------------------------------------------------
// Config

json RunConfig::to_json() const {
    json j{{"dataset", dataset.string()},
           {"output_dir", output_dir.string()},
           {"backend", mock_backend ? "mock" : "http"},
           {"parallelism", parallelism},
           {"rate_per_second", rate_per_second},
           {"max_in_flight", max_in_flight},
           {"path_cap", caps.path_cap},
           {"validation_budget", caps.validation_budget},
           {"wall_seconds", limits.wall_seconds},
           {"memory_bytes", limits.memory_bytes},
           {"interpreter", interpreter},
           {"sandbox_prefix", sandbox_prefix},
           {"token_counter", token_counter},
           {"uncertainty_threshold", uncertainty_threshold},
           {"classify_chunk_size", classify_chunk_size},
           {"model_id", model_id}};
    if (mock_backend) {
        j["fixture"] = fixture.string();
    } else {
        j["endpoint"] = http.endpoint;
        j["model"] = http.model;
        j["temperature"] = http.temperature;
    }
    if (cache_dir) j["cache_dir"] = cache_dir->string();
    return j;
}

std::string RunConfig::semantic_hash() const {
    json j = to_json();
    // Execution knobs and artifact locations may change across resumes.
    j.erase("parallelism");
    j.erase("rate_per_second");
    j.erase("max_in_flight");
    j.erase("output_dir");
    if (j.contains("cache_dir")) j.erase("cache_dir");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a64(j.dump())));
    return buf;
}

// ---------------------------------------------------------------------------
// Manifest

size_t RunManifest::completed() const {
    return static_cast<size_t>(std::count_if(
        samples.begin(), samples.end(),
        [](const auto& kv) { return kv.second.status == "completed"; }));
}

size_t RunManifest::failed() const { return samples.size() - completed(); }

json RunManifest::to_json() const {
    json jsamples = json::object();
    for (const auto& [id, s] : samples) {
        json js{{"status", s.status}, {"elapsed_ms", s.elapsed_ms}};
        if (s.status == "failed") {
            js["stage"] = s.stage;
            js["reason"] = s.reason;
        }
        jsamples[id] = std::move(js);
    }
    return json{{"config", config},
                {"config_hash", config_hash},
                {"backend", backend},
                {"backend_calls", backend_calls},
                {"cache_hits", cache_hits},
                {"network_calls", network_calls},
                {"counts", json{{"completed", completed()}, {"failed", failed()}}},
                {"samples", std::move(jsamples)}};
}

RunManifest RunManifest::from_json(const json& doc) {
    RunManifest m;
    m.config = doc.at("config");
    m.config_hash = doc.at("config_hash").get<std::string>();
    m.backend = doc.value("backend", "");
    m.backend_calls = doc.value("backend_calls", 0ull);
    m.cache_hits = doc.value("cache_hits", 0ull);
    m.network_calls = doc.value("network_calls", 0ull);
    if (doc.contains("samples")) {
        for (auto it = doc.at("samples").begin(); it != doc.at("samples").end(); ++it) {
            SampleStatus s;
            s.status = it.value().at("status").get<std::string>();
            s.elapsed_ms = it.value().value("elapsed_ms", 0.0);
            s.stage = it.value().value("stage", "");
            s.reason = it.value().value("reason", "");
            m.samples[it.key()] = std::move(s);
        }
    }
    return m;
}

// ---------------------------------------------------------------------------
// Per-sample processing

namespace {

std::string sanitize_id(const std::string& id) {
    std::string out;
    for (char c : id) {
        out.push_back(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' ||
                              c == '.'
                          ? c
                          : '_');
    }
    return out;
}

json answers_to_json(const std::vector<VerifiedAnswer>& answers) {
    json arr = json::array();
    for (const auto& a : answers) {
        json ja{{"step_id", a.step_id},
                {"answer_text", a.answer_text},
                {"is_correct", a.is_correct},
                {"method", std::string(to_string(a.method))}};
        if (!a.detail.empty()) ja["detail"] = a.detail;
        arr.push_back(std::move(ja));
    }
    return arr;
}

std::vector<VerifiedAnswer> answers_from_json(const json& arr) {
    std::vector<VerifiedAnswer> out;
    for (const auto& ja : arr) {
        VerifiedAnswer a;
        a.step_id = ja.at("step_id").get<int>();
        a.answer_text = ja.at("answer_text").get<std::string>();
        a.is_correct = ja.at("is_correct").get<bool>();
        a.method = ja.at("method").get<std::string>() == "code_execution"
                       ? VerificationMethod::code_execution
                       : VerificationMethod::backend_verdict;
        a.detail = ja.value("detail", "");
        out.push_back(std::move(a));
    }
    return out;
}

json metrics_record(const std::string& sample_id, Domain domain, const CoTMetrics& m) {
    json rec = metrics_to_json(m);
    rec["sample_id"] = sample_id;
    rec["domain"] = to_string(domain);
    return rec;
}

}  // namespace

SampleArtifacts process_sample(const CoTSample& sample, Annotator& annotator,
                               const Verifier& verifier, const RunConfig& config) {
    const uint64_t tokens = sample.token_count_hint
                                ? *sample.token_count_hint
                                : count_tokens(config.token_counter, sample.cot);

    // Segmentation with code masking.
    auto [masked, mask] = mask_code_blocks(sample.cot);
    const Delimiter delim = detect_delimiter(masked);
    const std::vector<Split> splits = heuristic_segment(masked, delim);
    if (splits.empty()) {
        throw StageError("segment", "sample '" + sample.id + "': CoT has no content");
    }

    // Atomization and classification.
    const EditPlan plan = annotator.atomize(splits, sample.domain, sample.id, mask);
    const std::vector<AtomicNode> nodes = apply_edits(splits, plan, mask, delim);
    const std::vector<NodeLabel> labels =
        annotator.classify(nodes, sample.query, sample.domain, sample.id);

    // Answer detection and verification.
    const AnswerDetection detection = annotator.detect_answers(
        nodes, sample.query, sample.ground_truth, sample.domain, sample.id);
    std::vector<VerifiedAnswer> answers;
    answers.reserve(detection.candidates.size());
    for (const auto& candidate : detection.candidates) {
        answers.push_back(verifier.verify_answer(candidate, sample));
    }

    // Relational annotation.
    const std::vector<EquivalencePair> pairs =
        annotator.detect_repetitions(nodes, labels, sample.query, sample.id);
    std::vector<TargetAssignment> targets;
    for (const auto& node : nodes) {
        const NodeLabel& label = labels[static_cast<size_t>(node.id - 1)];
        if (label.category == category::kReflection ||
            label.category == category::kCorrection ||
            label.category == category::kExploration) {
            targets.push_back(
                annotator.identify_target(node.id, nodes, labels, sample.query, sample.id));
        }
    }

    // Graph construction and SEP extraction.
    CoTGraph graph = build_graph(normalize_nodes(nodes, labels, pairs, answers), targets);
    int ordinal = 0;
    PathValidator validator = [&](const CandidatePath& path, int) {
        return annotator.validate_path(path_text(graph, path), sample.query, sample.id,
                                       std::to_string(ordinal++));
    };
    const SEPResult sep = sep_for_sample(graph, validator, config.caps);

    const CoTMetrics metrics = compute_cot_metrics(graph, sep, answers, tokens,
                                                   config.uncertainty_threshold);

    SampleArtifacts artifacts;
    artifacts.document = json{{"sample_id", sample.id},
                              {"domain", to_string(sample.domain)},
                              {"tokens", tokens},
                              {"token_counter", config.token_counter},
                              {"graph", export_graph_json(graph)},
                              {"sep", sep_to_json(sep)},
                              {"answers", answers_to_json(answers)},
                              {"metrics", metrics_to_json(metrics)}};
    if (!graph.warnings.empty()) artifacts.document["warnings"] = graph.warnings;
    artifacts.dot = export_dot(graph);
    artifacts.metrics_line = metrics_record(sample.id, sample.domain, metrics);
    return artifacts;
}

// ---------------------------------------------------------------------------
// Run orchestration

namespace {

struct SampleOutcome {
    std::optional<SampleArtifacts> artifacts;
    SampleStatus status;
};

std::shared_ptr<Backend> make_backend(const RunConfig& config) {
    if (config.mock_backend) {
        if (config.fixture.empty()) {
            throw ConfigError("mock backend requires a fixture path");
        }
        return std::make_shared<MockBackend>(load_fixture(config.fixture));
    }
    if (config.http.endpoint.empty()) {
        throw ConfigError("live backend requires an endpoint");
    }
    auto backend = std::make_shared<HttpBackend>(config.http);
    backend->preflight();  // fail fast before processing any sample
    return backend;
}

SampleOutcome run_one(const CoTSample& sample, Annotator& annotator,
                      const Verifier& verifier, const RunConfig& config) {
    SampleOutcome outcome;
    const auto start = std::chrono::steady_clock::now();
    std::string stage = "segment";
    try {
        outcome.artifacts = process_sample(sample, annotator, verifier, config);
        outcome.status.status = "completed";
    } catch (const StageError& e) {
        outcome.status.status = "failed";
        outcome.status.stage = e.stage();
        outcome.status.reason = e.what();
    } catch (const std::exception& e) {
        outcome.status.status = "failed";
        outcome.status.stage = stage;
        outcome.status.reason = e.what();
    }
    outcome.status.elapsed_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
            .count();
    return outcome;
}

void write_text(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << content;
}

void emit_outputs(const RunConfig& config, const std::vector<CoTSample>& samples,
                  std::vector<SampleOutcome>& outcomes, RunManifest& manifest) {
    const fs::path out = config.output_dir;
    fs::create_directories(out / "graphs");
    fs::create_directories(out / "dot");

    // Outputs are emitted in sample-id order so runs are reproducible
    // regardless of worker interleaving.
    std::vector<size_t> order(samples.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return samples[a].id < samples[b].id; });

    std::string metrics_lines;
    std::vector<CoTMetrics> completed_metrics;
    for (size_t idx : order) {
        const CoTSample& sample = samples[idx];
        SampleOutcome& outcome = outcomes[idx];
        manifest.samples[sample.id] = outcome.status;
        if (!outcome.artifacts) continue;
        const std::string stem = sanitize_id(sample.id);
        write_text(out / "graphs" / (stem + ".json"),
                   outcome.artifacts->document.dump(2) + "\n");
        write_text(out / "dot" / (stem + ".dot"), outcome.artifacts->dot);
        metrics_lines += outcome.artifacts->metrics_line.dump() + "\n";
        completed_metrics.push_back(
            metrics_from_json(outcome.artifacts->document.at("metrics")));
    }
    write_text(out / "metrics.jsonl", metrics_lines);

    const ModelReport report =
        aggregate(config.model_id, completed_metrics, config.token_counter);
    write_text(out / "report.json", report.to_json().dump(2) + "\n");
    write_text(out / "report.tsv",
               ModelReport::tsv_header() + "\n" + report.tsv_row() + "\n");
    write_text(out / "manifest.json", manifest.to_json().dump(2) + "\n");
}

RunOutcome run_samples(const RunConfig& config, const std::vector<CoTSample>& samples,
                       const std::map<std::string, json>& reuse) {
    auto backend = make_backend(config);

    AnnotatorOptions opts;
    opts.backend = backend;
    opts.cache_dir = config.cache_dir;
    opts.classify_chunk_size = config.classify_chunk_size;
    opts.rate_per_second = config.rate_per_second;
    opts.max_in_flight = config.max_in_flight;
    Annotator annotator(opts);

    VerifierOptions vopts;
    vopts.interpreter = config.interpreter;
    vopts.limits = config.limits;
    vopts.sandbox_prefix = config.sandbox_prefix;
    const Verifier verifier(vopts);

    std::vector<SampleOutcome> outcomes(samples.size());
    std::atomic<size_t> cursor{0};
    auto worker = [&] {
        for (;;) {
            const size_t i = cursor.fetch_add(1);
            if (i >= samples.size()) break;
            if (auto it = reuse.find(samples[i].id); it != reuse.end()) {
                SampleOutcome outcome;
                SampleArtifacts artifacts;
                artifacts.document = it->second;
                artifacts.dot = export_dot(import_graph_json(it->second.at("graph")));
                artifacts.metrics_line = metrics_record(
                    samples[i].id, samples[i].domain,
                    metrics_from_json(it->second.at("metrics")));
                outcome.artifacts = std::move(artifacts);
                outcome.status.status = "completed";
                outcomes[i] = std::move(outcome);
                continue;
            }
            outcomes[i] = run_one(samples[i], annotator, verifier, config);
        }
    };

    const int n_threads = std::max(1, config.parallelism);
    std::vector<std::thread> threads;
    threads.reserve(static_cast<size_t>(n_threads));
    for (int t = 0; t < n_threads; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();

    RunManifest manifest;
    manifest.config = config.to_json();
    manifest.config_hash = config.semantic_hash();
    manifest.backend = backend->describe();
    manifest.backend_calls = annotator.backend_calls();
    manifest.cache_hits = annotator.cache_hits();
    manifest.network_calls = HttpBackend::network_calls();

    emit_outputs(config, samples, outcomes, manifest);

    RunOutcome outcome;
    outcome.exit_code = manifest.failed() > 0 ? 2 : 0;
    outcome.manifest = std::move(manifest);
    return outcome;
}

}  // namespace

RunOutcome run_pipeline(const RunConfig& config) {
    const std::vector<CoTSample> samples = load_dataset(config.dataset);
    fs::create_directories(config.output_dir);
    return run_samples(config, samples, {});
}

RunOutcome resume(const RunConfig& config) {
    const fs::path manifest_path = config.output_dir / "manifest.json";
    std::ifstream in(manifest_path);
    if (!in) {
        throw ConfigError("cannot resume: no manifest at " + manifest_path.string());
    }
    json doc = json::parse(in, nullptr, /*allow_exceptions=*/false);
    if (doc.is_discarded()) {
        throw ConfigError("cannot resume: manifest is not valid JSON");
    }
    const RunManifest previous = RunManifest::from_json(doc);
    if (previous.config_hash != config.semantic_hash()) {
        throw ConfigError(
            "cannot resume: configuration changed since the previous run "
            "(stored hash " +
            previous.config_hash + ", current " + config.semantic_hash() +
            "); start a fresh run or restore the original configuration");
    }

    const std::vector<CoTSample> samples = load_dataset(config.dataset);
    std::map<std::string, json> reuse;
    for (const auto& sample : samples) {
        auto it = previous.samples.find(sample.id);
        if (it == previous.samples.end() || it->second.status != "completed") continue;
        const fs::path stored =
            config.output_dir / "graphs" / (sanitize_id(sample.id) + ".json");
        std::ifstream sin(stored);
        if (!sin) continue;  // outputs vanished; re-process
        json jdoc = json::parse(sin, nullptr, /*allow_exceptions=*/false);
        if (!jdoc.is_discarded()) reuse.emplace(sample.id, std::move(jdoc));
    }
    return run_samples(config, samples, reuse);
}

void recompute_metrics(const fs::path& output_dir, const RunConfig& config) {
    std::vector<std::pair<std::string, json>> docs;
    const fs::path dir = output_dir / "graphs";
    if (!fs::exists(dir)) throw ConfigError("no stored graphs under " + dir.string());
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.path().extension() != ".json") continue;
        std::ifstream in(entry.path());
        json doc = json::parse(in, nullptr, /*allow_exceptions=*/false);
        if (doc.is_discarded()) continue;
        docs.emplace_back(doc.value("sample_id", entry.path().stem().string()),
                          std::move(doc));
    }
    std::sort(docs.begin(), docs.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });

    std::string lines;
    std::vector<CoTMetrics> all;
    for (auto& [id, doc] : docs) {
        const CoTGraph graph = import_graph_json(doc.at("graph"));
        const SEPResult sep = sep_from_json(doc.at("sep"));
        const std::vector<VerifiedAnswer> answers = answers_from_json(doc.at("answers"));
        const uint64_t tokens = doc.at("tokens").get<uint64_t>();
        const CoTMetrics m = compute_cot_metrics(graph, sep, answers, tokens,
                                                 config.uncertainty_threshold);
        auto domain = domain_from_string(doc.value("domain", "math"));
        lines += metrics_record(id, domain.value_or(Domain::math), m).dump() + "\n";
        all.push_back(m);
    }
    write_text(output_dir / "metrics.jsonl", lines);
    const ModelReport report = aggregate(config.model_id, all, config.token_counter);
    write_text(output_dir / "report.json", report.to_json().dump(2) + "\n");
    write_text(output_dir / "report.tsv",
               ModelReport::tsv_header() + "\n" + report.tsv_row() + "\n");
}

void export_dot_files(const fs::path& output_dir) {
    const fs::path dir = output_dir / "graphs";
    if (!fs::exists(dir)) throw ConfigError("no stored graphs under " + dir.string());
    fs::create_directories(output_dir / "dot");
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.path().extension() != ".json") continue;
        std::ifstream in(entry.path());
        json doc = json::parse(in, nullptr, /*allow_exceptions=*/false);
        if (doc.is_discarded()) continue;
        const CoTGraph graph = import_graph_json(doc.at("graph"));
        write_text(output_dir / "dot" / (entry.path().stem().string() + ".dot"),
                   export_dot(graph));
    }
}

ModelReport rebuild_report(const fs::path& output_dir, const std::string& model_id,
                           const std::string& token_counter) {
    std::ifstream in(output_dir / "metrics.jsonl");
    if (!in) throw ConfigError("no metrics.jsonl under " + output_dir.string());
    std::vector<CoTMetrics> all;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json doc = json::parse(line, nullptr, /*allow_exceptions=*/false);
        if (doc.is_discarded()) continue;
        all.push_back(metrics_from_json(doc));
    }
    const ModelReport report = aggregate(model_id, all, token_counter);
    write_text(output_dir / "report.json", report.to_json().dump(2) + "\n");
    write_text(output_dir / "report.tsv",
               ModelReport::tsv_header() + "\n" + report.tsv_row() + "\n");
    return report;
}

}  // namespace cotjudger
