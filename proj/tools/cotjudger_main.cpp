// Command-line front end for the CoT analysis pipeline.

#include <cstdio>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "cotjudger/errors.hpp"
#include "cotjudger/pipeline.hpp"

namespace {

using cotjudger::RunConfig;

void add_run_options(CLI::App& app, RunConfig& config, std::string& backend_spec) {
    app.add_option("--dataset", config.dataset, "line-delimited dataset file")->required();
    app.add_option("--out", config.output_dir, "output directory")->required();
    app.add_option("--backend", backend_spec,
                   "mock:<fixture-path> or an HTTP endpoint (e.g. http://host:8000/v1)")
        ->required();
    app.add_option("--model", config.http.model, "model name for the live backend");
    app.add_option("--temperature", config.http.temperature,
                   "sampling temperature for the live backend (default 0: greedy)");
    app.add_option("--credential-env", config.http.api_key_env,
                   "environment variable holding the backend credential");
    app.add_option("--cache-dir", config.cache_dir, "response cache directory");
    app.add_option("--parallelism", config.parallelism, "sample worker count");
    app.add_option("--rate", config.rate_per_second,
                   "backend requests per second (0 = unlimited)");
    app.add_option("--max-in-flight", config.max_in_flight,
                   "concurrent backend requests");
    app.add_option("--path-cap", config.caps.path_cap, "path enumeration cap");
    app.add_option("--validation-budget", config.caps.validation_budget,
                   "max path validations per sample");
    app.add_option("--wall-seconds", config.limits.wall_seconds,
                   "code execution wall clock limit");
    app.add_option("--memory-mb", config.limits.memory_bytes,
                   "code execution memory limit in MiB")
        ->transform([](std::string s) {
            return std::to_string(std::stoull(s) * 1024 * 1024);
        });
    app.add_option("--interpreter", config.interpreter, "code execution interpreter");
    app.add_option("--sandbox-cmd", config.sandbox_prefix,
                   "command prefix wrapping code execution (container hook)");
    app.add_option("--token-counter", config.token_counter,
                   "token counter id (whitespace, chars)");
    app.add_option("--uncertainty-threshold", config.uncertainty_threshold,
                   "answer candidates above this count mark a CoT uncertain");
    app.add_option("--classify-chunk", config.classify_chunk_size,
                   "classification request node budget");
    app.add_option("--model-id", config.model_id, "model label for the report");
}

void resolve_backend(RunConfig& config, const std::string& backend_spec) {
    if (backend_spec.rfind("mock:", 0) == 0) {
        config.mock_backend = true;
        config.fixture = backend_spec.substr(5);
        if (config.fixture.empty()) {
            throw cotjudger::ConfigError("mock backend needs a fixture path (mock:<path>)");
        }
    } else {
        config.mock_backend = false;
        config.http.endpoint = backend_spec;
        if (config.http.model.empty()) {
            throw cotjudger::ConfigError("live backend needs --model");
        }
    }
}

int report_outcome(const cotjudger::RunOutcome& outcome) {
    const auto& m = outcome.manifest;
    std::cout << "samples: " << m.samples.size() << "  completed: " << m.completed()
              << "  failed: " << m.failed() << "\n"
              << "backend calls: " << m.backend_calls << "  cache hits: " << m.cache_hits
              << "\n";
    for (const auto& [id, s] : m.samples) {
        if (s.status == "failed") {
            std::cout << "  failed " << id << " (" << s.stage << "): " << s.reason << "\n";
        }
    }
    return outcome.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"CoT dependency-graph redundancy analyzer"};
    app.require_subcommand(1);

    RunConfig run_config;
    std::string run_backend;
    CLI::App* run_cmd = app.add_subcommand("run", "run the pipeline over a dataset");
    add_run_options(*run_cmd, run_config, run_backend);

    RunConfig resume_config;
    std::string resume_backend;
    CLI::App* resume_cmd =
        app.add_subcommand("resume", "resume a previous run from its manifest");
    add_run_options(*resume_cmd, resume_config, resume_backend);

    std::string metrics_out, metrics_model = "model", metrics_counter = "whitespace";
    int metrics_threshold = 2;
    CLI::App* metrics_cmd = app.add_subcommand(
        "metrics", "recompute metrics and the report from stored graphs");
    metrics_cmd->add_option("--out", metrics_out, "output directory of a previous run")
        ->required();
    metrics_cmd->add_option("--model-id", metrics_model, "model label for the report");
    metrics_cmd->add_option("--token-counter", metrics_counter, "token counter id");
    metrics_cmd->add_option("--uncertainty-threshold", metrics_threshold,
                            "answer candidates above this count mark a CoT uncertain");

    std::string dot_out;
    CLI::App* dot_cmd =
        app.add_subcommand("export-dot", "re-export dot files from stored graphs");
    dot_cmd->add_option("--out", dot_out, "output directory of a previous run")->required();

    std::string report_out, report_model = "model", report_counter = "whitespace";
    CLI::App* report_cmd =
        app.add_subcommand("report", "rebuild report.json/report.tsv from metrics.jsonl");
    report_cmd->add_option("--out", report_out, "output directory of a previous run")
        ->required();
    report_cmd->add_option("--model-id", report_model, "model label for the report");
    report_cmd->add_option("--token-counter", report_counter, "token counter id");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run_cmd->parsed()) {
            resolve_backend(run_config, run_backend);
            return report_outcome(cotjudger::run_pipeline(run_config));
        }
        if (resume_cmd->parsed()) {
            resolve_backend(resume_config, resume_backend);
            return report_outcome(cotjudger::resume(resume_config));
        }
        if (metrics_cmd->parsed()) {
            RunConfig config;
            config.model_id = metrics_model;
            config.token_counter = metrics_counter;
            config.uncertainty_threshold = metrics_threshold;
            cotjudger::recompute_metrics(metrics_out, config);
            std::cout << "metrics recomputed under " << metrics_out << "\n";
            return 0;
        }
        if (dot_cmd->parsed()) {
            cotjudger::export_dot_files(dot_out);
            std::cout << "dot files exported under " << dot_out << "/dot\n";
            return 0;
        }
        if (report_cmd->parsed()) {
            const auto report =
                cotjudger::rebuild_report(report_out, report_model, report_counter);
            std::cout << cotjudger::ModelReport::tsv_header() << "\n"
                      << report.tsv_row() << "\n";
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
