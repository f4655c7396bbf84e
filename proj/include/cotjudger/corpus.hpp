#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "cotjudger/stages.hpp"
#include "cotjudger/taxonomy.hpp"

namespace cotjudger {

/// One query + ground truth + raw CoT text; the pipeline's unit of work.
struct CoTSample {
    std::string id;
    Domain domain = Domain::math;
    std::string query;
    std::optional<std::string> ground_truth;
    std::optional<std::string> tests;  // programming test harness payload
    std::string cot;
    std::optional<uint64_t> token_count_hint;
    nlohmann::json extras = nlohmann::json::object();  // unknown fields, preserved

    nlohmann::json to_json() const;
};

/// Scripted backend responses for one sample, keyed by stage name.
///
/// A stage value is either a payload object (returned for every call), an
/// array of payloads (consumed call by call; useful for scripting retries
/// or chunked stages), or — for the targets stage — an object keyed by the
/// source step id. All six stage keys must be present.
struct AnnotationBundle {
    std::string sample_id;
    std::map<std::string, nlohmann::json> stages;

    const nlohmann::json& stage_payload(Stage s) const;
};

/// Loads a line-delimited dataset. Parsing is total: every line either
/// yields a sample or a diagnostic naming the line and field; if any
/// diagnostics accumulate (malformed line, missing field, duplicate id)
/// a CorpusError carrying all of them is thrown. Order is preserved.
std::vector<CoTSample> load_dataset(const std::filesystem::path& path);

/// Inverse of load_dataset; load(save(samples)) == samples.
void save_dataset(const std::vector<CoTSample>& samples, const std::filesystem::path& path);

/// Loads a line-delimited fixture of annotation bundles. Every bundle is
/// validated against the six stage schemas before acceptance; a violation
/// raises CorpusError naming the sample id, stage, and offending field.
std::map<std::string, AnnotationBundle> load_fixture(const std::filesystem::path& path);

}  // namespace cotjudger
