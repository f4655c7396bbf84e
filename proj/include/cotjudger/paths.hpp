#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cotjudger/graph.hpp"
#include "cotjudger/stages.hpp"

namespace cotjudger {

/// One simple root-to-answer path on the forward subgraph. node_ids lists
/// the canonical ids after the virtual root; length() is the node count
/// excluding the root.
struct CandidatePath {
    std::vector<int> node_ids;

    size_t length() const { return node_ids.size(); }
    bool operator==(const CandidatePath&) const = default;
};

enum class SEPStatus { found, no_correct_answer, not_validated, enumeration_capped };

std::string_view to_string(SEPStatus s);

/// Outcome of SEP selection for one CoT.
struct SEPResult {
    SEPStatus status = SEPStatus::no_correct_answer;
    std::optional<CandidatePath> path;
    int validated_count = 0;
    std::vector<PathVerdict> verdicts;
    bool enumeration_capped = false;
};

struct EnumeratedPaths {
    std::vector<CandidatePath> paths;  // ascending (length, lexicographic)
    bool capped = false;
};

/// All simple root->answer paths on the forward graph, materialized in
/// ascending (length, lexicographic node-id sequence) order via best-first
/// expansion, stopping after `cap` paths. An unreachable answer yields an
/// empty sequence.
EnumeratedPaths enumerate_paths(const CoTGraph& forward, int answer_node, size_t cap);

/// Called with the candidate path and its 0-based validation ordinal.
using PathValidator = std::function<PathVerdict(const CandidatePath&, int ordinal)>;

/// Validates pooled paths in order and returns the first that passes.
/// Stops after `budget` validations.
SEPResult select_sep(const std::vector<CandidatePath>& pool, const PathValidator& validator,
                     int budget, bool capped);

/// Node texts of the path joined with blank lines (root contributes none).
std::string path_text(const CoTGraph& graph, const CandidatePath& path);

struct PathCaps {
    size_t path_cap = 10000;
    int validation_budget = 20;
};

/// Pools candidate paths across every verified-correct answer node of the
/// graph, sorts globally, and selects the SEP. Issues no validator calls
/// when there is no correct answer node.
SEPResult sep_for_sample(const CoTGraph& graph, const PathValidator& validator,
                         const PathCaps& caps);

nlohmann::json sep_to_json(const SEPResult& sep);
SEPResult sep_from_json(const nlohmann::json& doc);

}  // namespace cotjudger
