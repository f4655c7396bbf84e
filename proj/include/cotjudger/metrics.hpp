#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "cotjudger/graph.hpp"
#include "cotjudger/paths.hpp"

namespace cotjudger {

/// Post-answer transition modes over consecutive verified answers:
/// destructive revision (T->F), superfluous verification (T->T), error
/// entrenchment (F->F), effective backwards (F->T).
struct TransitionCounts {
    int dr = 0;
    int sv = 0;
    int ee = 0;
    int eb = 0;

    bool operator==(const TransitionCounts&) const = default;
};

/// Per-CoT metric record.
struct CoTMetrics {
    uint64_t tokens = 0;
    bool acc = false;  // correctness of the final answer node
    int v = 0;         // canonical nodes excl. root, incl. isolated
    int e = 0;         // deduped edges excl. root-incident ones
    double iso = 0.0;
    double avg_degree = 0.0;  // e/(v-1) for v >= 2, else 0
    int in_max = 0;
    int out_max = 0;
    double self_ratio = 0.0;
    double back_ratio = 0.0;
    std::optional<int> l_eff;
    std::optional<double> r;  // (v - l_eff)/v, present iff l_eff is
    bool uncertain = false;   // more than `threshold` candidate answer nodes
    std::vector<double> redundant_positions;  // normalized, ascending
    TransitionCounts transitions;
};

/// Per-model aggregate: arithmetic mean of each per-CoT field over the
/// applicable samples (mean of ratios, not ratio of means).
struct ModelReport {
    std::string model_id;
    size_t n_samples = 0;
    std::string token_counter;

    double acc = 0.0;
    double tokens = 0.0;
    double v = 0.0;
    double iso = 0.0;
    double e = 0.0;
    double avg_degree = 0.0;
    double in_max = 0.0;
    double out_max = 0.0;
    double self_ratio = 0.0;
    double back_ratio = 0.0;
    std::optional<double> l_eff;  // over the SEP-found subset
    std::optional<double> r;
    double uncertainty_ratio = 0.0;  // U: fraction of CoTs with uncertain=true
    size_t sep_found = 0;
    std::map<std::string, size_t> exclusions;  // reason -> count

    TransitionCounts transition_totals;
    /// Transitions per 100 canonical nodes, averaged over samples.
    double dr_per_100 = 0.0, sv_per_100 = 0.0, ee_per_100 = 0.0, eb_per_100 = 0.0;

    nlohmann::json to_json() const;
    /// Delimited row with exactly the benchmark-table column set.
    std::string tsv_row() const;
    static std::string tsv_header();
};

CoTMetrics compute_cot_metrics(const CoTGraph& graph, const SEPResult& sep,
                               const std::vector<VerifiedAnswer>& answers,
                               uint64_t token_count, int uncertainty_threshold = 2);

TransitionCounts classify_transitions(const std::vector<VerifiedAnswer>& ordered_answers);

/// Normalized positions (order index / (v-1)) of canonical nodes outside
/// the SEP, ascending. Empty when the SEP is absent or covers everything.
std::vector<double> redundant_positions(const CoTGraph& graph, const SEPResult& sep);

/// level = 5 - floor(accuracy * 5), clamped to [1, 5]; higher is harder.
int stratify_difficulty(double accuracy_fraction);
std::map<std::string, int> stratify_difficulty(
    const std::map<std::string, std::vector<bool>>& per_query_results);

/// 1 - (population sigma)/mu over run counts; undefined when mu == 0.
std::optional<double> harness_stability(const std::vector<double>& per_run_counts);

std::optional<double> harness_micro_f1(uint64_t tp, uint64_t fp, uint64_t fn);
/// Aligned single-label sequences: matches count as TP, each mismatch as
/// one FP and one FN.
std::optional<double> harness_micro_f1(const std::vector<std::string>& reference,
                                       const std::vector<std::string>& predicted);

/// Mean agreement indicator between original and re-inferred verdicts.
double harness_retention(const std::vector<std::pair<bool, bool>>& verdict_pairs);

ModelReport aggregate(const std::string& model_id, const std::vector<CoTMetrics>& metrics,
                      const std::string& token_counter = "whitespace");

nlohmann::json metrics_to_json(const CoTMetrics& m);
CoTMetrics metrics_from_json(const nlohmann::json& doc);

}  // namespace cotjudger
