#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "cotjudger/segmenter.hpp"
#include "cotjudger/stages.hpp"
#include "cotjudger/taxonomy.hpp"

namespace cotjudger::prompts {

/// Replaces "{key}" slots for the provided keys only; all other braces in
/// the template (e.g. JSON examples) are left untouched.
std::string render(std::string_view tmpl, const std::map<std::string, std::string>& slots);

/// "1: text" lines, one per split/step.
std::string format_steps(const std::vector<Split>& splits);
std::string format_steps(const std::vector<AtomicNode>& nodes);
/// "1: text (Category)" lines, for the relational stages.
std::string format_steps(const std::vector<AtomicNode>& nodes,
                         const std::vector<NodeLabel>& labels);

std::string atomize_prompt(const std::vector<Split>& splits, Domain domain);
std::string classify_prompt(const std::vector<AtomicNode>& nodes, const std::string& query,
                            Domain domain, int first_step, int last_step);
std::string answers_prompt(const std::vector<AtomicNode>& nodes, const std::string& query,
                           const std::string& ground_truth, Domain domain);
std::string code_answers_prompt(const std::vector<AtomicNode>& nodes,
                                const std::string& query);
std::string repetitions_prompt(const std::vector<AtomicNode>& nodes,
                               const std::vector<NodeLabel>& labels,
                               const std::string& query);
std::string target_prompt(const AtomicNode& node, const NodeLabel& label,
                          const std::vector<AtomicNode>& nodes,
                          const std::vector<NodeLabel>& labels, const std::string& query,
                          RelationKind kind);
std::string path_validation_prompt(const std::string& path_text, const std::string& query);

}  // namespace cotjudger::prompts
