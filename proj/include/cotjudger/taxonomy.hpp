#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace cotjudger {

enum class Domain { math, general_reasoning, pcb, programming };

std::string to_string(Domain d);
std::optional<Domain> domain_from_string(std::string_view s);

/// One top-tier category of the step classification system.
struct CategorySpec {
    std::string name;
    bool domain_specific = false;
    std::optional<Domain> domain;  // set iff domain_specific
    std::vector<std::string> sub_categories;
    std::string definition;
};

/// Label assigned to one atomic step.
struct NodeLabel {
    std::string category;  // canonical top-tier name
    std::optional<std::string> sub_category;
    std::optional<std::string> reasoning;
};

/// Category names the graph construction rules key on.
namespace category {
inline constexpr std::string_view kReflection = "Reflection-or-Verification";
inline constexpr std::string_view kCorrection = "Correction-or-Refinement";
inline constexpr std::string_view kRepetition = "Repetition-or-Clarification";
inline constexpr std::string_view kExploration = "Additional-Exploration";
inline constexpr std::string_view kIrrelevant = "Irrelevant-or-Redundant";
inline constexpr std::string_view kIntermediateInference = "Intermediate-Inference";
inline constexpr std::string_view kConclusion = "Conclusion";
}  // namespace category

/// The two-tier step classification system: ten universal categories plus
/// per-domain extensions. Immutable after construction.
class Taxonomy {
public:
    static const Taxonomy& instance();

    /// Universal categories followed by the given domain's extensions.
    std::vector<CategorySpec> labels_for_domain(Domain d) const;

    /// Normalizes a raw category string (case, hyphen/space variants,
    /// known aliases) to its canonical name, or nullopt if it names no
    /// category in the whole system.
    std::optional<std::string> resolve(std::string_view raw) const;

    const CategorySpec* find(std::string_view canonical_name) const;

    /// Empty on success, otherwise a description of what is wrong
    /// (unknown category, wrong domain, unlisted sub-category).
    std::optional<std::string> validate_label(const NodeLabel& label, Domain d) const;

    /// Full system as a structured document (for export and templating).
    nlohmann::json to_json() const;

    /// Category list rendered for the classification prompt.
    std::string prompt_block(Domain d) const;

    const std::vector<CategorySpec>& all() const { return categories_; }

private:
    Taxonomy();
    std::vector<CategorySpec> categories_;
};

/// Lowercase, collapse space/underscore runs to single hyphens. Shared by
/// category matching and alias resolution.
std::string normalize_category_key(std::string_view raw);

}  // namespace cotjudger
