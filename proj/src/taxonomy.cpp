#include "cotjudger/taxonomy.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <sstream>

#include "cotjudger/errors.hpp"

namespace cotjudger {

std::string to_string(Domain d) {
    switch (d) {
        case Domain::math: return "math";
        case Domain::general_reasoning: return "general_reasoning";
        case Domain::pcb: return "pcb";
        case Domain::programming: return "programming";
    }
    return "unknown";
}

std::optional<Domain> domain_from_string(std::string_view s) {
    if (s == "math") return Domain::math;
    if (s == "general_reasoning") return Domain::general_reasoning;
    if (s == "pcb") return Domain::pcb;
    if (s == "programming") return Domain::programming;
    return std::nullopt;
}

std::string normalize_category_key(std::string_view raw) {
    std::string out;
    out.reserve(raw.size());
    bool pending_sep = false;
    for (char c : raw) {
        if (c == ' ' || c == '-' || c == '_' || c == '\t') {
            if (!out.empty()) pending_sep = true;
            continue;
        }
        if (pending_sep) {
            out.push_back('-');
            pending_sep = false;
        }
        out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    return out;
}

namespace {

CategorySpec universal(std::string name, std::vector<std::string> subs, std::string def) {
    CategorySpec c;
    c.name = std::move(name);
    c.domain_specific = false;
    c.sub_categories = std::move(subs);
    c.definition = std::move(def);
    return c;
}

CategorySpec domain_cat(std::string name, Domain d, std::string def) {
    CategorySpec c;
    c.name = std::move(name);
    c.domain_specific = true;
    c.domain = d;
    c.definition = std::move(def);
    return c;
}

// Spelling variants seen in backend outputs for two category names.
const std::map<std::string, std::string>& alias_table() {
    static const std::map<std::string, std::string> aliases = {
        {"verification-or-reflection", "Reflection-or-Verification"},
        {"repetition-or-reclarification", "Repetition-or-Clarification"},
    };
    return aliases;
}

}  // namespace

Taxonomy::Taxonomy() {
    categories_ = {
        universal("Problem-Deconstruction",
                  {"Problem-Understanding", "Info-Extraction", "Info-Organization"},
                  "Analyzes prompt to extract, parse, or organize key info, constraints, and "
                  "core questions."),
        universal("Context-Setting", {"Definition", "Assumption", "Concept-Explanation"},
                  "Defines terms, states assumptions, or explains core concepts required for "
                  "reasoning."),
        universal("Strategy-Formulation", {},
                  "Outlines a high-level plan, sequence of steps, or specific method to solve "
                  "the problem."),
        universal("Intermediate-Inference", {},
                  "Makes a deductive step or logical implication based on current info to "
                  "advance the solution state."),
        universal("Reflection-or-Verification",
                  {"Verification", "Reflection", "Premise-Reassessment", "Hypothesis-Rejection"},
                  "Assesses previous steps for correctness or consistency without taking new "
                  "action."),
        universal("Correction-or-Refinement",
                  {"Correction", "Refinement", "Simplification", "Adjustment"},
                  "Actively implements a fix or adjustment based on new insights or errors in "
                  "a previous step."),
        universal("Repetition-or-Clarification", {},
                  "Reiterates previous content or adds inconsequential supplements without "
                  "changing core meaning."),
        universal("Additional-Exploration", {},
                  "Investigates alternative paths or assumptions when the current one is "
                  "viable but not definitive."),
        universal("Irrelevant-or-Redundant", {},
                  "Steps that are verbose, off-topic, or do not contribute to the solution "
                  "trajectory."),
        universal("Conclusion", {}, "Summarizes findings or provides the final answer."),

        domain_cat("Equation-Setup", Domain::math,
                   "Translates constraints into mathematical equations or expressions."),
        domain_cat("Formula-Application", Domain::math,
                   "Selects and applies specific formulas, theorems, or rules."),
        domain_cat("Simplification", Domain::math,
                   "Performs algebraic manipulation to simplify expressions."),
        domain_cat("Numerical-Computation", Domain::math,
                   "Performs arithmetic calculations to arrive at numerical values."),
        domain_cat("Proof-Step", Domain::math,
                   "Formal steps in a logical proof (lemma, inference rule, case "
                   "establishment)."),

        domain_cat("Decomposition", Domain::general_reasoning,
                   "Breaks complex tasks into manageable sub-goals."),
        domain_cat("Logical-Deduction", Domain::general_reasoning,
                   "Applies logic rules (e.g., if A then B) to derive conclusions."),
        domain_cat("Strategic-Assessment", Domain::general_reasoning,
                   "Evaluates multiple potential paths to determine the best one."),
        domain_cat("Pattern-Recognition", Domain::general_reasoning,
                   "Identifies recurring trends or sequences to guide the solution."),

        domain_cat("Principle-Application", Domain::pcb,
                   "Applies scientific principles (e.g., F=ma, Ohm's Law)."),
        domain_cat("Comparative-Analysis", Domain::pcb,
                   "Compares scenarios or models to draw insights."),
        domain_cat("Quantitative-Analysis", Domain::pcb,
                   "Performs domain-specific calculations or unit conversions."),

        domain_cat("Algorithm-Design", Domain::programming,
                   "Describes logic/plans using pseudocode or data structures."),
        domain_cat("Code-Implementation", Domain::programming,
                   "Translates logic into concrete programming language syntax."),
        domain_cat("Test-Case-Analysis", Domain::programming,
                   "Verifies logic using specific inputs/outputs or traces."),
        domain_cat("Optimization", Domain::programming,
                   "Proposes changes to improve efficiency (time/space complexity)."),
        domain_cat("Debugging", Domain::programming,
                   "Identifies errors in existing code and proposes fixes."),
    };
}

const Taxonomy& Taxonomy::instance() {
    static const Taxonomy tax;
    return tax;
}

std::vector<CategorySpec> Taxonomy::labels_for_domain(Domain d) const {
    std::vector<CategorySpec> out;
    for (const auto& c : categories_) {
        if (!c.domain_specific || c.domain == d) out.push_back(c);
    }
    return out;
}

std::optional<std::string> Taxonomy::resolve(std::string_view raw) const {
    const std::string key = normalize_category_key(raw);
    if (key.empty()) return std::nullopt;
    const auto& aliases = alias_table();
    if (auto it = aliases.find(key); it != aliases.end()) return it->second;
    for (const auto& c : categories_) {
        if (normalize_category_key(c.name) == key) return c.name;
    }
    return std::nullopt;
}

const CategorySpec* Taxonomy::find(std::string_view canonical_name) const {
    for (const auto& c : categories_) {
        if (c.name == canonical_name) return &c;
    }
    return nullptr;
}

std::optional<std::string> Taxonomy::validate_label(const NodeLabel& label, Domain d) const {
    auto canonical = resolve(label.category);
    if (!canonical) return "unknown category '" + label.category + "'";
    const CategorySpec* spec = find(*canonical);
    if (spec->domain_specific && spec->domain != d) {
        return "category '" + *canonical + "' belongs to domain " +
               to_string(*spec->domain) + ", not " + to_string(d);
    }
    if (label.sub_category) {
        const std::string want = normalize_category_key(*label.sub_category);
        const bool listed = std::any_of(
            spec->sub_categories.begin(), spec->sub_categories.end(),
            [&](const std::string& s) { return normalize_category_key(s) == want; });
        if (!listed) {
            return "sub-category '" + *label.sub_category + "' is not listed under '" +
                   *canonical + "'";
        }
    }
    return std::nullopt;
}

nlohmann::json Taxonomy::to_json() const {
    nlohmann::json cats = nlohmann::json::array();
    for (const auto& c : categories_) {
        nlohmann::json j{{"name", c.name},
                         {"tier", c.domain_specific ? "domain_specific" : "universal"},
                         {"sub_categories", c.sub_categories},
                         {"definition", c.definition}};
        if (c.domain) j["domain"] = to_string(*c.domain);
        cats.push_back(std::move(j));
    }
    return nlohmann::json{{"categories", std::move(cats)}};
}

std::string Taxonomy::prompt_block(Domain d) const {
    std::ostringstream os;
    for (const auto& c : labels_for_domain(d)) {
        os << "- " << c.name << ": " << c.definition;
        if (!c.sub_categories.empty()) {
            os << " (sub-categories: ";
            for (size_t i = 0; i < c.sub_categories.size(); ++i) {
                if (i) os << ", ";
                os << c.sub_categories[i];
            }
            os << ")";
        }
        os << "\n";
    }
    return os.str();
}

}  // namespace cotjudger
