#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "cotjudger/errors.hpp"
#include "cotjudger/segmenter.hpp"

namespace cotjudger {

/// The six structured annotation stages.
enum class Stage { atomize, classify, answers, repetitions, targets, path_validate };

std::string_view stage_name(Stage s);
std::optional<Stage> stage_from_name(std::string_view name);
inline constexpr int kStageCount = 6;

/// A backend payload failed validation against its stage schema.
/// Names the stage and the offending field so callers can retry with the
/// violation appended to the prompt.
class SchemaError : public Error {
public:
    SchemaError(Stage stage, std::string field, const std::string& msg)
        : Error(std::string(stage_name(stage)) + " schema: field '" + field + "': " + msg),
          stage_(stage),
          field_(std::move(field)) {}
    Stage stage() const { return stage_; }
    const std::string& field() const { return field_; }

private:
    Stage stage_;
    std::string field_;
};

/// One detected conclusive-answer step.
struct AnswerCandidate {
    int step_id = 0;
    bool contains_answer = false;
    std::string answer_text;
    std::optional<bool> is_correct;  // absent for programming (executor decides)
    std::string reasoning;
};

/// Answer-detection stage result: candidates plus the final-answer record.
struct AnswerDetection {
    std::vector<AnswerCandidate> candidates;  // contains_answer == true entries
    std::string final_answer;
    std::optional<bool> final_answer_correct;  // absent for programming
};

/// A later step judged semantically equivalent to an earlier one.
struct EquivalencePair {
    int earlier_step = 0;
    int later_step = 0;
    std::string reasoning;
};

enum class RelationKind { reflection, correction, exploration };

/// The predecessor step a relational node operates on.
struct TargetAssignment {
    int source_step = 0;
    int target_step = 0;
    RelationKind kind = RelationKind::reflection;
    std::optional<bool> is_affirm;  // present iff kind == reflection
    std::string reasoning;
};

/// Verdict of the path-validation stage.
struct PathVerdict {
    bool is_valid = false;
    std::string extracted_logic;
    std::vector<std::string> issues;
    std::string reasoning;
};

/// One entry of the classification stage response.
struct StepClassification {
    int step_id = 0;
    std::string category;  // canonical name after taxonomy resolution
    std::string reasoning;
};

struct ClassifyResponse {
    std::string reasoning;
    std::vector<StepClassification> classifications;
};

// Stage payload parsers. Each validates the payload shape and the
// type-intrinsic invariants, throwing SchemaError on the first violation.
// Context-dependent checks (id ranges, coverage, domain membership) are
// the annotator's job.
EditPlan parse_edit_plan(const nlohmann::json& payload);
ClassifyResponse parse_classify(const nlohmann::json& payload);
AnswerDetection parse_answers(const nlohmann::json& payload, bool programming);
std::vector<EquivalencePair> parse_repetitions(const nlohmann::json& payload);
TargetAssignment parse_target(const nlohmann::json& payload, int source_step);
PathVerdict parse_path_verdict(const nlohmann::json& payload);

std::string_view schema_id(Stage s, bool programming);

}  // namespace cotjudger
