#include "cotjudger/stages.hpp"

#include <set>

#include "cotjudger/taxonomy.hpp"

namespace cotjudger {

namespace {

using nlohmann::json;

const json& require_field(Stage stage, const json& j, const char* field) {
    if (!j.is_object()) throw SchemaError(stage, field, "parent is not an object");
    auto it = j.find(field);
    if (it == j.end()) throw SchemaError(stage, field, "missing");
    return *it;
}

int require_int(Stage stage, const json& j, const char* field) {
    const json& v = require_field(stage, j, field);
    if (!v.is_number_integer()) throw SchemaError(stage, field, "expected integer");
    return v.get<int>();
}

std::string require_string(Stage stage, const json& j, const char* field) {
    const json& v = require_field(stage, j, field);
    if (!v.is_string()) throw SchemaError(stage, field, "expected string");
    return v.get<std::string>();
}

bool require_bool(Stage stage, const json& j, const char* field) {
    const json& v = require_field(stage, j, field);
    if (!v.is_boolean()) throw SchemaError(stage, field, "expected boolean");
    return v.get<bool>();
}

const json& require_array(Stage stage, const json& j, const char* field) {
    const json& v = require_field(stage, j, field);
    if (!v.is_array()) throw SchemaError(stage, field, "expected array");
    return v;
}

std::string opt_string(const json& j, const char* field) {
    if (j.is_object()) {
        auto it = j.find(field);
        if (it != j.end() && it->is_string()) return it->get<std::string>();
    }
    return {};
}

}  // namespace

std::string_view stage_name(Stage s) {
    switch (s) {
        case Stage::atomize: return "atomize";
        case Stage::classify: return "classify";
        case Stage::answers: return "answers";
        case Stage::repetitions: return "repetitions";
        case Stage::targets: return "targets";
        case Stage::path_validate: return "path_validate";
    }
    return "unknown";
}

std::optional<Stage> stage_from_name(std::string_view name) {
    for (Stage s : {Stage::atomize, Stage::classify, Stage::answers, Stage::repetitions,
                    Stage::targets, Stage::path_validate}) {
        if (stage_name(s) == name) return s;
    }
    return std::nullopt;
}

std::string_view schema_id(Stage s, bool programming) {
    switch (s) {
        case Stage::atomize: return "atomize.v1";
        case Stage::classify: return "classify.v1";
        case Stage::answers: return programming ? "answers.code.v1" : "answers.verify.v1";
        case Stage::repetitions: return "repetitions.v1";
        case Stage::targets: return "target.v1";
        case Stage::path_validate: return "path_validate.v1";
    }
    return "unknown";
}

EditPlan parse_edit_plan(const json& payload) {
    constexpr Stage stage = Stage::atomize;
    EditPlan plan;
    if (!payload.is_object()) throw SchemaError(stage, "", "payload is not an object");

    if (payload.contains("merge_operations")) {
        const json& merges = require_array(stage, payload, "merge_operations");
        for (const json& m : merges) {
            EditPlan::Merge merge;
            const json& ids = require_array(stage, m, "split_ids");
            for (const json& id : ids) {
                if (!id.is_number_integer())
                    throw SchemaError(stage, "split_ids", "expected integers");
                merge.split_ids.push_back(id.get<int>());
            }
            merge.summary = opt_string(m, "summary");
            plan.merge_operations.push_back(std::move(merge));
        }
    }
    if (payload.contains("split_operations")) {
        const json& splits = require_array(stage, payload, "split_operations");
        for (const json& s : splits) {
            EditPlan::SplitOp op;
            op.split_id = require_int(stage, s, "split_id");
            const json& steps = require_array(stage, s, "steps");
            for (const json& st : steps) {
                EditPlan::SplitStep step;
                step.content = require_string(stage, st, "content");
                step.summary = opt_string(st, "summary");
                op.steps.push_back(std::move(step));
            }
            plan.split_operations.push_back(std::move(op));
        }
    }
    return plan;
}

ClassifyResponse parse_classify(const json& payload) {
    constexpr Stage stage = Stage::classify;
    ClassifyResponse out;
    out.reasoning = opt_string(payload, "reasoning");
    const json& entries = require_array(stage, payload, "classifications");
    const Taxonomy& tax = Taxonomy::instance();
    for (const json& e : entries) {
        StepClassification c;
        c.step_id = require_int(stage, e, "step_id");
        const std::string raw = require_string(stage, e, "category");
        auto canonical = tax.resolve(raw);
        if (!canonical) {
            throw SchemaError(stage, "category",
                              "'" + raw + "' is not a category of the classification system");
        }
        c.category = *canonical;
        c.reasoning = opt_string(e, "reasoning");
        out.classifications.push_back(std::move(c));
    }
    return out;
}

AnswerDetection parse_answers(const json& payload, bool programming) {
    constexpr Stage stage = Stage::answers;
    AnswerDetection out;
    const json& entries = require_array(stage, payload, "step_answers");
    for (const json& e : entries) {
        AnswerCandidate cand;
        cand.step_id = require_int(stage, e, "step_id");
        cand.contains_answer = require_bool(stage, e, "contains_answer");
        cand.answer_text = opt_string(e, "answer_text");
        cand.reasoning = opt_string(e, "reasoning");
        if (e.contains("is_correct") && !e.at("is_correct").is_null()) {
            if (programming) {
                throw SchemaError(stage, "is_correct",
                                  "programming answers carry no correctness verdict; "
                                  "verification is delegated to code execution");
            }
            if (!e.at("is_correct").is_boolean())
                throw SchemaError(stage, "is_correct", "expected boolean");
            cand.is_correct = e.at("is_correct").get<bool>();
        }
        if (!cand.contains_answer && !cand.answer_text.empty()) {
            throw SchemaError(stage, "answer_text",
                              "must be empty when contains_answer is false (step " +
                                  std::to_string(cand.step_id) + ")");
        }
        if (cand.contains_answer && !programming && !cand.is_correct.has_value()) {
            throw SchemaError(stage, "is_correct",
                              "required for answer-bearing steps (step " +
                                  std::to_string(cand.step_id) + ")");
        }
        if (cand.contains_answer) out.candidates.push_back(std::move(cand));
    }
    out.final_answer = opt_string(payload, "final_answer");
    if (!programming) {
        if (payload.contains("is_final_answer_correct")) {
            const json& v = payload.at("is_final_answer_correct");
            if (!v.is_boolean())
                throw SchemaError(stage, "is_final_answer_correct", "expected boolean");
            out.final_answer_correct = v.get<bool>();
        }
    } else if (payload.contains("is_final_answer_correct")) {
        throw SchemaError(stage, "is_final_answer_correct",
                          "not part of the programming answer schema");
    }
    return out;
}

std::vector<EquivalencePair> parse_repetitions(const json& payload) {
    constexpr Stage stage = Stage::repetitions;
    std::vector<EquivalencePair> out;
    const json& pairs = require_array(stage, payload, "pairs");
    std::set<int> later_seen;
    for (const json& p : pairs) {
        EquivalencePair pair;
        pair.earlier_step = require_int(stage, p, "step_id_1");
        pair.later_step = require_int(stage, p, "step_id_2");
        pair.reasoning = opt_string(p, "reasoning");
        if (pair.earlier_step >= pair.later_step) {
            throw SchemaError(stage, "step_id_1",
                              "earlier step " + std::to_string(pair.earlier_step) +
                                  " must precede later step " +
                                  std::to_string(pair.later_step));
        }
        if (!later_seen.insert(pair.later_step).second) {
            throw SchemaError(stage, "step_id_2",
                              "step " + std::to_string(pair.later_step) +
                                  " repeats more than one previous step");
        }
        out.push_back(std::move(pair));
    }
    return out;
}

TargetAssignment parse_target(const json& payload, int source_step) {
    constexpr Stage stage = Stage::targets;
    TargetAssignment t;
    t.source_step = source_step;
    t.target_step = require_int(stage, payload, "target_step");
    t.reasoning = opt_string(payload, "reasoning");
    if (payload.contains("is_affirm") && !payload.at("is_affirm").is_null()) {
        const json& v = payload.at("is_affirm");
        if (!v.is_boolean()) throw SchemaError(stage, "is_affirm", "expected boolean");
        t.is_affirm = v.get<bool>();
    }
    if (t.target_step >= source_step) {
        throw SchemaError(stage, "target_step",
                          "target " + std::to_string(t.target_step) +
                              " must precede source step " + std::to_string(source_step));
    }
    return t;
}

PathVerdict parse_path_verdict(const json& payload) {
    constexpr Stage stage = Stage::path_validate;
    PathVerdict v;
    v.is_valid = require_bool(stage, payload, "is_valid");
    v.extracted_logic = opt_string(payload, "extracted_logic");
    v.reasoning = opt_string(payload, "reasoning");
    if (payload.contains("issues")) {
        const json& issues = require_array(stage, payload, "issues");
        for (const json& i : issues) {
            if (!i.is_string()) throw SchemaError(stage, "issues", "expected strings");
            v.issues.push_back(i.get<std::string>());
        }
    }
    return v;
}

}  // namespace cotjudger
