#include "cotjudger/prompts.hpp"

#include <sstream>

namespace cotjudger::prompts {

namespace {

constexpr std::string_view kAtomize = R"([Instruction] The following text is a CoT (Chain of Thought), which has been automatically split into basic splits. Most splits are already atomic reasoning steps, but some may need to be merged or split to create proper atomic steps.

Splits of the CoT are as follows:
{steps}

Task: Identify splits that need special processing (merging or splitting). For splits that don't need changes, leave them as-is.

Guidelines:
1. MERGING: Combine consecutive splits that belong to the same logically independent step.
2. SPLITTING: If a single split contains multiple distinct atomic reasoning steps, split it into separate steps. Eg:
   - a split has both reasoning and a separate answer/conclusion;
   - a split involves both reasoning and subsequent twists or additional thinking..., etc.
3. ATOMIC STEPS: Each final step should represent one atomic reasoning operation or conclusion.
{domain_instructions}
Output a JSON object adhering to the following structure:
{
  "merge_operations": [ { "split_ids": [integer, ...], "summary": string } ],
  "split_operations": [ { "split_id": integer, "steps": [ { "content": string, "summary": string } ] } ]
}
)";

constexpr std::string_view kProgrammingAtomizeRule =
    "\n[Domain Specific Instructions] Code blocks/splits within ``` ``` are already atomic "
    "steps, DON'T merge or split it.\n";

constexpr std::string_view kClassify = R"([Instruction]
You are an expert in analyzing chain-of-thought reasoning patterns in {domain}.

Please classify each reasoning step according to its function in the CoT structure, referring to the categories in the classification list and the original question.

Original Question: {query}

Classification System:
{categories}

CoT Reasoning Steps to Classify:
{steps}

Requirements:
1. Provide clear reasoning for each classification decision, after analyzing the step's content or function, categories' meaning in the list and the original question.
2. Assign each step to exactly one category from the available options above that best describes its reasoning function.
3. Focus on the step's reasoning function in the CoT structure rather than just its content.
4. Every step ({step_ids_range}) should be assigned a category; do not make omissions or misplacements.

Output a JSON object adhering to the following structure:
{
  "reasoning": string,
  "classifications": [ { "step_id": integer, "category": string, "reasoning": string } ]
}
)";

constexpr std::string_view kAnswers = R"([Instruction]
Please analyze the following CoT reasoning steps (domain: {domain}) and identify steps containing final answers or conclusions to the problem:

Original Question: {query}
Ground Truth Answer: {ground_truth}
CoT Reasoning Steps:
{steps}

Task:
1. Identify steps providing a complete answer or conclusion to the problem (even if derived in advance).
2. Extract the specific answer text content.
3. Determine the correctness of the extracted answers by analyzing the requirements of the original question, ground truth, and the reasoning content.
4. Provide clear reasoning explanations.

Note:
- Intermediate/partial results are NOT considered "answers".
- Extracted answers must exactly match the target required by the original question (e.g., if asking for "2x", "x" is invalid).
- Correctness is determined by cross-referencing the Question, Ground Truth, and Step Content.

Output a JSON object adhering to the following structure:
{
  "step_answers": [ { "step_id": integer, "contains_answer": boolean, "answer_text": string, "is_correct": boolean, "reasoning": string } ],
  "final_answer": string,
  "is_final_answer_correct": boolean
}
)";

constexpr std::string_view kCodeAnswers = R"([Instruction]
Please analyze the following CoT reasoning steps (domain: programming) and identify steps containing code answers that intend to solve the problem completely:

Original Question Prompt: {query}
CoT Reasoning Steps:
{steps}

Task:
For each step containing a complete code answer to the problem:
1. Provide simple reasoning for your detection.
2. Extract the specific answer text (code implementation).

Note: Focus on identifying and extracting code implementations that solve the problem completely. Do NOT verify correctness yet.

Output a JSON object adhering to the following structure:
{
  "step_answers": [ { "step_id": integer, "contains_answer": boolean, "answer_text": string, "reasoning": string } ],
  "final_answer": string
}
)";

constexpr std::string_view kRepetitions = R"([Instruction]
You are an expert in analyzing chain-of-thought reasoning patterns. Given an original question and its reasoning steps, identify redundant relationships between steps.

Original Question: {query}

Task: Analyze the following chain-of-thought reasoning steps to identify pairs where a step is a redundant addition of a certain earlier step. A step can be marked as a redundant addition if it satisfies:
- Essentially semantically reiterating or expanding content from previous steps without adding key meaning.
- Minor modifications or inconsequential supplementations of one previous step without changing its core logic.

CoT Steps:
{steps}

Specific Requirements:
1. Look for Semantic Similarity: Don't just look for exact wording. If a step merely supplements a previous step without advancing core logic, it counts.
2. Check Logic Core: If the step produces a new intermediate result, it is likely NOT redundant.
3. Category Hint: Pay special attention to steps marked "Repetition-or-Clarification".
4. One-to-One Mapping: A step repeats or clarifies at most one specific previous step.

Output a JSON object adhering to the following structure:
{
  "contains_repetition": boolean,
  "pairs": [ { "step_id_1": integer, "step_id_2": integer, "reasoning": string } ]
}
)";

constexpr std::string_view kTarget = R"([Instruction]
You are an expert in analyzing reasoning logic within LLM Chain-of-Thought (CoT). Given an original question and its reasoning steps, analyze the logical dependencies and identify the target step for the current step.

Original Question: {query}

Task Requirement: {task_requirement}

All Steps:
{steps}

Current Step: {current_step}

Requirements:
1. Accuracy: Identify ONE predecessor step that best matches the task requirement.
2. Temporal Constraint: The target step must precede the current step.
3. Logical Relevance: The target must have logical relevance to the current step's function.
{affirm_instruction}
Output a JSON object adhering to the following structure:
{
  "target_step": integer,
  "is_affirm": boolean,
  "reasoning": string
}
)";

constexpr std::string_view kPathValidation = R"([Role & Context]
You are a Reasoning Content Analyst. Your sole function is to evaluate the validation of a reasoning path extracted algorithmically from a longer Chain of Thought.

CRITICAL INSTRUCTION: Because this path is an algorithmic concatenation, it will likely be disfluent, choppy, and grammatically awkward. You must ignore these surface issues.

Original Problem: {query}
Extracted Reasoning Path: {path}

[Task]
1. Determine Validity: A path is "Valid" if the core content of the entire path essentially leads to its final answer.
2. Extract Core Logic: Summarize the essential logical flow, focusing on the content pushing the deduction forward, while smoothing over the lack of transitions.
3. List Issues: List the issues if the path is invalid.

Output a JSON object adhering to the following structure:
{
  "is_valid": boolean,
  "extracted_logic": string,
  "issues": [string],
  "reasoning": string
}
)";

std::string_view task_requirement(RelationKind kind) {
    switch (kind) {
        case RelationKind::reflection:
            return "Identify which previous step this current step is evaluating, checking, "
                   "or verifying.";
        case RelationKind::correction:
            return "Identify which previous step contains the specific content or error "
                   "being corrected.";
        case RelationKind::exploration:
            return "Identify which previous step established the method/assumption being "
                   "shifted away from.";
    }
    return "";
}

}  // namespace

std::string render(std::string_view tmpl, const std::map<std::string, std::string>& slots) {
    std::string out(tmpl);
    for (const auto& [key, value] : slots) {
        const std::string token = "{" + key + "}";
        size_t at = 0;
        while ((at = out.find(token, at)) != std::string::npos) {
            out.replace(at, token.size(), value);
            at += value.size();
        }
    }
    return out;
}

std::string format_steps(const std::vector<Split>& splits) {
    std::ostringstream os;
    for (const auto& s : splits) os << (s.index + 1) << ": " << s.text << "\n";
    return os.str();
}

std::string format_steps(const std::vector<AtomicNode>& nodes) {
    std::ostringstream os;
    for (const auto& n : nodes) os << n.id << ": " << n.text << "\n";
    return os.str();
}

std::string format_steps(const std::vector<AtomicNode>& nodes,
                         const std::vector<NodeLabel>& labels) {
    std::ostringstream os;
    for (size_t i = 0; i < nodes.size(); ++i) {
        os << nodes[i].id << ": " << nodes[i].text;
        if (i < labels.size()) os << " (" << labels[i].category << ")";
        os << "\n";
    }
    return os.str();
}

std::string atomize_prompt(const std::vector<Split>& splits, Domain domain) {
    return render(kAtomize,
                  {{"steps", format_steps(splits)},
                   {"domain_instructions",
                    domain == Domain::programming ? std::string(kProgrammingAtomizeRule)
                                                  : std::string()}});
}

std::string classify_prompt(const std::vector<AtomicNode>& nodes, const std::string& query,
                            Domain domain, int first_step, int last_step) {
    std::vector<AtomicNode> window;
    for (const auto& n : nodes) {
        if (n.id >= first_step && n.id <= last_step) window.push_back(n);
    }
    const std::string range =
        std::to_string(first_step) + ".." + std::to_string(last_step);
    return render(kClassify, {{"domain", to_string(domain)},
                              {"query", query},
                              {"categories", Taxonomy::instance().prompt_block(domain)},
                              {"steps", format_steps(window)},
                              {"step_ids_range", range}});
}

std::string answers_prompt(const std::vector<AtomicNode>& nodes, const std::string& query,
                           const std::string& ground_truth, Domain domain) {
    return render(kAnswers, {{"domain", to_string(domain)},
                             {"query", query},
                             {"ground_truth", ground_truth},
                             {"steps", format_steps(nodes)}});
}

std::string code_answers_prompt(const std::vector<AtomicNode>& nodes,
                                const std::string& query) {
    return render(kCodeAnswers, {{"query", query}, {"steps", format_steps(nodes)}});
}

std::string repetitions_prompt(const std::vector<AtomicNode>& nodes,
                               const std::vector<NodeLabel>& labels,
                               const std::string& query) {
    return render(kRepetitions,
                  {{"query", query}, {"steps", format_steps(nodes, labels)}});
}

std::string target_prompt(const AtomicNode& node, const NodeLabel& label,
                          const std::vector<AtomicNode>& nodes,
                          const std::vector<NodeLabel>& labels, const std::string& query,
                          RelationKind kind) {
    std::string current =
        std::to_string(node.id) + ": " + node.text + " (" + label.category + ")";
    std::string affirm;
    if (kind == RelationKind::reflection) {
        affirm =
            "\n[Conditional Instruction for Reflection Steps]\n"
            "Determine whether the current step affirms or negates the target step.\n";
    }
    return render(kTarget, {{"query", query},
                            {"task_requirement", std::string(task_requirement(kind))},
                            {"steps", format_steps(nodes, labels)},
                            {"current_step", current},
                            {"affirm_instruction", affirm}});
}

std::string path_validation_prompt(const std::string& path_text, const std::string& query) {
    return render(kPathValidation, {{"query", query}, {"path", path_text}});
}

}  // namespace cotjudger::prompts
