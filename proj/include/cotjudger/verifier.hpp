#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "cotjudger/corpus.hpp"
#include "cotjudger/stages.hpp"

namespace cotjudger {

struct ExecutionLimits {
    double wall_seconds = 10.0;
    uint64_t memory_bytes = 512ull * 1024 * 1024;
};

/// Outcome of one sandboxed test-harness run.
struct ExecutionResult {
    bool passed = false;
    std::string stdout_text;
    std::string stderr_text;
    int exit_status = -1;  // 128+signal when killed
    bool timed_out = false;
};

enum class VerificationMethod { backend_verdict, code_execution };

std::string_view to_string(VerificationMethod m);

/// Final correctness for one answer candidate.
struct VerifiedAnswer {
    int step_id = 0;
    std::string answer_text;
    bool is_correct = false;
    VerificationMethod method = VerificationMethod::backend_verdict;
    std::string detail;  // failure reason / stderr tail
};

struct VerifierOptions {
    std::string interpreter = "python3";
    ExecutionLimits limits;
    /// Optional command prefix wrapping the interpreter invocation, for
    /// delegating isolation to an external sandbox (split on spaces).
    std::string sandbox_prefix;
};

/// Establishes answer correctness: backend verdict pass-through for
/// math/PCB/general-reasoning, sandboxed execution for programming.
class Verifier {
public:
    explicit Verifier(VerifierOptions options = {}) : options_(std::move(options)) {}

    VerifiedAnswer verify_answer(const AnswerCandidate& candidate,
                                 const CoTSample& sample) const;

    /// Appends the dataset's test payload to the extracted code and runs
    /// the program in a child process: own session, temp working dir,
    /// address-space and CPU limits, wall-clock kill. Throws
    /// EnvironmentError when the interpreter cannot be executed at all.
    ExecutionResult execute_code_tests(const std::string& code, const std::string& tests,
                                       const ExecutionLimits& limits) const;

    /// First fenced block (language line stripped), or the trimmed text.
    static std::string extract_code(const std::string& answer_text);

    const VerifierOptions& options() const { return options_; }

private:
    VerifierOptions options_;
};

}  // namespace cotjudger
