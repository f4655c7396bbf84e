#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cotjudger {

/// One coarse fragment of the masked CoT text.
struct Split {
    int index = 0;     // 0-based position in the split sequence
    std::string text;  // verbatim fragment (placeholders still masked)
};

/// Placeholder -> original fenced code block bytes.
struct MaskTable {
    std::map<std::string, std::string> entries;
    bool unterminated_fence = false;  // trailing fence had no closer

    bool empty() const { return entries.empty(); }
};

/// Index-level structural edits produced by the atomization stage.
/// split ids are 1-based, matching the "split ID: content" rendering the
/// backend sees (split id i refers to Split with index i-1).
struct EditPlan {
    struct Merge {
        std::vector<int> split_ids;  // ascending, consecutive
        std::string summary;
    };
    struct SplitStep {
        std::string content;
        std::string summary;
    };
    struct SplitOp {
        int split_id = 0;
        std::vector<SplitStep> steps;  // at least two
    };

    std::vector<Merge> merge_operations;
    std::vector<SplitOp> split_operations;

    bool empty() const { return merge_operations.empty() && split_operations.empty(); }
};

/// One atomic reasoning step after edits are applied and code unmasked.
struct AtomicNode {
    int id = 0;  // contiguous 1..n in document order
    std::string text;
    std::optional<std::string> summary;
};

enum class Delimiter { double_newline, single_newline, none };

std::string_view delimiter_text(Delimiter d);

/// Replaces every triple-backtick fenced region with a unique placeholder
/// absent from the input. An unterminated fence masks the rest of the text
/// and sets MaskTable::unterminated_fence.
std::pair<std::string, MaskTable> mask_code_blocks(std::string_view text);

/// Restores placeholders; unmask(mask(text)) == text byte for byte.
std::string unmask(std::string_view masked, const MaskTable& table);

/// Picks the more frequent delimiter: non-overlapping "\n\n" occurrences
/// are counted first, remaining "\n" count as single. Ties favor the
/// double newline. Returns Delimiter::none when the text has no newline.
Delimiter detect_delimiter(std::string_view masked_text);

/// Splits on the delimiter, drops fragments that are blank after trimming,
/// keeps surviving fragments verbatim. Delimiter::none yields one split
/// (or none for blank input).
std::vector<Split> heuristic_segment(std::string_view masked_text, Delimiter delim);

/// Applies merges then splits against the original split ids, renumbers
/// 1..n, and unmasks placeholders in the final texts. Merged texts are
/// joined with the detected delimiter. Throws StageError on plans that
/// violate the EditPlan invariants (out-of-range id, overlapping or
/// non-consecutive merge groups, id in both a merge and a split, ...).
std::vector<AtomicNode> apply_edits(const std::vector<Split>& splits, const EditPlan& plan,
                                    const MaskTable& table, Delimiter delim);

/// Returns a description of the first invariant the plan violates against
/// this split count, or nullopt when the plan is applicable.
std::optional<std::string> check_edit_plan(const EditPlan& plan, size_t split_count);

}  // namespace cotjudger
