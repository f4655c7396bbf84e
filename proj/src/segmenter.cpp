#include "cotjudger/segmenter.hpp"

#include <algorithm>
#include <sstream>

#include "cotjudger/errors.hpp"

namespace cotjudger {

namespace {

constexpr std::string_view kFence = "```";

bool is_blank(std::string_view s) {
    return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

std::string make_placeholder(std::string_view original, int index, int salt) {
    std::string p = "[[CODE_BLOCK_" + std::to_string(index);
    if (salt > 0) p += "_" + std::to_string(salt);
    p += "]]";
    if (original.find(p) != std::string_view::npos) {
        return make_placeholder(original, index, salt + 1);
    }
    return p;
}

}  // namespace

std::string_view delimiter_text(Delimiter d) {
    switch (d) {
        case Delimiter::double_newline: return "\n\n";
        case Delimiter::single_newline: return "\n";
        case Delimiter::none: return "\n\n";  // join fallback for degenerate inputs
    }
    return "\n\n";
}

std::pair<std::string, MaskTable> mask_code_blocks(std::string_view text) {
    std::string masked;
    MaskTable table;
    size_t pos = 0;
    int block_index = 0;
    while (pos < text.size()) {
        const size_t open = text.find(kFence, pos);
        if (open == std::string_view::npos) {
            masked.append(text.substr(pos));
            break;
        }
        masked.append(text.substr(pos, open - pos));
        size_t close = text.find(kFence, open + kFence.size());
        size_t block_end;
        if (close == std::string_view::npos) {
            block_end = text.size();
            table.unterminated_fence = true;
        } else {
            block_end = close + kFence.size();
        }
        const std::string placeholder = make_placeholder(text, block_index++, 0);
        table.entries[placeholder] = std::string(text.substr(open, block_end - open));
        masked.append(placeholder);
        pos = block_end;
    }
    return {std::move(masked), std::move(table)};
}

std::string unmask(std::string_view masked, const MaskTable& table) {
    std::string out(masked);
    for (const auto& [placeholder, original] : table.entries) {
        size_t at = 0;
        while ((at = out.find(placeholder, at)) != std::string::npos) {
            out.replace(at, placeholder.size(), original);
            at += original.size();
        }
    }
    return out;
}

Delimiter detect_delimiter(std::string_view text) {
    size_t doubles = 0;
    size_t singles = 0;
    size_t i = 0;
    while (i < text.size()) {
        if (text[i] != '\n') {
            ++i;
            continue;
        }
        if (i + 1 < text.size() && text[i + 1] == '\n') {
            ++doubles;
            i += 2;
        } else {
            ++singles;
            ++i;
        }
    }
    if (doubles == 0 && singles == 0) return Delimiter::none;
    return doubles >= singles ? Delimiter::double_newline : Delimiter::single_newline;
}

std::vector<Split> heuristic_segment(std::string_view text, Delimiter delim) {
    std::vector<Split> splits;
    auto push = [&](std::string_view fragment) {
        if (is_blank(fragment)) return;
        splits.push_back(Split{static_cast<int>(splits.size()), std::string(fragment)});
    };
    if (delim == Delimiter::none) {
        push(text);
        return splits;
    }
    const std::string_view sep = delimiter_text(delim);
    size_t pos = 0;
    while (pos <= text.size()) {
        const size_t next = text.find(sep, pos);
        if (next == std::string_view::npos) {
            push(text.substr(pos));
            break;
        }
        push(text.substr(pos, next - pos));
        pos = next + sep.size();
    }
    return splits;
}

std::optional<std::string> check_edit_plan(const EditPlan& plan, size_t split_count) {
    const int n = static_cast<int>(split_count);
    auto describe_merge = [](const EditPlan::Merge& m) {
        std::ostringstream os;
        os << "merge{split_ids=[";
        for (size_t i = 0; i < m.split_ids.size(); ++i) {
            if (i) os << ",";
            os << m.split_ids[i];
        }
        os << "]}";
        return os.str();
    };

    std::vector<bool> in_merge(split_count + 1, false);
    for (const auto& m : plan.merge_operations) {
        if (m.split_ids.size() < 2) {
            return describe_merge(m) + ": merge group needs at least two splits";
        }
        for (size_t i = 0; i < m.split_ids.size(); ++i) {
            const int id = m.split_ids[i];
            if (id < 1 || id > n) {
                return describe_merge(m) + ": split id " + std::to_string(id) +
                       " out of range 1.." + std::to_string(n);
            }
            if (i > 0 && id != m.split_ids[i - 1] + 1) {
                return describe_merge(m) + ": ids must be consecutive";
            }
            if (in_merge[id]) {
                return describe_merge(m) + ": split id " + std::to_string(id) +
                       " appears in another merge group";
            }
            in_merge[id] = true;
        }
    }

    std::vector<bool> in_split(split_count + 1, false);
    for (const auto& s : plan.split_operations) {
        if (s.split_id < 1 || s.split_id > n) {
            return "split_operation{split_id=" + std::to_string(s.split_id) +
                   "}: id out of range 1.." + std::to_string(n);
        }
        if (s.steps.size() < 2) {
            return "split_operation{split_id=" + std::to_string(s.split_id) +
                   "}: needs at least two steps";
        }
        if (in_merge[s.split_id]) {
            return "split id " + std::to_string(s.split_id) +
                   " appears in both a merge and a split operation";
        }
        if (in_split[s.split_id]) {
            return "split id " + std::to_string(s.split_id) +
                   " appears in two split operations";
        }
        in_split[s.split_id] = true;
    }
    return std::nullopt;
}

std::vector<AtomicNode> apply_edits(const std::vector<Split>& splits, const EditPlan& plan,
                                    const MaskTable& table, Delimiter delim) {
    if (auto err = check_edit_plan(plan, splits.size())) {
        throw StageError("atomize", "edit plan rejected: " + *err);
    }

    // Index the plan by starting split id for a single left-to-right pass.
    std::map<int, const EditPlan::Merge*> merge_at;
    for (const auto& m : plan.merge_operations) merge_at[m.split_ids.front()] = &m;
    std::map<int, const EditPlan::SplitOp*> split_at;
    for (const auto& s : plan.split_operations) split_at[s.split_id] = &s;

    const std::string_view join = delimiter_text(delim);
    std::vector<AtomicNode> nodes;
    int id = 1;
    for (size_t i = 0; i < splits.size();) {
        const int split_id = static_cast<int>(i) + 1;
        if (auto it = merge_at.find(split_id); it != merge_at.end()) {
            const EditPlan::Merge& m = *it->second;
            std::string text;
            for (size_t k = 0; k < m.split_ids.size(); ++k) {
                if (k) text.append(join);
                text.append(splits[static_cast<size_t>(m.split_ids[k] - 1)].text);
            }
            AtomicNode node{id++, std::move(text), std::nullopt};
            if (!m.summary.empty()) node.summary = m.summary;
            nodes.push_back(std::move(node));
            i += m.split_ids.size();
            continue;
        }
        if (auto it = split_at.find(split_id); it != split_at.end()) {
            for (const auto& step : it->second->steps) {
                AtomicNode node{id++, step.content, std::nullopt};
                if (!step.summary.empty()) node.summary = step.summary;
                nodes.push_back(std::move(node));
            }
            ++i;
            continue;
        }
        nodes.push_back(AtomicNode{id++, splits[i].text, std::nullopt});
        ++i;
    }

    if (!table.empty()) {
        for (auto& node : nodes) node.text = unmask(node.text, table);
    }
    return nodes;
}

}  // namespace cotjudger
