#include "cotjudger/paths.hpp"

#include <algorithm>
#include <map>
#include <queue>

#include "cotjudger/errors.hpp"

namespace cotjudger {

std::string_view to_string(SEPStatus s) {
    switch (s) {
        case SEPStatus::found: return "found";
        case SEPStatus::no_correct_answer: return "no_correct_answer";
        case SEPStatus::not_validated: return "not_validated";
        case SEPStatus::enumeration_capped: return "enumeration_capped";
    }
    return "unknown";
}

namespace {

// Ascending (length, lexicographic) order.
bool path_less(const std::vector<int>& a, const std::vector<int>& b) {
    if (a.size() != b.size()) return a.size() < b.size();
    return a < b;
}

}  // namespace

EnumeratedPaths enumerate_paths(const CoTGraph& forward, int answer_node, size_t cap) {
    std::map<int, std::vector<int>> adjacency;
    for (const auto& e : forward.edges) {
        if (e.cls == EdgeClass::forward) adjacency[e.src].push_back(e.dst);
    }
    for (auto& [src, dsts] : adjacency) {
        (void)src;
        std::sort(dsts.begin(), dsts.end());
        dsts.erase(std::unique(dsts.begin(), dsts.end()), dsts.end());
    }

    // Best-first expansion on (length, lexicographic sequence) keys emits
    // complete paths already sorted; simple-path pruning keeps it finite
    // even when merged nodes introduce forward cycles.
    auto greater = [](const std::vector<int>& a, const std::vector<int>& b) {
        return path_less(b, a);
    };
    std::priority_queue<std::vector<int>, std::vector<std::vector<int>>, decltype(greater)>
        frontier(greater);
    frontier.push({CoTGraph::kRootId});

    EnumeratedPaths out;
    while (!frontier.empty()) {
        if (out.paths.size() >= cap) {
            out.capped = true;
            break;
        }
        std::vector<int> path = frontier.top();
        frontier.pop();
        const int tip = path.back();
        if (tip == answer_node) {
            CandidatePath found;
            found.node_ids.assign(path.begin() + 1, path.end());  // drop the root
            out.paths.push_back(std::move(found));
            continue;  // a simple path cannot revisit the answer
        }
        auto it = adjacency.find(tip);
        if (it == adjacency.end()) continue;
        for (int next : it->second) {
            if (std::find(path.begin(), path.end(), next) != path.end()) continue;
            std::vector<int> extended = path;
            extended.push_back(next);
            frontier.push(std::move(extended));
        }
    }
    return out;
}

SEPResult select_sep(const std::vector<CandidatePath>& pool, const PathValidator& validator,
                     int budget, bool capped) {
    SEPResult result;
    result.enumeration_capped = capped;
    for (const auto& path : pool) {
        if (result.validated_count >= budget) break;
        PathVerdict verdict = validator(path, result.validated_count);
        ++result.validated_count;
        result.verdicts.push_back(verdict);
        if (verdict.is_valid) {
            result.status = SEPStatus::found;
            result.path = path;
            return result;
        }
    }
    result.status = capped ? SEPStatus::enumeration_capped : SEPStatus::not_validated;
    return result;
}

std::string path_text(const CoTGraph& graph, const CandidatePath& path) {
    std::string text;
    for (int id : path.node_ids) {
        const CanonicalNode* node = graph.find_node(id);
        if (!node) {
            throw Error("path references canonical node " + std::to_string(id) +
                        " missing from the graph");
        }
        if (!text.empty()) text += "\n\n";
        text += node->text;
    }
    return text;
}

SEPResult sep_for_sample(const CoTGraph& graph, const PathValidator& validator,
                         const PathCaps& caps) {
    std::vector<int> answer_nodes;
    for (const auto& node : graph.nodes) {
        if (node.answer && node.answer->is_correct && !node.is_isolated) {
            answer_nodes.push_back(node.canonical_id);
        }
    }
    if (answer_nodes.empty()) {
        SEPResult result;
        result.status = SEPStatus::no_correct_answer;
        return result;
    }

    const CoTGraph forward = forward_subgraph(graph);
    std::vector<CandidatePath> pool;
    bool capped = false;
    for (int answer : answer_nodes) {
        EnumeratedPaths enumerated = enumerate_paths(forward, answer, caps.path_cap);
        capped = capped || enumerated.capped;
        for (auto& p : enumerated.paths) pool.push_back(std::move(p));
    }
    std::stable_sort(pool.begin(), pool.end(), [](const auto& a, const auto& b) {
        return path_less(a.node_ids, b.node_ids);
    });
    return select_sep(pool, validator, caps.validation_budget, capped);
}

nlohmann::json sep_to_json(const SEPResult& sep) {
    nlohmann::json j{{"status", std::string(to_string(sep.status))},
                     {"validated_count", sep.validated_count},
                     {"enumeration_capped", sep.enumeration_capped}};
    if (sep.path) {
        j["path"] = sep.path->node_ids;
        j["l_eff"] = sep.path->length();
    }
    nlohmann::json verdicts = nlohmann::json::array();
    for (const auto& v : sep.verdicts) {
        verdicts.push_back(nlohmann::json{{"is_valid", v.is_valid},
                                          {"extracted_logic", v.extracted_logic},
                                          {"issues", v.issues},
                                          {"reasoning", v.reasoning}});
    }
    j["verdicts"] = std::move(verdicts);
    return j;
}

SEPResult sep_from_json(const nlohmann::json& doc) {
    SEPResult sep;
    const std::string status = doc.at("status").get<std::string>();
    if (status == "found") {
        sep.status = SEPStatus::found;
    } else if (status == "no_correct_answer") {
        sep.status = SEPStatus::no_correct_answer;
    } else if (status == "not_validated") {
        sep.status = SEPStatus::not_validated;
    } else if (status == "enumeration_capped") {
        sep.status = SEPStatus::enumeration_capped;
    } else {
        throw Error("unknown SEP status '" + status + "'");
    }
    sep.validated_count = doc.value("validated_count", 0);
    sep.enumeration_capped = doc.value("enumeration_capped", false);
    if (doc.contains("path")) {
        CandidatePath p;
        p.node_ids = doc.at("path").get<std::vector<int>>();
        sep.path = std::move(p);
    }
    if (doc.contains("verdicts")) {
        for (const auto& jv : doc.at("verdicts")) {
            PathVerdict v;
            v.is_valid = jv.at("is_valid").get<bool>();
            v.extracted_logic = jv.value("extracted_logic", "");
            v.reasoning = jv.value("reasoning", "");
            if (jv.contains("issues"))
                v.issues = jv.at("issues").get<std::vector<std::string>>();
            sep.verdicts.push_back(std::move(v));
        }
    }
    return sep;
}

}  // namespace cotjudger
