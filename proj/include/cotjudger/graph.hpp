#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "cotjudger/segmenter.hpp"
#include "cotjudger/stages.hpp"
#include "cotjudger/taxonomy.hpp"
#include "cotjudger/verifier.hpp"

namespace cotjudger {

enum class EdgeClass { forward, backward, self_loop };

std::string_view to_string(EdgeClass c);
std::optional<EdgeClass> edge_class_from_string(std::string_view s);

/// Edge provenance tags; an edge accumulates tags when several rules
/// produce the same (src, dst, class) triple.
enum class EdgeTag : uint8_t {
    basic = 1 << 0,
    shortcut = 1 << 1,
    correction = 1 << 2,
    verify_affirm = 1 << 3,
    verify_negate = 1 << 4,
    exploration = 1 << 5,
    repetition = 1 << 6,
};

using TagMask = uint8_t;

inline TagMask tag_bit(EdgeTag t) { return static_cast<TagMask>(t); }
std::vector<std::string> tag_names(TagMask tags);
std::optional<EdgeTag> tag_from_string(std::string_view s);

struct Edge {
    int src = 0;
    int dst = 0;
    EdgeClass cls = EdgeClass::forward;
    TagMask tags = 0;

    bool has_tag(EdgeTag t) const { return tags & tag_bit(t); }
};

/// Representative of a semantic-equivalence class of steps.
struct CanonicalNode {
    int canonical_id = 0;          // earliest member id
    std::vector<int> member_ids;   // ascending
    NodeLabel label;               // the canonical member's label
    std::string text;              // the canonical member's text
    bool is_isolated = false;      // label.category == Irrelevant-or-Redundant
    std::optional<VerifiedAnswer> answer;
};

/// Typed directed dependency graph of one CoT, rooted at a virtual head
/// node (id 0) that never appears in `nodes`.
struct CoTGraph {
    static constexpr int kRootId = 0;

    std::vector<CanonicalNode> nodes;  // ascending canonical id
    std::vector<Edge> edges;           // canonical order: (class, src, dst)
    std::vector<std::string> warnings;

    const CanonicalNode* find_node(int canonical_id) const;
    /// Count of nodes excluding the virtual root, including isolated ones.
    size_t node_count() const { return nodes.size(); }
    /// Deduped edges excluding every root-incident edge.
    size_t non_root_edge_count() const;
};

/// Union-find collapse of equivalence pairs onto earliest-member ids, with
/// isolation flags and verified answers attached. When several answers land
/// on one class the latest (document order) wins.
std::vector<CanonicalNode> normalize_nodes(const std::vector<AtomicNode>& nodes,
                                           const std::vector<NodeLabel>& labels,
                                           const std::vector<EquivalencePair>& equivalences,
                                           const std::vector<VerifiedAnswer>& answers);

/// Applies the edge construction rules:
///  - basic forward edges along consecutive non-isolated steps (mapped to
///    canonical ids, adjacent duplicates collapsed), root first;
///  - a repetition self-loop on every multi-member node;
///  - per relational target: a backward edge plus the rule's shortcut,
///    where prev(X) is the canonical step before X's first member and
///    next(X) the one after X's last member in the non-isolated walk. A
///    shortcut whose next(.) does not exist is suppressed; edges whose
///    endpoints coincide after merging are dropped.
/// Targets are given in original step ids and mapped through the classes.
CoTGraph build_graph(std::vector<CanonicalNode> nodes,
                     const std::vector<TargetAssignment>& targets);

/// Restriction to forward edges (basic + shortcut) over the non-isolated
/// nodes and the root.
CoTGraph forward_subgraph(const CoTGraph& graph);

enum class ExportFormat { structured, dot };

nlohmann::json export_graph_json(const CoTGraph& graph);
CoTGraph import_graph_json(const nlohmann::json& doc);
std::string export_dot(const CoTGraph& graph);
std::string export_graph(const CoTGraph& graph, ExportFormat format);

}  // namespace cotjudger
