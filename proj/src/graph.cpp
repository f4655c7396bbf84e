#include "cotjudger/graph.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "cotjudger/errors.hpp"

namespace cotjudger {

using nlohmann::json;

std::string_view to_string(EdgeClass c) {
    switch (c) {
        case EdgeClass::forward: return "forward";
        case EdgeClass::backward: return "backward";
        case EdgeClass::self_loop: return "self_loop";
    }
    return "unknown";
}

std::optional<EdgeClass> edge_class_from_string(std::string_view s) {
    if (s == "forward") return EdgeClass::forward;
    if (s == "backward") return EdgeClass::backward;
    if (s == "self_loop") return EdgeClass::self_loop;
    return std::nullopt;
}

namespace {

constexpr std::pair<EdgeTag, std::string_view> kTagNames[] = {
    {EdgeTag::basic, "basic"},
    {EdgeTag::shortcut, "shortcut"},
    {EdgeTag::correction, "correction"},
    {EdgeTag::verify_affirm, "verify_affirm"},
    {EdgeTag::verify_negate, "verify_negate"},
    {EdgeTag::exploration, "exploration"},
    {EdgeTag::repetition, "repetition"},
};

int class_rank(EdgeClass c) {
    switch (c) {
        case EdgeClass::forward: return 0;
        case EdgeClass::backward: return 1;
        case EdgeClass::self_loop: return 2;
    }
    return 3;
}

}  // namespace

std::vector<std::string> tag_names(TagMask tags) {
    std::vector<std::string> out;
    for (const auto& [tag, name] : kTagNames) {
        if (tags & tag_bit(tag)) out.emplace_back(name);
    }
    return out;
}

std::optional<EdgeTag> tag_from_string(std::string_view s) {
    for (const auto& [tag, name] : kTagNames) {
        if (name == s) return tag;
    }
    return std::nullopt;
}

const CanonicalNode* CoTGraph::find_node(int canonical_id) const {
    for (const auto& n : nodes) {
        if (n.canonical_id == canonical_id) return &n;
    }
    return nullptr;
}

size_t CoTGraph::non_root_edge_count() const {
    return static_cast<size_t>(
        std::count_if(edges.begin(), edges.end(), [](const Edge& e) {
            return e.src != kRootId && e.dst != kRootId;
        }));
}

// ---------------------------------------------------------------------------
// Node normalization

namespace {

class UnionFind {
public:
    explicit UnionFind(int n) : parent_(n + 1) {
        std::iota(parent_.begin(), parent_.end(), 0);
    }
    int find(int x) {
        while (parent_[x] != x) {
            parent_[x] = parent_[parent_[x]];
            x = parent_[x];
        }
        return x;
    }
    // Earliest id becomes the class representative.
    void unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a == b) return;
        if (a > b) std::swap(a, b);
        parent_[b] = a;
    }

private:
    std::vector<int> parent_;
};

}  // namespace

std::vector<CanonicalNode> normalize_nodes(const std::vector<AtomicNode>& nodes,
                                           const std::vector<NodeLabel>& labels,
                                           const std::vector<EquivalencePair>& equivalences,
                                           const std::vector<VerifiedAnswer>& answers) {
    const int n = static_cast<int>(nodes.size());
    if (labels.size() != nodes.size()) {
        throw StageError("normalize", "expected one label per node, got " +
                                          std::to_string(labels.size()) + " labels for " +
                                          std::to_string(n) + " nodes");
    }
    UnionFind uf(n);
    for (const auto& p : equivalences) {
        if (p.earlier_step < 1 || p.earlier_step > n || p.later_step < 1 ||
            p.later_step > n) {
            throw StageError("normalize", "equivalence pair (" +
                                              std::to_string(p.earlier_step) + "," +
                                              std::to_string(p.later_step) +
                                              ") references an unknown node id");
        }
        uf.unite(p.earlier_step, p.later_step);
    }

    std::map<int, std::vector<int>> members;  // canonical -> ascending member ids
    for (int id = 1; id <= n; ++id) members[uf.find(id)].push_back(id);

    std::vector<CanonicalNode> out;
    out.reserve(members.size());
    for (auto& [canonical, ids] : members) {
        CanonicalNode node;
        node.canonical_id = canonical;
        node.member_ids = std::move(ids);
        node.label = labels[static_cast<size_t>(canonical - 1)];
        node.text = nodes[static_cast<size_t>(canonical - 1)].text;
        node.is_isolated = node.label.category == category::kIrrelevant;
        out.push_back(std::move(node));
    }

    for (const auto& a : answers) {
        if (a.step_id < 1 || a.step_id > n) {
            throw StageError("normalize", "verified answer references unknown node id " +
                                              std::to_string(a.step_id));
        }
        const int canonical = uf.find(a.step_id);
        for (auto& node : out) {
            if (node.canonical_id == canonical) {
                // Document order; the latest verdict for the class wins.
                if (!node.answer || node.answer->step_id < a.step_id) node.answer = a;
                break;
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Edge construction

namespace {

class EdgeBuilder {
public:
    void add(int src, int dst, EdgeClass cls, TagMask tags) {
        const auto key = std::make_tuple(src, dst, cls);
        if (auto it = index_.find(key); it != index_.end()) {
            edges_[it->second].tags |= tags;
            return;
        }
        index_.emplace(key, edges_.size());
        edges_.push_back(Edge{src, dst, cls, tags});
    }

    std::vector<Edge> take() {
        std::sort(edges_.begin(), edges_.end(), [](const Edge& a, const Edge& b) {
            const int ra = class_rank(a.cls), rb = class_rank(b.cls);
            if (ra != rb) return ra < rb;
            if (a.src != b.src) return a.src < b.src;
            return a.dst < b.dst;
        });
        return std::move(edges_);
    }

private:
    std::map<std::tuple<int, int, EdgeClass>, size_t> index_;
    std::vector<Edge> edges_;
};

}  // namespace

CoTGraph build_graph(std::vector<CanonicalNode> nodes,
                     const std::vector<TargetAssignment>& targets) {
    CoTGraph graph;
    std::sort(nodes.begin(), nodes.end(), [](const auto& a, const auto& b) {
        return a.canonical_id < b.canonical_id;
    });
    graph.nodes = std::move(nodes);

    std::map<int, int> canonical_of;  // member id -> canonical id
    std::map<int, const CanonicalNode*> by_id;
    for (const auto& node : graph.nodes) {
        by_id[node.canonical_id] = &node;
        for (int m : node.member_ids) canonical_of[m] = node.canonical_id;
    }

    // Walk of non-isolated member positions in document order, mapped to
    // canonical ids.
    std::vector<int> walk;
    for (const auto& [member, canonical] : canonical_of) {
        (void)member;
        if (!by_id[canonical]->is_isolated) walk.push_back(canonical);
    }

    std::map<int, size_t> first_slot, last_slot;
    for (size_t i = 0; i < walk.size(); ++i) {
        if (!first_slot.count(walk[i])) first_slot[walk[i]] = i;
        last_slot[walk[i]] = i;
    }

    // prev: the step before X's first member; root for the first node.
    auto prev_of = [&](int canonical) -> int {
        const size_t slot = first_slot.at(canonical);
        return slot == 0 ? CoTGraph::kRootId : walk[slot - 1];
    };
    // next: the step after X's last member; nullopt at the boundary.
    auto next_of = [&](int canonical) -> std::optional<int> {
        const size_t slot = last_slot.at(canonical);
        if (slot + 1 >= walk.size()) return std::nullopt;
        return walk[slot + 1];
    };

    EdgeBuilder edges;

    if (!walk.empty()) edges.add(CoTGraph::kRootId, walk.front(), EdgeClass::forward,
                                 tag_bit(EdgeTag::basic));
    for (size_t i = 0; i + 1 < walk.size(); ++i) {
        if (walk[i] != walk[i + 1]) {
            edges.add(walk[i], walk[i + 1], EdgeClass::forward, tag_bit(EdgeTag::basic));
        }
    }

    for (const auto& node : graph.nodes) {
        if (node.member_ids.size() > 1 && !node.is_isolated) {
            edges.add(node.canonical_id, node.canonical_id, EdgeClass::self_loop,
                      tag_bit(EdgeTag::repetition));
        }
    }

    auto warn = [&](const std::string& msg) { graph.warnings.push_back(msg); };

    for (const auto& t : targets) {
        auto src_it = canonical_of.find(t.source_step);
        auto dst_it = canonical_of.find(t.target_step);
        if (src_it == canonical_of.end() || dst_it == canonical_of.end()) {
            throw StageError("graph", "target assignment (" + std::to_string(t.source_step) +
                                          " -> " + std::to_string(t.target_step) +
                                          ") references an unknown node id");
        }
        const int source = src_it->second;
        const int target = dst_it->second;
        if (by_id[source]->is_isolated || by_id[target]->is_isolated) {
            warn("target edge (" + std::to_string(t.source_step) + " -> " +
                 std::to_string(t.target_step) + ") skipped: isolated endpoint");
            continue;
        }

        TagMask kind_tag = 0;
        switch (t.kind) {
            case RelationKind::correction: kind_tag = tag_bit(EdgeTag::correction); break;
            case RelationKind::exploration: kind_tag = tag_bit(EdgeTag::exploration); break;
            case RelationKind::reflection:
                kind_tag = t.is_affirm.value_or(true) ? tag_bit(EdgeTag::verify_affirm)
                                                      : tag_bit(EdgeTag::verify_negate);
                break;
        }

        if (source != target) {
            edges.add(source, target, EdgeClass::backward, kind_tag);
        } else {
            warn("backward edge for (" + std::to_string(t.source_step) + " -> " +
                 std::to_string(t.target_step) + ") dropped: endpoints merged");
        }

        // Shortcut rules; a missing next(.) suppresses the shortcut and a
        // collapsed (x, x) shortcut is dropped.
        std::optional<std::pair<int, int>> shortcut;
        bool suppressed = false;
        switch (t.kind) {
            case RelationKind::correction:
            case RelationKind::exploration:
                shortcut = {{prev_of(target), source}};
                break;
            case RelationKind::reflection: {
                if (t.is_affirm.value_or(true)) {
                    if (auto nxt = next_of(source)) {
                        shortcut = {{prev_of(source), *nxt}};
                    } else {
                        suppressed = true;
                    }
                } else {
                    if (auto nxt = next_of(source)) {
                        shortcut = {{prev_of(target), *nxt}};
                    } else {
                        suppressed = true;
                    }
                }
                break;
            }
        }
        if (suppressed) {
            warn("shortcut for (" + std::to_string(t.source_step) + " -> " +
                 std::to_string(t.target_step) + ") suppressed: no successor at boundary");
            continue;
        }
        if (shortcut) {
            if (shortcut->first == shortcut->second) {
                warn("shortcut (" + std::to_string(shortcut->first) + " -> " +
                     std::to_string(shortcut->second) + ") dropped: endpoints merged");
            } else {
                edges.add(shortcut->first, shortcut->second, EdgeClass::forward,
                          static_cast<TagMask>(tag_bit(EdgeTag::shortcut) | kind_tag));
            }
        }
    }

    graph.edges = edges.take();
    return graph;
}

CoTGraph forward_subgraph(const CoTGraph& graph) {
    CoTGraph out;
    for (const auto& node : graph.nodes) {
        if (!node.is_isolated) out.nodes.push_back(node);
    }
    for (const auto& e : graph.edges) {
        if (e.cls == EdgeClass::forward) out.edges.push_back(e);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Export / import

json export_graph_json(const CoTGraph& graph) {
    json nodes = json::array();
    for (const auto& n : graph.nodes) {
        json label{{"category", n.label.category}};
        if (n.label.sub_category) label["sub_category"] = *n.label.sub_category;
        if (n.label.reasoning) label["reasoning"] = *n.label.reasoning;
        json jn{{"canonical_id", n.canonical_id},
                {"member_ids", n.member_ids},
                {"label", std::move(label)},
                {"isolated", n.is_isolated},
                {"text", n.text}};
        if (n.answer) {
            json ja{{"step_id", n.answer->step_id},
                    {"answer_text", n.answer->answer_text},
                    {"is_correct", n.answer->is_correct},
                    {"method", std::string(to_string(n.answer->method))}};
            if (!n.answer->detail.empty()) ja["detail"] = n.answer->detail;
            jn["answer"] = std::move(ja);
        }
        nodes.push_back(std::move(jn));
    }
    json edges = json::array();
    for (const auto& e : graph.edges) {
        edges.push_back(json{{"src", e.src},
                             {"dst", e.dst},
                             {"class", std::string(to_string(e.cls))},
                             {"tags", tag_names(e.tags)}});
    }
    return json{{"nodes", std::move(nodes)}, {"edges", std::move(edges)}};
}

CoTGraph import_graph_json(const json& doc) {
    CoTGraph graph;
    if (!doc.is_object() || !doc.contains("nodes") || !doc.contains("edges")) {
        throw Error("graph document needs 'nodes' and 'edges'");
    }
    for (const json& jn : doc.at("nodes")) {
        CanonicalNode n;
        n.canonical_id = jn.at("canonical_id").get<int>();
        n.member_ids = jn.at("member_ids").get<std::vector<int>>();
        const json& label = jn.at("label");
        n.label.category = label.at("category").get<std::string>();
        if (label.contains("sub_category"))
            n.label.sub_category = label.at("sub_category").get<std::string>();
        if (label.contains("reasoning"))
            n.label.reasoning = label.at("reasoning").get<std::string>();
        n.is_isolated = jn.at("isolated").get<bool>();
        n.text = jn.value("text", "");
        if (jn.contains("answer")) {
            const json& ja = jn.at("answer");
            VerifiedAnswer a;
            a.step_id = ja.at("step_id").get<int>();
            a.answer_text = ja.at("answer_text").get<std::string>();
            a.is_correct = ja.at("is_correct").get<bool>();
            a.method = ja.at("method").get<std::string>() == "code_execution"
                           ? VerificationMethod::code_execution
                           : VerificationMethod::backend_verdict;
            a.detail = ja.value("detail", "");
            n.answer = std::move(a);
        }
        graph.nodes.push_back(std::move(n));
    }
    for (const json& je : doc.at("edges")) {
        Edge e;
        e.src = je.at("src").get<int>();
        e.dst = je.at("dst").get<int>();
        auto cls = edge_class_from_string(je.at("class").get<std::string>());
        if (!cls) throw Error("unknown edge class in graph document");
        e.cls = *cls;
        for (const json& t : je.at("tags")) {
            auto tag = tag_from_string(t.get<std::string>());
            if (!tag) throw Error("unknown edge tag in graph document");
            e.tags |= tag_bit(*tag);
        }
        graph.edges.push_back(e);
    }
    return graph;
}

std::string export_dot(const CoTGraph& graph) {
    std::ostringstream os;
    os << "digraph cot {\n  rankdir=LR;\n";
    os << "  n0 [label=\"root\", shape=point];\n";
    for (const auto& n : graph.nodes) {
        os << "  n" << n.canonical_id << " [label=\"N" << n.canonical_id << "\\n"
           << n.label.category << "\"";
        if (n.is_isolated) os << ", style=dotted, color=gray";
        if (n.answer) {
            os << ", shape=box, peripheries=2, color="
               << (n.answer->is_correct ? "darkgreen" : "red");
        }
        os << "];\n";
    }
    for (const auto& e : graph.edges) {
        os << "  n" << e.src << " -> n" << e.dst << " [class=\"" << to_string(e.cls)
           << "\", tags=\"";
        const auto names = tag_names(e.tags);
        for (size_t i = 0; i < names.size(); ++i) {
            if (i) os << ",";
            os << names[i];
        }
        os << "\"";
        switch (e.cls) {
            case EdgeClass::forward:
                if (e.has_tag(EdgeTag::shortcut)) os << ", color=blue";
                break;
            case EdgeClass::backward: os << ", style=dashed, color=red"; break;
            case EdgeClass::self_loop: os << ", style=dotted"; break;
        }
        os << "];\n";
    }
    os << "}\n";
    return os.str();
}

std::string export_graph(const CoTGraph& graph, ExportFormat format) {
    if (format == ExportFormat::dot) return export_dot(graph);
    return export_graph_json(graph).dump(2) + "\n";
}

}  // namespace cotjudger
