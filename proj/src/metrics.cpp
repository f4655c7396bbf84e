#include "cotjudger/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "cotjudger/errors.hpp"

namespace cotjudger {

using nlohmann::json;

CoTMetrics compute_cot_metrics(const CoTGraph& graph, const SEPResult& sep,
                               const std::vector<VerifiedAnswer>& answers,
                               uint64_t token_count, int uncertainty_threshold) {
    CoTMetrics m;
    m.tokens = token_count;
    m.acc = !answers.empty() && answers.back().is_correct;
    m.v = static_cast<int>(graph.node_count());
    m.e = static_cast<int>(graph.non_root_edge_count());

    int isolated = 0;
    for (const auto& n : graph.nodes) isolated += n.is_isolated ? 1 : 0;
    m.iso = m.v > 0 ? static_cast<double>(isolated) / m.v : 0.0;
    m.avg_degree = m.v >= 2 ? static_cast<double>(m.e) / (m.v - 1) : 0.0;

    std::map<int, int> in_deg, out_deg;
    int self_loops = 0;
    int backward = 0;
    for (const auto& e : graph.edges) {
        if (e.src == CoTGraph::kRootId || e.dst == CoTGraph::kRootId) continue;
        ++out_deg[e.src];
        ++in_deg[e.dst];
        if (e.cls == EdgeClass::self_loop) ++self_loops;
        if (e.cls == EdgeClass::backward) ++backward;
    }
    for (const auto& [id, d] : in_deg) m.in_max = std::max(m.in_max, d);
    for (const auto& [id, d] : out_deg) m.out_max = std::max(m.out_max, d);
    m.self_ratio = m.e > 0 ? static_cast<double>(self_loops) / m.e : 0.0;
    m.back_ratio = m.e > 0 ? static_cast<double>(backward) / m.e : 0.0;

    if (sep.status == SEPStatus::found && sep.path) {
        m.l_eff = static_cast<int>(sep.path->length());
        m.r = m.v > 0 ? static_cast<double>(m.v - *m.l_eff) / m.v : 0.0;
    }

    m.uncertain = static_cast<int>(answers.size()) > uncertainty_threshold;
    m.redundant_positions = redundant_positions(graph, sep);
    m.transitions = classify_transitions(answers);
    return m;
}

TransitionCounts classify_transitions(const std::vector<VerifiedAnswer>& ordered_answers) {
    TransitionCounts counts;
    for (size_t i = 0; i + 1 < ordered_answers.size(); ++i) {
        const bool a = ordered_answers[i].is_correct;
        const bool b = ordered_answers[i + 1].is_correct;
        if (a && !b) ++counts.dr;
        else if (a && b) ++counts.sv;
        else if (!a && !b) ++counts.ee;
        else ++counts.eb;
    }
    return counts;
}

std::vector<double> redundant_positions(const CoTGraph& graph, const SEPResult& sep) {
    std::vector<double> out;
    if (sep.status != SEPStatus::found || !sep.path) return out;
    std::set<int> on_sep(sep.path->node_ids.begin(), sep.path->node_ids.end());
    const int v = static_cast<int>(graph.node_count());
    for (size_t i = 0; i < graph.nodes.size(); ++i) {
        if (on_sep.count(graph.nodes[i].canonical_id)) continue;
        out.push_back(v > 1 ? static_cast<double>(i) / (v - 1) : 0.0);
    }
    return out;  // order indices ascend, so positions are already sorted
}

int stratify_difficulty(double accuracy_fraction) {
    const int level = 5 - static_cast<int>(std::floor(accuracy_fraction * 5.0));
    return std::clamp(level, 1, 5);
}

std::map<std::string, int> stratify_difficulty(
    const std::map<std::string, std::vector<bool>>& per_query_results) {
    std::map<std::string, int> out;
    for (const auto& [query, results] : per_query_results) {
        if (results.empty()) {
            throw Error("difficulty stratification needs at least one model result for '" +
                        query + "'");
        }
        const double correct =
            static_cast<double>(std::count(results.begin(), results.end(), true));
        out[query] = stratify_difficulty(correct / results.size());
    }
    return out;
}

std::optional<double> harness_stability(const std::vector<double>& per_run_counts) {
    if (per_run_counts.size() < 2) {
        throw Error("stability needs at least two runs");
    }
    double mean = 0.0;
    for (double x : per_run_counts) mean += x;
    mean /= per_run_counts.size();
    if (mean == 0.0) return std::nullopt;
    double var = 0.0;
    for (double x : per_run_counts) var += (x - mean) * (x - mean);
    var /= per_run_counts.size();  // population variance
    return 1.0 - std::sqrt(var) / mean;
}

std::optional<double> harness_micro_f1(uint64_t tp, uint64_t fp, uint64_t fn) {
    const uint64_t denom = 2 * tp + fp + fn;
    if (denom == 0) return std::nullopt;
    return static_cast<double>(2 * tp) / static_cast<double>(denom);
}

std::optional<double> harness_micro_f1(const std::vector<std::string>& reference,
                                       const std::vector<std::string>& predicted) {
    if (reference.size() != predicted.size()) {
        throw Error("micro-F1 needs aligned label sequences");
    }
    if (reference.empty()) return std::nullopt;
    uint64_t tp = 0, mismatch = 0;
    for (size_t i = 0; i < reference.size(); ++i) {
        if (reference[i] == predicted[i]) ++tp;
        else ++mismatch;
    }
    return harness_micro_f1(tp, mismatch, mismatch);
}

double harness_retention(const std::vector<std::pair<bool, bool>>& verdict_pairs) {
    if (verdict_pairs.empty()) throw Error("retention needs at least one verdict pair");
    size_t agree = 0;
    for (const auto& [original, renewed] : verdict_pairs) {
        if (original == renewed) ++agree;
    }
    return static_cast<double>(agree) / verdict_pairs.size();
}

ModelReport aggregate(const std::string& model_id, const std::vector<CoTMetrics>& metrics,
                      const std::string& token_counter) {
    if (metrics.empty()) {
        ModelReport empty;
        empty.model_id = model_id;
        empty.token_counter = token_counter;
        return empty;
    }
    ModelReport rep;
    rep.model_id = model_id;
    rep.token_counter = token_counter;
    rep.n_samples = metrics.size();

    double l_eff_sum = 0.0, r_sum = 0.0;
    size_t uncertain = 0;
    double dr_rate = 0.0, sv_rate = 0.0, ee_rate = 0.0, eb_rate = 0.0;
    for (const auto& m : metrics) {
        rep.acc += m.acc ? 1.0 : 0.0;
        rep.tokens += static_cast<double>(m.tokens);
        rep.v += m.v;
        rep.iso += m.iso;
        rep.e += m.e;
        rep.avg_degree += m.avg_degree;
        rep.in_max += m.in_max;
        rep.out_max += m.out_max;
        rep.self_ratio += m.self_ratio;
        rep.back_ratio += m.back_ratio;
        if (m.l_eff) {
            ++rep.sep_found;
            l_eff_sum += *m.l_eff;
            r_sum += *m.r;
        }
        if (m.uncertain) ++uncertain;
        rep.transition_totals.dr += m.transitions.dr;
        rep.transition_totals.sv += m.transitions.sv;
        rep.transition_totals.ee += m.transitions.ee;
        rep.transition_totals.eb += m.transitions.eb;
        if (m.v > 0) {
            dr_rate += 100.0 * m.transitions.dr / m.v;
            sv_rate += 100.0 * m.transitions.sv / m.v;
            ee_rate += 100.0 * m.transitions.ee / m.v;
            eb_rate += 100.0 * m.transitions.eb / m.v;
        }
    }
    const double n = static_cast<double>(metrics.size());
    rep.acc /= n;
    rep.tokens /= n;
    rep.v /= n;
    rep.iso /= n;
    rep.e /= n;
    rep.avg_degree /= n;
    rep.in_max /= n;
    rep.out_max /= n;
    rep.self_ratio /= n;
    rep.back_ratio /= n;
    rep.uncertainty_ratio = static_cast<double>(uncertain) / n;
    rep.dr_per_100 = dr_rate / n;
    rep.sv_per_100 = sv_rate / n;
    rep.ee_per_100 = ee_rate / n;
    rep.eb_per_100 = eb_rate / n;
    if (rep.sep_found > 0) {
        rep.l_eff = l_eff_sum / static_cast<double>(rep.sep_found);
        rep.r = r_sum / static_cast<double>(rep.sep_found);
    }
    if (rep.sep_found < metrics.size()) {
        rep.exclusions["no_sep"] = metrics.size() - rep.sep_found;
    }
    return rep;
}

namespace {

std::string fmt(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", x);
    return buf;
}

}  // namespace

json ModelReport::to_json() const {
    json j{{"model_id", model_id},
           {"n_samples", n_samples},
           {"token_counter", token_counter},
           {"acc", acc},
           {"tokens", tokens},
           {"v", v},
           {"iso", iso},
           {"e", e},
           {"avg_degree", avg_degree},
           {"in_max", in_max},
           {"out_max", out_max},
           {"self_ratio", self_ratio},
           {"back_ratio", back_ratio},
           {"uncertainty_ratio", uncertainty_ratio},
           {"sep_found", sep_found},
           {"transitions",
            json{{"dr", transition_totals.dr},
                 {"sv", transition_totals.sv},
                 {"ee", transition_totals.ee},
                 {"eb", transition_totals.eb},
                 {"dr_per_100_nodes", dr_per_100},
                 {"sv_per_100_nodes", sv_per_100},
                 {"ee_per_100_nodes", ee_per_100},
                 {"eb_per_100_nodes", eb_per_100}}}};
    if (l_eff) j["l_eff"] = *l_eff;
    if (r) j["r"] = *r;
    json excl = json::object();
    for (const auto& [reason, count] : exclusions) excl[reason] = count;
    j["exclusions"] = std::move(excl);
    return j;
}

std::string ModelReport::tsv_header() {
    return "model\tacc\ttokens\tv\tiso\te\tavg_degree\tin_max\tout_max\tself\tback\tl_eff"
           "\tr\tunc";
}

std::string ModelReport::tsv_row() const {
    std::ostringstream os;
    os << model_id << "\t" << fmt(acc) << "\t" << fmt(tokens) << "\t" << fmt(v) << "\t"
       << fmt(iso) << "\t" << fmt(e) << "\t" << fmt(avg_degree) << "\t" << fmt(in_max)
       << "\t" << fmt(out_max) << "\t" << fmt(self_ratio) << "\t" << fmt(back_ratio) << "\t"
       << (l_eff ? fmt(*l_eff) : "") << "\t" << (r ? fmt(*r) : "") << "\t"
       << fmt(uncertainty_ratio);
    return os.str();
}

json metrics_to_json(const CoTMetrics& m) {
    json j{{"tokens", m.tokens},
           {"acc", m.acc},
           {"v", m.v},
           {"e", m.e},
           {"iso", m.iso},
           {"avg_degree", m.avg_degree},
           {"in_max", m.in_max},
           {"out_max", m.out_max},
           {"self_ratio", m.self_ratio},
           {"back_ratio", m.back_ratio},
           {"uncertain", m.uncertain},
           {"redundant_positions", m.redundant_positions},
           {"transitions",
            json{{"dr", m.transitions.dr},
                 {"sv", m.transitions.sv},
                 {"ee", m.transitions.ee},
                 {"eb", m.transitions.eb}}}};
    if (m.l_eff) j["l_eff"] = *m.l_eff;
    if (m.r) j["r"] = *m.r;
    return j;
}

CoTMetrics metrics_from_json(const json& doc) {
    CoTMetrics m;
    m.tokens = doc.at("tokens").get<uint64_t>();
    m.acc = doc.at("acc").get<bool>();
    m.v = doc.at("v").get<int>();
    m.e = doc.at("e").get<int>();
    m.iso = doc.at("iso").get<double>();
    m.avg_degree = doc.at("avg_degree").get<double>();
    m.in_max = doc.at("in_max").get<int>();
    m.out_max = doc.at("out_max").get<int>();
    m.self_ratio = doc.at("self_ratio").get<double>();
    m.back_ratio = doc.at("back_ratio").get<double>();
    m.uncertain = doc.at("uncertain").get<bool>();
    if (doc.contains("redundant_positions")) {
        m.redundant_positions = doc.at("redundant_positions").get<std::vector<double>>();
    }
    if (doc.contains("l_eff")) m.l_eff = doc.at("l_eff").get<int>();
    if (doc.contains("r")) m.r = doc.at("r").get<double>();
    if (doc.contains("transitions")) {
        const json& t = doc.at("transitions");
        m.transitions.dr = t.value("dr", 0);
        m.transitions.sv = t.value("sv", 0);
        m.transitions.ee = t.value("ee", 0);
        m.transitions.eb = t.value("eb", 0);
    }
    return m;
}

}  // namespace cotjudger
