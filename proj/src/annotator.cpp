#include "cotjudger/annotator.hpp"

#include <condition_variable>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "httplib.h"

#include "cotjudger/errors.hpp"
#include "cotjudger/prompts.hpp"

namespace cotjudger {

using nlohmann::json;

uint64_t fnv1a64(std::string_view bytes) {
    uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

// ---------------------------------------------------------------------------
// MockBackend

MockBackend::MockBackend(std::map<std::string, AnnotationBundle> bundles)
    : bundles_(std::move(bundles)) {}

std::string MockBackend::complete(const BackendRequest& request) {
    std::lock_guard lock(mu_);
    auto it = bundles_.find(request.sample_id);
    if (it == bundles_.end()) {
        throw BackendError("mock backend has no bundle for sample '" + request.sample_id +
                           "'");
    }
    const json& scripted = it->second.stage_payload(request.stage);

    const json* value = &scripted;
    if (request.stage == Stage::targets) {
        if (!scripted.contains(request.tag)) {
            throw BackendError("mock bundle '" + request.sample_id +
                               "' scripts no target response for step " + request.tag);
        }
        value = &scripted.at(request.tag);
    }

    if (value->is_array()) {
        const std::string key = request.sample_id + "/" +
                                std::string(stage_name(request.stage)) + "/" + request.tag;
        const size_t idx = cursor_[key]++;
        if (idx >= value->size()) {
            throw BackendError("mock bundle '" + request.sample_id +
                               "' response script for stage '" +
                               std::string(stage_name(request.stage)) + "' exhausted after " +
                               std::to_string(value->size()) + " calls");
        }
        return value->at(idx).dump();
    }
    return value->dump();
}

// ---------------------------------------------------------------------------
// HttpBackend

std::atomic<uint64_t> HttpBackend::network_calls_{0};

HttpBackend::HttpBackend(HttpBackendConfig config) : config_(std::move(config)) {
    const std::string& url = config_.endpoint;
    const size_t scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw ConfigError("backend endpoint must include a scheme: " + url);
    }
    const size_t path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) {
        base_ = url;
        path_prefix_.clear();
    } else {
        base_ = url.substr(0, path_start);
        path_prefix_ = url.substr(path_start);
        while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
    }
}

void HttpBackend::preflight() {
    httplib::Client client(base_);
    client.set_connection_timeout(5, 0);
    auto res = client.Get(path_prefix_.empty() ? "/" : path_prefix_);
    if (!res) {
        throw BackendError("backend unreachable at " + base_ + ": " +
                           httplib::to_string(res.error()));
    }
}

std::string HttpBackend::complete(const BackendRequest& request) {
    json body{{"model", config_.model},
              {"temperature", config_.temperature},
              {"messages", json::array({json{{"role", "user"}, {"content", request.prompt}}})},
              {"response_format", json{{"type", "json_object"}}}};

    httplib::Client client(base_);
    client.set_read_timeout(config_.timeout_seconds, 0);
    httplib::Headers headers;
    if (const char* key = std::getenv(config_.api_key_env.c_str()); key && *key) {
        headers.emplace("Authorization", std::string("Bearer ") + key);
    }

    network_calls_.fetch_add(1);
    auto res = client.Post(path_prefix_ + "/chat/completions", headers, body.dump(),
                           "application/json");
    if (!res) {
        throw BackendError("backend transport failure: " + httplib::to_string(res.error()));
    }
    if (res->status != 200) {
        throw BackendError("backend returned HTTP " + std::to_string(res->status) + ": " +
                           res->body.substr(0, 512));
    }
    json reply = json::parse(res->body, nullptr, /*allow_exceptions=*/false);
    if (reply.is_discarded() || !reply.contains("choices") || reply["choices"].empty()) {
        throw BackendError("backend returned an unexpected completion document");
    }
    const json& message = reply["choices"][0]["message"];
    if (!message.contains("content") || !message["content"].is_string()) {
        throw BackendError("backend completion has no text content");
    }
    return message["content"].get<std::string>();
}

// ---------------------------------------------------------------------------
// ResponseCache

ResponseCache::ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
}

std::filesystem::path ResponseCache::entry_path(const BackendRequest& request) const {
    std::string material(stage_name(request.stage));
    material += '\x1f';
    material += request.schema_id;
    material += '\x1f';
    material += request.prompt;
    std::ostringstream name;
    name << std::hex << fnv1a64(material) << "-" << std::hex
         << fnv1a64(std::to_string(material.size()) + material);
    return dir_ / (name.str() + ".json");
}

std::optional<std::string> ResponseCache::get(const BackendRequest& request) const {
    std::shared_lock lock(mu_);
    const auto path = entry_path(request);
    std::ifstream in(path);
    if (!in) return std::nullopt;
    json entry = json::parse(in, nullptr, /*allow_exceptions=*/false);
    if (entry.is_discarded() || !entry.is_object()) return std::nullopt;
    if (entry.value("stage", "") != stage_name(request.stage) ||
        entry.value("schema_id", "") != request.schema_id ||
        entry.value("prompt", "") != request.prompt) {
        return std::nullopt;  // key collision; treat as miss
    }
    if (!entry.contains("response") || !entry["response"].is_string()) return std::nullopt;
    return entry["response"].get<std::string>();
}

void ResponseCache::put(const BackendRequest& request, const std::string& response) {
    std::unique_lock lock(mu_);
    const auto path = entry_path(request);
    json entry{{"stage", stage_name(request.stage)},
               {"schema_id", request.schema_id},
               {"prompt", request.prompt},
               {"response", response}};
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp);
        out << entry.dump();
    }
    std::filesystem::rename(tmp, path);
}

// ---------------------------------------------------------------------------
// RateLimiter

RateLimiter::RateLimiter(double per_second, double burst)
    : per_second_(per_second),
      burst_(burst > 0 ? burst : 1.0),
      tokens_(burst_),
      last_(std::chrono::steady_clock::now()) {}

void RateLimiter::acquire() {
    if (per_second_ <= 0) return;
    std::unique_lock lock(mu_);
    for (;;) {
        const auto now = std::chrono::steady_clock::now();
        tokens_ = std::min(burst_,
                           tokens_ + per_second_ * std::chrono::duration<double>(now - last_)
                                                       .count());
        last_ = now;
        if (tokens_ >= 1.0) {
            tokens_ -= 1.0;
            return;
        }
        const double wait_s = (1.0 - tokens_) / per_second_;
        lock.unlock();
        std::this_thread::sleep_for(std::chrono::duration<double>(wait_s));
        lock.lock();
    }
}

// ---------------------------------------------------------------------------
// Annotator

/// Bounds the number of concurrently in-flight backend requests.
class Gate {
public:
    explicit Gate(int limit) : limit_(limit > 0 ? limit : 1) {}

    void enter() {
        std::unique_lock lock(mu_);
        cv_.wait(lock, [&] { return active_ < limit_; });
        ++active_;
    }
    void leave() {
        {
            std::lock_guard lock(mu_);
            --active_;
        }
        cv_.notify_one();
    }

private:
    int limit_;
    int active_ = 0;
    std::mutex mu_;
    std::condition_variable cv_;
};

Annotator::~Annotator() = default;

Annotator::Annotator(AnnotatorOptions options)
    : options_(std::move(options)),
      limiter_(options_.rate_per_second, options_.rate_per_second),
      gate_(std::make_unique<Gate>(options_.max_in_flight)) {
    if (!options_.backend) throw ConfigError("annotator needs a backend");
    if (options_.cache_dir) cache_.emplace(*options_.cache_dir);
}

std::string Annotator::call_backend(const BackendRequest& request) {
    if (cache_) {
        if (auto hit = cache_->get(request)) {
            cache_hits_.fetch_add(1);
            return *hit;
        }
    }
    limiter_.acquire();
    gate_->enter();
    std::string response;
    try {
        response = options_.backend->complete(request);
    } catch (...) {
        gate_->leave();
        throw;
    }
    gate_->leave();
    backend_calls_.fetch_add(1);
    if (cache_) cache_->put(request, response);
    return response;
}

template <typename Parse>
auto Annotator::with_retry(Stage stage, const std::string& sample_id, const std::string& tag,
                           const std::string& prompt, bool programming, Parse parse) {
    std::string current_prompt = prompt;
    std::string violation;
    for (int attempt = 0; attempt <= options_.schema_retries; ++attempt) {
        BackendRequest request{stage, current_prompt,
                               std::string(schema_id(stage, programming)), sample_id, tag};
        const std::string raw = call_backend(request);
        try {
            json payload = json::parse(raw, nullptr, /*allow_exceptions=*/false);
            if (payload.is_discarded()) {
                throw SchemaError(stage, "", "response is not valid JSON");
            }
            return parse(payload);
        } catch (const SchemaError& e) {
            violation = e.what();
        } catch (const StageError& e) {
            violation = e.what();
        }
        current_prompt = prompt +
                         "\n\n[Your previous response was rejected: " + violation +
                         ". Return a corrected JSON response.]";
    }
    throw StageError(std::string(stage_name(stage)),
                     "sample '" + sample_id + "': backend response still invalid after " +
                         std::to_string(options_.schema_retries) + " retry: " + violation);
}

EditPlan Annotator::atomize(const std::vector<Split>& splits, Domain domain,
                            const std::string& sample_id, const MaskTable& mask) {
    if (splits.empty()) {
        throw StageError("atomize", "sample '" + sample_id + "': no splits to atomize");
    }
    const std::string prompt = prompts::atomize_prompt(splits, domain);

    auto touches_code_placeholder = [&](int split_id) {
        const std::string& text = splits[static_cast<size_t>(split_id - 1)].text;
        for (const auto& [placeholder, _] : mask.entries) {
            if (text.find(placeholder) != std::string::npos) return true;
        }
        return false;
    };

    return with_retry(
        Stage::atomize, sample_id, "", prompt, domain == Domain::programming,
        [&](const json& payload) {
            EditPlan plan = parse_edit_plan(payload);
            if (auto err = check_edit_plan(plan, splits.size())) {
                throw StageError("atomize", "edit plan rejected: " + *err);
            }
            if (domain == Domain::programming && !mask.empty()) {
                for (const auto& m : plan.merge_operations) {
                    for (int id : m.split_ids) {
                        if (touches_code_placeholder(id)) {
                            throw StageError("atomize",
                                             "merge touches code block split " +
                                                 std::to_string(id));
                        }
                    }
                }
                for (const auto& s : plan.split_operations) {
                    if (touches_code_placeholder(s.split_id)) {
                        throw StageError("atomize", "split touches code block split " +
                                                        std::to_string(s.split_id));
                    }
                }
            }
            return plan;
        });
}

std::vector<NodeLabel> Annotator::classify(const std::vector<AtomicNode>& nodes,
                                           const std::string& query, Domain domain,
                                           const std::string& sample_id) {
    if (nodes.empty()) {
        throw StageError("classify", "sample '" + sample_id + "': no nodes to classify");
    }
    const Taxonomy& tax = Taxonomy::instance();
    const int n = static_cast<int>(nodes.size());
    const int chunk = std::max(1, options_.classify_chunk_size);

    std::vector<NodeLabel> labels(nodes.size());
    for (int lo = 1; lo <= n; lo += chunk) {
        const int hi = std::min(n, lo + chunk - 1);
        const std::string prompt = prompts::classify_prompt(nodes, query, domain, lo, hi);
        const std::string tag = std::to_string(lo) + "-" + std::to_string(hi);

        auto chunk_labels = with_retry(
            Stage::classify, sample_id, tag, prompt, domain == Domain::programming,
            [&](const json& payload) {
                ClassifyResponse resp = parse_classify(payload);
                std::set<int> seen;
                for (const auto& c : resp.classifications) {
                    if (c.step_id < lo || c.step_id > hi) {
                        throw StageError("classify", "step " + std::to_string(c.step_id) +
                                                         " outside requested range " + tag);
                    }
                    if (!seen.insert(c.step_id).second) {
                        throw StageError("classify", "step " + std::to_string(c.step_id) +
                                                         " classified more than once");
                    }
                    NodeLabel label{c.category, std::nullopt,
                                    c.reasoning.empty()
                                        ? std::nullopt
                                        : std::optional<std::string>(c.reasoning)};
                    if (auto err = tax.validate_label(label, domain)) {
                        throw StageError("classify", *err);
                    }
                }
                for (int id = lo; id <= hi; ++id) {
                    if (!seen.count(id)) {
                        throw StageError("classify",
                                         "no category assigned to step " + std::to_string(id));
                    }
                }
                return resp.classifications;
            });

        for (const auto& c : chunk_labels) {
            labels[static_cast<size_t>(c.step_id - 1)] =
                NodeLabel{c.category, std::nullopt,
                          c.reasoning.empty() ? std::nullopt
                                              : std::optional<std::string>(c.reasoning)};
        }
    }
    return labels;
}

AnswerDetection Annotator::detect_answers(const std::vector<AtomicNode>& nodes,
                                          const std::string& query,
                                          const std::optional<std::string>& ground_truth,
                                          Domain domain, const std::string& sample_id) {
    const bool programming = domain == Domain::programming;
    if (!programming && !ground_truth) {
        throw StageError("answers",
                         "sample '" + sample_id + "': ground truth required for domain " +
                             to_string(domain));
    }
    const std::string prompt =
        programming ? prompts::code_answers_prompt(nodes, query)
                    : prompts::answers_prompt(nodes, query, *ground_truth, domain);
    const int n = static_cast<int>(nodes.size());

    return with_retry(Stage::answers, sample_id, "", prompt, programming,
                      [&](const json& payload) {
                          AnswerDetection det = parse_answers(payload, programming);
                          std::set<int> seen;
                          for (const auto& c : det.candidates) {
                              if (c.step_id < 1 || c.step_id > n) {
                                  throw StageError("answers",
                                                   "candidate on unknown step id " +
                                                       std::to_string(c.step_id));
                              }
                              if (!seen.insert(c.step_id).second) {
                                  throw StageError("answers",
                                                   "duplicate candidate for step " +
                                                       std::to_string(c.step_id));
                              }
                          }
                          std::sort(det.candidates.begin(), det.candidates.end(),
                                    [](const auto& a, const auto& b) {
                                        return a.step_id < b.step_id;
                                    });
                          return det;
                      });
}

std::vector<EquivalencePair> Annotator::detect_repetitions(
    const std::vector<AtomicNode>& nodes, const std::vector<NodeLabel>& labels,
    const std::string& query, const std::string& sample_id) {
    const bool any_repetition =
        std::any_of(labels.begin(), labels.end(), [](const NodeLabel& l) {
            return l.category == category::kRepetition;
        });
    if (!any_repetition) return {};

    const std::string prompt = prompts::repetitions_prompt(nodes, labels, query);
    const int n = static_cast<int>(nodes.size());
    return with_retry(Stage::repetitions, sample_id, "", prompt, /*programming=*/false,
                      [&](const json& payload) {
                          auto pairs = parse_repetitions(payload);
                          for (const auto& p : pairs) {
                              if (p.earlier_step < 1 || p.later_step > n) {
                                  throw StageError(
                                      "repetitions",
                                      "pair (" + std::to_string(p.earlier_step) + "," +
                                          std::to_string(p.later_step) +
                                          ") references steps outside 1.." +
                                          std::to_string(n));
                              }
                          }
                          return pairs;
                      });
}

TargetAssignment Annotator::identify_target(int node_id, const std::vector<AtomicNode>& nodes,
                                            const std::vector<NodeLabel>& labels,
                                            const std::string& query,
                                            const std::string& sample_id) {
    if (node_id < 1 || node_id > static_cast<int>(nodes.size())) {
        throw StageError("targets", "node id " + std::to_string(node_id) + " out of range");
    }
    const NodeLabel& label = labels[static_cast<size_t>(node_id - 1)];
    RelationKind kind;
    if (label.category == category::kReflection) {
        kind = RelationKind::reflection;
    } else if (label.category == category::kCorrection) {
        kind = RelationKind::correction;
    } else if (label.category == category::kExploration) {
        kind = RelationKind::exploration;
    } else {
        throw StageError("targets", "step " + std::to_string(node_id) + " has category '" +
                                        label.category +
                                        "', which takes no target assignment");
    }

    const std::string prompt = prompts::target_prompt(
        nodes[static_cast<size_t>(node_id - 1)], label, nodes, labels, query, kind);
    return with_retry(Stage::targets, sample_id, std::to_string(node_id), prompt,
                      /*programming=*/false, [&](const json& payload) {
                          TargetAssignment t = parse_target(payload, node_id);
                          t.kind = kind;
                          if (kind == RelationKind::reflection && !t.is_affirm) {
                              throw StageError("targets",
                                               "reflection step " + std::to_string(node_id) +
                                                   " needs an is_affirm verdict");
                          }
                          if (kind != RelationKind::reflection && t.is_affirm) {
                              throw StageError("targets",
                                               "is_affirm is only meaningful for "
                                               "reflection steps");
                          }
                          return t;
                      });
}

PathVerdict Annotator::validate_path(const std::string& path_text, const std::string& query,
                                     const std::string& sample_id, const std::string& tag) {
    if (path_text.empty()) {
        throw StageError("path_validate",
                         "sample '" + sample_id + "': refusing to validate an empty path");
    }
    const std::string prompt = prompts::path_validation_prompt(path_text, query);
    return with_retry(Stage::path_validate, sample_id, tag, prompt, /*programming=*/false,
                      [&](const json& payload) { return parse_path_verdict(payload); });
}

}  // namespace cotjudger
