#include "cotjudger/corpus.hpp"

#include <fstream>
#include <sstream>

#include "cotjudger/errors.hpp"

namespace cotjudger {

namespace {

using nlohmann::json;

constexpr const char* kKnownFields[] = {"id",    "domain", "query",
                                        "ground_truth", "tests",  "cot",
                                        "token_count_hint"};

bool is_known_field(const std::string& key) {
    for (const char* f : kKnownFields) {
        if (key == f) return true;
    }
    return false;
}

struct Diagnostics {
    std::vector<std::string> items;

    void add(size_t line, const std::string& msg) {
        items.push_back("line " + std::to_string(line) + ": " + msg);
    }
    void add(const std::string& msg) { items.push_back(msg); }
    bool empty() const { return items.empty(); }
    std::string render(const std::string& what) const {
        std::ostringstream os;
        os << what << " (" << items.size() << " error" << (items.size() == 1 ? "" : "s")
           << "):";
        for (const auto& item : items) os << "\n  - " << item;
        return os.str();
    }
};

std::optional<std::string> opt_text(const json& j, const char* field) {
    auto it = j.find(field);
    if (it == j.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) throw std::runtime_error(std::string("field '") + field +
                                                   "' must be a string");
    return it->get<std::string>();
}

CoTSample parse_sample(const json& j) {
    if (!j.is_object()) throw std::runtime_error("record is not an object");
    CoTSample s;

    auto require_text = [&](const char* field) {
        auto v = opt_text(j, field);
        if (!v) throw std::runtime_error(std::string("field '") + field + "' is required");
        return *v;
    };

    s.id = require_text("id");
    if (s.id.empty()) throw std::runtime_error("field 'id' must be non-empty");

    const std::string domain_str = require_text("domain");
    auto domain = domain_from_string(domain_str);
    if (!domain)
        throw std::runtime_error("field 'domain': unknown domain '" + domain_str + "'");
    s.domain = *domain;

    s.query = require_text("query");
    s.cot = require_text("cot");
    s.ground_truth = opt_text(j, "ground_truth");
    s.tests = opt_text(j, "tests");

    if (auto it = j.find("token_count_hint"); it != j.end() && !it->is_null()) {
        if (!it->is_number_integer() || it->get<int64_t>() < 0)
            throw std::runtime_error("field 'token_count_hint' must be a nonnegative integer");
        s.token_count_hint = it->get<uint64_t>();
    }

    if (s.domain == Domain::programming) {
        if (!s.tests)
            throw std::runtime_error("field 'tests' is required for programming samples");
    } else if (!s.ground_truth) {
        throw std::runtime_error(
            "field 'ground_truth' is required for non-programming samples");
    }

    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!is_known_field(it.key())) s.extras[it.key()] = it.value();
    }
    return s;
}

}  // namespace

json CoTSample::to_json() const {
    json j = extras.is_object() ? extras : json::object();
    j["id"] = id;
    j["domain"] = to_string(domain);
    j["query"] = query;
    if (ground_truth) j["ground_truth"] = *ground_truth;
    if (tests) j["tests"] = *tests;
    j["cot"] = cot;
    if (token_count_hint) j["token_count_hint"] = *token_count_hint;
    return j;
}

std::vector<CoTSample> load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw CorpusError("cannot open dataset file: " + path.string());

    std::vector<CoTSample> samples;
    Diagnostics diags;
    std::map<std::string, std::vector<size_t>> id_lines;

    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j = json::parse(line, nullptr, /*allow_exceptions=*/false);
        if (j.is_discarded()) {
            diags.add(line_no, "malformed record: not valid JSON");
            continue;
        }
        try {
            CoTSample s = parse_sample(j);
            id_lines[s.id].push_back(line_no);
            samples.push_back(std::move(s));
        } catch (const std::exception& e) {
            diags.add(line_no, e.what());
        }
    }

    for (const auto& [id, lines] : id_lines) {
        if (lines.size() > 1) {
            std::ostringstream os;
            os << "duplicate id '" << id << "' on lines ";
            for (size_t i = 0; i < lines.size(); ++i) {
                if (i) os << (i + 1 == lines.size() ? " and " : ", ");
                os << lines[i];
            }
            diags.add(os.str());
        }
    }

    if (!diags.empty()) throw CorpusError(diags.render("invalid dataset " + path.string()));
    return samples;
}

void save_dataset(const std::vector<CoTSample>& samples, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw CorpusError("cannot write dataset file: " + path.string());
    for (const auto& s : samples) out << s.to_json().dump() << "\n";
}

const nlohmann::json& AnnotationBundle::stage_payload(Stage s) const {
    auto it = stages.find(std::string(stage_name(s)));
    if (it == stages.end()) {
        throw CorpusError("bundle '" + sample_id + "' has no scripted responses for stage '" +
                          std::string(stage_name(s)) + "'");
    }
    return it->second;
}

namespace {

// Validates one scripted payload (not an array wrapper) against its stage
// schema. Throws SchemaError on violation.
void validate_stage_payload(Stage stage, const json& payload) {
    switch (stage) {
        case Stage::atomize:
            parse_edit_plan(payload);
            break;
        case Stage::classify:
            parse_classify(payload);
            break;
        case Stage::answers: {
            // Domain is unknown at load time; accept payloads valid under
            // either the verification or the code-location schema.
            try {
                parse_answers(payload, /*programming=*/false);
            } catch (const SchemaError&) {
                parse_answers(payload, /*programming=*/true);
            }
            break;
        }
        case Stage::repetitions:
            parse_repetitions(payload);
            break;
        case Stage::targets:
            throw SchemaError(stage, "", "internal: targets validated separately");
        case Stage::path_validate:
            parse_path_verdict(payload);
            break;
    }
}

void validate_scripted(Stage stage, const json& value) {
    if (stage == Stage::targets) {
        if (!value.is_object())
            throw SchemaError(stage, "", "targets must be an object keyed by source step id");
        for (auto it = value.begin(); it != value.end(); ++it) {
            int source = 0;
            try {
                source = std::stoi(it.key());
            } catch (...) {
                throw SchemaError(stage, it.key(), "key is not a step id");
            }
            const json& v = it.value();
            if (v.is_array()) {
                if (v.empty()) throw SchemaError(stage, it.key(), "empty response script");
                for (const json& e : v) parse_target(e, source);
            } else {
                parse_target(v, source);
            }
        }
        return;
    }
    if (value.is_array()) {
        if (value.empty())
            throw SchemaError(stage, "", "empty response script");
        for (const json& e : value) validate_stage_payload(stage, e);
        return;
    }
    validate_stage_payload(stage, value);
}

}  // namespace

std::map<std::string, AnnotationBundle> load_fixture(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw CorpusError("cannot open fixture file: " + path.string());

    std::map<std::string, AnnotationBundle> bundles;
    Diagnostics diags;

    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j = json::parse(line, nullptr, /*allow_exceptions=*/false);
        if (j.is_discarded()) {
            diags.add(line_no, "malformed bundle: not valid JSON");
            continue;
        }
        std::string sample_id;
        try {
            if (!j.is_object() || !j.contains("sample_id") || !j.at("sample_id").is_string())
                throw std::runtime_error("bundle needs a string 'sample_id'");
            sample_id = j.at("sample_id").get<std::string>();
            if (bundles.count(sample_id))
                throw std::runtime_error("duplicate sample_id '" + sample_id + "'");
            if (!j.contains("stages") || !j.at("stages").is_object())
                throw std::runtime_error("bundle needs an object 'stages'");

            AnnotationBundle bundle;
            bundle.sample_id = sample_id;
            const json& stages = j.at("stages");
            for (Stage s : {Stage::atomize, Stage::classify, Stage::answers,
                            Stage::repetitions, Stage::targets, Stage::path_validate}) {
                const std::string name(stage_name(s));
                if (!stages.contains(name)) {
                    throw std::runtime_error("sample '" + sample_id +
                                             "': missing stage '" + name + "'");
                }
                validate_scripted(s, stages.at(name));
                bundle.stages[name] = stages.at(name);
            }
            for (auto it = stages.begin(); it != stages.end(); ++it) {
                if (!stage_from_name(it.key())) {
                    throw std::runtime_error("sample '" + sample_id +
                                             "': unknown stage '" + it.key() + "'");
                }
            }
            bundles.emplace(sample_id, std::move(bundle));
        } catch (const SchemaError& e) {
            diags.add(line_no, "sample '" + sample_id + "': " + e.what());
        } catch (const std::exception& e) {
            diags.add(line_no, e.what());
        }
    }

    if (!diags.empty()) throw CorpusError(diags.render("invalid fixture " + path.string()));
    return bundles;
}

}  // namespace cotjudger
