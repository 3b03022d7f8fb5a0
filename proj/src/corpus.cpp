#include "ptod/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <json.hpp>

#include "ptod/util/strings.hpp"

namespace ptod::corpus {

using nlohmann::json;

namespace {

json load_json_file(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw IoError("cannot open " + file.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ParseError("malformed JSON in " + file.string() + ": " + e.what());
    }
    return j;
}

// dialogues_*.json under dir (recursively), sorted for determinism.
std::vector<std::filesystem::path> find_dialogue_files(const std::filesystem::path& dir) {
    if (!std::filesystem::exists(dir)) throw IoError("no such directory: " + dir.string());
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        const auto name = entry.path().filename().string();
        if (name.rfind("dialogues", 0) == 0 && entry.path().extension() == ".json")
            files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    return files;
}

std::vector<std::filesystem::path> find_named_files(const std::filesystem::path& dir,
                                                    const std::string& name) {
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().filename() == name)
            files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    return files;
}

// Valid canonical state keys from one or more schema.json files.
// MultiWOZ slot names already carry the domain prefix; SGD slot names are
// bare and get prefixed with their canonical service.
std::set<std::string> load_schema_keys(const std::vector<std::filesystem::path>& schema_files,
                                       const ServiceMap& service_map, bool slots_have_prefix) {
    std::set<std::string> keys;
    for (const auto& file : schema_files) {
        json schema = load_json_file(file);
        if (!schema.is_array()) throw ParseError("schema is not an array: " + file.string());
        for (const auto& service : schema) {
            std::string canon = canonical_service(service.value("service_name", ""), service_map);
            for (const auto& slot : service.value("slots", json::array())) {
                std::string slot_name = to_lower(slot.value("name", ""));
                if (slot_name.empty()) continue;
                if (slots_have_prefix) {
                    auto dash = slot_name.find('-');
                    if (dash != std::string::npos)
                        slot_name = canonical_service(slot_name.substr(0, dash), service_map) + "-" +
                                    slot_name.substr(dash + 1);
                    keys.insert(slot_name);
                } else {
                    keys.insert(canon + "-" + slot_name);
                }
            }
        }
    }
    return keys;
}

std::string canonical_state_key(const std::string& raw_key, const ServiceMap& service_map) {
    auto dash = raw_key.find('-');
    std::string key = to_lower(raw_key);
    if (dash == std::string::npos) return key;
    return canonical_service(key.substr(0, dash), service_map) + "-" + key.substr(dash + 1);
}

void check_state_key(const std::string& key, const std::set<std::string>& schema_keys,
                     const std::string& dialogue_id, const std::filesystem::path& file) {
    if (!schema_keys.count(key))
        throw ValidationError("dialogue " + dialogue_id + " in " + file.string() +
                              ": state slot '" + key + "' not in schema");
}

void push_act(std::vector<PolicyAct>& acts, std::string act, std::string domain, std::string slot) {
    act = to_lower(act);
    std::transform(act.begin(), act.end(), act.begin(),
                   [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    domain = to_lower(domain);
    slot = to_lower(slot);
    if (slot.empty()) slot = "none";
    PolicyAct triple{act, domain, slot};
    if (std::find(acts.begin(), acts.end(), triple) == acts.end()) acts.push_back(triple);
}

bool is_entity_act(const std::string& act) {
    return act == "INFORM" || act == "RECOMMEND" || act == "OFFER" || act == "SELECT";
}

// Acts with a name slot surface their value into db_results so downstream
// stages have an entity key; canonical acts are valueless triples.
void enrich_db_name(std::optional<std::map<std::string, std::string>>& db,
                    const std::string& act, const std::string& slot, const std::string& value) {
    if (!is_entity_act(act)) return;
    if (slot != "name" && !(slot.size() > 5 && slot.ends_with("_name"))) return;
    if (value.empty() || to_lower(value) == "none") return;
    if (!db) db.emplace();
    if (!db->count("name")) (*db)["name"] = value;
}

}  // namespace

ServiceMap default_service_map() {
    // MultiWOZ domains pass through; SGD service families map onto the
    // same vocabulary where they overlap.
    return {
        {"restaurants", "restaurant"}, {"hotels", "hotel"},       {"travel", "attraction"},
        {"trains", "train"},           {"buses", "bus"},          {"homes", "home"},
        {"movies", "movie"},           {"media", "media"},        {"events", "event"},
        {"flights", "flight"},         {"rentalcars", "rental_car"},
        {"ridesharing", "ride_share"}, {"calendar", "calendar"},  {"banks", "bank"},
        {"music", "music"},            {"services", "services"},  {"weather", "weather"},
        {"alarm", "alarm"},            {"messaging", "messaging"},{"payment", "payment"},
    };
}

ServiceMap load_service_map(const std::filesystem::path& file) {
    json j = load_json_file(file);
    ServiceMap map;
    for (auto it = j.begin(); it != j.end(); ++it) map[to_lower(it.key())] = it.value().get<std::string>();
    return map;
}

std::string canonical_service(const std::string& raw, const ServiceMap& map) {
    std::string lower = to_lower(trim(raw));
    // SGD names carry an instance suffix: Restaurants_1, Buses_3, ...
    auto underscore = lower.find_last_of('_');
    if (underscore != std::string::npos && underscore + 1 < lower.size() &&
        std::all_of(lower.begin() + underscore + 1, lower.end(),
                    [](unsigned char c) { return std::isdigit(c); }))
        lower = lower.substr(0, underscore);
    auto it = map.find(lower);
    return it != map.end() ? it->second : lower;
}

std::vector<Dialogue> load_multiwoz(const std::filesystem::path& dir, const ServiceMap& service_map) {
    auto files = find_dialogue_files(dir);
    if (files.empty()) return {};

    auto schema_files = find_named_files(dir, "schema.json");
    if (schema_files.empty()) throw IoError("no schema.json under " + dir.string());
    auto schema_keys = load_schema_keys(schema_files, service_map, /*slots_have_prefix=*/true);

    // Acts live in dialog_acts.json, keyed by dialogue id then turn id.
    json acts_index = json::object();
    for (const auto& acts_file : find_named_files(dir, "dialog_acts.json")) {
        json j = load_json_file(acts_file);
        for (auto it = j.begin(); it != j.end(); ++it) acts_index[it.key()] = it.value();
    }

    std::vector<Dialogue> out;
    for (const auto& file : files) {
        json arr = load_json_file(file);
        if (!arr.is_array()) throw ParseError("expected dialogue array in " + file.string());
        for (size_t rec = 0; rec < arr.size(); ++rec) {
            const json& jd = arr[rec];
            Dialogue d;
            d.source = Source::multiwoz;
            d.status = DialogueStatus::raw;
            try {
                d.id = jd.at("dialogue_id").get<std::string>();
                for (const auto& s : jd.value("services", json::array()))
                    d.services.insert(canonical_service(s.get<std::string>(), service_map));

                const json& turns = jd.at("turns");
                Turn current;
                bool have_user = false;
                for (const auto& jt : turns) {
                    std::string speaker = jt.at("speaker").get<std::string>();
                    std::string turn_id = jt.value("turn_id", "");
                    if (speaker == "USER") {
                        if (have_user) {
                            // user turn without a system reply; close the exchange
                            current.index = static_cast<int>(d.turns.size());
                            d.turns.push_back(std::move(current));
                            current = Turn{};
                        }
                        have_user = true;
                        current.user_utterance = jt.value("utterance", "");
                        for (const auto& frame : jt.value("frames", json::array())) {
                            if (!frame.contains("state")) continue;
                            const json& sv = frame["state"].value("slot_values", json::object());
                            for (auto it = sv.begin(); it != sv.end(); ++it) {
                                std::string key = canonical_state_key(it.key(), service_map);
                                check_state_key(key, schema_keys, d.id, file);
                                if (it.value().is_array() && !it.value().empty())
                                    current.dialogue_state[key] = it.value()[0].get<std::string>();
                                else if (it.value().is_string())
                                    current.dialogue_state[key] = it.value().get<std::string>();
                            }
                        }
                    } else if (speaker == "SYSTEM") {
                        if (!have_user)
                            throw ParseError("system turn before any user turn");
                        current.system_utterance = jt.value("utterance", "");
                        if (acts_index.contains(d.id)) {
                            const json& per_turn = acts_index[d.id];
                            if (per_turn.contains(turn_id)) {
                                const json& da = per_turn[turn_id].value("dialog_act", json::object());
                                for (auto it = da.begin(); it != da.end(); ++it) {
                                    // act names are Domain-Act, e.g. Hotel-Inform
                                    auto dash = it.key().find('-');
                                    std::string domain = dash == std::string::npos
                                                             ? "general"
                                                             : canonical_service(it.key().substr(0, dash),
                                                                                 service_map);
                                    std::string act =
                                        dash == std::string::npos ? it.key() : it.key().substr(dash + 1);
                                    for (const auto& pair : it.value()) {
                                        std::string slot = pair.size() > 0 ? pair[0].get<std::string>() : "";
                                        std::string value = pair.size() > 1 ? pair[1].get<std::string>() : "";
                                        push_act(current.policy_acts, act, domain, slot);
                                        enrich_db_name(current.db_results,
                                                       current.policy_acts.back().act,
                                                       current.policy_acts.back().slot, value);
                                    }
                                }
                            }
                        }
                        current.index = static_cast<int>(d.turns.size());
                        d.turns.push_back(std::move(current));
                        current = Turn{};
                        have_user = false;
                    } else {
                        throw ParseError("unknown speaker '" + speaker + "'");
                    }
                }
                if (have_user) {
                    current.index = static_cast<int>(d.turns.size());
                    d.turns.push_back(std::move(current));
                }
            } catch (const json::exception& e) {
                throw ParseError("malformed dialogue record " + std::to_string(rec) + " in " +
                                 file.string() + ": " + e.what());
            } catch (const ParseError& e) {
                throw ParseError("record " + std::to_string(rec) + " in " + file.string() + ": " +
                                 e.what());
            }
            d.validate();
            out.push_back(std::move(d));
        }
    }
    return out;
}

std::vector<Dialogue> load_sgd(const std::filesystem::path& dir, const ServiceMap& service_map) {
    auto files = find_dialogue_files(dir);
    if (files.empty()) return {};

    auto schema_files = find_named_files(dir, "schema.json");
    if (schema_files.empty()) throw IoError("no schema.json under " + dir.string());
    auto schema_keys = load_schema_keys(schema_files, service_map, /*slots_have_prefix=*/false);

    std::vector<Dialogue> out;
    for (const auto& file : files) {
        json arr = load_json_file(file);
        if (!arr.is_array()) throw ParseError("expected dialogue array in " + file.string());
        for (size_t rec = 0; rec < arr.size(); ++rec) {
            const json& jd = arr[rec];
            Dialogue d;
            d.source = Source::sgd;
            d.status = DialogueStatus::raw;
            try {
                d.id = jd.at("dialogue_id").get<std::string>();
                for (const auto& s : jd.value("services", json::array()))
                    d.services.insert(canonical_service(s.get<std::string>(), service_map));

                // SGD frames only annotate the active service per turn;
                // cumulative state carries every service seen so far.
                std::map<std::string, std::map<std::string, std::string>> state_by_service;

                Turn current;
                bool have_user = false;
                for (const auto& jt : jd.at("turns")) {
                    std::string speaker = jt.at("speaker").get<std::string>();
                    if (speaker == "USER") {
                        if (have_user) {
                            current.index = static_cast<int>(d.turns.size());
                            d.turns.push_back(std::move(current));
                            current = Turn{};
                        }
                        have_user = true;
                        current.user_utterance = jt.value("utterance", "");
                        for (const auto& frame : jt.value("frames", json::array())) {
                            std::string service =
                                canonical_service(frame.value("service", ""), service_map);
                            if (!frame.contains("state")) continue;
                            const json& sv = frame["state"].value("slot_values", json::object());
                            auto& service_state = state_by_service[service];
                            service_state.clear();  // frame state is the full state for its service
                            for (auto it = sv.begin(); it != sv.end(); ++it) {
                                std::string key = service + "-" + to_lower(it.key());
                                check_state_key(key, schema_keys, d.id, file);
                                if (it.value().is_array() && !it.value().empty())
                                    service_state[key] = it.value()[0].get<std::string>();
                            }
                        }
                        current.dialogue_state.clear();
                        for (const auto& [service, slots] : state_by_service) {
                            (void)service;
                            current.dialogue_state.insert(slots.begin(), slots.end());
                        }
                    } else if (speaker == "SYSTEM") {
                        if (!have_user) throw ParseError("system turn before any user turn");
                        current.system_utterance = jt.value("utterance", "");
                        for (const auto& frame : jt.value("frames", json::array())) {
                            std::string service =
                                canonical_service(frame.value("service", ""), service_map);
                            for (const auto& action : frame.value("actions", json::array())) {
                                std::string act = action.value("act", "");
                                std::string slot = action.value("slot", "");
                                std::string value;
                                const json& values = action.value("values", json::array());
                                if (values.is_array() && !values.empty())
                                    value = values[0].get<std::string>();
                                push_act(current.policy_acts, act, service, slot);
                                enrich_db_name(current.db_results, current.policy_acts.back().act,
                                               current.policy_acts.back().slot, value);
                            }
                            const json& results = frame.value("service_results", json::array());
                            if (results.is_array() && !results.empty() && results[0].is_object()) {
                                auto& db = current.db_results ? *current.db_results
                                                              : current.db_results.emplace();
                                for (auto it = results[0].begin(); it != results[0].end(); ++it) {
                                    std::string key = to_lower(it.key());
                                    std::string val = it.value().is_string()
                                                          ? it.value().get<std::string>()
                                                          : it.value().dump();
                                    db[key] = val;
                                    if ((key == "name" || key.ends_with("_name")) && !db.count("name"))
                                        db["name"] = val;
                                }
                            }
                        }
                        current.index = static_cast<int>(d.turns.size());
                        d.turns.push_back(std::move(current));
                        current = Turn{};
                        have_user = false;
                    } else {
                        throw ParseError("unknown speaker '" + speaker + "'");
                    }
                }
                if (have_user) {
                    current.index = static_cast<int>(d.turns.size());
                    d.turns.push_back(std::move(current));
                }
            } catch (const json::exception& e) {
                throw ParseError("malformed dialogue record " + std::to_string(rec) + " in " +
                                 file.string() + ": " + e.what());
            } catch (const ParseError& e) {
                throw ParseError("record " + std::to_string(rec) + " in " + file.string() + ": " +
                                 e.what());
            }
            d.validate();
            out.push_back(std::move(d));
        }
    }
    return out;
}

std::vector<Dialogue> exclude_domains(const std::vector<Dialogue>& dialogues,
                                      const std::set<std::string>& domains) {
    std::vector<Dialogue> kept;
    kept.reserve(dialogues.size());
    for (const auto& d : dialogues) {
        bool overlaps = std::any_of(d.services.begin(), d.services.end(),
                                    [&](const std::string& s) { return domains.count(s) > 0; });
        if (!overlaps) kept.push_back(d);
    }
    return kept;
}

CorpusManifest manifest_of(const std::vector<Dialogue>& dialogues) {
    CorpusManifest m;
    m.total_dialogues = dialogues.size();
    size_t utterances = 0;
    size_t tokens = 0;
    size_t turn_count_sum = 0;
    for (const auto& d : dialogues) {
        m.count_by_status[to_string(d.status)]++;
        m.count_by_source[to_string(d.source)]++;
        for (const auto& s : d.services) m.count_by_service[s]++;
        size_t dialogue_utterances = 0;
        for (const auto& t : d.turns) {
            if (!t.user_utterance.empty()) {
                ++dialogue_utterances;
                tokens += tokenize_whitespace(t.user_utterance).size();
            }
            if (!t.system_utterance.empty()) {
                ++dialogue_utterances;
                tokens += tokenize_whitespace(t.system_utterance).size();
            }
        }
        utterances += dialogue_utterances;
        turn_count_sum += dialogue_utterances;
    }
    if (!dialogues.empty())
        m.avg_turns_per_dialogue =
            static_cast<double>(turn_count_sum) / static_cast<double>(dialogues.size());
    if (utterances > 0)
        m.avg_tokens_per_utterance = static_cast<double>(tokens) / static_cast<double>(utterances);
    return m;
}

namespace {

json turn_to_json(const Turn& t) {
    json j;
    j["index"] = t.index;
    j["user_utterance"] = t.user_utterance;
    j["system_utterance"] = t.system_utterance;
    if (t.revised_user) j["revised_user"] = *t.revised_user;
    if (t.personalized_system) j["personalized_system"] = *t.personalized_system;
    j["dialogue_state"] = t.dialogue_state;
    json acts = json::array();
    for (const auto& a : t.policy_acts) acts.push_back(json::array({a.act, a.domain, a.slot}));
    j["policy_acts"] = acts;
    if (t.db_results) j["db_results"] = *t.db_results;
    return j;
}

Turn turn_from_json(const json& j) {
    Turn t;
    t.index = j.at("index").get<int>();
    t.user_utterance = j.at("user_utterance").get<std::string>();
    t.system_utterance = j.at("system_utterance").get<std::string>();
    if (j.contains("revised_user")) t.revised_user = j["revised_user"].get<std::string>();
    if (j.contains("personalized_system"))
        t.personalized_system = j["personalized_system"].get<std::string>();
    t.dialogue_state = j.value("dialogue_state", std::map<std::string, std::string>{});
    for (const auto& a : j.value("policy_acts", json::array()))
        t.policy_acts.push_back({a.at(0).get<std::string>(), a.at(1).get<std::string>(),
                                 a.at(2).get<std::string>()});
    if (j.contains("db_results"))
        t.db_results = j["db_results"].get<std::map<std::string, std::string>>();
    return t;
}

}  // namespace

std::string dialogue_to_json_line(const Dialogue& d) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["id"] = d.id;
    j["source"] = to_string(d.source);
    j["services"] = d.services;
    j["status"] = to_string(d.status);
    if (d.emotion) j["emotion"] = to_string(*d.emotion);
    if (d.image_id) j["image_id"] = *d.image_id;
    if (d.impression) j["impression"] = *d.impression;
    if (d.filter_reason) j["filter_reason"] = to_string(*d.filter_reason);
    json turns = json::array();
    for (const auto& t : d.turns) turns.push_back(turn_to_json(t));
    j["turns"] = turns;
    return j.dump();
}

Dialogue dialogue_from_json_line(const std::string& line) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed dialogue line: ") + e.what());
    }
    int version = j.value("schema_version", -1);
    if (version != kSchemaVersion)
        throw SchemaVersionError("canonical schema version " + std::to_string(version) +
                                 " is not supported (expected " + std::to_string(kSchemaVersion) + ")");
    Dialogue d;
    try {
        d.id = j.at("id").get<std::string>();
        d.source = source_from_string(j.at("source").get<std::string>());
        for (const auto& s : j.value("services", json::array())) d.services.insert(s.get<std::string>());
        d.status = status_from_string(j.at("status").get<std::string>());
        if (j.contains("emotion")) d.emotion = emotion_from_string(j["emotion"].get<std::string>());
        if (j.contains("image_id")) d.image_id = j["image_id"].get<std::string>();
        if (j.contains("impression")) d.impression = j["impression"].get<std::string>();
        if (j.contains("filter_reason"))
            d.filter_reason = filter_reason_from_string(j["filter_reason"].get<std::string>());
        for (const auto& jt : j.at("turns")) d.turns.push_back(turn_from_json(jt));
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed dialogue record: ") + e.what());
    }
    return d;
}

std::string manifest_to_json(const CorpusManifest& m) {
    json j;
    j["total_dialogues"] = m.total_dialogues;
    j["count_by_status"] = m.count_by_status;
    j["count_by_source"] = m.count_by_source;
    j["count_by_service"] = m.count_by_service;
    j["avg_turns_per_dialogue"] = m.avg_turns_per_dialogue;
    j["avg_tokens_per_utterance"] = m.avg_tokens_per_utterance;
    return j.dump(2);
}

CorpusManifest write_canonical(const std::vector<Dialogue>& dialogues,
                               const std::filesystem::path& path) {
    for (const auto& d : dialogues) d.validate();
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    for (const auto& d : dialogues) out << dialogue_to_json_line(d) << '\n';
    out.close();

    CorpusManifest m = manifest_of(dialogues);
    std::ofstream mf(path.string() + ".manifest.json", std::ios::binary);
    if (!mf) throw IoError("cannot write manifest for " + path.string());
    mf << manifest_to_json(m) << '\n';
    return m;
}

std::vector<Dialogue> read_canonical(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<Dialogue> out;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        try {
            out.push_back(dialogue_from_json_line(line));
        } catch (const SchemaVersionError&) {
            throw;
        } catch (const std::exception& e) {
            throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

}  // namespace ptod::corpus
