#include "ptod/personalize.hpp"

#include <algorithm>
#include <fstream>

#include <json.hpp>

#include "ptod/util/strings.hpp"

namespace ptod::personalize {

using nlohmann::json;

std::string to_string(Mode m) {
    switch (m) {
        case Mode::basic: return "basic";
        case Mode::greeting: return "greeting";
        case Mode::recommendation: return "recommendation";
    }
    throw ValidationError("bad mode");
}

ActModeTable default_act_mode_table() {
    ActModeTable t;
    t.greeting_acts = {"WELCOME", "GREET", "BYE", "THANK", "GOODBYE"};
    t.recommend_acts = {"RECOMMEND", "OFFER"};
    t.recommend_inform_slots = {"name"};
    return t;
}

ActModeTable load_act_mode_table(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw IoError("cannot open act mode table " + file.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ParseError("malformed act mode table " + file.string() + ": " + e.what());
    }
    ActModeTable t;
    for (const auto& a : j.value("greeting_acts", json::array()))
        t.greeting_acts.insert(a.get<std::string>());
    for (const auto& a : j.value("recommend_acts", json::array()))
        t.recommend_acts.insert(a.get<std::string>());
    for (const auto& s : j.value("recommend_inform_slots", json::array()))
        t.recommend_inform_slots.insert(s.get<std::string>());
    return t;
}

Mode select_mode(const std::vector<PolicyAct>& acts, const ActModeTable& table) {
    bool recommend = false;
    for (const auto& a : acts) {
        if (table.greeting_acts.count(a.act)) return Mode::greeting;
        if (table.recommend_acts.count(a.act)) recommend = true;
        if (a.act == "INFORM" && table.recommend_inform_slots.count(a.slot)) recommend = true;
    }
    return recommend ? Mode::recommendation : Mode::basic;
}

Personalizer::Personalizer(gateway::Gateway& gw, const knowledge::KnowledgeStore& store,
                           ActModeTable table, Options options)
    : gw_(gw), store_(store), table_(std::move(table)), options_(options) {}

std::string Personalizer::revise_user_turn(const std::string& prev_system, const std::string& user,
                                           const std::filesystem::path& image) const {
    if (trim(user).empty()) throw PreconditionError("cannot revise an empty user utterance");
    gateway::CompletionRequest request;
    request.template_id = "rewrite_user";
    request.bindings["prev_system"] = prev_system;
    request.bindings["user"] = user;
    request.image = image;
    std::string revised = gw_.complete(request).text;
    if (trim(revised).empty()) throw ContractError("empty rewrite for user turn", revised);
    return revised;
}

std::string Personalizer::generate_impression(const align::PersonaImage& image) const {
    if (!image.metadata.eligible())
        throw PreconditionError("image " + image.image_id + " is not eligible for personas");
    gateway::CompletionRequest request;
    request.template_id = "impression";
    request.image = image.path;
    std::string impression = gw_.complete(request).text;
    if (trim(impression).empty()) throw ContractError("empty impression", impression);
    return impression;
}

std::string Personalizer::personalize_system_turn(
    const std::string& original_system, const std::string& revised_user,
    const std::filesystem::path& image, const std::string& impression, Mode mode,
    const std::vector<knowledge::KnowledgeEntry>& retrieved, const std::string& history) const {
    if (impression.empty()) throw PreconditionError("personalization requires an impression");
    if (mode == Mode::recommendation && retrieved.empty()) mode = Mode::basic;

    gateway::CompletionRequest request;
    switch (mode) {
        case Mode::basic: request.template_id = "personalize_basic"; break;
        case Mode::greeting: request.template_id = "personalize_greeting"; break;
        case Mode::recommendation: request.template_id = "personalize_recommend"; break;
    }
    request.bindings["impression"] = impression;
    request.bindings["history"] = history;
    request.bindings["revised_user"] = revised_user;
    request.bindings["original_system"] = original_system;
    if (mode == Mode::recommendation) {
        std::vector<std::string> texts;
        for (const auto& e : retrieved) texts.push_back(e.text);
        request.bindings["retrieved"] = join(texts, "\n");
    }
    request.image = image;
    std::string personalized = gw_.complete(request).text;
    if (trim(personalized).empty()) throw ContractError("empty personalized response", personalized);
    return personalized;
}

Dialogue Personalizer::stylize_dialogue(const Dialogue& dialogue,
                                        const align::PersonaImage& image) const {
    if (dialogue.status != DialogueStatus::aligned)
        throw PreconditionError("dialogue " + dialogue.id + " is not aligned");
    Dialogue out = dialogue;
    std::string prev_system;
    for (auto& turn : out.turns) {
        turn.revised_user = turn.user_utterance.empty()
                                ? ""
                                : revise_user_turn(prev_system, turn.user_utterance, image.path);
        prev_system = turn.system_utterance;
    }
    out.status = DialogueStatus::stylized;
    return out;
}

std::string Personalizer::render_history(const Dialogue& d, int turn_index) const {
    std::string out;
    int first = std::max(0, turn_index - options_.history_window);
    for (int i = first; i < turn_index; ++i) {
        const Turn& t = d.turns[static_cast<size_t>(i)];
        out += "USER: " + t.revised_user.value_or(t.user_utterance) + "\n";
        std::string sys = t.personalized_system.value_or(t.system_utterance);
        if (!sys.empty()) out += "SYSTEM: " + sys + "\n";
    }
    return out;
}

// Entity key for retrieval: the turn's db_results name, else the most
// recent earlier turn that has one.
std::optional<std::string> Personalizer::entity_for_turn(const Dialogue& d, int turn_index) const {
    for (int i = turn_index; i >= 0; --i) {
        const Turn& t = d.turns[static_cast<size_t>(i)];
        if (t.db_results) {
            auto it = t.db_results->find("name");
            if (it != t.db_results->end() && !it->second.empty()) return it->second;
        }
    }
    return std::nullopt;
}

Result Personalizer::personalize_dialogue(const Dialogue& dialogue,
                                          const align::PersonaImage& image) const {
    if (dialogue.status != DialogueStatus::stylized)
        throw PreconditionError("dialogue " + dialogue.id + " is not stylized");

    Result result;
    result.dialogue = dialogue;
    Dialogue& out = result.dialogue;
    std::string impression = generate_impression(image);
    out.impression = impression;

    const int last = static_cast<int>(out.turns.size()) - 1;
    for (auto& turn : out.turns) {
        if (turn.system_utterance.empty()) {
            turn.personalized_system = "";
            continue;
        }
        TurnTrace trace;
        trace.turn_index = turn.index;
        trace.requested_mode = select_mode(turn.policy_acts, table_);

        Mode mode = trace.requested_mode;
        // greeting personalization only at the dialogue edges
        if (mode == Mode::greeting && turn.index != 0 && turn.index != last) {
            ActModeTable no_greetings = table_;
            no_greetings.greeting_acts.clear();
            mode = select_mode(turn.policy_acts, no_greetings);
        }

        std::vector<knowledge::KnowledgeEntry> retrieved;
        if (mode == Mode::recommendation) {
            if (auto entity = entity_for_turn(out, turn.index)) {
                const std::string& query = turn.revised_user && !turn.revised_user->empty()
                                               ? *turn.revised_user
                                               : turn.user_utterance;
                retrieved = store_.retrieve_top_k(query, *entity, options_.retrieval_k,
                                                  options_.include_wiki_in_retrieval);
            }
            if (retrieved.empty()) mode = Mode::basic;
        }
        trace.effective_mode = mode;
        trace.retrieved_count = static_cast<int>(retrieved.size());

        turn.personalized_system = personalize_system_turn(
            turn.system_utterance, turn.revised_user.value_or(turn.user_utterance), image.path,
            impression, mode, retrieved, render_history(out, turn.index));
        result.traces.push_back(trace);
    }
    out.status = DialogueStatus::personalized;
    return result;
}

}  // namespace ptod::personalize
