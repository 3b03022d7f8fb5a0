#pragma once
// User-turn style transfer and impression-guided system-turn
// personalization, dispatched on dialogue policy acts.

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ptod/align.hpp"
#include "ptod/gateway.hpp"
#include "ptod/knowledge.hpp"
#include "ptod/types.hpp"

namespace ptod::personalize {

enum class Mode { basic, greeting, recommendation };

std::string to_string(Mode m);

// Act vocabularies differ between sources, so the dispatch table is data.
struct ActModeTable {
    std::set<std::string> greeting_acts;           // uppercase act names
    std::set<std::string> recommend_acts;
    std::set<std::string> recommend_inform_slots;  // INFORM with one of these slots
};

ActModeTable default_act_mode_table();
ActModeTable load_act_mode_table(const std::filesystem::path& file);

// Pure in the acts: greeting wins over recommendation wins over basic.
Mode select_mode(const std::vector<PolicyAct>& acts, const ActModeTable& table);

struct Options {
    int retrieval_k = 3;
    bool include_wiki_in_retrieval = false;
    int history_window = 1;  // previous exchanges included in the prompt
};

struct TurnTrace {
    int turn_index = 0;
    Mode requested_mode = Mode::basic;   // select_mode on the turn's acts
    Mode effective_mode = Mode::basic;   // after greeting placement and fallback
    int retrieved_count = 0;
};

struct Result {
    Dialogue dialogue;
    std::vector<TurnTrace> traces;
};

class Personalizer {
  public:
    Personalizer(gateway::Gateway& gw, const knowledge::KnowledgeStore& store,
                 ActModeTable table, Options options);

    std::string revise_user_turn(const std::string& prev_system, const std::string& user,
                                 const std::filesystem::path& image) const;

    std::string generate_impression(const align::PersonaImage& image) const;

    std::string personalize_system_turn(const std::string& original_system,
                                        const std::string& revised_user,
                                        const std::filesystem::path& image,
                                        const std::string& impression, Mode mode,
                                        const std::vector<knowledge::KnowledgeEntry>& retrieved,
                                        const std::string& history) const;

    // Rewrites every user turn of an aligned dialogue (stylize stage).
    Dialogue stylize_dialogue(const Dialogue& dialogue, const align::PersonaImage& image) const;

    // Personalizes every system turn of a stylized dialogue. Greeting mode
    // applies only at the first and last turn; recommendation falls back to
    // basic when retrieval is empty.
    Result personalize_dialogue(const Dialogue& dialogue, const align::PersonaImage& image) const;

  private:
    std::string render_history(const Dialogue& d, int turn_index) const;
    std::optional<std::string> entity_for_turn(const Dialogue& d, int turn_index) const;

    gateway::Gateway& gw_;
    const knowledge::KnowledgeStore& store_;
    ActModeTable table_;
    Options options_;
};

}  // namespace ptod::personalize
