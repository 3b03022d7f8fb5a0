#pragma once
// Canonical dialogue record types shared by every stage.

#include <compare>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ptod/errors.hpp"

namespace ptod {

enum class Source { multiwoz, sgd, other };

// Stage progression for a dialogue. Transitions are monotone in this
// order; `filtered` is terminal.
enum class DialogueStatus { raw, aligned, stylized, personalized, retained, filtered };

enum class Emotion { positive, neutral, negative };

enum class FilterReason { strength, direction, semantic, naturalness };

enum class AgeGroup { child, adult, senior };
enum class Gender { female, male, unspecified };
enum class Formality { formal, casual };

std::string to_string(Source v);
std::string to_string(DialogueStatus v);
std::string to_string(Emotion v);
std::string to_string(FilterReason v);
std::string to_string(AgeGroup v);
std::string to_string(Gender v);
std::string to_string(Formality v);

Source source_from_string(const std::string& s);
DialogueStatus status_from_string(const std::string& s);
Emotion emotion_from_string(const std::string& s);
FilterReason filter_reason_from_string(const std::string& s);
AgeGroup age_group_from_string(const std::string& s);
Gender gender_from_string(const std::string& s);
Formality formality_from_string(const std::string& s);

// Normalized dialogue act: uppercase act, lowercase domain/slot,
// literal "none" when the act carries no slot.
struct PolicyAct {
    std::string act;
    std::string domain;
    std::string slot;

    auto operator<=>(const PolicyAct&) const = default;
};

// Attributes inferred from a user image, plus the eligibility checks a
// persona image must pass before pairing.
struct ImageMetadata {
    AgeGroup age_group = AgeGroup::adult;
    Gender gender = Gender::unspecified;
    Formality formality = Formality::casual;
    Emotion emotion = Emotion::neutral;
    bool single_person = true;
    bool centered = true;
    bool face_visible = true;
    bool not_toddler = true;

    bool eligible() const { return single_person && centered && face_visible && not_toddler; }
};

// One user/system exchange. `dialogue_state` is cumulative at this turn.
struct Turn {
    int index = 0;
    std::string user_utterance;
    std::string system_utterance;
    std::optional<std::string> revised_user;
    std::optional<std::string> personalized_system;
    std::map<std::string, std::string> dialogue_state;
    std::vector<PolicyAct> policy_acts;
    std::optional<std::map<std::string, std::string>> db_results;

    bool operator==(const Turn&) const = default;
};

struct Dialogue {
    std::string id;
    Source source = Source::other;
    std::set<std::string> services;
    std::vector<Turn> turns;
    std::optional<Emotion> emotion;
    std::optional<std::string> image_id;
    std::optional<std::string> impression;
    DialogueStatus status = DialogueStatus::raw;
    std::optional<FilterReason> filter_reason;

    bool operator==(const Dialogue&) const = default;

    // Throws ValidationError when a structural invariant is broken:
    // non-contiguous turn indices, malformed state keys, or field
    // presence inconsistent with `status`.
    void validate() const;
};

struct CorpusManifest {
    std::map<std::string, size_t> count_by_status;
    std::map<std::string, size_t> count_by_source;
    std::map<std::string, size_t> count_by_service;
    size_t total_dialogues = 0;
    double avg_turns_per_dialogue = 0.0;   // user+system utterances counted
    double avg_tokens_per_utterance = 0.0; // whitespace tokens

    bool operator==(const CorpusManifest&) const = default;
};

}  // namespace ptod
