#include "ptod/types.hpp"

#include "ptod/util/strings.hpp"

namespace ptod {

std::string to_string(Source v) {
    switch (v) {
        case Source::multiwoz: return "multiwoz";
        case Source::sgd: return "sgd";
        case Source::other: return "other";
    }
    return "other";
}

std::string to_string(DialogueStatus v) {
    switch (v) {
        case DialogueStatus::raw: return "raw";
        case DialogueStatus::aligned: return "aligned";
        case DialogueStatus::stylized: return "stylized";
        case DialogueStatus::personalized: return "personalized";
        case DialogueStatus::retained: return "retained";
        case DialogueStatus::filtered: return "filtered";
    }
    return "raw";
}

std::string to_string(Emotion v) {
    switch (v) {
        case Emotion::positive: return "positive";
        case Emotion::neutral: return "neutral";
        case Emotion::negative: return "negative";
    }
    return "neutral";
}

std::string to_string(FilterReason v) {
    switch (v) {
        case FilterReason::strength: return "strength";
        case FilterReason::direction: return "direction";
        case FilterReason::semantic: return "semantic";
        case FilterReason::naturalness: return "naturalness";
    }
    return "strength";
}

std::string to_string(AgeGroup v) {
    switch (v) {
        case AgeGroup::child: return "child";
        case AgeGroup::adult: return "adult";
        case AgeGroup::senior: return "senior";
    }
    return "adult";
}

std::string to_string(Gender v) {
    switch (v) {
        case Gender::female: return "female";
        case Gender::male: return "male";
        case Gender::unspecified: return "unspecified";
    }
    return "unspecified";
}

std::string to_string(Formality v) {
    switch (v) {
        case Formality::formal: return "formal";
        case Formality::casual: return "casual";
    }
    return "casual";
}

namespace {
[[noreturn]] void bad_enum(const char* what, const std::string& s) {
    throw ValidationError(std::string("unknown ") + what + ": '" + s + "'");
}
}  // namespace

Source source_from_string(const std::string& s) {
    if (s == "multiwoz") return Source::multiwoz;
    if (s == "sgd") return Source::sgd;
    if (s == "other") return Source::other;
    bad_enum("source", s);
}

DialogueStatus status_from_string(const std::string& s) {
    if (s == "raw") return DialogueStatus::raw;
    if (s == "aligned") return DialogueStatus::aligned;
    if (s == "stylized") return DialogueStatus::stylized;
    if (s == "personalized") return DialogueStatus::personalized;
    if (s == "retained") return DialogueStatus::retained;
    if (s == "filtered") return DialogueStatus::filtered;
    bad_enum("status", s);
}

Emotion emotion_from_string(const std::string& s) {
    if (s == "positive") return Emotion::positive;
    if (s == "neutral") return Emotion::neutral;
    if (s == "negative") return Emotion::negative;
    bad_enum("emotion", s);
}

FilterReason filter_reason_from_string(const std::string& s) {
    if (s == "strength") return FilterReason::strength;
    if (s == "direction") return FilterReason::direction;
    if (s == "semantic") return FilterReason::semantic;
    if (s == "naturalness") return FilterReason::naturalness;
    bad_enum("filter reason", s);
}

AgeGroup age_group_from_string(const std::string& s) {
    if (s == "child") return AgeGroup::child;
    if (s == "adult") return AgeGroup::adult;
    if (s == "senior") return AgeGroup::senior;
    bad_enum("age group", s);
}

Gender gender_from_string(const std::string& s) {
    if (s == "female") return Gender::female;
    if (s == "male") return Gender::male;
    if (s == "unspecified") return Gender::unspecified;
    bad_enum("gender", s);
}

Formality formality_from_string(const std::string& s) {
    if (s == "formal") return Formality::formal;
    if (s == "casual") return Formality::casual;
    bad_enum("formality", s);
}

namespace {

bool valid_state_key(const std::string& key) {
    auto dash = key.find('-');
    return dash != std::string::npos && dash > 0 && dash + 1 < key.size();
}

}  // namespace

void Dialogue::validate() const {
    if (id.empty()) throw ValidationError("dialogue with empty id");
    for (size_t t = 0; t < turns.size(); ++t) {
        const Turn& turn = turns[t];
        if (turn.index != static_cast<int>(t))
            throw ValidationError("dialogue " + id + ": turn indices not contiguous from 0 (turn " +
                                  std::to_string(t) + " has index " + std::to_string(turn.index) + ")");
        for (const auto& [key, value] : turn.dialogue_state) {
            (void)value;
            if (!valid_state_key(key))
                throw ValidationError("dialogue " + id + ": state key '" + key +
                                      "' is not of the form domain-slot");
        }
        bool needs_revised = status >= DialogueStatus::stylized;
        bool needs_personalized = status >= DialogueStatus::personalized;
        if (needs_revised && !turn.revised_user)
            throw ValidationError("dialogue " + id + ": status " + to_string(status) +
                                  " but turn " + std::to_string(t) + " has no revised user utterance");
        if (needs_personalized && !turn.personalized_system)
            throw ValidationError("dialogue " + id + ": status " + to_string(status) +
                                  " but turn " + std::to_string(t) + " has no personalized system utterance");
    }
    bool aligned_or_later = status >= DialogueStatus::aligned;
    if (aligned_or_later && !image_id)
        throw ValidationError("dialogue " + id + ": status " + to_string(status) + " without image_id");
    if (!aligned_or_later && image_id)
        throw ValidationError("dialogue " + id + ": image_id set before alignment");
    bool personalized_or_later = status >= DialogueStatus::personalized;
    if (personalized_or_later && !impression)
        throw ValidationError("dialogue " + id + ": status " + to_string(status) + " without impression");
    if (!personalized_or_later && impression)
        throw ValidationError("dialogue " + id + ": impression set before personalization");
    if ((status == DialogueStatus::filtered) != filter_reason.has_value())
        throw ValidationError("dialogue " + id + ": filter_reason must be set iff status is filtered");
}

}  // namespace ptod
