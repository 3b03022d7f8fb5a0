#include "ptod/gateway.hpp"

#include <set>

#include "ptod/util/strings.hpp"

namespace ptod::gateway {

void PromptTemplate::validate() const {
    std::set<std::string> declared(placeholders.begin(), placeholders.end());
    size_t pos = 0;
    while ((pos = body.find('{', pos)) != std::string::npos) {
        size_t end = body.find('}', pos);
        if (end == std::string::npos) break;
        std::string name = body.substr(pos + 1, end - pos - 1);
        if (!declared.count(name))
            throw ValidationError("template " + template_id + ": undeclared placeholder {" + name + "}");
        pos = end + 1;
    }
    if (output_contract == OutputContract::single_label && labels.empty())
        throw ValidationError("template " + template_id + ": single_label without label set");
}

namespace {

constexpr const char* kLikertOptions = "Options: Not at all (1) / A little (2) / Some-what (3) / A lot (4).";

PromptTemplate likert(std::string id, std::string question) {
    PromptTemplate t;
    t.template_id = std::move(id);
    t.role_preamble = "You are an evaluator rating personalized task-oriented dialogues.";
    t.body = std::move(question);
    t.body += "\n";
    t.body += kLikertOptions;
    t.body += "\nOriginal dialogue:\n{original}\nPersonalized dialogue:\n{personalized}\n"
              "User impression: {impression}\nAnswer with the number only.";
    t.placeholders = {"original", "personalized", "impression"};
    t.output_contract = OutputContract::single_label;
    t.labels = {"1", "2", "3", "4"};
    return t;
}

}  // namespace

TemplateCatalog default_catalog() {
    TemplateCatalog catalog;

    auto add = [&catalog](PromptTemplate t) {
        t.validate();
        catalog[t.template_id] = std::move(t);
    };

    {
        PromptTemplate t;
        t.template_id = "emotion_label";
        t.role_preamble = "You classify the emotional tone of a dialogue participant.";
        t.body = "Classify the overall emotion of the following user utterances as one of "
                 "positive, neutral, or negative. Answer with the label only.\n{text}";
        t.placeholders = {"text"};
        t.output_contract = OutputContract::single_label;
        t.labels = {"positive", "neutral", "negative"};
        t.local = true;
        add(t);
    }
    {
        PromptTemplate t;
        t.template_id = "emotion28_label";
        t.role_preamble = "You classify fine-grained emotions.";
        t.body = "Classify the dominant emotion of this utterance using the GoEmotions taxonomy "
                 "(27 emotions plus neutral). Answer with the label only.\n{text}";
        t.placeholders = {"text"};
        t.output_contract = OutputContract::single_label;
        t.labels = {"admiration", "amusement",  "anger",      "annoyance",      "approval",
                    "caring",     "confusion",  "curiosity",  "desire",         "disappointment",
                    "disapproval","disgust",    "embarrassment","excitement",   "fear",
                    "gratitude",  "grief",      "joy",        "love",           "nervousness",
                    "optimism",   "pride",      "realization","relief",         "remorse",
                    "sadness",    "surprise",   "neutral"};
        t.local = true;
        add(t);
    }
    {
        PromptTemplate t;
        t.template_id = "image_metadata";
        t.role_preamble = "You describe the person in a photograph.";
        t.body = "Estimate the person's age group (child, adult, senior), gender (female, male, "
                 "unspecified), formality of attire (formal, casual), and emotion (positive, "
                 "neutral, negative). Also report whether the photo shows a single person, "
                 "centered, with a visible face, and that the person is not a toddler. "
                 "Answer as a JSON object with keys age_group, gender, formality, emotion, "
                 "single_person, centered, face_visible, not_toddler.";
        t.expects_image = true;
        t.output_contract = OutputContract::json_fields;
        t.local = true;
        add(t);
    }
    {
        PromptTemplate t;
        t.template_id = "rewrite_user";
        t.role_preamble = "You rewrite dialogue turns to match a speaker's appearance.";
        t.body = "Rewrite the user's utterance so its style matches the person in the image, "
                 "considering age, gender, emotion, and contextual cues. Preserve every slot "
                 "value and the original intent.\nPrevious system turn: {prev_system}\n"
                 "User utterance: {user}";
        t.placeholders = {"prev_system", "user"};
        t.expects_image = true;
        t.local = true;
        add(t);
    }
    {
        PromptTemplate t;
        t.template_id = "impression";
        t.role_preamble = "You form a first impression of a person from their photo.";
        t.body = "Give a short first impression of this person: apparent age, mood, formality, "
                 "and one salient appearance detail.";
        t.expects_image = true;
        t.local = true;
        add(t);
    }
    {
        PromptTemplate t;
        t.template_id = "personalize_basic";
        t.role_preamble = "You restyle system responses for a specific user.";
        t.body = "Rewrite the system response so its tone suits this user, guided by the first "
                 "impression. Preserve every slot value and database fact.\n"
                 "First impression: {impression}\nDialogue history:\n{history}\n"
                 "User said: {revised_user}\nOriginal system response: {original_system}";
        t.placeholders = {"impression", "history", "revised_user", "original_system"};
        t.expects_image = true;
        t.local = true;
        add(t);
    }
    {
        PromptTemplate t;
        t.template_id = "personalize_greeting";
        t.role_preamble = "You restyle system greetings and farewells for a specific user.";
        t.body = "Rewrite this greeting or farewell so it is personal to the user, including a "
                 "specific comment about their appearance. Preserve the original message.\n"
                 "First impression: {impression}\nDialogue history:\n{history}\n"
                 "User said: {revised_user}\nOriginal system response: {original_system}";
        t.placeholders = {"impression", "history", "revised_user", "original_system"};
        t.expects_image = true;
        t.local = true;
        add(t);
    }
    {
        PromptTemplate t;
        t.template_id = "personalize_recommend";
        t.role_preamble = "You restyle system recommendations for a specific user.";
        t.body = "Rewrite this recommendation so its tone suits the user. Only add claims "
                 "supported by the retrieved texts below. Preserve every slot value and "
                 "database fact.\nFirst impression: {impression}\nRetrieved texts:\n{retrieved}\n"
                 "Dialogue history:\n{history}\nUser said: {revised_user}\n"
                 "Original system response: {original_system}";
        t.placeholders = {"impression", "retrieved", "history", "revised_user", "original_system"};
        t.expects_image = true;
        t.local = true;
        add(t);
    }
    {
        PromptTemplate t;
        t.template_id = "semantic_check_user";
        t.role_preamble = "You verify that a rewritten utterance kept its meaning.";
        t.body = "Does the utterance below express all of the required values? Answer yes or no.\n"
                 "Required values:\n{required}\nUtterance: {utterance}";
        t.placeholders = {"required", "utterance"};
        t.output_contract = OutputContract::single_label;
        t.labels = {"yes", "no"};
        t.local = true;
        add(t);
    }
    {
        PromptTemplate t;
        t.template_id = "semantic_check_system";
        t.role_preamble = "You verify that a rewritten system response kept its meaning.";
        t.body = "Does the response below still realize all of the required facts? Answer yes or "
                 "no.\nRequired facts:\n{required}\nResponse: {utterance}";
        t.placeholders = {"required", "utterance"};
        t.output_contract = OutputContract::single_label;
        t.labels = {"yes", "no"};
        t.local = true;
        add(t);
    }
    {
        PromptTemplate t;
        t.template_id = "naturalness_check";
        t.role_preamble = "You judge whole-dialogue conversational quality.";
        t.body = "Read the entire dialogue. Is it natural and coherent from start to end? "
                 "Answer yes or no.\n{dialogue}";
        t.placeholders = {"dialogue"};
        t.output_contract = OutputContract::single_label;
        t.labels = {"yes", "no"};
        t.local = true;
        add(t);
    }

    add(likert("judge_u1", "U1. Naturalness: Is the user's utterance natural and "
                           "conversationally appropriate?"));
    add(likert("judge_u2", "U2. Fluency: Does the user's utterance flow smoothly without errors "
                           "or awkwardness?"));
    add(likert("judge_u3", "U3. Does the user's utterance style match the user's image?"));
    add(likert("judge_u4", "U4. Is the content well preserved and maintains the same semantics "
                           "as in the original user utterance?"));
    add(likert("judge_s1", "S1. Naturalness: Is the system's utterance natural and "
                           "conversationally appropriate?"));
    add(likert("judge_s2", "S2. Fluency: Does the system's utterance flow smoothly without "
                           "errors or awkwardness?"));
    add(likert("judge_s3", "S3. Is the system's utterance well-personalized to the user, "
                           "compared to the original system utterance?"));
    add(likert("judge_s4", "S4. Does the system's utterance effectively fulfill the user's "
                           "request, as seen in the original system utterance?"));
    add(likert("judge_s5", "S5. Does the system's utterance enhance the overall user experience, "
                           "compared to the original system utterance?"));

    {
        PromptTemplate t;
        t.template_id = "pairwise_choice";
        t.role_preamble = "You compare two anonymous dialogue systems.";
        t.body = "Which system is more personalized to the user?\n"
                 "Options: System 1 / System 2 / Tie\n"
                 "System 1:\n{dialogue_1}\nSystem 2:\n{dialogue_2}\nAnswer with the option only.";
        t.placeholders = {"dialogue_1", "dialogue_2"};
        t.output_contract = OutputContract::single_label;
        t.labels = {"system 1", "system 2", "tie"};
        add(t);
    }
    {
        PromptTemplate t;
        t.template_id = "pairwise_reasons";
        t.role_preamble = "You explain which aspects of personalization improved.";
        t.body = "Indicate which parts have been improved in the winning system:\n"
                 "Personalized greetings and ending statements: A personalized response could "
                 "include customized greetings or closing remarks.\n"
                 "Formality: A personalized response should be appropriately formal or informal, "
                 "depending on the situation.\n"
                 "Age sensitivity: A personalized response should be age-sensitive.\n"
                 "Emotional awareness: A personalized response should be emotionally aware.\n"
                 "Other reasons\n"
                 "Winning system:\n{winner}\nAnswer with a comma-separated list.";
        t.placeholders = {"winner"};
        add(t);
    }

    return catalog;
}

std::string normalize_label(const std::string& raw) {
    std::string s = to_lower(collapse_whitespace(trim(raw)));
    while (!s.empty() && (s.back() == '.' || s.back() == '!')) s.pop_back();
    return trim(s);
}

}  // namespace ptod::gateway
