#include <algorithm>
#include <array>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ptod/gateway.hpp"
#include "ptod/util/strings.hpp"

namespace ptod::gateway {

using nlohmann::json;

namespace {

// Persona attributes the mock derives from a fixture image. Fixture stubs
// carry their tag string as file content (first line), e.g. "adult_formal_neu";
// the filename stem is the fallback.
struct ImageTags {
    std::string age = "adult";
    std::string gender = "unspecified";
    std::string formality = "casual";
    std::string emotion = "neutral";
    bool single_person = true;
    bool centered = true;
    bool face_visible = true;
    bool not_toddler = true;
};

ImageTags parse_tags(const std::string& raw) {
    ImageTags tags;
    std::string lowered = to_lower(raw);
    for (char& c : lowered)
        if (c == '_' || c == '-' || c == '.') c = ' ';
    for (const std::string& tok : tokenize_whitespace(lowered)) {
        if (tok == "child" || tok == "adult" || tok == "senior") tags.age = tok;
        else if (tok == "toddler") { tags.age = "child"; tags.not_toddler = false; }
        else if (tok == "male" || tok == "female") tags.gender = tok;
        else if (tok == "formal" || tok == "casual") tags.formality = tok;
        else if (tok == "pos" || tok == "positive") tags.emotion = "positive";
        else if (tok == "neu" || tok == "neutral") tags.emotion = "neutral";
        else if (tok == "neg" || tok == "negative") tags.emotion = "negative";
        else if (tok == "group") tags.single_person = false;
        else if (tok == "offcenter") tags.centered = false;
        else if (tok == "noface") tags.face_visible = false;
    }
    return tags;
}

ImageTags image_tags(const std::filesystem::path& image) {
    std::ifstream in(image, std::ios::binary);
    if (!in) throw TransportError("mock provider: cannot read image " + image.string());
    std::string first_line;
    std::getline(in, first_line);
    first_line = trim(first_line);
    bool printable = !first_line.empty() &&
                     std::all_of(first_line.begin(), first_line.end(),
                                 [](unsigned char c) { return c >= 0x20 && c < 0x7f; });
    return parse_tags(printable ? first_line : image.stem().string());
}

const std::set<std::string>& positive_words() {
    static const std::set<std::string> words{
        "great", "thanks", "thank", "wonderful", "awesome", "love", "perfect", "amazing",
        "excellent", "appreciate", "fantastic", "glad", "happy"};
    return words;
}

const std::set<std::string>& negative_words() {
    static const std::set<std::string> words{
        "terrible", "awful", "hate", "angry", "disappointed", "horrible", "annoyed",
        "unfortunately", "bad", "worst", "sad"};
    return words;
}

std::vector<std::string> words_of(const std::string& text) {
    std::string lowered = to_lower(text);
    for (char& c : lowered)
        if (!std::isalpha(static_cast<unsigned char>(c)) && c != '\'') c = ' ';
    return tokenize_whitespace(lowered);
}

std::string classify_emotion(const std::string& text) {
    int pos = 0, neg = 0;
    for (const auto& w : words_of(text)) {
        if (positive_words().count(w)) ++pos;
        if (negative_words().count(w)) ++neg;
    }
    if (pos > neg) return "positive";
    if (neg > pos) return "negative";
    return "neutral";
}

std::string classify_emotion28(const std::string& text) {
    auto words = words_of(text);
    auto any = [&words](std::initializer_list<const char*> list) {
        for (const char* w : list)
            if (std::find(words.begin(), words.end(), w) != words.end()) return true;
        return false;
    };
    if (any({"thank", "thanks", "grateful", "appreciate"})) return "gratitude";
    if (any({"great", "awesome", "amazing", "wonderful", "impressive", "excellent", "fantastic"}))
        return "admiration";
    if (any({"happy", "glad", "delighted", "enjoy"})) return "joy";
    if (any({"curious", "wonder"})) return "curiosity";
    if (any({"disappointed", "unfortunately"})) return "disappointment";
    if (any({"angry", "furious", "hate"})) return "anger";
    if (any({"sorry", "apologize"})) return "remorse";
    if (any({"sad"})) return "sadness";
    if (any({"surprised", "wow"})) return "surprise";
    return "neutral";
}

std::string first_line_of(const std::string& text) {
    auto nl = text.find('\n');
    return nl == std::string::npos ? text : text.substr(0, nl);
}

// lines look like "USER: ..." / "SYSTEM: ..."; an empty utterance is a flaw
bool dialogue_looks_natural(const std::string& rendered) {
    if (trim(rendered).empty()) return false;
    std::istringstream in(rendered);
    std::string line;
    while (std::getline(in, line)) {
        auto colon = line.find(':');
        if (colon == std::string::npos) continue;
        std::string role = trim(line.substr(0, colon));
        if (role != "USER" && role != "SYSTEM") continue;
        if (trim(line.substr(colon + 1)).empty()) return false;
    }
    return true;
}

bool contains_all_required(const std::string& utterance, const std::string& required) {
    std::istringstream in(required);
    std::string line;
    while (std::getline(in, line)) {
        line = trim(line);
        if (line.empty()) continue;
        if (!contains_ci(utterance, line)) return false;
    }
    return true;
}

size_t marker_count(const std::string& text) {
    return static_cast<size_t>(std::count(text.begin(), text.end(), '['));
}

class MockProvider final : public Provider {
  public:
    std::string name() const override { return "mock"; }

    std::string complete(const CompletionRequest& request, const PromptTemplate& tmpl,
                         const std::string&) override {
        const auto& id = request.template_id;
        const auto& b = request.bindings;
        auto bound = [&b](const std::string& key) {
            auto it = b.find(key);
            return it == b.end() ? std::string{} : it->second;
        };

        if (id == "emotion_label") return classify_emotion(bound("text"));
        if (id == "emotion28_label") return classify_emotion28(bound("text"));

        if (id == "image_metadata") {
            ImageTags tags = image_tags(*request.image);
            json j;
            j["age_group"] = tags.age;
            j["gender"] = tags.gender;
            j["formality"] = tags.formality;
            j["emotion"] = tags.emotion;
            j["single_person"] = tags.single_person;
            j["centered"] = tags.centered;
            j["face_visible"] = tags.face_visible;
            j["not_toddler"] = tags.not_toddler;
            return j.dump();
        }

        if (id == "rewrite_user") {
            ImageTags tags = image_tags(*request.image);
            return "[" + tags.age + "|" + tags.formality + "|" + tags.emotion + "] " + bound("user");
        }
        if (id == "impression") {
            ImageTags tags = image_tags(*request.image);
            return "a " + tags.age + " person, " + tags.formality + " attire, " + tags.emotion +
                   " mood";
        }
        if (id == "personalize_basic")
            return "[styled-for: " + bound("impression") + "] " + bound("original_system");
        if (id == "personalize_greeting")
            return "[greeting|" + bound("impression") + "] " + bound("original_system");
        if (id == "personalize_recommend") {
            std::string base = "[styled-for: " + bound("impression") + "] " + bound("original_system");
            std::string retrieved = first_line_of(bound("retrieved"));
            if (trim(retrieved).empty()) return base;
            return base + " \"" + retrieved + "\"";
        }

        if (id == "semantic_check_user" || id == "semantic_check_system")
            return contains_all_required(bound("utterance"), bound("required")) ? "yes" : "no";
        if (id == "naturalness_check")
            return dialogue_looks_natural(bound("dialogue")) ? "yes" : "no";

        if (id.rfind("judge_", 0) == 0) return "4";

        if (id == "pairwise_choice") {
            size_t m1 = marker_count(bound("dialogue_1"));
            size_t m2 = marker_count(bound("dialogue_2"));
            if (m1 > m2) return "System 1";
            if (m2 > m1) return "System 2";
            return "Tie";
        }
        if (id == "pairwise_reasons") {
            std::string winner = to_lower(bound("winner"));
            std::vector<std::string> reasons;
            if (winner.find("[greeting") != std::string::npos) reasons.push_back("greetings/endings");
            if (winner.find("formal") != std::string::npos ||
                winner.find("casual") != std::string::npos)
                reasons.push_back("formality");
            if (winner.find("child") != std::string::npos ||
                winner.find("adult") != std::string::npos ||
                winner.find("senior") != std::string::npos)
                reasons.push_back("age sensitivity");
            if (winner.find("mood") != std::string::npos) reasons.push_back("emotional awareness");
            if (reasons.empty()) reasons.push_back("other");
            return join(reasons, ", ");
        }

        (void)tmpl;
        throw PreconditionError("mock provider: no behavior for template " + id);
    }
};

}  // namespace

std::shared_ptr<Provider> make_mock_provider() { return std::make_shared<MockProvider>(); }

}  // namespace ptod::gateway
