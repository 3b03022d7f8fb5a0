#include "ptod/analyze.hpp"

#include <algorithm>
#include <fstream>

#include <json.hpp>

#include "ptod/corpus.hpp"
#include "ptod/util/strings.hpp"

namespace ptod::analyze {

using nlohmann::json;

namespace {

bool is_vowel(char c) {
    return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u' || c == 'y';
}

std::string alpha_only(const std::string& token) {
    std::string word;
    for (char c : token)
        if (std::isalpha(static_cast<unsigned char>(c)))
            word += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return word;
}

int vowel_groups(const std::string& word) {
    int groups = 0;
    bool in_group = false;
    for (char c : word) {
        if (is_vowel(c)) {
            if (!in_group) ++groups;
            in_group = true;
        } else {
            in_group = false;
        }
    }
    return groups;
}

}  // namespace

int syllable_count(const std::string& raw) {
    std::string word = alpha_only(raw);
    if (word.empty()) return 0;
    int count = vowel_groups(word);

    size_t n = word.size();
    // silent final e, except the consonant-le pattern (ta-ble)
    if (n >= 2 && word[n - 1] == 'e' && count > 1) {
        bool consonant_le = n >= 3 && word[n - 2] == 'l' && !is_vowel(word[n - 3]);
        if (!consonant_le && !is_vowel(word[n - 2])) --count;
    }
    // -ed is silent unless after t or d (walked vs wanted)
    if (n >= 3 && word.ends_with("ed") && count > 1) {
        char before = word[n - 3];
        if (before != 't' && before != 'd' && !is_vowel(before)) --count;
    }
    // -es is silent unless after a sibilant (makes vs boxes)
    if (n >= 3 && word.ends_with("es") && count > 1) {
        char before = word[n - 3];
        if (before != 's' && before != 'x' && before != 'z' && before != 'c' && before != 'g' &&
            !is_vowel(before))
            --count;
    }
    return std::max(count, 1);
}

std::vector<std::string> split_sentences(const std::string& text) {
    std::vector<std::string> sentences;
    std::string current;
    for (size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        current += c;
        if (c == '.' || c == '!' || c == '?') {
            // consume the rest of the terminator run
            while (i + 1 < text.size() &&
                   (text[i + 1] == '.' || text[i + 1] == '!' || text[i + 1] == '?' ||
                    text[i + 1] == '"' || text[i + 1] == '\''))
                current += text[++i];
            std::string trimmed = trim(current);
            if (!trimmed.empty()) sentences.push_back(trimmed);
            current.clear();
        }
    }
    std::string tail = trim(current);
    if (!tail.empty()) sentences.push_back(tail);
    return sentences;
}

namespace {

struct FogCounts {
    size_t words = 0;
    size_t complex_words = 0;
    size_t sentences = 0;
};

bool is_capitalized(const std::string& token) {
    for (char c : token) {
        if (std::isalpha(static_cast<unsigned char>(c)))
            return std::isupper(static_cast<unsigned char>(c)) != 0;
    }
    return false;
}

// Gunning Fog complex-word exclusions: proper nouns (capitalized away from
// the sentence start), hyphenated compounds, and words that reach three
// syllables only through an -es or -ed inflection.
bool is_complex_word(const std::string& token, bool sentence_initial) {
    std::string word = alpha_only(token);
    if (word.empty()) return false;
    if (token.find('-') != std::string::npos) return false;
    if (!sentence_initial && is_capitalized(token)) return false;
    if (syllable_count(word) < 3) return false;
    if (word.size() > 2 && (word.ends_with("es") || word.ends_with("ed")) &&
        syllable_count(word.substr(0, word.size() - 2)) < 3)
        return false;
    return true;
}

FogCounts fog_counts(const std::string& text) {
    FogCounts counts;
    for (const std::string& sentence : split_sentences(text)) {
        bool counted_sentence = false;
        bool first_word = true;
        for (const std::string& token : tokenize_whitespace(sentence)) {
            if (alpha_only(token).empty()) continue;
            counted_sentence = true;
            ++counts.words;
            if (is_complex_word(token, first_word)) ++counts.complex_words;
            first_word = false;
        }
        if (counted_sentence) ++counts.sentences;
    }
    return counts;
}

}  // namespace

double readability_years(const std::string& text) {
    FogCounts counts = fog_counts(text);
    if (counts.sentences == 0 || counts.words == 0)
        throw PreconditionError("readability requires at least one sentence of words");
    double words = static_cast<double>(counts.words);
    double sentences = static_cast<double>(counts.sentences);
    double complex_words = static_cast<double>(counts.complex_words);
    return 0.4 * (words / sentences + 100.0 * complex_words / words);
}

PolitenessPatterns default_politeness_patterns() {
    PolitenessPatterns p;
    p.patterns = {
        {"gratitude", {"thank you", "thanks", "grateful", "appreciate"}},
        {"greeting",
         {"hello", "hi there", "good morning", "good afternoon", "good evening", "welcome",
          "greetings"}},
        {"apology", {"sorry", "i apologize", "apologies", "my apologies"}},
        {"please", {"please"}},
        {"indirect-request", {"could you", "would you", "can you", "would it be possible"}},
        {"deference", {"sir", "madam", "ma'am", "if you don't mind", "at your convenience"}},
        {"positive-lexicon", {"great", "wonderful", "excellent", "fantastic", "lovely", "perfect"}},
        {"hedging", {"perhaps", "maybe", "i think", "possibly", "it seems"}},
    };
    return p;
}

PolitenessPatterns load_politeness_patterns(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw IoError("cannot open politeness patterns " + file.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ParseError("malformed politeness patterns " + file.string() + ": " + e.what());
    }
    PolitenessPatterns p;
    for (auto it = j.begin(); it != j.end(); ++it)
        for (const auto& pattern : it.value()) p.patterns[it.key()].push_back(pattern.get<std::string>());
    return p;
}

namespace {

std::vector<std::string> match_words(const std::string& text) {
    std::string lowered = to_lower(text);
    for (char& c : lowered)
        if (!std::isalpha(static_cast<unsigned char>(c)) && c != '\'') c = ' ';
    return tokenize_whitespace(lowered);
}

// whole-word contiguous match of the pattern's word sequence
bool matches_pattern(const std::vector<std::string>& words, const std::string& pattern) {
    std::vector<std::string> needle = match_words(pattern);
    if (needle.empty() || needle.size() > words.size()) return false;
    for (size_t i = 0; i + needle.size() <= words.size(); ++i) {
        bool all = true;
        for (size_t k = 0; k < needle.size(); ++k)
            if (words[i + k] != needle[k]) { all = false; break; }
        if (all) return true;
    }
    return false;
}

}  // namespace

double politeness_count(const std::string& text, const PolitenessPatterns& patterns) {
    if (trim(text).empty()) throw PreconditionError("politeness_count requires nonempty text");
    auto sentences = split_sentences(text);
    size_t strategies = 0;
    size_t counted_sentences = 0;
    for (const auto& sentence : sentences) {
        auto words = match_words(sentence);
        if (words.empty()) continue;
        ++counted_sentences;
        for (const auto& [name, pattern_list] : patterns.patterns) {
            (void)name;
            for (const auto& pattern : pattern_list) {
                if (matches_pattern(words, pattern)) {
                    ++strategies;  // a strategy counts once per sentence
                    break;
                }
            }
        }
    }
    if (counted_sentences == 0) throw PreconditionError("politeness_count requires words");
    return static_cast<double>(strategies) / static_cast<double>(counted_sentences);
}

EmotionHistogram emotion_histogram(const std::vector<Dialogue>& dialogues, gateway::Gateway& gw,
                                   const std::set<Emotion>& image_emotions) {
    EmotionHistogram histogram;
    std::map<std::string, size_t> counts;
    for (const auto& d : dialogues) {
        if (!image_emotions.empty() && (!d.emotion || !image_emotions.count(*d.emotion))) continue;
        for (const auto& turn : d.turns) {
            std::string text = turn.personalized_system.value_or(turn.system_utterance);
            if (text.empty()) continue;
            gateway::CompletionRequest request;
            request.template_id = "emotion28_label";
            request.bindings["text"] = text;
            try {
                ++counts[gw.complete(request).text];
                ++histogram.classified;
            } catch (const ContractError&) {
                ++histogram.unclassified;
            }
        }
    }
    for (const auto& [label, count] : counts)
        histogram.proportions[label] =
            static_cast<double>(count) / static_cast<double>(histogram.classified);
    return histogram;
}

StyleAnalytics analyze_corpus(const std::vector<Dialogue>& dialogues, gateway::Gateway& gw,
                              const PolitenessPatterns& patterns) {
    StyleAnalytics analytics;
    std::string all_system_text;
    for (const auto& d : dialogues) {
        for (const auto& turn : d.turns) {
            std::string text = turn.personalized_system.value_or(turn.system_utterance);
            if (text.empty()) continue;
            if (!all_system_text.empty()) all_system_text += " ";
            all_system_text += text;
        }
    }
    if (!trim(all_system_text).empty()) {
        analytics.word_level_years = readability_years(all_system_text);
        analytics.politeness_score = politeness_count(all_system_text, patterns);
    }
    analytics.emotions = emotion_histogram(dialogues, gw);
    return analytics;
}

CorpusStats corpus_stats(const std::vector<Dialogue>& dialogues,
                         const std::map<std::string, ImageMetadata>& image_metadata) {
    CorpusStats stats;
    stats.manifest = corpus::manifest_of(dialogues);
    for (const auto& d : dialogues) {
        if (!d.image_id) continue;
        auto it = image_metadata.find(*d.image_id);
        if (it == image_metadata.end()) continue;
        ++stats.age_distribution[to_string(it->second.age_group)];
        ++stats.gender_distribution[to_string(it->second.gender)];
        ++stats.formality_distribution[to_string(it->second.formality)];
    }
    return stats;
}

std::string analytics_to_json(const StyleAnalytics& analytics, const CorpusStats& stats) {
    json j;
    j["word_level_years"] = analytics.word_level_years;
    j["politeness_score"] = analytics.politeness_score;
    j["emotion_histogram"] = analytics.emotions.proportions;
    j["emotion_classified"] = analytics.emotions.classified;
    j["emotion_unclassified"] = analytics.emotions.unclassified;
    j["avg_turns_per_dialogue"] = stats.manifest.avg_turns_per_dialogue;
    j["avg_tokens_per_utterance"] = stats.manifest.avg_tokens_per_utterance;
    j["count_by_service"] = stats.manifest.count_by_service;
    j["count_by_source"] = stats.manifest.count_by_source;
    j["age_distribution"] = stats.age_distribution;
    j["gender_distribution"] = stats.gender_distribution;
    j["formality_distribution"] = stats.formality_distribution;
    return j.dump(2);
}

}  // namespace ptod::analyze
