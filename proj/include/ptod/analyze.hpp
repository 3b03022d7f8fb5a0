#pragma once
// Corpus analytics: readability, politeness strategies, fine-grained
// emotion distribution, descriptive statistics.

#include <map>
#include <string>
#include <vector>

#include "ptod/gateway.hpp"
#include "ptod/types.hpp"

namespace ptod::analyze {

// Dictionary-free syllable estimate: vowel groups with silent-e and
// common suffix corrections. Lower bound 1.
int syllable_count(const std::string& word);

std::vector<std::string> split_sentences(const std::string& text);

// Gunning Fog index: 0.4 * (words/sentences + 100 * complex/words).
// Complex means >= 3 syllables, excluding proper nouns (capitalized
// mid-sentence), hyphenated compounds, and -es/-ed inflections that only
// reach 3 syllables through the suffix.
double readability_years(const std::string& text);

struct PolitenessPatterns {
    // strategy name -> lowercase substrings that trigger it
    std::map<std::string, std::vector<std::string>> patterns;
};

PolitenessPatterns default_politeness_patterns();
PolitenessPatterns load_politeness_patterns(const std::filesystem::path& file);

// Mean distinct strategies per sentence.
double politeness_count(const std::string& text,
                        const PolitenessPatterns& patterns = default_politeness_patterns());

struct EmotionHistogram {
    std::map<std::string, double> proportions;  // over classified utterances
    size_t classified = 0;
    size_t unclassified = 0;  // judge contract failures
};

// Classifies system utterances (personalized when present) with the
// 28-label judge. `image_emotions` restricts to dialogues whose paired
// image carries one of the given emotions; empty set means all.
EmotionHistogram emotion_histogram(const std::vector<Dialogue>& dialogues, gateway::Gateway& gw,
                                   const std::set<Emotion>& image_emotions = {});

struct StyleAnalytics {
    double word_level_years = 0.0;
    double politeness_score = 0.0;
    EmotionHistogram emotions;
};

// Readability and politeness are computed over system utterances
// (personalized when present).
StyleAnalytics analyze_corpus(const std::vector<Dialogue>& dialogues, gateway::Gateway& gw,
                              const PolitenessPatterns& patterns = default_politeness_patterns());

struct CorpusStats {
    CorpusManifest manifest;
    std::map<std::string, size_t> age_distribution;
    std::map<std::string, size_t> gender_distribution;
    std::map<std::string, size_t> formality_distribution;
};

CorpusStats corpus_stats(const std::vector<Dialogue>& dialogues,
                         const std::map<std::string, ImageMetadata>& image_metadata);

std::string analytics_to_json(const StyleAnalytics& analytics, const CorpusStats& stats);

}  // namespace ptod::analyze
