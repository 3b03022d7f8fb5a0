#pragma once
// Four-stage quality control: style strength, style direction, semantic
// consistency, whole-dialogue naturalness.

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ptod/gateway.hpp"
#include "ptod/knowledge.hpp"
#include "ptod/math.hpp"
#include "ptod/types.hpp"

namespace ptod::filters {

enum class FenceMode { tukey, absolute };

std::string to_string(FenceMode m);
FenceMode fence_mode_from_string(const std::string& s);

struct StyleScores {
    std::string dialogue_id;
    double ps = 0.0;          // mean distance between personalized and original
    Vec pv;                   // mean difference vector
    double pd = 0.0;          // distance to the class-mean PV, set by direction filter
    std::string metadata_class;
};

struct Options {
    double k_strength = 2.5;
    double k_direction = 4.5;
    FenceMode fence = FenceMode::tukey;
    size_t min_class_size = 4;  // smaller classes are exempt from fences
    bool class_includes_gender = false;
    std::set<std::string> stages = {"strength", "direction", "semantic", "naturalness"};
    size_t workers = 0;
};

struct StageReport {
    std::string name;
    size_t input_count = 0;
    std::vector<std::string> removed_ids;
    std::vector<std::string> manual_review_ids;  // judge contract failures
    std::map<std::string, double> fence_by_class;
    std::map<std::string, std::vector<std::string>> findings;  // dialogue id -> details
    double removal_fraction = 0.0;
};

struct FilterReport {
    std::vector<StageReport> stages;
    std::string fence_mode;
    std::string quantile_method = "type 7 (linear interpolation)";
    double k_strength = 0.0;
    double k_direction = 0.0;
    size_t input_count = 0;
    size_t retained_count = 0;
    double retention_fraction = 0.0;
};

std::string report_to_json(const FilterReport& report);

// (age_group, formality, emotion), optionally with gender.
std::string metadata_class_key(const ImageMetadata& m, bool include_gender = false);

// PS_i: mean Euclidean embedding distance between personalized and original
// system responses over the dialogue's system turns.
double personalization_strength(const Dialogue& d, const knowledge::Embedder& embedder);

// PV_i: mean embedding difference vector over system turns.
Vec personalization_vector(const Dialogue& d, const knowledge::Embedder& embedder);

std::vector<StyleScores> compute_style_scores(
    const std::vector<Dialogue>& dialogues,
    const std::map<std::string, ImageMetadata>& image_metadata,
    const knowledge::Embedder& embedder, const Options& options);

// Dialogues whose PS falls below the per-class lower fence
// (tukey: Q1 - k*IQR, absolute: k*IQR).
std::set<std::string> strength_removals(const std::vector<StyleScores>& scores,
                                        const Options& options,
                                        std::map<std::string, double>* fences = nullptr);

// Sets pd on each score, then removes dialogues whose PD exceeds the
// per-class upper fence (tukey: Q3 + k*IQR, absolute: k*IQR).
std::set<std::string> direction_removals(std::vector<StyleScores>& scores, const Options& options,
                                         std::map<std::string, double>* fences = nullptr);

struct JudgeOutcome {
    bool keep = true;
    bool manual_review = false;
    std::vector<std::string> findings;
};

// Checks each revised user turn against its new state values and each
// personalized system turn against its policy acts and DB facts.
JudgeOutcome semantic_check(const Dialogue& d, gateway::Gateway& gw);

// Whole-dialogue flow judgement over the personalized rendering.
JudgeOutcome naturalness_check(const Dialogue& d, gateway::Gateway& gw);

struct FilterResult {
    std::vector<Dialogue> retained;   // status retained
    std::vector<Dialogue> removed;    // status filtered, filter_reason set
    std::vector<Dialogue> manual_review;
    FilterReport report;
};

// Runs the selected stages in canonical order, each on the survivors of
// the previous one.
FilterResult filter_corpus(const std::vector<Dialogue>& dialogues,
                           const std::map<std::string, ImageMetadata>& image_metadata,
                           const knowledge::Embedder& embedder, gateway::Gateway& gw,
                           const Options& options);

}  // namespace ptod::filters
