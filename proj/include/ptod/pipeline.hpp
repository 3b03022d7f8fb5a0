#pragma once
// Stage orchestration: config, ordered execution, journaled resume, and
// the run manifest.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ptod/filters.hpp"
#include "ptod/types.hpp"

namespace ptod::pipeline {

inline const std::vector<std::string> kStageOrder = {
    "ingest", "align", "stylize", "personalize", "filter", "analyze", "eval", "report"};

struct PipelineConfig {
    std::optional<std::filesystem::path> multiwoz_dir;
    std::optional<std::filesystem::path> sgd_dir;
    std::filesystem::path image_dir;
    std::vector<std::filesystem::path> knowledge_files;
    std::optional<std::filesystem::path> service_map_file;
    std::optional<std::filesystem::path> act_mode_file;
    std::set<std::string> excluded_domains;

    // role -> backend; only "mock" ships, live bindings are config slots
    std::map<std::string, std::string> providers = {{"rewriter", "mock"},
                                                    {"judge", "mock"},
                                                    {"embedder", "mock"},
                                                    {"classifier", "mock"}};

    uint64_t seed = 0;
    double k_strength = 2.5;
    double k_direction = 4.5;
    int retrieval_k = 3;
    std::string fence_mode = "tukey";
    std::set<std::string> filter_stages = {"strength", "direction", "semantic", "naturalness"};
    int history_window = 1;
    bool include_wiki_in_retrieval = false;
    int embedding_dim = 384;
    size_t workers = 0;  // 0: hardware concurrency; execution detail, not hashed

    // eval needs an external prediction file, so it is off by default
    std::vector<std::string> stages = {"ingest",      "align",  "stylize", "personalize",
                                       "filter",      "analyze", "report"};
    std::optional<std::filesystem::path> eval_predictions;
    std::filesystem::path out_dir;
    std::optional<std::filesystem::path> cache_dir;  // default: out_dir/cache

    void validate() const;
};

PipelineConfig load_config(const std::filesystem::path& file);

// Canonical JSON of everything that determines outputs; out_dir and
// cache_dir are excluded so runs into different directories compare equal.
std::string config_to_json(const PipelineConfig& config);
std::string config_hash(const PipelineConfig& config);

struct StageRecord {
    std::string name;
    size_t input_count = 0;
    size_t output_count = 0;
};

struct RunManifest {
    std::string tool_version;
    std::string config_hash;
    std::string config_json;
    std::vector<StageRecord> stages;
    std::optional<filters::FilterReport> filter_report;
    uint64_t provider_calls = 0;
    uint64_t cache_hits = 0;
    uint64_t distinct_cache_keys = 0;
    std::optional<std::string> failed_stage;
    std::string error;
};

std::string manifest_to_json(const RunManifest& manifest);

// Test seam: called after each dialogue completes in a journaled stage.
// Throwing simulates an interruption; the journal keeps finished work.
struct Hooks {
    std::function<void(const std::string& stage, size_t done)> after_dialogue;
};

// Executes the configured stages in canonical order. Stage outputs land in
// out_dir as numbered canonical files; wall-clock timings go to a sidecar
// (timings.json) so the manifest stays byte-stable across runs.
RunManifest run(const PipelineConfig& config, const Hooks& hooks = {});

// Renders report.txt plus CSV summaries from a finished run's manifest and
// the analytics/filter sidecars already present in out_dir.
void write_report_files(const std::filesystem::path& out_dir, const RunManifest& manifest);

}  // namespace ptod::pipeline
