// Config loading and validation, ordered stage execution, journaled
// resume, and run artifacts.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "ptod/corpus.hpp"
#include "ptod/evalkit.hpp"
#include "ptod/pipeline.hpp"
#include "ptod/util/strings.hpp"
#include "support.hpp"

using namespace ptod;
using namespace ptod::pipeline;

namespace {

// The shipped demo config with paths rebased onto the repo and output
// redirected into a scratch directory.
PipelineConfig fixture_config(const std::filesystem::path& out_dir) {
    PipelineConfig c = load_config(ptest::repo_dir() / "fixtures/pipeline/config.json");
    c.multiwoz_dir = ptest::repo_dir() / "fixtures/pipeline/multiwoz";
    c.sgd_dir = ptest::repo_dir() / "fixtures/pipeline/sgd";
    c.image_dir = ptest::repo_dir() / "fixtures/pipeline/images";
    c.knowledge_files = {ptest::repo_dir() / "fixtures/pipeline/knowledge.jsonl"};
    c.service_map_file = ptest::repo_dir() / "data/service_map.json";
    c.act_mode_file = ptest::repo_dir() / "data/act_modes.json";
    c.out_dir = out_dir;
    c.cache_dir.reset();
    return c;
}

const std::vector<std::string> kCorpusArtifacts = {
    "01_ingested.jsonl", "02_aligned.jsonl",       "02_unpaired.jsonl",
    "03_stylized.jsonl", "04_personalized.jsonl",  "04_modes.jsonl",
    "05_retained.jsonl", "05_removed.jsonl",       "05_manual_review.jsonl",
    "filter_report.json", "analytics.json",        "filter_stages.csv",
    "emotion_histogram.csv"};

void check_same_bytes(const std::filesystem::path& a, const std::filesystem::path& b,
                      const std::vector<std::string>& names) {
    for (const auto& name : names) {
        INFO("artifact ", name);
        REQUIRE(std::filesystem::exists(a / name));
        REQUIRE(std::filesystem::exists(b / name));
        CHECK(ptest::read_file(a / name) == ptest::read_file(b / name));
    }
}

}  // namespace

TEST_CASE("the shipped demo config loads with expected fields") {
    PipelineConfig c = load_config(ptest::repo_dir() / "fixtures/pipeline/config.json");
    CHECK(c.multiwoz_dir == std::filesystem::path("fixtures/pipeline/multiwoz"));
    CHECK(c.sgd_dir == std::filesystem::path("fixtures/pipeline/sgd"));
    CHECK(c.image_dir == std::filesystem::path("fixtures/pipeline/images"));
    REQUIRE(c.knowledge_files.size() == 1);
    CHECK(c.seed == 7);
    CHECK(c.embedding_dim == 96);
    CHECK(c.workers == 2);
    CHECK(c.fence_mode == "tukey");
    CHECK(c.k_strength == 2.5);
    CHECK(c.k_direction == 4.5);
    CHECK(c.retrieval_k == 3);
    CHECK(c.history_window == 1);           // default kept
    CHECK_FALSE(c.include_wiki_in_retrieval);
    CHECK(c.filter_stages ==
          std::set<std::string>{"strength", "direction", "semantic", "naturalness"});
    CHECK(c.stages == std::vector<std::string>{"ingest", "align", "stylize", "personalize",
                                               "filter", "analyze", "report"});
    CHECK_FALSE(c.eval_predictions.has_value());
    CHECK(c.providers.at("judge") == "mock");
    CHECK_NOTHROW(c.validate());

    CHECK_THROWS_AS(load_config(ptest::repo_dir() / "fixtures/nope.json"), IoError);
    ptest::ScratchDir scratch("config");
    ptest::write_file(scratch.path() / "bad.json", "{oops");
    CHECK_THROWS_AS(load_config(scratch.path() / "bad.json"), ParseError);
}

TEST_CASE("config validation rejects inconsistent requests") {
    ptest::ScratchDir scratch("validate");
    PipelineConfig base = fixture_config(scratch.path() / "out");
    CHECK_NOTHROW(base.validate());

    PipelineConfig c = base;
    c.stages = {"ingest", "transmogrify"};
    CHECK_THROWS_AS(c.validate(), ValidationError);

    c = base;
    c.stages.clear();
    CHECK_THROWS_AS(c.validate(), ValidationError);

    c = base;
    c.filter_stages = {"strength", "vibes"};
    CHECK_THROWS_AS(c.validate(), ValidationError);

    c = base;
    c.fence_mode = "median";
    CHECK_THROWS_AS(c.validate(), ValidationError);

    c = base;
    c.k_strength = 0.0;
    CHECK_THROWS_AS(c.validate(), ValidationError);

    c = base;
    c.retrieval_k = 0;
    CHECK_THROWS_AS(c.validate(), ValidationError);

    c = base;
    c.embedding_dim = 0;
    CHECK_THROWS_AS(c.validate(), ValidationError);

    c = base;
    c.history_window = -1;
    CHECK_THROWS_AS(c.validate(), ValidationError);

    c = base;
    c.providers.erase("judge");
    CHECK_THROWS_AS(c.validate(), ValidationError);

    c = base;
    c.providers["judge"] = "openai";
    CHECK_THROWS_AS(c.validate(), ValidationError);

    c = base;
    c.multiwoz_dir.reset();
    c.sgd_dir.reset();
    CHECK_THROWS_AS(c.validate(), ValidationError);  // ingest needs a source

    c = base;
    c.stages = {"eval"};
    CHECK_THROWS_AS(c.validate(), ValidationError);  // eval needs predictions

    c = base;
    c.out_dir.clear();
    CHECK_THROWS_AS(c.validate(), ValidationError);
}

TEST_CASE("the config hash covers outputs but not execution details") {
    ptest::ScratchDir scratch("hash");
    PipelineConfig a = fixture_config(scratch.path() / "out-a");
    PipelineConfig b = fixture_config(scratch.path() / "out-b");
    b.cache_dir = scratch.path() / "elsewhere";
    b.workers = 7;
    CHECK(config_hash(a) == config_hash(b));
    CHECK(config_to_json(a) == config_to_json(b));

    PipelineConfig c = a;
    c.seed = 8;
    CHECK(config_hash(c) != config_hash(a));
    PipelineConfig d = a;
    d.excluded_domains.insert("police");
    CHECK(config_hash(d) != config_hash(a));

    auto j = nlohmann::json::parse(config_to_json(a));
    for (const char* key : {"seed", "k_strength", "k_direction", "fence_mode", "stages",
                            "providers", "embedding_dim", "filter_stages"})
        CHECK(j.contains(key));
    CHECK_FALSE(j.contains("out_dir"));
    CHECK_FALSE(j.contains("cache_dir"));
    CHECK_FALSE(j.contains("workers"));
}

TEST_CASE("the demo pipeline runs end to end deterministically") {
    ptest::ScratchDir scratch("run");
    PipelineConfig config = fixture_config(scratch.path() / "a");
    RunManifest manifest = run(config);

    CHECK_FALSE(manifest.failed_stage.has_value());
    CHECK_FALSE(manifest.tool_version.empty());
    CHECK(manifest.config_hash == config_hash(config));
    REQUIRE(manifest.stages.size() == 7);
    CHECK(manifest.stages[0].name == "ingest");
    CHECK(manifest.stages[1].name == "align");
    CHECK(manifest.stages[2].name == "stylize");
    CHECK(manifest.stages[3].name == "personalize");
    CHECK(manifest.stages[4].name == "filter");
    CHECK(manifest.stages[5].name == "analyze");
    CHECK(manifest.stages[6].name == "report");

    CHECK(manifest.stages[0].output_count == 20);
    CHECK(manifest.stages[1].output_count == 20);  // every dialogue pairs
    CHECK(manifest.stages[3].output_count == 20);
    CHECK(manifest.stages[4].input_count == 20);
    CHECK(manifest.stages[4].output_count == manifest.stages[5].input_count);
    REQUIRE(manifest.filter_report.has_value());
    CHECK(manifest.filter_report->input_count == 20);
    CHECK(manifest.provider_calls > 0);

    auto out = scratch.path() / "a";
    for (const auto& name : kCorpusArtifacts) CHECK(std::filesystem::exists(out / name));
    for (const char* name : {"manifest.json", "timings.json", "report.txt",
                             "01_ingested.jsonl.manifest.json", "journal/stylize.jsonl",
                             "journal/personalize.jsonl", "cache"})
        CHECK(std::filesystem::exists(out / name));

    auto retained = corpus::read_canonical(out / "05_retained.jsonl");
    CHECK(retained.size() == manifest.stages[4].output_count);
    for (const auto& d : retained) {
        CHECK(d.status == DialogueStatus::retained);
        REQUIRE(d.impression.has_value());
        for (const auto& t : d.turns) {
            CHECK(t.revised_user.has_value());
            CHECK(t.personalized_system.has_value());
        }
    }
    auto removed = corpus::read_canonical(out / "05_removed.jsonl");
    CHECK(retained.size() + removed.size() +
              corpus::read_canonical(out / "05_manual_review.jsonl").size() ==
          20);
    for (const auto& d : removed) {
        CHECK(d.status == DialogueStatus::filtered);
        CHECK(d.filter_reason.has_value());
    }

    auto manifest_json = nlohmann::json::parse(ptest::read_file(out / "manifest.json"));
    CHECK(manifest_json["config_hash"] == manifest.config_hash);
    CHECK(manifest_json["stages"].size() == 7);
    CHECK(manifest_json.contains("filter_report"));
    auto timings = nlohmann::json::parse(ptest::read_file(out / "timings.json"));
    for (const auto& s : manifest.stages) CHECK(timings.contains(s.name));

    // Mode traces cover every personalized dialogue.
    size_t mode_rows = 0;
    for (const auto& line : split(ptest::read_file(out / "04_modes.jsonl"), '\n')) {
        if (trim(line).empty()) continue;
        auto row = nlohmann::json::parse(line);
        CHECK(row.contains("dialogue_id"));
        for (const auto& t : row["traces"])
            for (const char* key : {"turn", "requested_mode", "effective_mode", "retrieved_count"})
                CHECK(t.contains(key));
        ++mode_rows;
    }
    CHECK(mode_rows == 20);

    SUBCASE("a second fresh run reproduces every artifact byte for byte") {
        PipelineConfig config_b = fixture_config(scratch.path() / "b");
        RunManifest manifest_b = run(config_b);
        CHECK_FALSE(manifest_b.failed_stage.has_value());
        std::vector<std::string> names = kCorpusArtifacts;
        names.push_back("manifest.json");
        names.push_back("report.txt");
        check_same_bytes(out, scratch.path() / "b", names);
    }

    SUBCASE("an interrupted personalize stage resumes from its journal") {
        PipelineConfig config_c = fixture_config(scratch.path() / "c");
        Hooks hooks;
        hooks.after_dialogue = [](const std::string& stage, size_t done) {
            if (stage == "personalize" && done == 5) throw std::runtime_error("simulated crash");
        };
        RunManifest interrupted = run(config_c, hooks);
        REQUIRE(interrupted.failed_stage.has_value());
        CHECK(*interrupted.failed_stage == "personalize");
        CHECK_FALSE(interrupted.error.empty());
        auto out_c = scratch.path() / "c";
        CHECK(std::filesystem::exists(out_c / "03_stylized.jsonl"));
        CHECK_FALSE(std::filesystem::exists(out_c / "04_personalized.jsonl"));
        auto failed_manifest = nlohmann::json::parse(ptest::read_file(out_c / "manifest.json"));
        CHECK(failed_manifest["failed_stage"] == "personalize");
        CHECK_FALSE(ptest::read_file(out_c / "journal/personalize.jsonl").empty());

        RunManifest resumed = run(config_c);
        CHECK_FALSE(resumed.failed_stage.has_value());
        REQUIRE(resumed.stages.size() == 7);
        for (size_t i = 0; i < 7; ++i) {
            CHECK(resumed.stages[i].name == manifest.stages[i].name);
            CHECK(resumed.stages[i].input_count == manifest.stages[i].input_count);
            CHECK(resumed.stages[i].output_count == manifest.stages[i].output_count);
        }
        // Journal replay plus the disk cache: strictly cheaper than a cold run.
        CHECK(resumed.provider_calls < manifest.provider_calls);
        check_same_bytes(out, out_c, kCorpusArtifacts);
    }

    SUBCASE("running the stages one at a time matches the one-shot run") {
        PipelineConfig config_d = fixture_config(scratch.path() / "d");
        for (const char* stage : {"ingest", "align", "stylize", "personalize", "filter",
                                  "analyze", "report"}) {
            config_d.stages = {stage};
            RunManifest step = run(config_d);
            INFO("stage ", stage);
            CHECK_FALSE(step.failed_stage.has_value());
        }
        check_same_bytes(out, scratch.path() / "d", kCorpusArtifacts);
    }

    SUBCASE("write_report_files re-renders the same report from sidecars") {
        std::string original = ptest::read_file(out / "report.txt");
        write_report_files(out, manifest);
        CHECK(ptest::read_file(out / "report.txt") == original);

        RunManifest stripped = manifest;
        stripped.filter_report.reset();  // falls back to filter_report.json
        write_report_files(out, stripped);
        CHECK(ptest::read_file(out / "report.txt") == original);
    }
}

TEST_CASE("the eval stage scores an external prediction file") {
    ptest::ScratchDir scratch("eval-stage");
    auto predictions = scratch.path() / "predictions.jsonl";
    ptest::write_file(
        predictions,
        R"({"dialogue_id": "D1", "turn": 0, "predicted": {"restaurant-food": "thai"}, "gold": {"restaurant-food": "thai"}})"
        "\n"
        R"({"dialogue_id": "D1", "turn": 1, "predicted": {"restaurant-food": "thai"}, "gold": {"restaurant-food": "thai", "hotel-area": "north"}})"
        "\n"
        R"({"dialogue_id": "D2", "turn": 0, "predicted": {}, "gold": {"hotel-area": "south"}})"
        "\n");

    PipelineConfig config;
    config.stages = {"eval"};
    config.eval_predictions = predictions;
    config.out_dir = scratch.path() / "out";
    RunManifest manifest = run(config);
    CHECK_FALSE(manifest.failed_stage.has_value());
    REQUIRE(manifest.stages.size() == 1);
    CHECK(manifest.stages[0].name == "eval");
    CHECK(manifest.stages[0].input_count == 3);

    auto j = nlohmann::json::parse(ptest::read_file(config.out_dir / "eval.json"));
    auto loaded = evalkit::load_predictions(predictions);
    CHECK(j["jga"] == doctest::Approx(evalkit::jga(loaded)));
    CHECK(j["jga"] == doctest::Approx(1.0 / 3.0));
    REQUIRE(j["domain_jga"].contains("restaurant"));
    REQUIRE(j["domain_jga"].contains("hotel"));
    CHECK(j["domain_jga"]["restaurant"] ==
          doctest::Approx(evalkit::domain_jga(loaded, "restaurant")));
}

TEST_CASE("a failed ingest is recorded in the manifest") {
    ptest::ScratchDir scratch("fail");
    PipelineConfig config = fixture_config(scratch.path() / "out");
    config.multiwoz_dir = scratch.path() / "missing";
    config.sgd_dir.reset();
    RunManifest manifest = run(config);
    REQUIRE(manifest.failed_stage.has_value());
    CHECK(*manifest.failed_stage == "ingest");
    CHECK_FALSE(manifest.error.empty());
    auto j = nlohmann::json::parse(ptest::read_file(scratch.path() / "out" / "manifest.json"));
    CHECK(j["failed_stage"] == "ingest");
    CHECK_FALSE(j["error"].get<std::string>().empty());
}
