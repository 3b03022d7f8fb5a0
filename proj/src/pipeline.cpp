#include "ptod/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <mutex>

#include <json.hpp>

#include "ptod/align.hpp"
#include "ptod/analyze.hpp"
#include "ptod/corpus.hpp"
#include "ptod/evalkit.hpp"
#include "ptod/personalize.hpp"
#include "ptod/util/parallel.hpp"
#include "ptod/util/sha256.hpp"
#include "ptod/util/strings.hpp"

namespace ptod::pipeline {

using nlohmann::json;

void PipelineConfig::validate() const {
    std::set<std::string> known(kStageOrder.begin(), kStageOrder.end());
    for (const auto& stage : stages)
        if (!known.count(stage)) throw ValidationError("unknown stage '" + stage + "'");
    if (stages.empty()) throw ValidationError("no stages requested");
    if (k_strength <= 0 || k_direction <= 0) throw ValidationError("fence multipliers must be positive");
    static const std::set<std::string> known_filters = {"strength", "direction", "semantic",
                                                        "naturalness"};
    for (const auto& f : filter_stages)
        if (!known_filters.count(f)) throw ValidationError("unknown filter stage '" + f + "'");
    if (retrieval_k < 1) throw ValidationError("retrieval_k must be >= 1");
    if (embedding_dim < 1) throw ValidationError("embedding_dim must be >= 1");
    if (history_window < 0) throw ValidationError("history_window must be >= 0");
    filters::fence_mode_from_string(fence_mode);
    for (const char* role : {"rewriter", "judge", "embedder", "classifier"}) {
        auto it = providers.find(role);
        if (it == providers.end()) throw ValidationError(std::string("provider role not bound: ") + role);
        if (it->second != "mock")
            throw ValidationError("provider '" + it->second + "' for role " + role +
                                  " is not available in this build (only: mock)");
    }
    std::set<std::string> requested(stages.begin(), stages.end());
    if (requested.count("ingest") && !multiwoz_dir && !sgd_dir)
        throw ValidationError("ingest stage requires multiwoz_dir or sgd_dir");
    if (requested.count("eval") && !eval_predictions)
        throw ValidationError("eval stage requires eval_predictions");
    if (out_dir.empty()) throw ValidationError("out_dir is required");
}

namespace {

std::optional<std::filesystem::path> path_or_none(const json& j, const char* key) {
    if (!j.contains(key) || j[key].is_null()) return std::nullopt;
    return std::filesystem::path(j[key].get<std::string>());
}

}  // namespace

PipelineConfig load_config(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw IoError("cannot open config " + file.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ParseError("malformed config " + file.string() + ": " + e.what());
    }

    PipelineConfig c;
    c.multiwoz_dir = path_or_none(j, "multiwoz_dir");
    c.sgd_dir = path_or_none(j, "sgd_dir");
    if (j.contains("image_dir")) c.image_dir = j["image_dir"].get<std::string>();
    for (const auto& f : j.value("knowledge_files", json::array()))
        c.knowledge_files.emplace_back(f.get<std::string>());
    c.service_map_file = path_or_none(j, "service_map_file");
    c.act_mode_file = path_or_none(j, "act_mode_file");
    for (const auto& d : j.value("excluded_domains", json::array()))
        c.excluded_domains.insert(d.get<std::string>());
    if (j.contains("providers"))
        for (auto it = j["providers"].begin(); it != j["providers"].end(); ++it)
            c.providers[it.key()] = it.value().get<std::string>();
    c.seed = j.value("seed", c.seed);
    c.k_strength = j.value("k_strength", c.k_strength);
    c.k_direction = j.value("k_direction", c.k_direction);
    c.retrieval_k = j.value("retrieval_k", c.retrieval_k);
    c.fence_mode = j.value("fence_mode", c.fence_mode);
    if (j.contains("filter_stages")) {
        c.filter_stages.clear();
        for (const auto& f : j["filter_stages"]) c.filter_stages.insert(f.get<std::string>());
    }
    c.history_window = j.value("history_window", c.history_window);
    c.include_wiki_in_retrieval = j.value("include_wiki_in_retrieval", c.include_wiki_in_retrieval);
    c.embedding_dim = j.value("embedding_dim", c.embedding_dim);
    c.workers = j.value("workers", c.workers);
    if (j.contains("stages")) {
        c.stages.clear();
        for (const auto& s : j["stages"]) c.stages.push_back(s.get<std::string>());
    }
    c.eval_predictions = path_or_none(j, "eval_predictions");
    if (j.contains("out_dir")) c.out_dir = j["out_dir"].get<std::string>();
    c.cache_dir = path_or_none(j, "cache_dir");
    return c;
}

std::string config_to_json(const PipelineConfig& c) {
    // out_dir, cache_dir, and workers are execution details: they do not
    // influence outputs, so they stay out of the canonical form.
    json j;
    j["multiwoz_dir"] = c.multiwoz_dir ? json(c.multiwoz_dir->string()) : json();
    j["sgd_dir"] = c.sgd_dir ? json(c.sgd_dir->string()) : json();
    j["image_dir"] = c.image_dir.string();
    json files = json::array();
    for (const auto& f : c.knowledge_files) files.push_back(f.string());
    j["knowledge_files"] = files;
    j["service_map_file"] = c.service_map_file ? json(c.service_map_file->string()) : json();
    j["act_mode_file"] = c.act_mode_file ? json(c.act_mode_file->string()) : json();
    j["excluded_domains"] = c.excluded_domains;
    j["providers"] = c.providers;
    j["seed"] = c.seed;
    j["k_strength"] = c.k_strength;
    j["k_direction"] = c.k_direction;
    j["retrieval_k"] = c.retrieval_k;
    j["fence_mode"] = c.fence_mode;
    j["filter_stages"] = c.filter_stages;
    j["history_window"] = c.history_window;
    j["include_wiki_in_retrieval"] = c.include_wiki_in_retrieval;
    j["embedding_dim"] = c.embedding_dim;
    j["stages"] = c.stages;
    j["eval_predictions"] = c.eval_predictions ? json(c.eval_predictions->string()) : json();
    return j.dump(2);
}

std::string config_hash(const PipelineConfig& config) { return sha256_hex(config_to_json(config)); }

std::string manifest_to_json(const RunManifest& m) {
    json j;
    j["tool_version"] = m.tool_version;
    j["config_hash"] = m.config_hash;
    j["config"] = json::parse(m.config_json);
    json stages = json::array();
    for (const auto& s : m.stages) {
        json js;
        js["name"] = s.name;
        js["input_count"] = s.input_count;
        js["output_count"] = s.output_count;
        stages.push_back(js);
    }
    j["stages"] = stages;
    if (m.filter_report) j["filter_report"] = json::parse(filters::report_to_json(*m.filter_report));
    j["provider_calls"] = m.provider_calls;
    j["cache_hits"] = m.cache_hits;
    j["distinct_cache_keys"] = m.distinct_cache_keys;
    if (m.failed_stage) {
        j["failed_stage"] = *m.failed_stage;
        j["error"] = m.error;
    }
    return j.dump(2);
}

namespace {

// Per-dialogue journal: one JSON line per completed unit, flushed on
// append, so an interrupted stage resumes where it stopped.
class Journal {
  public:
    explicit Journal(std::filesystem::path file) : file_(std::move(file)) {
        std::ifstream in(file_);
        std::string line;
        while (in && std::getline(in, line)) {
            if (trim(line).empty()) continue;
            json j = json::parse(line, nullptr, false);
            if (!j.is_object() || !j.contains("id")) continue;  // torn write tail
            entries_[j["id"].get<std::string>()] = j.value("payload", json());
        }
    }

    bool has(const std::string& id) const { return entries_.count(id) > 0; }
    const json& get(const std::string& id) const { return entries_.at(id); }
    size_t size() const { return entries_.size(); }

    // entries_ is the resume snapshot loaded at construction and is never
    // mutated afterwards, so has/get stay lock-free while workers append.
    void append(const std::string& id, json payload) {
        std::lock_guard lock(mutex_);
        json j;
        j["id"] = id;
        j["payload"] = std::move(payload);
        std::ofstream out(file_, std::ios::app | std::ios::binary);
        if (!out) throw IoError("cannot append journal " + file_.string());
        out << j.dump() << '\n';
        out.flush();
    }

  private:
    std::filesystem::path file_;
    std::mutex mutex_;
    std::map<std::string, json> entries_;
};

struct StageContext {
    const PipelineConfig& config;
    const Hooks& hooks;
    gateway::Gateway& gw;
    knowledge::MockEmbedder& embedder;
    std::filesystem::path journal_dir;
    std::filesystem::path out_dir;

    std::filesystem::path stage_file(const std::string& name) const {
        static const std::map<std::string, std::string> files = {
            {"ingest", "01_ingested.jsonl"},   {"align", "02_aligned.jsonl"},
            {"stylize", "03_stylized.jsonl"},  {"personalize", "04_personalized.jsonl"},
            {"filter", "05_retained.jsonl"}};
        return out_dir / files.at(name);
    }
};

corpus::ServiceMap service_map_of(const PipelineConfig& config) {
    return config.service_map_file ? corpus::load_service_map(*config.service_map_file)
                                   : corpus::default_service_map();
}

StageRecord stage_ingest(StageContext& ctx) {
    StageRecord record{"ingest", 0, 0};
    auto service_map = service_map_of(ctx.config);
    std::vector<Dialogue> all;
    if (ctx.config.multiwoz_dir) {
        auto loaded = corpus::load_multiwoz(*ctx.config.multiwoz_dir, service_map);
        all.insert(all.end(), loaded.begin(), loaded.end());
    }
    if (ctx.config.sgd_dir) {
        auto loaded = corpus::load_sgd(*ctx.config.sgd_dir, service_map);
        all.insert(all.end(), loaded.begin(), loaded.end());
    }
    record.input_count = all.size();
    all = corpus::exclude_domains(all, ctx.config.excluded_domains);
    corpus::write_canonical(all, ctx.stage_file("ingest"));
    record.output_count = all.size();
    return record;
}

std::vector<align::PersonaImage> images_of(StageContext& ctx) {
    return align::load_images(ctx.config.image_dir, ctx.gw);
}

StageRecord stage_align(StageContext& ctx) {
    auto dialogues = corpus::read_canonical(ctx.stage_file("ingest"));
    StageRecord record{"align", dialogues.size(), 0};

    auto images = images_of(ctx);
    align::GatewayEmotionClassifier classifier(ctx.gw);
    std::vector<Emotion> labels(dialogues.size());
    parallel_for(dialogues.size(), ctx.config.workers, [&](size_t i) {
        labels[i] = align::classify_dialogue_emotion(dialogues[i], classifier);
    });
    for (size_t i = 0; i < dialogues.size(); ++i) dialogues[i].emotion = labels[i];

    auto assignment = align::pair(images, dialogues, ctx.config.seed);
    std::vector<Dialogue> paired;
    std::vector<Dialogue> unpaired;
    for (auto& d : dialogues) {
        auto it = assignment.find(d.id);
        if (it == assignment.end()) {
            unpaired.push_back(std::move(d));
            continue;
        }
        d.image_id = it->second;
        d.status = DialogueStatus::aligned;
        paired.push_back(std::move(d));
    }
    corpus::write_canonical(paired, ctx.stage_file("align"));
    corpus::write_canonical(unpaired, ctx.out_dir / "02_unpaired.jsonl");
    record.output_count = paired.size();
    return record;
}

// Journaled per-dialogue transform: completed dialogues are replayed from
// the journal without provider calls; the output file is rebuilt in input
// order either way.
template <typename Fn>
std::vector<Dialogue> journaled_map(StageContext& ctx, const std::string& stage,
                                    const std::vector<Dialogue>& input, Fn&& transform) {
    Journal journal(ctx.journal_dir / (stage + ".jsonl"));
    std::vector<Dialogue> output(input.size());
    std::atomic<size_t> done{0};
    parallel_for(input.size(), ctx.config.workers, [&](size_t i) {
        const Dialogue& d = input[i];
        if (journal.has(d.id)) {
            output[i] = corpus::dialogue_from_json_line(journal.get(d.id).at("dialogue").get<std::string>());
        } else {
            json payload = transform(d);
            journal.append(d.id, payload);
            output[i] = corpus::dialogue_from_json_line(payload["dialogue"].get<std::string>());
        }
        size_t finished = done.fetch_add(1) + 1;
        if (ctx.hooks.after_dialogue) ctx.hooks.after_dialogue(stage, finished);
    });
    return output;
}

personalize::Personalizer make_personalizer(StageContext& ctx,
                                            const knowledge::KnowledgeStore& store) {
    personalize::ActModeTable table = ctx.config.act_mode_file
                                          ? personalize::load_act_mode_table(*ctx.config.act_mode_file)
                                          : personalize::default_act_mode_table();
    personalize::Options options;
    options.retrieval_k = ctx.config.retrieval_k;
    options.include_wiki_in_retrieval = ctx.config.include_wiki_in_retrieval;
    options.history_window = ctx.config.history_window;
    return personalize::Personalizer(ctx.gw, store, std::move(table), options);
}

StageRecord stage_stylize(StageContext& ctx, const knowledge::KnowledgeStore& store) {
    auto dialogues = corpus::read_canonical(ctx.stage_file("align"));
    StageRecord record{"stylize", dialogues.size(), 0};

    auto images = images_of(ctx);
    std::map<std::string, const align::PersonaImage*> by_id;
    for (const auto& img : images) by_id[img.image_id] = &img;

    auto personalizer = make_personalizer(ctx, store);
    auto output = journaled_map(ctx, "stylize", dialogues, [&](const Dialogue& d) {
        auto it = by_id.find(d.image_id.value());
        if (it == by_id.end()) throw PreconditionError("unknown image " + d.image_id.value());
        Dialogue styled = personalizer.stylize_dialogue(d, *it->second);
        json payload;
        payload["dialogue"] = corpus::dialogue_to_json_line(styled);
        return payload;
    });
    corpus::write_canonical(output, ctx.stage_file("stylize"));
    record.output_count = output.size();
    return record;
}

StageRecord stage_personalize(StageContext& ctx, const knowledge::KnowledgeStore& store) {
    auto dialogues = corpus::read_canonical(ctx.stage_file("stylize"));
    StageRecord record{"personalize", dialogues.size(), 0};

    auto images = images_of(ctx);
    std::map<std::string, const align::PersonaImage*> by_id;
    for (const auto& img : images) by_id[img.image_id] = &img;

    auto personalizer = make_personalizer(ctx, store);
    Journal journal(ctx.journal_dir / "personalize.jsonl");
    std::vector<Dialogue> output(dialogues.size());
    std::vector<json> traces(dialogues.size());
    std::atomic<size_t> done{0};
    parallel_for(dialogues.size(), ctx.config.workers, [&](size_t i) {
        const Dialogue& d = dialogues[i];
        json payload;
        if (journal.has(d.id)) {
            payload = journal.get(d.id);
        } else {
            auto it = by_id.find(d.image_id.value());
            if (it == by_id.end()) throw PreconditionError("unknown image " + d.image_id.value());
            personalize::Result result = personalizer.personalize_dialogue(d, *it->second);
            payload["dialogue"] = corpus::dialogue_to_json_line(result.dialogue);
            json trace_list = json::array();
            for (const auto& t : result.traces) {
                json jt;
                jt["turn"] = t.turn_index;
                jt["requested_mode"] = personalize::to_string(t.requested_mode);
                jt["effective_mode"] = personalize::to_string(t.effective_mode);
                jt["retrieved_count"] = t.retrieved_count;
                trace_list.push_back(jt);
            }
            payload["traces"] = trace_list;
            journal.append(d.id, payload);
        }
        output[i] = corpus::dialogue_from_json_line(payload["dialogue"].get<std::string>());
        traces[i] = payload.value("traces", json::array());
        size_t finished = done.fetch_add(1) + 1;
        if (ctx.hooks.after_dialogue) ctx.hooks.after_dialogue("personalize", finished);
    });

    corpus::write_canonical(output, ctx.stage_file("personalize"));
    {
        std::ofstream modes(ctx.out_dir / "04_modes.jsonl", std::ios::binary);
        if (!modes) throw IoError("cannot write modes sidecar");
        for (size_t i = 0; i < output.size(); ++i) {
            json j;
            j["dialogue_id"] = output[i].id;
            j["traces"] = traces[i];
            modes << j.dump() << '\n';
        }
    }
    record.output_count = output.size();
    return record;
}

std::map<std::string, ImageMetadata> metadata_by_id(StageContext& ctx) {
    std::map<std::string, ImageMetadata> out;
    for (const auto& img : images_of(ctx)) out[img.image_id] = img.metadata;
    return out;
}

StageRecord stage_filter(StageContext& ctx, std::optional<filters::FilterReport>& report_out) {
    auto dialogues = corpus::read_canonical(ctx.stage_file("personalize"));
    StageRecord record{"filter", dialogues.size(), 0};

    filters::Options options;
    options.k_strength = ctx.config.k_strength;
    options.k_direction = ctx.config.k_direction;
    options.fence = filters::fence_mode_from_string(ctx.config.fence_mode);
    options.stages = ctx.config.filter_stages;
    options.workers = ctx.config.workers;

    auto result = filters::filter_corpus(dialogues, metadata_by_id(ctx), ctx.embedder, ctx.gw, options);

    corpus::write_canonical(result.retained, ctx.stage_file("filter"));
    corpus::write_canonical(result.removed, ctx.out_dir / "05_removed.jsonl");
    corpus::write_canonical(result.manual_review, ctx.out_dir / "05_manual_review.jsonl");
    {
        std::ofstream out(ctx.out_dir / "filter_report.json", std::ios::binary);
        if (!out) throw IoError("cannot write filter report");
        out << filters::report_to_json(result.report) << '\n';
    }
    report_out = result.report;
    record.output_count = result.retained.size();
    return record;
}

StageRecord stage_analyze(StageContext& ctx) {
    auto dialogues = corpus::read_canonical(ctx.stage_file("filter"));
    StageRecord record{"analyze", dialogues.size(), dialogues.size()};
    auto analytics = analyze::analyze_corpus(dialogues, ctx.gw);
    auto stats = analyze::corpus_stats(dialogues, metadata_by_id(ctx));
    std::ofstream out(ctx.out_dir / "analytics.json", std::ios::binary);
    if (!out) throw IoError("cannot write analytics");
    out << analyze::analytics_to_json(analytics, stats) << '\n';
    return record;
}

StageRecord stage_eval(StageContext& ctx) {
    auto predictions = evalkit::load_predictions(*ctx.config.eval_predictions);
    StageRecord record{"eval", predictions.size(), 0};
    json j;
    j["jga"] = evalkit::jga(predictions);
    std::set<std::string> domains;
    for (const auto& p : predictions)
        for (const auto& [key, value] : p.gold) {
            (void)value;
            auto dash = key.find('-');
            if (dash != std::string::npos) domains.insert(key.substr(0, dash));
        }
    json per_domain = json::object();
    for (const auto& d : domains) per_domain[d] = evalkit::domain_jga(predictions, d);
    j["domain_jga"] = per_domain;
    std::ofstream out(ctx.out_dir / "eval.json", std::ios::binary);
    if (!out) throw IoError("cannot write eval results");
    out << j.dump(2) << '\n';
    record.output_count = 1 + domains.size();
    return record;
}

}  // namespace

RunManifest run(const PipelineConfig& config, const Hooks& hooks) {
    config.validate();
    std::filesystem::create_directories(config.out_dir);
    std::filesystem::path journal_dir = config.out_dir / "journal";
    std::filesystem::create_directories(journal_dir);

    gateway::GatewayOptions gw_options;
    gw_options.cache_dir = config.cache_dir ? *config.cache_dir : config.out_dir / "cache";
    gateway::Gateway gw(gateway::default_catalog(), gateway::make_mock_provider(), gw_options);
    knowledge::MockEmbedder embedder(config.embedding_dim, config.seed);

    knowledge::KnowledgeStore store;
    for (const auto& file : config.knowledge_files)
        store.ingest(file, knowledge::KnowledgeSource::review);
    store.build_index(embedder);

    StageContext ctx{config, hooks, gw, embedder, journal_dir, config.out_dir};

    RunManifest manifest;
    manifest.tool_version = PTOD_VERSION;
    manifest.config_json = config_to_json(config);
    manifest.config_hash = config_hash(config);

    std::set<std::string> requested(config.stages.begin(), config.stages.end());
    std::map<std::string, double> timings;

    for (const auto& stage : kStageOrder) {
        if (!requested.count(stage)) continue;
        auto start = std::chrono::steady_clock::now();
        try {
            if (stage == "ingest") manifest.stages.push_back(stage_ingest(ctx));
            else if (stage == "align") manifest.stages.push_back(stage_align(ctx));
            else if (stage == "stylize") manifest.stages.push_back(stage_stylize(ctx, store));
            else if (stage == "personalize") manifest.stages.push_back(stage_personalize(ctx, store));
            else if (stage == "filter") manifest.stages.push_back(stage_filter(ctx, manifest.filter_report));
            else if (stage == "analyze") manifest.stages.push_back(stage_analyze(ctx));
            else if (stage == "eval") manifest.stages.push_back(stage_eval(ctx));
            else if (stage == "report") {
                auto stats = gw.stats();
                manifest.provider_calls = stats.provider_calls;
                manifest.cache_hits = stats.cache_hits;
                manifest.distinct_cache_keys = stats.distinct_keys;
                write_report_files(config.out_dir, manifest);
                manifest.stages.push_back({"report", 0, 0});
            }
        } catch (const std::exception& e) {
            manifest.failed_stage = stage;
            manifest.error = e.what();
            break;
        }
        timings[stage] =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }

    auto stats = gw.stats();
    manifest.provider_calls = stats.provider_calls;
    manifest.cache_hits = stats.cache_hits;
    manifest.distinct_cache_keys = stats.distinct_keys;

    {
        std::ofstream out(config.out_dir / "manifest.json", std::ios::binary);
        if (!out) throw IoError("cannot write manifest");
        out << manifest_to_json(manifest) << '\n';
    }
    {
        json jt(timings);
        std::ofstream out(config.out_dir / "timings.json", std::ios::binary);
        if (!out) throw IoError("cannot write timings");
        out << jt.dump(2) << '\n';
    }
    return manifest;
}

}  // namespace ptod::pipeline
