#include "ptod/filters.hpp"

#include <algorithm>

#include <json.hpp>

#include "ptod/util/parallel.hpp"
#include "ptod/util/quantile.hpp"
#include "ptod/util/strings.hpp"

namespace ptod::filters {

using nlohmann::json;

std::string to_string(FenceMode m) { return m == FenceMode::tukey ? "tukey" : "absolute"; }

FenceMode fence_mode_from_string(const std::string& s) {
    if (s == "tukey") return FenceMode::tukey;
    if (s == "absolute") return FenceMode::absolute;
    throw ValidationError("unknown fence mode '" + s + "'");
}

std::string metadata_class_key(const ImageMetadata& m, bool include_gender) {
    std::string key = to_string(m.age_group) + "|" + to_string(m.formality) + "|" +
                      to_string(m.emotion);
    if (include_gender) key += "|" + to_string(m.gender);
    return key;
}

namespace {

// System turns eligible for style scoring: nonempty original response.
std::vector<const Turn*> system_turns(const Dialogue& d) {
    std::vector<const Turn*> turns;
    for (const auto& t : d.turns)
        if (!t.system_utterance.empty()) turns.push_back(&t);
    return turns;
}

void require_personalized(const Dialogue& d, const std::vector<const Turn*>& turns) {
    if (turns.empty())
        throw PreconditionError("dialogue " + d.id + " has no system turns to score");
    for (const Turn* t : turns)
        if (!t->personalized_system || t->personalized_system->empty())
            throw PreconditionError("dialogue " + d.id + " turn " + std::to_string(t->index) +
                                    " is not personalized");
}

}  // namespace

double personalization_strength(const Dialogue& d, const knowledge::Embedder& embedder) {
    auto turns = system_turns(d);
    require_personalized(d, turns);
    double sum = 0.0;
    for (const Turn* t : turns)
        sum += euclidean_distance(embedder.embed(*t->personalized_system),
                                  embedder.embed(t->system_utterance));
    return sum / static_cast<double>(turns.size());
}

Vec personalization_vector(const Dialogue& d, const knowledge::Embedder& embedder) {
    auto turns = system_turns(d);
    require_personalized(d, turns);
    Vec sum = Vec::Zero(embedder.dim());
    for (const Turn* t : turns)
        sum += embedder.embed(*t->personalized_system) - embedder.embed(t->system_utterance);
    return sum / static_cast<double>(turns.size());
}

std::vector<StyleScores> compute_style_scores(
    const std::vector<Dialogue>& dialogues,
    const std::map<std::string, ImageMetadata>& image_metadata,
    const knowledge::Embedder& embedder, const Options& options) {
    std::vector<StyleScores> scores(dialogues.size());
    parallel_for(dialogues.size(), options.workers, [&](size_t i) {
        const Dialogue& d = dialogues[i];
        if (!d.image_id) throw PreconditionError("dialogue " + d.id + " has no image");
        auto it = image_metadata.find(*d.image_id);
        if (it == image_metadata.end())
            throw PreconditionError("no metadata for image " + *d.image_id);
        StyleScores s;
        s.dialogue_id = d.id;
        s.ps = personalization_strength(d, embedder);
        s.pv = personalization_vector(d, embedder);
        s.metadata_class = metadata_class_key(it->second, options.class_includes_gender);
        scores[i] = std::move(s);
    });
    return scores;
}

namespace {

std::map<std::string, std::vector<size_t>> group_by_class(const std::vector<StyleScores>& scores) {
    std::map<std::string, std::vector<size_t>> groups;
    for (size_t i = 0; i < scores.size(); ++i)
        groups[scores[i].metadata_class].push_back(i);
    return groups;
}

}  // namespace

std::set<std::string> strength_removals(const std::vector<StyleScores>& scores,
                                        const Options& options,
                                        std::map<std::string, double>* fences) {
    std::set<std::string> removed;
    for (const auto& [cls, indices] : group_by_class(scores)) {
        if (indices.size() < options.min_class_size) continue;
        std::vector<double> values;
        values.reserve(indices.size());
        for (size_t i : indices) values.push_back(scores[i].ps);
        Quartiles q = quartiles(values);
        double fence = options.fence == FenceMode::tukey ? q.q1 - options.k_strength * q.iqr()
                                                         : options.k_strength * q.iqr();
        if (fences) (*fences)[cls] = fence;
        for (size_t i : indices)
            if (scores[i].ps < fence) removed.insert(scores[i].dialogue_id);
    }
    return removed;
}

std::set<std::string> direction_removals(std::vector<StyleScores>& scores, const Options& options,
                                         std::map<std::string, double>* fences) {
    std::set<std::string> removed;
    for (const auto& [cls, indices] : group_by_class(scores)) {
        // class mean PV and per-dialogue distance to it
        Vec mean = Vec::Zero(scores[indices.front()].pv.size());
        for (size_t i : indices) mean += scores[i].pv;
        mean /= static_cast<double>(indices.size());
        for (size_t i : indices) scores[i].pd = euclidean_distance(mean, scores[i].pv);

        if (indices.size() < options.min_class_size) continue;
        std::vector<double> values;
        values.reserve(indices.size());
        for (size_t i : indices) values.push_back(scores[i].pd);
        Quartiles q = quartiles(values);
        double fence = options.fence == FenceMode::tukey ? q.q3 + options.k_direction * q.iqr()
                                                         : options.k_direction * q.iqr();
        if (fences) (*fences)[cls] = fence;
        for (size_t i : indices)
            if (scores[i].pd > fence) removed.insert(scores[i].dialogue_id);
    }
    return removed;
}

namespace {

bool ask_yes_no(gateway::Gateway& gw, const std::string& template_id,
                std::map<std::string, std::string> bindings) {
    gateway::CompletionRequest request;
    request.template_id = template_id;
    request.bindings = std::move(bindings);
    return gw.complete(request).text == "yes";
}

// Values that newly appear (or change) in this turn's state.
std::vector<std::string> new_state_values(const Dialogue& d, size_t turn_index) {
    const auto& current = d.turns[turn_index].dialogue_state;
    const std::map<std::string, std::string> empty;
    const auto& previous = turn_index == 0 ? empty : d.turns[turn_index - 1].dialogue_state;
    std::vector<std::string> values;
    for (const auto& [key, value] : current) {
        auto it = previous.find(key);
        if (it == previous.end() || it->second != value) values.push_back(value);
    }
    return values;
}

// DB facts the personalized response must keep: values of db_results keys
// named by this turn's entity-act slots, plus the entity name itself.
std::vector<std::string> required_system_facts(const Turn& turn) {
    std::vector<std::string> facts;
    if (!turn.db_results) return facts;
    bool entity_act = false;
    for (const auto& act : turn.policy_acts) {
        if (act.act == "INFORM" || act.act == "RECOMMEND" || act.act == "OFFER" ||
            act.act == "SELECT") {
            entity_act = true;
            auto it = turn.db_results->find(act.slot);
            if (it != turn.db_results->end() && !it->second.empty()) facts.push_back(it->second);
        }
    }
    if (entity_act) {
        auto it = turn.db_results->find("name");
        if (it != turn.db_results->end() && !it->second.empty()) facts.push_back(it->second);
    }
    std::sort(facts.begin(), facts.end());
    facts.erase(std::unique(facts.begin(), facts.end()), facts.end());
    return facts;
}

}  // namespace

JudgeOutcome semantic_check(const Dialogue& d, gateway::Gateway& gw) {
    JudgeOutcome outcome;
    try {
        for (size_t i = 0; i < d.turns.size(); ++i) {
            const Turn& turn = d.turns[i];
            auto user_values = new_state_values(d, i);
            if (!user_values.empty() && turn.revised_user && !turn.revised_user->empty()) {
                if (!ask_yes_no(gw, "semantic_check_user",
                                {{"required", join(user_values, "\n")},
                                 {"utterance", *turn.revised_user}})) {
                    outcome.keep = false;
                    outcome.findings.push_back("turn " + std::to_string(turn.index) +
                                               ": revised user utterance drops state values");
                }
            }
            auto facts = required_system_facts(turn);
            if (!facts.empty() && turn.personalized_system && !turn.personalized_system->empty()) {
                if (!ask_yes_no(gw, "semantic_check_system",
                                {{"required", join(facts, "\n")},
                                 {"utterance", *turn.personalized_system}})) {
                    outcome.keep = false;
                    outcome.findings.push_back("turn " + std::to_string(turn.index) +
                                               ": personalized response drops required facts");
                }
            }
        }
    } catch (const ContractError&) {
        outcome.keep = false;
        outcome.manual_review = true;
        outcome.findings.push_back("judge contract failure; routed to manual review");
    }
    return outcome;
}

JudgeOutcome naturalness_check(const Dialogue& d, gateway::Gateway& gw) {
    JudgeOutcome outcome;
    std::string rendered;
    for (const auto& turn : d.turns) {
        rendered += "USER: " + turn.revised_user.value_or(turn.user_utterance) + "\n";
        std::string sys = turn.personalized_system.value_or(turn.system_utterance);
        if (!turn.system_utterance.empty() || !sys.empty())
            rendered += "SYSTEM: " + sys + "\n";
    }
    try {
        if (!ask_yes_no(gw, "naturalness_check", {{"dialogue", rendered}})) {
            outcome.keep = false;
            outcome.findings.push_back("whole-dialogue naturalness judgement failed");
        }
    } catch (const ContractError&) {
        outcome.keep = false;
        outcome.manual_review = true;
        outcome.findings.push_back("judge contract failure; routed to manual review");
    }
    return outcome;
}

namespace {

StageReport make_stage_report(const std::string& name, size_t input_count,
                              const std::set<std::string>& removed) {
    StageReport report;
    report.name = name;
    report.input_count = input_count;
    report.removed_ids.assign(removed.begin(), removed.end());
    report.removal_fraction =
        input_count == 0 ? 0.0 : static_cast<double>(removed.size()) / static_cast<double>(input_count);
    return report;
}

}  // namespace

FilterResult filter_corpus(const std::vector<Dialogue>& dialogues,
                           const std::map<std::string, ImageMetadata>& image_metadata,
                           const knowledge::Embedder& embedder, gateway::Gateway& gw,
                           const Options& options) {
    FilterResult result;
    result.report.fence_mode = to_string(options.fence);
    result.report.k_strength = options.k_strength;
    result.report.k_direction = options.k_direction;
    result.report.input_count = dialogues.size();

    std::vector<Dialogue> pool = dialogues;

    auto remove_from_pool = [&](const std::set<std::string>& ids, FilterReason reason) {
        std::vector<Dialogue> kept;
        kept.reserve(pool.size());
        for (auto& d : pool) {
            if (ids.count(d.id)) {
                d.status = DialogueStatus::filtered;
                d.filter_reason = reason;
                result.removed.push_back(std::move(d));
            } else {
                kept.push_back(std::move(d));
            }
        }
        pool = std::move(kept);
    };

    bool needs_scores = options.stages.count("strength") || options.stages.count("direction");
    std::vector<StyleScores> scores;
    if (needs_scores && !pool.empty())
        scores = compute_style_scores(pool, image_metadata, embedder, options);

    auto drop_scores = [&scores](const std::set<std::string>& removed) {
        scores.erase(std::remove_if(scores.begin(), scores.end(),
                                    [&](const StyleScores& s) { return removed.count(s.dialogue_id); }),
                     scores.end());
    };

    if (options.stages.count("strength")) {
        std::map<std::string, double> fences;
        std::set<std::string> removed = strength_removals(scores, options, &fences);
        StageReport stage = make_stage_report("strength", pool.size(), removed);
        stage.fence_by_class = std::move(fences);
        remove_from_pool(removed, FilterReason::strength);
        drop_scores(removed);
        result.report.stages.push_back(std::move(stage));
    }

    if (options.stages.count("direction")) {
        std::map<std::string, double> fences;
        std::set<std::string> removed = direction_removals(scores, options, &fences);
        StageReport stage = make_stage_report("direction", pool.size(), removed);
        stage.fence_by_class = std::move(fences);
        remove_from_pool(removed, FilterReason::direction);
        drop_scores(removed);
        result.report.stages.push_back(std::move(stage));
    }

    auto run_judge_stage = [&](const std::string& name, FilterReason reason,
                               JudgeOutcome (*check)(const Dialogue&, gateway::Gateway&)) {
        StageReport stage;
        stage.name = name;
        stage.input_count = pool.size();
        std::vector<JudgeOutcome> outcomes(pool.size());
        parallel_for(pool.size(), options.workers,
                     [&](size_t i) { outcomes[i] = check(pool[i], gw); });
        std::set<std::string> removed;
        std::set<std::string> manual;
        for (size_t i = 0; i < pool.size(); ++i) {
            if (outcomes[i].manual_review) manual.insert(pool[i].id);
            else if (!outcomes[i].keep) removed.insert(pool[i].id);
            if (!outcomes[i].findings.empty()) stage.findings[pool[i].id] = outcomes[i].findings;
        }
        stage.removed_ids.assign(removed.begin(), removed.end());
        stage.manual_review_ids.assign(manual.begin(), manual.end());
        stage.removal_fraction = stage.input_count == 0
                                     ? 0.0
                                     : static_cast<double>(removed.size()) /
                                           static_cast<double>(stage.input_count);

        std::vector<Dialogue> kept;
        kept.reserve(pool.size());
        for (auto& d : pool) {
            if (removed.count(d.id)) {
                d.status = DialogueStatus::filtered;
                d.filter_reason = reason;
                result.removed.push_back(std::move(d));
            } else if (manual.count(d.id)) {
                result.manual_review.push_back(std::move(d));
            } else {
                kept.push_back(std::move(d));
            }
        }
        pool = std::move(kept);
        result.report.stages.push_back(std::move(stage));
    };

    if (options.stages.count("semantic"))
        run_judge_stage("semantic", FilterReason::semantic, &semantic_check);
    if (options.stages.count("naturalness"))
        run_judge_stage("naturalness", FilterReason::naturalness, &naturalness_check);

    for (auto& d : pool) d.status = DialogueStatus::retained;
    result.retained = std::move(pool);
    result.report.retained_count = result.retained.size();
    result.report.retention_fraction =
        dialogues.empty() ? 1.0
                          : static_cast<double>(result.retained.size()) /
                                static_cast<double>(dialogues.size());
    return result;
}

std::string report_to_json(const FilterReport& report) {
    json j;
    j["fence_mode"] = report.fence_mode;
    j["quantile_method"] = report.quantile_method;
    j["k_strength"] = report.k_strength;
    j["k_direction"] = report.k_direction;
    j["input_count"] = report.input_count;
    j["retained_count"] = report.retained_count;
    j["retention_fraction"] = report.retention_fraction;
    json stages = json::array();
    for (const auto& s : report.stages) {
        json js;
        js["name"] = s.name;
        js["input_count"] = s.input_count;
        js["removed_ids"] = s.removed_ids;
        js["manual_review_ids"] = s.manual_review_ids;
        js["fence_by_class"] = s.fence_by_class;
        js["findings"] = s.findings;
        js["removal_fraction"] = s.removal_fraction;
        stages.push_back(js);
    }
    j["stages"] = stages;
    return j.dump(2);
}

}  // namespace ptod::filters
