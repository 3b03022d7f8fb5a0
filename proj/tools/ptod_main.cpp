#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "ptod/corpus.hpp"
#include "ptod/errors.hpp"
#include "ptod/evalkit.hpp"
#include "ptod/pipeline.hpp"
#include "ptod/util/strings.hpp"

namespace {

using nlohmann::json;
using namespace ptod;

struct Overrides {
    std::optional<std::string> out;
    std::optional<std::string> source;  // multiwoz | sgd
    std::optional<std::string> exclude_domains;
    std::optional<std::string> fence;
    std::optional<std::string> filter_stages;
    std::optional<uint64_t> seed;
    std::optional<size_t> workers;
};

void apply(pipeline::PipelineConfig& config, const Overrides& o) {
    if (o.out) config.out_dir = *o.out;
    if (o.source) {
        if (*o.source == "multiwoz") config.sgd_dir.reset();
        else if (*o.source == "sgd") config.multiwoz_dir.reset();
        else throw ValidationError("--source must be multiwoz or sgd");
    }
    if (o.exclude_domains) {
        config.excluded_domains.clear();
        for (const auto& d : split(*o.exclude_domains, ','))
            if (!trim(d).empty()) config.excluded_domains.insert(trim(d));
    }
    if (o.fence) config.fence_mode = *o.fence;
    if (o.filter_stages) {
        config.filter_stages.clear();
        for (const auto& s : split(*o.filter_stages, ','))
            if (!trim(s).empty()) config.filter_stages.insert(trim(s));
    }
    if (o.seed) config.seed = *o.seed;
    if (o.workers) config.workers = *o.workers;
}

int run_stages(const std::string& config_file, const Overrides& overrides,
               const std::vector<std::string>& stages) {
    auto config = pipeline::load_config(config_file);
    apply(config, overrides);
    if (!stages.empty()) config.stages = stages;

    auto manifest = pipeline::run(config);
    for (const auto& s : manifest.stages)
        std::cout << s.name << ": " << s.input_count << " -> " << s.output_count << '\n';
    if (manifest.failed_stage) {
        std::cerr << "stage '" << *manifest.failed_stage << "' failed: " << manifest.error << '\n';
        return 1;
    }
    std::cout << "manifest: " << (config.out_dir / "manifest.json").string() << '\n';
    return 0;
}

void add_common(CLI::App* cmd, std::string& config_file, Overrides& o) {
    cmd->add_option("--config", config_file, "pipeline config file")->required();
    cmd->add_option("--out", o.out, "output directory (overrides config)");
    cmd->add_option("--seed", o.seed, "run seed (overrides config)");
    cmd->add_option("--workers", o.workers, "worker cap (overrides config)");
}

std::vector<std::vector<PolicyAct>> parse_act_sets(const json& rows, const char* key) {
    std::vector<std::vector<PolicyAct>> out;
    for (const auto& row : rows) {
        std::vector<PolicyAct> acts;
        for (const auto& triple : row.at(key)) {
            if (!triple.is_array() || triple.size() != 3)
                throw ValidationError(std::string(key) + " entries must be [act, domain, slot]");
            acts.push_back({triple[0].get<std::string>(), triple[1].get<std::string>(),
                            triple[2].get<std::string>()});
        }
        out.push_back(std::move(acts));
    }
    return out;
}

json read_jsonl_rows(const std::string& file) {
    std::ifstream in(file);
    if (!in) throw IoError("cannot open " + file);
    json rows = json::array();
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        rows.push_back(json::parse(line));
    }
    return rows;
}

// CSV matrix, one row per rater, empty cells for missing ratings.
std::vector<std::vector<std::optional<double>>> load_ratings_csv(const std::string& file) {
    std::ifstream in(file);
    if (!in) throw IoError("cannot open " + file);
    std::vector<std::vector<std::optional<double>>> ratings;
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        std::vector<std::optional<double>> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            cell = trim(cell);
            if (cell.empty()) row.push_back(std::nullopt);
            else row.push_back(std::stod(cell));
        }
        if (!line.empty() && line.back() == ',') row.push_back(std::nullopt);
        ratings.push_back(std::move(row));
    }
    return ratings;
}

Dialogue original_view(const Dialogue& d) {
    Dialogue copy = d;
    for (auto& t : copy.turns) {
        t.revised_user.reset();
        t.personalized_system.reset();
    }
    return copy;
}

void emit(const std::string& text, const std::optional<std::string>& out_file) {
    std::cout << text;
    if (out_file) {
        std::ofstream out(*out_file, std::ios::binary);
        if (!out) throw IoError("cannot write " + *out_file);
        out << text;
    }
}

int run_eval(const std::string& metric, const std::optional<std::string>& predictions,
             const std::optional<std::string>& acts, const std::optional<std::string>& corpus_file,
             const std::optional<std::string>& ratings, const std::optional<std::string>& domain,
             const std::string& level, uint64_t seed, const std::optional<std::string>& out_file) {
    std::ostringstream out;
    out.setf(std::ios::fixed);
    out.precision(6);

    if (metric == "jga" || metric == "domain-jga") {
        if (!predictions) throw ValidationError("--predictions required for " + metric);
        auto preds = evalkit::load_predictions(*predictions);
        if (metric == "jga") {
            out << "jga\t" << evalkit::jga(preds) << '\n';
        } else if (domain) {
            out << "domain_jga[" << *domain << "]\t" << evalkit::domain_jga(preds, *domain) << '\n';
        } else {
            std::set<std::string> domains;
            for (const auto& p : preds)
                for (const auto& [key, value] : p.gold) {
                    (void)value;
                    auto dash = key.find('-');
                    if (dash != std::string::npos) domains.insert(key.substr(0, dash));
                }
            for (const auto& d : domains)
                out << "domain_jga[" << d << "]\t" << evalkit::domain_jga(preds, d) << '\n';
        }
    } else if (metric == "entity-f1") {
        if (!acts) throw ValidationError("--acts required for entity-f1");
        json rows = read_jsonl_rows(*acts);
        out << "entity_f1\t"
            << evalkit::entity_f1(parse_act_sets(rows, "predicted_acts"),
                                  parse_act_sets(rows, "gold_acts"))
            << '\n';
    } else if (metric == "judge" || metric == "pairwise") {
        if (!corpus_file) throw ValidationError("--corpus required for " + metric);
        auto dialogues = corpus::read_canonical(*corpus_file);
        gateway::Gateway gw(gateway::default_catalog(), gateway::make_mock_provider(), {});
        if (metric == "judge") {
            std::map<std::string, double> sums;
            size_t valid = 0, invalid = 0;
            for (const auto& d : dialogues) {
                auto card = evalkit::judge_battery(d, d, gw, "judge-1");
                if (!card.valid) { ++invalid; continue; }
                ++valid;
                for (const auto& [q, a] : card.answers) sums[q] += a;
            }
            for (const auto& [q, total] : sums)
                out << q << "\t" << (valid ? total / static_cast<double>(valid) : 0.0) << '\n';
            out << "valid\t" << valid << "\ninvalid\t" << invalid << '\n';
        } else {
            std::vector<evalkit::PairwiseVerdict> verdicts;
            for (size_t i = 0; i < dialogues.size(); ++i)
                verdicts.push_back(evalkit::pairwise_compare(
                    dialogues[i], original_view(dialogues[i]), gw, seed + i));
            auto agg = evalkit::aggregate_pairwise(verdicts);
            out << "win\t" << agg.win_pct << "\ntie\t" << agg.tie_pct << "\nloss\t" << agg.loss_pct
                << '\n';
            out << "invalid\t" << agg.invalid << '\n';
        }
    } else if (metric == "alpha") {
        if (!ratings) throw ValidationError("--ratings required for alpha");
        auto matrix = load_ratings_csv(*ratings);
        auto alpha_level =
            level == "interval" ? evalkit::AlphaLevel::interval : evalkit::AlphaLevel::ordinal;
        auto result = evalkit::krippendorff_alpha(matrix, alpha_level);
        out << "alpha\t" << result.value << '\n';
        if (result.degenerate) out << "degenerate\ttrue\n";
    } else {
        throw ValidationError("unknown metric " + metric);
    }

    emit(out.str(), out_file);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"persona-grounded dialogue personalization pipeline"};
    app.require_subcommand(1);

    std::string config_file;
    Overrides overrides;

    struct StageCmd {
        const char* name;
        const char* help;
        std::vector<std::string> stages;
    };
    // analyze also renders the report so its tables land next to the data
    const std::vector<StageCmd> stage_cmds = {
        {"ingest", "load sources into the canonical corpus", {"ingest"}},
        {"align", "classify emotions and pair dialogues with images", {"align"}},
        {"stylize", "rewrite user utterances in persona style", {"stylize"}},
        {"personalize", "generate personalized system responses", {"personalize"}},
        {"filter", "apply the four quality filters", {"filter"}},
        {"analyze", "compute corpus analytics and render the report", {"analyze", "report"}},
        {"report", "render report tables from existing outputs", {"report"}},
        {"run", "execute the configured stage list", {}},
    };

    std::map<std::string, const StageCmd*> dispatch;
    for (const auto& sc : stage_cmds) {
        auto* cmd = app.add_subcommand(sc.name, sc.help);
        add_common(cmd, config_file, overrides);
        if (std::string(sc.name) == "ingest") {
            cmd->add_option("--source", overrides.source, "restrict to one source: multiwoz|sgd");
            cmd->add_option("--exclude-domains", overrides.exclude_domains,
                            "comma-separated domains to drop");
        }
        if (std::string(sc.name) == "filter") {
            cmd->add_option("--stages", overrides.filter_stages,
                            "comma-separated filter stages (strength,direction,semantic,naturalness)");
            cmd->add_option("--fence", overrides.fence, "fence mode: tukey|absolute");
        }
        if (std::string(sc.name) == "run") {
            cmd->add_option("--fence", overrides.fence, "fence mode: tukey|absolute");
        }
        dispatch[sc.name] = &sc;
    }

    auto* eval_cmd = app.add_subcommand("eval", "evaluate predictions or a corpus");
    std::string metric;
    std::optional<std::string> predictions, acts, corpus_file, ratings, domain, eval_out;
    std::string level = "ordinal";
    uint64_t eval_seed = 0;
    eval_cmd->add_option("--metric", metric, "jga|domain-jga|entity-f1|judge|pairwise|alpha")
        ->required();
    eval_cmd->add_option("--predictions", predictions, "JSONL state predictions");
    eval_cmd->add_option("--acts", acts, "JSONL act predictions (predicted_acts/gold_acts)");
    eval_cmd->add_option("--corpus", corpus_file, "canonical corpus file");
    eval_cmd->add_option("--ratings", ratings, "CSV ratings matrix, rows are raters");
    eval_cmd->add_option("--domain", domain, "single domain for domain-jga");
    eval_cmd->add_option("--level", level, "alpha level: ordinal|interval");
    eval_cmd->add_option("--seed", eval_seed, "presentation seed for pairwise");
    eval_cmd->add_option("--out", eval_out, "also write the metric table to this file");

    CLI11_PARSE(app, argc, argv);

    try {
        if (eval_cmd->parsed())
            return run_eval(metric, predictions, acts, corpus_file, ratings, domain, level,
                            eval_seed, eval_out);
        for (const auto& [name, sc] : dispatch)
            if (app.get_subcommand(name)->parsed())
                return run_stages(config_file, overrides, sc->stages);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
