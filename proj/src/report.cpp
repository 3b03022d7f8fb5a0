#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>

#include <json.hpp>

#include "ptod/errors.hpp"
#include "ptod/pipeline.hpp"

namespace ptod::pipeline {

namespace {

using nlohmann::json;

std::optional<json> read_json_sidecar(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) return std::nullopt;
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) return std::nullopt;
    return j;
}

std::string pct(double fraction) {
    std::ostringstream out;
    out << std::fixed << std::setprecision(2) << fraction * 100.0 << '%';
    return out.str();
}

std::string fixed2(double v) {
    std::ostringstream out;
    out << std::fixed << std::setprecision(2) << v;
    return out.str();
}

void rule(std::ostream& out, const std::string& title) {
    out << title << '\n' << std::string(title.size(), '-') << '\n';
}

struct FilterStageRow {
    std::string name;
    size_t input = 0;
    size_t removed = 0;
    size_t manual = 0;
    size_t retained() const { return input - removed - manual; }
};

// The filter section prefers the manifest's embedded report and falls back
// to the sidecar, so a standalone `report` invocation still renders it.
std::optional<json> filter_json(const std::filesystem::path& out_dir, const RunManifest& manifest) {
    if (manifest.filter_report)
        return json::parse(filters::report_to_json(*manifest.filter_report));
    return read_json_sidecar(out_dir / "filter_report.json");
}

std::vector<FilterStageRow> filter_rows(const json& report) {
    std::vector<FilterStageRow> rows;
    for (const auto& s : report.at("stages")) {
        FilterStageRow row;
        row.name = s.at("name").get<std::string>();
        row.input = s.at("input_count").get<size_t>();
        row.removed = s.at("removed_ids").size();
        row.manual = s.at("manual_review_ids").size();
        rows.push_back(row);
    }
    return rows;
}

}  // namespace

void write_report_files(const std::filesystem::path& out_dir, const RunManifest& manifest) {
    auto filter = filter_json(out_dir, manifest);
    auto analytics = read_json_sidecar(out_dir / "analytics.json");

    std::ofstream txt(out_dir / "report.txt", std::ios::binary);
    if (!txt) throw IoError("cannot write report.txt");

    txt << "personalized dialogue pipeline report\n";
    txt << "=====================================\n";
    txt << "tool version : " << manifest.tool_version << '\n';
    txt << "config hash  : " << manifest.config_hash << '\n';
    txt << "provider calls " << manifest.provider_calls << ", cache hits " << manifest.cache_hits
        << ", distinct keys " << manifest.distinct_cache_keys << "\n\n";

    rule(txt, "stages");
    size_t name_w = 6;
    for (const auto& s : manifest.stages) name_w = std::max(name_w, s.name.size());
    txt << std::left << std::setw(static_cast<int>(name_w) + 2) << "name" << std::right
        << std::setw(8) << "input" << std::setw(8) << "output" << '\n';
    for (const auto& s : manifest.stages)
        txt << std::left << std::setw(static_cast<int>(name_w) + 2) << s.name << std::right
            << std::setw(8) << s.input_count << std::setw(8) << s.output_count << '\n';
    txt << '\n';

    if (filter) {
        auto rows = filter_rows(*filter);
        rule(txt, "filter stages");
        txt << std::left << std::setw(14) << "stage" << std::right << std::setw(8) << "input"
            << std::setw(9) << "removed" << std::setw(8) << "manual" << std::setw(10) << "retained"
            << '\n';
        for (const auto& r : rows)
            txt << std::left << std::setw(14) << r.name << std::right << std::setw(8) << r.input
                << std::setw(9) << r.removed << std::setw(8) << r.manual << std::setw(10)
                << r.retained() << '\n';
        size_t input = filter->at("input_count").get<size_t>();
        size_t retained = filter->at("retained_count").get<size_t>();
        txt << "retention: " << retained << '/' << input << " ("
            << pct(filter->at("retention_fraction").get<double>()) << "), fence mode "
            << filter->at("fence_mode").get<std::string>() << '\n';
        txt << '\n';

        std::ofstream csv(out_dir / "filter_stages.csv", std::ios::binary);
        if (!csv) throw IoError("cannot write filter_stages.csv");
        csv << "stage,input_count,removed_count,manual_review_count,retained_count\n";
        for (const auto& r : rows)
            csv << r.name << ',' << r.input << ',' << r.removed << ',' << r.manual << ','
                << r.retained() << '\n';
    }

    if (analytics) {
        const auto& hist = analytics->at("emotion_histogram");
        rule(txt, "emotion distribution");
        txt << std::left << std::setw(16) << "label" << std::right << std::setw(10) << "share"
            << '\n';
        double total = 0.0;
        for (auto it = hist.begin(); it != hist.end(); ++it) {
            double p = it.value().get<double>();
            total += p;
            txt << std::left << std::setw(16) << it.key() << std::right << std::setw(10) << pct(p)
                << '\n';
        }
        txt << std::left << std::setw(16) << "total" << std::right << std::setw(10) << pct(total)
            << '\n';
        txt << "classified " << analytics->at("emotion_classified").get<size_t>()
            << ", unclassified " << analytics->at("emotion_unclassified").get<size_t>() << "\n\n";

        rule(txt, "style analytics");
        txt << "word level (grade years): "
            << fixed2(analytics->at("word_level_years").get<double>()) << '\n';
        txt << "politeness score: " << fixed2(analytics->at("politeness_score").get<double>())
            << '\n';
        txt << "avg turns per dialogue: "
            << fixed2(analytics->at("avg_turns_per_dialogue").get<double>()) << '\n';
        txt << "avg tokens per utterance: "
            << fixed2(analytics->at("avg_tokens_per_utterance").get<double>()) << '\n';

        std::ofstream csv(out_dir / "emotion_histogram.csv", std::ios::binary);
        if (!csv) throw IoError("cannot write emotion_histogram.csv");
        csv << "emotion,proportion,share_percent\n";
        csv << std::setprecision(17);
        for (auto it = hist.begin(); it != hist.end(); ++it)
            csv << it.key() << ',' << it.value().get<double>() << ','
                << it.value().get<double>() * 100.0 << '\n';
    }
}

}  // namespace ptod::pipeline
