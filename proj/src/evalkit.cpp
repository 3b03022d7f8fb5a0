#include "ptod/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "ptod/util/rng.hpp"
#include "ptod/util/sha256.hpp"
#include "ptod/util/strings.hpp"

namespace ptod::evalkit {

using nlohmann::json;

std::vector<StatePrediction> load_predictions(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open predictions " + path.string());
    std::vector<StatePrediction> out;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
        StatePrediction p;
        p.dialogue_id = j.value("dialogue_id", "");
        p.turn = j.value("turn", 0);
        if (!j.contains("gold"))
            throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": missing gold");
        p.predicted = j.value("predicted", std::map<std::string, std::string>{});
        p.gold = j["gold"].get<std::map<std::string, std::string>>();
        out.push_back(std::move(p));
    }
    return out;
}

namespace {

std::map<std::string, std::string> normalized(const std::map<std::string, std::string>& state) {
    std::map<std::string, std::string> out;
    for (const auto& [key, value] : state) out[to_lower(trim(key))] = normalize_value(value);
    return out;
}

std::map<std::string, std::string> restricted(const std::map<std::string, std::string>& state,
                                              const std::string& domain) {
    std::map<std::string, std::string> out;
    std::string prefix = domain + "-";
    for (const auto& [key, value] : state)
        if (key.rfind(prefix, 0) == 0) out[key] = value;
    return out;
}

}  // namespace

double jga(const std::vector<StatePrediction>& predictions) {
    if (predictions.empty()) throw PreconditionError("jga requires at least one prediction");
    size_t exact = 0;
    for (const auto& p : predictions)
        if (normalized(p.predicted) == normalized(p.gold)) ++exact;
    return static_cast<double>(exact) / static_cast<double>(predictions.size());
}

double domain_jga(const std::vector<StatePrediction>& predictions, const std::string& domain) {
    if (predictions.empty()) throw PreconditionError("jga requires at least one prediction");
    std::string d = to_lower(trim(domain));
    size_t exact = 0;
    for (const auto& p : predictions)
        if (restricted(normalized(p.predicted), d) == restricted(normalized(p.gold), d)) ++exact;
    return static_cast<double>(exact) / static_cast<double>(predictions.size());
}

double entity_f1(const std::vector<std::vector<PolicyAct>>& predicted,
                 const std::vector<std::vector<PolicyAct>>& gold) {
    if (predicted.size() != gold.size())
        throw PreconditionError("entity_f1: prediction and gold turn counts differ");
    if (predicted.empty()) throw PreconditionError("entity_f1 requires at least one turn");

    double sum = 0.0;
    for (size_t t = 0; t < predicted.size(); ++t) {
        std::set<PolicyAct> p(predicted[t].begin(), predicted[t].end());
        std::set<PolicyAct> g(gold[t].begin(), gold[t].end());
        if (p.empty() && g.empty()) {
            sum += 1.0;
            continue;
        }
        if (p.empty() || g.empty()) continue;  // scores 0
        size_t overlap = 0;
        for (const auto& act : p)
            if (g.count(act)) ++overlap;
        if (overlap == 0) continue;
        double precision = static_cast<double>(overlap) / static_cast<double>(p.size());
        double recall = static_cast<double>(overlap) / static_cast<double>(g.size());
        sum += 2.0 * precision * recall / (precision + recall);
    }
    return sum / static_cast<double>(predicted.size());
}

namespace {

std::string render_for_judge(const Dialogue& d, bool personalized) {
    std::string out;
    for (const auto& turn : d.turns) {
        std::string user = personalized ? turn.revised_user.value_or(turn.user_utterance)
                                        : turn.user_utterance;
        std::string sys = personalized ? turn.personalized_system.value_or(turn.system_utterance)
                                       : turn.system_utterance;
        out += "USER: " + user + "\n";
        if (!sys.empty()) out += "SYSTEM: " + sys + "\n";
    }
    return out;
}

}  // namespace

JudgeScorecard judge_battery(const Dialogue& personalized, const Dialogue& original,
                             gateway::Gateway& gw, const std::string& rater_id) {
    JudgeScorecard card;
    card.dialogue_id = personalized.id;
    card.rater_id = rater_id;

    const std::vector<std::pair<std::string, std::string>> questions = {
        {"U1", "judge_u1"}, {"U2", "judge_u2"}, {"U3", "judge_u3"}, {"U4", "judge_u4"},
        {"S1", "judge_s1"}, {"S2", "judge_s2"}, {"S3", "judge_s3"}, {"S4", "judge_s4"},
        {"S5", "judge_s5"}};

    gateway::CompletionRequest request;
    request.bindings["original"] = render_for_judge(original, false);
    request.bindings["personalized"] = render_for_judge(personalized, true);
    request.bindings["impression"] = personalized.impression.value_or("");
    request.decoding.seed = fnv1a64(rater_id);  // distinct raters get distinct cache keys

    for (const auto& [question_id, template_id] : questions) {
        request.template_id = template_id;
        try {
            card.answers[question_id] = std::stoi(gw.complete(request).text);
        } catch (const ContractError&) {
            card.valid = false;
            return card;
        }
    }
    return card;
}

std::string to_string(Verdict v) {
    switch (v) {
        case Verdict::system1: return "system1";
        case Verdict::system2: return "system2";
        case Verdict::tie: return "tie";
    }
    throw ValidationError("bad verdict");
}

PairwiseVerdict pairwise_compare(const Dialogue& a, const Dialogue& b, gateway::Gateway& gw,
                                 uint64_t seed) {
    PairwiseVerdict verdict;
    verdict.dialogue_a = a.id;
    verdict.dialogue_b = b.id;
    verdict.presentation_seed = seed;

    std::mt19937_64 rng(seed);
    verdict.swapped = (rng() & 1) != 0;

    std::string text_a = render_for_judge(a, true);
    std::string text_b = render_for_judge(b, true);

    gateway::CompletionRequest request;
    request.template_id = "pairwise_choice";
    request.bindings["dialogue_1"] = verdict.swapped ? text_b : text_a;
    request.bindings["dialogue_2"] = verdict.swapped ? text_a : text_b;

    std::string answer;
    try {
        answer = gw.complete(request).text;
    } catch (const ContractError&) {
        verdict.valid = false;
        return verdict;
    }

    if (answer == "tie") {
        verdict.verdict = Verdict::tie;
    } else {
        bool first_won = answer == "system 1";
        bool a_won = first_won != verdict.swapped;
        verdict.verdict = a_won ? Verdict::system1 : Verdict::system2;

        gateway::CompletionRequest reasons_request;
        reasons_request.template_id = "pairwise_reasons";
        reasons_request.bindings["winner"] = a_won ? text_a : text_b;
        for (const auto& reason : split(gw.complete(reasons_request).text, ','))
            if (!trim(reason).empty()) verdict.reasons.insert(trim(reason));
    }
    return verdict;
}

PairwiseAggregate aggregate_pairwise(const std::vector<PairwiseVerdict>& verdicts) {
    PairwiseAggregate agg;
    for (const auto& v : verdicts) {
        if (!v.valid) { ++agg.invalid; continue; }
        switch (v.verdict) {
            case Verdict::system1: ++agg.wins; break;
            case Verdict::system2: ++agg.losses; break;
            case Verdict::tie: ++agg.ties; break;
        }
    }
    size_t total = agg.wins + agg.ties + agg.losses;
    if (total > 0) {
        agg.win_pct = 100.0 * static_cast<double>(agg.wins) / static_cast<double>(total);
        agg.tie_pct = 100.0 * static_cast<double>(agg.ties) / static_cast<double>(total);
        agg.loss_pct = 100.0 * static_cast<double>(agg.losses) / static_cast<double>(total);
    }
    return agg;
}

AlphaResult krippendorff_alpha(const std::vector<std::vector<std::optional<double>>>& ratings,
                               AlphaLevel level) {
    if (ratings.size() < 2) throw PreconditionError("krippendorff_alpha requires >= 2 raters");
    size_t items = ratings.front().size();
    for (const auto& row : ratings)
        if (row.size() != items) throw PreconditionError("ragged ratings matrix");

    // distinct values in sorted order index the coincidence matrix
    std::vector<double> values;
    for (const auto& row : ratings)
        for (const auto& cell : row)
            if (cell) values.push_back(*cell);
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    if (values.empty()) throw PreconditionError("no ratings present");
    size_t v = values.size();
    auto value_index = [&values](double x) {
        return static_cast<size_t>(std::lower_bound(values.begin(), values.end(), x) -
                                   values.begin());
    };

    std::vector<std::vector<double>> coincidence(v, std::vector<double>(v, 0.0));
    bool any_pairable = false;
    for (size_t item = 0; item < items; ++item) {
        std::vector<size_t> unit;
        for (const auto& row : ratings)
            if (row[item]) unit.push_back(value_index(*row[item]));
        if (unit.size() < 2) continue;
        any_pairable = true;
        double m = static_cast<double>(unit.size());
        for (size_t i = 0; i < unit.size(); ++i)
            for (size_t k = 0; k < unit.size(); ++k)
                if (i != k) coincidence[unit[i]][unit[k]] += 1.0 / (m - 1.0);
    }
    if (!any_pairable)
        throw PreconditionError("krippendorff_alpha requires an item with >= 2 ratings");

    std::vector<double> marginals(v, 0.0);
    double n = 0.0;
    for (size_t c = 0; c < v; ++c) {
        for (size_t k = 0; k < v; ++k) marginals[c] += coincidence[c][k];
        n += marginals[c];
    }

    auto delta_sq = [&](size_t c, size_t k) {
        if (c == k) return 0.0;
        if (level == AlphaLevel::interval) {
            double d = values[c] - values[k];
            return d * d;
        }
        // ordinal: sum of marginals between the two ranks, endpoints halved
        size_t lo = std::min(c, k), hi = std::max(c, k);
        double d = 0.0;
        for (size_t g = lo; g <= hi; ++g) d += marginals[g];
        d -= (marginals[lo] + marginals[hi]) / 2.0;
        return d * d;
    };

    double observed = 0.0;
    double expected = 0.0;
    for (size_t c = 0; c < v; ++c) {
        for (size_t k = 0; k < v; ++k) {
            observed += coincidence[c][k] * delta_sq(c, k);
            expected += marginals[c] * marginals[k] * delta_sq(c, k);
        }
    }
    observed /= n;
    expected /= n * (n - 1.0);

    AlphaResult result;
    if (expected == 0.0) {
        result.value = 1.0;
        result.degenerate = true;
        return result;
    }
    result.value = 1.0 - observed / expected;
    return result;
}

}  // namespace ptod::evalkit
