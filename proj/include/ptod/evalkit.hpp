#pragma once
// Downstream evaluation: JGA, domain JGA, Entity-F1, the Likert judge
// battery, pairwise comparison, and Krippendorff's alpha.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ptod/gateway.hpp"
#include "ptod/types.hpp"

namespace ptod::evalkit {

struct StatePrediction {
    std::string dialogue_id;
    int turn = 0;
    std::map<std::string, std::string> predicted;
    std::map<std::string, std::string> gold;
};

// JSONL records {dialogue_id, turn, predicted, gold}.
std::vector<StatePrediction> load_predictions(const std::filesystem::path& path);

// Fraction of turns whose predicted state equals gold exactly after value
// normalization (lowercase, trim, canonical dontcare).
double jga(const std::vector<StatePrediction>& predictions);

// As jga but with both maps restricted to keys of the given domain.
double domain_jga(const std::vector<StatePrediction>& predictions, const std::string& domain);

// Mean per-turn set F1 over act triples; both sets empty scores 1, one
// empty scores 0.
double entity_f1(const std::vector<std::vector<PolicyAct>>& predicted,
                 const std::vector<std::vector<PolicyAct>>& gold);

struct JudgeScorecard {
    std::string dialogue_id;
    std::string rater_id;
    std::map<std::string, int> answers;  // U1..U4, S1..S5 -> 1..4
    bool valid = true;
};

// Nine Likert questions judged over the personalized dialogue against its
// original; contract failures mark the scorecard invalid.
JudgeScorecard judge_battery(const Dialogue& personalized, const Dialogue& original,
                             gateway::Gateway& gw, const std::string& rater_id);

enum class Verdict { system1, system2, tie };

std::string to_string(Verdict v);

struct PairwiseVerdict {
    std::string dialogue_a;
    std::string dialogue_b;
    Verdict verdict = Verdict::tie;
    std::set<std::string> reasons;
    uint64_t presentation_seed = 0;  // recorded order randomization
    bool swapped = false;            // b was shown as System 1
    bool valid = true;
};

// Presents the pair in seed-randomized order and maps the judge's answer
// back to the caller's (a, b) roles.
PairwiseVerdict pairwise_compare(const Dialogue& a, const Dialogue& b, gateway::Gateway& gw,
                                 uint64_t seed);

struct PairwiseAggregate {
    size_t wins = 0, ties = 0, losses = 0, invalid = 0;
    double win_pct = 0.0, tie_pct = 0.0, loss_pct = 0.0;
};

// Percentages over valid verdicts, from the perspective of dialogue_a.
PairwiseAggregate aggregate_pairwise(const std::vector<PairwiseVerdict>& verdicts);

enum class AlphaLevel { ordinal, interval };

struct AlphaResult {
    double value = 1.0;
    bool degenerate = false;  // zero expected disagreement
};

// Krippendorff's alpha via the coincidence matrix; missing ratings are
// std::nullopt. ratings[rater][item].
AlphaResult krippendorff_alpha(const std::vector<std::vector<std::optional<double>>>& ratings,
                               AlphaLevel level);

}  // namespace ptod::evalkit
