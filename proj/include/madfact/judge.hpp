#pragma once

#include "madfact/core.hpp"
#include "madfact/pyramid.hpp"

#include <span>
#include <string>
#include <vector>

namespace madfact {

struct ClaimDecision {
  std::string claim_id;
  Verdict final_verdict = Verdict::False;
  int true_votes = 0;
  int false_votes = 0;
  bool tie_broken = false;

  friend bool operator==(const ClaimDecision&, const ClaimDecision&) = default;
};

/// Strict majority of the final-round verdicts. An even split goes to the
/// record with the highest agent_index, the last one to speak.
ClaimDecision adjudicate(std::span<const VerdictRecord> final_round_verdicts,
                         std::string claim_id = {});

struct ResponseScore {
  std::string response_id;
  std::string question_id;
  std::vector<ClaimDecision> decisions;
  std::vector<double> weights;
  WeightedScores scores;

  /// The per-response score s_i.
  double value() const { return scores.f1; }
};

/// claims and decisions are parallel; decisions must cover every claim once.
/// Throws PyramidMismatch when the pyramid belongs to another question.
ResponseScore score_response(const std::string& response_id, const std::string& question_id,
                             std::span<const AtomicClaim> claims,
                             std::span<const ClaimDecision> decisions, const Pyramid& pyramid,
                             double gamma, const ClaimMatcher& matcher);

/// Arithmetic mean of per-response scores. Throws EmptyDataset on empty input.
double score_dataset(std::span<const double> scores);
double score_dataset(std::span<const ResponseScore> scores);

nlohmann::json to_json(const ClaimDecision& d);
ClaimDecision claim_decision_from_json(const nlohmann::json& j);

}  // namespace madfact
