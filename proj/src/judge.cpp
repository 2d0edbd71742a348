#include "madfact/judge.hpp"

#include "madfact/errors.hpp"

#include <algorithm>
#include <numeric>
#include <set>

namespace madfact {

ClaimDecision adjudicate(std::span<const VerdictRecord> verdicts, std::string claim_id) {
  if (verdicts.empty()) throw Error(ErrorCode::EmptyJury, "no verdicts to adjudicate");
  std::set<int> agents;
  const VerdictRecord* last_speaker = &verdicts.front();
  ClaimDecision d;
  d.claim_id = std::move(claim_id);
  for (const auto& r : verdicts) {
    if (r.round != verdicts.front().round)
      throw Error(ErrorCode::InvalidArgument, "adjudicate needs verdicts from a single round");
    if (!agents.insert(r.agent_index).second)
      throw Error(ErrorCode::InvalidArgument, "agent " + std::to_string(r.agent_index) + " voted twice");
    (r.verdict == Verdict::True ? d.true_votes : d.false_votes) += 1;
    if (r.agent_index > last_speaker->agent_index) last_speaker = &r;
  }
  if (d.true_votes != d.false_votes) {
    d.final_verdict = d.true_votes > d.false_votes ? Verdict::True : Verdict::False;
  } else {
    d.final_verdict = last_speaker->verdict;
    d.tie_broken = true;
  }
  return d;
}

ResponseScore score_response(const std::string& response_id, const std::string& question_id,
                             std::span<const AtomicClaim> claims,
                             std::span<const ClaimDecision> decisions, const Pyramid& pyramid,
                             double gamma, const ClaimMatcher& matcher) {
  if (pyramid.question_id != question_id)
    throw Error(ErrorCode::PyramidMismatch, "pyramid is for question '" + pyramid.question_id +
                                                "', response '" + response_id + "' answers '" +
                                                question_id + "'");
  if (claims.size() != decisions.size())
    throw Error(ErrorCode::LengthMismatch, "response '" + response_id + "' has " +
                                               std::to_string(claims.size()) + " claims but " +
                                               std::to_string(decisions.size()) + " decisions");
  ResponseScore out;
  out.response_id = response_id;
  out.question_id = question_id;
  std::vector<Verdict> verdicts;
  for (std::size_t i = 0; i < claims.size(); ++i) {
    if (!decisions[i].claim_id.empty() && decisions[i].claim_id != claims[i].id)
      throw Error(ErrorCode::InvalidArgument, "decision " + decisions[i].claim_id +
                                                  " does not match claim " + claims[i].id);
    out.weights.push_back(claim_weight(pyramid, claims[i].text, matcher));
    verdicts.push_back(decisions[i].final_verdict);
  }
  out.decisions.assign(decisions.begin(), decisions.end());
  out.scores = weighted_scores(out.weights, verdicts, pyramid.golden_weight_mass(), gamma);
  return out;
}

double score_dataset(std::span<const double> scores) {
  if (scores.empty()) throw Error(ErrorCode::EmptyDataset, "no response scores to average");
  return std::accumulate(scores.begin(), scores.end(), 0.0) / static_cast<double>(scores.size());
}

double score_dataset(std::span<const ResponseScore> scores) {
  std::vector<double> values;
  values.reserve(scores.size());
  for (const auto& s : scores) values.push_back(s.value());
  return score_dataset(std::span<const double>(values));
}

nlohmann::json to_json(const ClaimDecision& d) {
  return {{"claim_id", d.claim_id},
          {"verdict", std::string(to_string(d.final_verdict))},
          {"true_votes", d.true_votes},
          {"false_votes", d.false_votes},
          {"tie_broken", d.tie_broken}};
}

ClaimDecision claim_decision_from_json(const nlohmann::json& j) {
  ClaimDecision d;
  d.claim_id = j.value("claim_id", "");
  auto v = parse_verdict(j.at("verdict").get<std::string>());
  if (!v) throw Error(ErrorCode::ParseError, "decision verdict must be TRUE or FALSE");
  d.final_verdict = *v;
  d.true_votes = j.value("true_votes", 0);
  d.false_votes = j.value("false_votes", 0);
  d.tie_broken = j.value("tie_broken", false);
  return d;
}

}  // namespace madfact
