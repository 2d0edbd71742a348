#include "madfact/judge.hpp"

#include "mock_support.hpp"

#include <doctest.h>

#include <algorithm>
#include <numeric>

using namespace madfact;
using testsupport::error_code_of;

namespace {

const Verdict T = Verdict::True;
const Verdict F = Verdict::False;

std::vector<VerdictRecord> round_of(const std::vector<Verdict>& votes, int round = 2) {
  std::vector<VerdictRecord> out;
  for (std::size_t i = 0; i < votes.size(); ++i) out.push_back({votes[i], "", static_cast<int>(i), round, std::nullopt});
  return out;
}

Pyramid pyramid_for(const std::string& qid, const std::vector<std::vector<std::string>>& sets) {
  Pyramid p = build_pyramid(merge_golden_set(sets, ExactNormalizedMatcher{}), static_cast<int>(sets.size()));
  p.question_id = qid;
  return p;
}

}  // namespace

TEST_CASE("adjudicate: majority and unanimity") {
  const ClaimDecision a = adjudicate(round_of({T, T, F}), "c1");
  CHECK(a.final_verdict == T);
  CHECK(a.true_votes == 2);
  CHECK(a.false_votes == 1);
  CHECK_FALSE(a.tie_broken);
  CHECK(a.claim_id == "c1");

  const ClaimDecision b = adjudicate(round_of({F, F, F}));
  CHECK(b.final_verdict == F);
  CHECK(b.true_votes == 0);
  CHECK(b.false_votes == 3);
}

TEST_CASE("adjudicate: an even split goes to the last speaker") {
  const ClaimDecision d = adjudicate(round_of({T, F, T, F}));
  CHECK(d.final_verdict == F);
  CHECK(d.tie_broken);
  CHECK(d.true_votes == 2);

  // Input order does not matter; the highest agent index is the last speaker.
  auto shuffled = round_of({T, F, T, F});
  std::swap(shuffled[0], shuffled[3]);
  CHECK(adjudicate(shuffled).final_verdict == F);
}

TEST_CASE("adjudicate: preconditions") {
  CHECK(error_code_of([] { adjudicate({}); }) == ErrorCode::EmptyJury);
  auto mixed = round_of({T, F});
  mixed[1].round = 1;
  CHECK(error_code_of([&] { adjudicate(mixed); }) == ErrorCode::InvalidArgument);
  auto twice = round_of({T, F});
  twice[1].agent_index = 0;
  CHECK(error_code_of([&] { adjudicate(twice); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("property: adjudicate matches a brute-force majority oracle on every vote vector up to N = 5") {
  for (int n = 1; n <= 5; ++n) {
    for (unsigned mask = 0; mask < (1u << n); ++mask) {
      std::vector<Verdict> votes;
      int yes = 0;
      for (int i = 0; i < n; ++i) {
        const bool t = (mask >> i) & 1u;
        votes.push_back(t ? T : F);
        yes += t;
      }
      const int no = n - yes;
      const Verdict expected = yes > no ? T : no > yes ? F : votes.back();
      const ClaimDecision d = adjudicate(round_of(votes));
      CAPTURE(n);
      CAPTURE(mask);
      CHECK(d.final_verdict == expected);
      CHECK(d.true_votes + d.false_votes == n);
      CHECK(d.tie_broken == (yes == no));
      if (d.tie_broken) CHECK(n % 2 == 0);
    }
  }
}

TEST_CASE("property: permuting speakers only matters for ties, and then only the last position") {
  testsupport::Rng rng(31);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = rng.range(1, 8);
    std::vector<Verdict> votes;
    for (int i = 0; i < n; ++i) votes.push_back(rng.coin() ? T : F);
    std::vector<Verdict> permuted = votes;
    for (int i = n - 1; i > 0; --i) std::swap(permuted[static_cast<std::size_t>(i)], permuted[rng.below(static_cast<std::uint64_t>(i) + 1)]);
    const ClaimDecision a = adjudicate(round_of(votes));
    const ClaimDecision b = adjudicate(round_of(permuted));
    if (!a.tie_broken) {
      CHECK(a.final_verdict == b.final_verdict);
    } else {
      CHECK(b.tie_broken);
      CHECK(b.final_verdict == permuted.back());
    }
  }
}

TEST_CASE("score_response: perfect coverage scores 1") {
  const Pyramid p = pyramid_for("q1", {{"A.", "B."}, {"A."}, {"A."}});
  const std::vector<AtomicClaim> claims = {{"r1-c1", "A.", "r1"}, {"r1-c2", "B.", "r1"}};
  const std::vector<ClaimDecision> decisions = {{"r1-c1", T, 3, 0, false}, {"r1-c2", T, 2, 1, false}};
  const ResponseScore s = score_response("r1", "q1", claims, decisions, p, 1.0, ExactNormalizedMatcher{});
  CHECK(s.weights == std::vector<double>{4.0, 2.0});
  CHECK(s.scores.prec_w == 1.0);
  CHECK(s.scores.recall_w == 1.0);
  CHECK(s.value() == 1.0);
}

TEST_CASE("score_response: no TRUE decisions scores 0") {
  const Pyramid p = pyramid_for("q1", {{"A."}, {"A."}, {"A."}});
  const std::vector<AtomicClaim> claims = {{"c1", "A.", "r1"}};
  const std::vector<ClaimDecision> decisions = {{"c1", F, 0, 3, false}};
  CHECK(score_response("r1", "q1", claims, decisions, p, 1.0, ExactNormalizedMatcher{}).value() == 0.0);
}

TEST_CASE("score_response: weights 4/3/2 with T,T,F and golden mass 11") {
  // Golden set: one f=3 entry (4), one f=2 entry (3), two f=1 entries (2 + 2); mass 11.
  const Pyramid p = pyramid_for("q1", {{"A.", "B.", "C.", "D."}, {"A.", "B."}, {"A."}});
  REQUIRE(p.golden_weight_mass() == 11.0);
  const std::vector<AtomicClaim> claims = {{"c1", "A.", "r"}, {"c2", "B.", "r"}, {"c3", "C.", "r"}};
  const std::vector<ClaimDecision> decisions = {{"c1", T, 3, 0, false}, {"c2", T, 2, 1, false}, {"c3", F, 0, 3, false}};
  const ResponseScore s = score_response("r", "q1", claims, decisions, p, 1.0, ExactNormalizedMatcher{});
  CHECK(s.scores.prec_w == doctest::Approx(7.0 / 9.0).epsilon(1e-12));
  CHECK(s.scores.recall_w == doctest::Approx(7.0 / 11.0).epsilon(1e-12));
  CHECK(s.value() == doctest::Approx(0.7).epsilon(1e-12));
}

TEST_CASE("score_response: mismatched pyramid or decisions") {
  const Pyramid p = pyramid_for("q1", {{"A."}});
  const std::vector<AtomicClaim> claims = {{"c1", "A.", "r"}};
  const std::vector<ClaimDecision> one = {{"c1", T, 1, 0, false}};
  CHECK(error_code_of([&] { score_response("r", "q2", claims, one, p, 1.0, ExactNormalizedMatcher{}); }) ==
        ErrorCode::PyramidMismatch);
  CHECK(error_code_of([&] { score_response("r", "q1", claims, {}, p, 1.0, ExactNormalizedMatcher{}); }) ==
        ErrorCode::LengthMismatch);
  const std::vector<ClaimDecision> other = {{"c9", T, 1, 0, false}};
  CHECK(error_code_of([&] { score_response("r", "q1", claims, other, p, 1.0, ExactNormalizedMatcher{}); }) ==
        ErrorCode::InvalidArgument);
}

TEST_CASE("score_dataset: arithmetic mean") {
  CHECK(score_dataset(std::vector<double>{1.0, 0.5, 0.0}) == 0.5);
  CHECK(score_dataset(std::vector<double>{0.7}) == 0.7);
  CHECK(error_code_of([] { score_dataset(std::vector<double>{}); }) == ErrorCode::EmptyDataset);
}

TEST_CASE("property: dataset score stays in [0,1] and equals a constant input") {
  testsupport::Rng rng(77);
  for (int trial = 0; trial < 500; ++trial) {
    const int n = rng.range(1, 20);
    std::vector<double> s;
    for (int i = 0; i < n; ++i) s.push_back(rng.unit());
    const double m = score_dataset(s);
    CHECK(m >= *std::min_element(s.begin(), s.end()) - 1e-15);
    CHECK(m <= *std::max_element(s.begin(), s.end()) + 1e-15);
    const double c = rng.unit();
    CHECK(score_dataset(std::vector<double>(static_cast<std::size_t>(n), c)) == doctest::Approx(c).epsilon(1e-15));
  }
}

TEST_CASE("claim decision JSON round-trip") {
  const ClaimDecision d{"r1-c2", F, 2, 2, true};
  CHECK(claim_decision_from_json(to_json(d)) == d);
}
