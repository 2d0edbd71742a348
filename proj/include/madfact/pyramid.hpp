#pragma once

#include "madfact/clerk.hpp"
#include "madfact/core.hpp"
#include "madfact/providers.hpp"

#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace madfact {

struct ReferenceAnswer {
  std::string question_id;
  std::string expert_id;
  std::string text;
  std::vector<AtomicClaim> claims;
};

/// Decides whether two claims state the same fact.
class ClaimMatcher {
 public:
  virtual ~ClaimMatcher() = default;
  virtual bool equivalent(std::string_view a, std::string_view b) const = 0;
  virtual std::string id() const = 0;
  /// Matchers that only ever compare normalized text can use hash lookups.
  virtual bool is_exact() const { return false; }
};

class ExactNormalizedMatcher : public ClaimMatcher {
 public:
  bool equivalent(std::string_view a, std::string_view b) const override;
  std::string id() const override { return "exact-normalized"; }
  bool is_exact() const override { return true; }
};

/// Asks a chat backend for a YES/NO equivalence verdict; exact-normalized
/// equality short-circuits without a call. Any failure raises MatcherUnavailable.
class BackendJudgedMatcher : public ClaimMatcher {
 public:
  BackendJudgedMatcher(ProviderRegistry& providers, std::string backend_id,
                       PromptSet prompts = PromptSet::builtin());
  bool equivalent(std::string_view a, std::string_view b) const override;
  std::string id() const override { return "backend-judged:" + backend_id_; }

 private:
  ProviderRegistry& providers_;
  std::string backend_id_;
  PromptSet prompts_;
};

struct GoldenEntry {
  std::string text;
  int frequency = 1;
  std::vector<std::string> member_texts;
  std::vector<std::string> experts;
};

struct GoldenSet {
  std::vector<GoldenEntry> entries;
  int experts = 0;  // G
  std::string matcher_id;

  std::size_t size() const { return entries.size(); }
};

/// Weight of layer k (1 = top) in a G-level pyramid.
using WeightRule = std::function<double(int layer, int levels)>;

/// omega(k) = G + 2 - k, i.e. 4/3/2 for a three-level pyramid, leaving the
/// base weight 1 for claims below every layer.
WeightRule default_weight_rule();

inline constexpr double kUnmatchedClaimWeight = 1.0;

struct PyramidEntry {
  GoldenEntry golden;
  int layer = 1;
  double weight = 1.0;
};

struct Pyramid {
  std::string question_id;
  int levels = 0;  // G
  std::map<int, std::vector<PyramidEntry>> layers;
  std::map<int, double> layer_weights;
  std::string matcher_id;
  std::vector<std::string> expert_backends;

  /// Sum of each golden entry's own layer weight.
  double golden_weight_mass() const;
  std::size_t entry_count() const;
};

/// One reference answer per expert backend, each decomposed by the clerk.
std::vector<ReferenceAnswer> generate_references(const Question& question,
                                                 const std::vector<std::string>& expert_backends,
                                                 ProviderRegistry& providers, const Clerk& clerk,
                                                 const PromptSet& prompts = PromptSet::builtin());

/// Equivalence classes over all experts' claims. f counts distinct experts
/// per class, so repeats inside one expert's list count once.
GoldenSet merge_golden_set(const std::vector<std::vector<std::string>>& claim_sets,
                           const ClaimMatcher& matcher,
                           const std::vector<std::string>& expert_ids = {});

/// Places each entry at layer G - f + 1. Throws InvalidWeightRule unless the
/// rule yields positive, strictly decreasing weights over layers 1..G.
Pyramid build_pyramid(const GoldenSet& golden, int levels, const WeightRule& rule = default_weight_rule());

/// Layer weight of the first matching golden entry (top layer first), else 1.
double claim_weight(const Pyramid& pyramid, std::string_view claim, const ClaimMatcher& matcher);

nlohmann::json to_json(const Pyramid& pyramid);
Pyramid pyramid_from_json(const nlohmann::json& j);

// ------------------------------------------------------------ weighted metrics

struct WeightedScores {
  double prec_w = 0.0;
  double recall_w = 0.0;
  double f1 = 0.0;
  double gamma = 1.0;
  std::size_t count_true = 0;
  std::size_t count_false = 0;
  /// Set when there were no claims to score.
  bool degenerate = false;
};

/// Sum of weights over TRUE claims / sum over all; 0 for an empty list.
double weighted_precision(std::span<const double> weights, std::span<const Verdict> verdicts);

/// min((1/gamma) * TRUE weight / golden mass, 1).
double weighted_recall(std::span<const double> weights, std::span<const Verdict> verdicts,
                       double golden_weight_mass, double gamma);

/// 0 when count_true is 0 or p + r is 0; harmonic mean otherwise.
double weighted_f1(double prec, double recall, std::size_t count_true);

WeightedScores weighted_scores(std::span<const double> weights, std::span<const Verdict> verdicts,
                               double golden_weight_mass, double gamma);

nlohmann::json to_json(const WeightedScores& s);

}  // namespace madfact
