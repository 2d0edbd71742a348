#include "madfact/pyramid.hpp"

#include "madfact/errors.hpp"
#include "madfact/text.hpp"

#include <algorithm>
#include <set>
#include <unordered_map>

namespace madfact {

using nlohmann::json;

bool ExactNormalizedMatcher::equivalent(std::string_view a, std::string_view b) const {
  return text::normalize(a) == text::normalize(b);
}

BackendJudgedMatcher::BackendJudgedMatcher(ProviderRegistry& providers, std::string backend_id,
                                           PromptSet prompts)
    : providers_(providers), backend_id_(std::move(backend_id)), prompts_(std::move(prompts)) {}

bool BackendJudgedMatcher::equivalent(std::string_view a, std::string_view b) const {
  if (text::normalize(a) == text::normalize(b)) return true;
  ChatRequest request;
  request.backend_id = backend_id_;
  request.temperature = 0.0;
  request.max_tokens = 8;
  request.route = "matcher";
  request.messages.push_back({ChatRole::System, prompts_.get("matcher_system")});
  request.messages.push_back(
      {ChatRole::User, text::fill_template(prompts_.get("matcher_user"),
                                           {{"a", std::string(a)}, {"b", std::string(b)}})});
  std::string reply;
  try {
    reply = providers_.chat(request);
  } catch (const Error& e) {
    throw Error(ErrorCode::MatcherUnavailable, std::string("claim matcher failed: ") + e.what());
  }
  const std::string answer = text::normalize(reply);
  if (answer.rfind("yes", 0) == 0) return true;
  if (answer.rfind("no", 0) == 0) return false;
  throw Error(ErrorCode::MatcherUnavailable, "claim matcher replied neither YES nor NO: '" + reply + "'");
}

WeightRule default_weight_rule() {
  return [](int layer, int levels) { return static_cast<double>(levels + 2 - layer); };
}

double Pyramid::golden_weight_mass() const {
  double mass = 0.0;
  for (const auto& [layer, entries] : layers) {
    for (const auto& e : entries) mass += e.weight;
  }
  return mass;
}

std::size_t Pyramid::entry_count() const {
  std::size_t n = 0;
  for (const auto& [layer, entries] : layers) n += entries.size();
  return n;
}

std::vector<ReferenceAnswer> generate_references(const Question& question,
                                                 const std::vector<std::string>& expert_backends,
                                                 ProviderRegistry& providers, const Clerk& clerk,
                                                 const PromptSet& prompts) {
  if (expert_backends.empty()) throw Error(ErrorCode::InvalidArgument, "need at least one expert backend");
  std::vector<ReferenceAnswer> out;
  for (const auto& expert : expert_backends) {
    ChatRequest request;
    request.backend_id = expert;
    request.temperature = 0.0;
    request.max_tokens = 2048;
    request.route = "expert/" + expert;
    request.scope = question.id;
    request.messages.push_back({ChatRole::System, prompts.get("expert_system")});
    request.messages.push_back({ChatRole::User, question.text});
    ReferenceAnswer ref;
    ref.question_id = question.id;
    ref.expert_id = expert;
    ref.text = providers.chat(request, /*allow_empty=*/true);
    LongFormResponse as_response{question.id + "-ref-" + expert, question.id, ref.text, expert};
    ref.claims = clerk.decompose(question, as_response).claims;
    out.push_back(std::move(ref));
  }
  return out;
}

GoldenSet merge_golden_set(const std::vector<std::vector<std::string>>& claim_sets,
                           const ClaimMatcher& matcher, const std::vector<std::string>& expert_ids) {
  GoldenSet golden;
  golden.experts = static_cast<int>(claim_sets.size());
  golden.matcher_id = matcher.id();
  std::vector<std::set<std::size_t>> contributors;
  std::unordered_map<std::string, std::size_t> exact_index;

  for (std::size_t expert = 0; expert < claim_sets.size(); ++expert) {
    const std::string expert_name =
        expert < expert_ids.size() ? expert_ids[expert] : "expert-" + std::to_string(expert + 1);
    for (const auto& claim : claim_sets[expert]) {
      std::optional<std::size_t> match;
      if (matcher.is_exact()) {
        auto it = exact_index.find(text::normalize(claim));
        if (it != exact_index.end()) match = it->second;
      } else {
        for (std::size_t k = 0; k < golden.entries.size() && !match; ++k) {
          if (matcher.equivalent(golden.entries[k].text, claim)) match = k;
        }
      }
      if (!match) {
        golden.entries.push_back({claim, 0, {}, {}});
        contributors.emplace_back();
        match = golden.entries.size() - 1;
        if (matcher.is_exact()) exact_index.emplace(text::normalize(claim), *match);
      }
      GoldenEntry& entry = golden.entries[*match];
      if (std::find(entry.member_texts.begin(), entry.member_texts.end(), claim) == entry.member_texts.end())
        entry.member_texts.push_back(claim);
      if (contributors[*match].insert(expert).second) entry.experts.push_back(expert_name);
    }
  }
  for (std::size_t k = 0; k < golden.entries.size(); ++k)
    golden.entries[k].frequency = static_cast<int>(contributors[k].size());
  return golden;
}

Pyramid build_pyramid(const GoldenSet& golden, int levels, const WeightRule& rule) {
  if (levels < 1) throw Error(ErrorCode::InvalidArgument, "pyramid needs at least one level");
  Pyramid p;
  p.levels = levels;
  p.matcher_id = golden.matcher_id;
  for (int k = 1; k <= levels; ++k) {
    const double w = rule(k, levels);
    if (!(w > 0.0))
      throw Error(ErrorCode::InvalidWeightRule, "layer " + std::to_string(k) + " weight must be positive");
    if (k > 1 && !(w < p.layer_weights.at(k - 1)))
      throw Error(ErrorCode::InvalidWeightRule, "layer weights must be strictly decreasing");
    p.layer_weights[k] = w;
    p.layers[k];
  }
  for (const auto& entry : golden.entries) {
    if (entry.frequency < 1 || entry.frequency > levels)
      throw Error(ErrorCode::InvalidArgument, "golden entry frequency " + std::to_string(entry.frequency) +
                                                  " outside [1," + std::to_string(levels) + "]");
    const int layer = levels - entry.frequency + 1;
    p.layers[layer].push_back({entry, layer, p.layer_weights.at(layer)});
  }
  return p;
}

double claim_weight(const Pyramid& pyramid, std::string_view claim, const ClaimMatcher& matcher) {
  for (const auto& [layer, entries] : pyramid.layers) {
    for (const auto& e : entries) {
      for (const auto& member : e.golden.member_texts) {
        if (matcher.equivalent(member, claim)) return e.weight;
      }
      if (e.golden.member_texts.empty() && matcher.equivalent(e.golden.text, claim)) return e.weight;
    }
  }
  return kUnmatchedClaimWeight;
}

json to_json(const Pyramid& p) {
  json entries = json::array();
  for (const auto& [layer, list] : p.layers) {
    for (const auto& e : list) {
      entries.push_back({{"text", e.golden.text},
                         {"frequency", e.golden.frequency},
                         {"layer", e.layer},
                         {"weight", e.weight},
                         {"members", e.golden.member_texts},
                         {"experts", e.golden.experts}});
    }
  }
  json weights = json::array();
  for (const auto& [layer, w] : p.layer_weights) weights.push_back(w);
  return {{"question_id", p.question_id},
          {"G", p.levels},
          {"layer_weights", weights},
          {"entries", entries},
          {"matcher", p.matcher_id},
          {"experts", p.expert_backends}};
}

Pyramid pyramid_from_json(const json& j) {
  try {
    Pyramid p;
    p.question_id = j.at("question_id").get<std::string>();
    p.levels = j.at("G").get<int>();
    p.matcher_id = j.value("matcher", "");
    p.expert_backends = j.value("experts", std::vector<std::string>{});
    const auto weights = j.at("layer_weights").get<std::vector<double>>();
    if (weights.size() != static_cast<std::size_t>(p.levels))
      throw Error(ErrorCode::ParseError, "layer_weights length differs from G");
    for (int k = 1; k <= p.levels; ++k) {
      p.layer_weights[k] = weights[static_cast<std::size_t>(k - 1)];
      p.layers[k];
    }
    for (const auto& e : j.at("entries")) {
      PyramidEntry entry;
      entry.golden.text = e.at("text").get<std::string>();
      entry.golden.frequency = e.at("frequency").get<int>();
      entry.golden.member_texts = e.value("members", std::vector<std::string>{entry.golden.text});
      entry.golden.experts = e.value("experts", std::vector<std::string>{});
      entry.layer = e.at("layer").get<int>();
      entry.weight = e.at("weight").get<double>();
      if (entry.layer != p.levels - entry.golden.frequency + 1)
        throw Error(ErrorCode::ParseError, "entry '" + entry.golden.text + "' sits in the wrong layer");
      p.layers[entry.layer].push_back(std::move(entry));
    }
    return p;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("malformed pyramid JSON: ") + e.what());
  }
}

// ------------------------------------------------------------ weighted metrics

namespace {

void check_lengths(std::span<const double> weights, std::span<const Verdict> verdicts) {
  if (weights.size() != verdicts.size())
    throw Error(ErrorCode::LengthMismatch, "weights and verdicts differ in length (" +
                                               std::to_string(weights.size()) + " vs " +
                                               std::to_string(verdicts.size()) + ")");
  for (double w : weights) {
    if (!(w > 0.0)) throw Error(ErrorCode::InvalidArgument, "claim weights must be strictly positive");
  }
}

double true_mass(std::span<const double> weights, std::span<const Verdict> verdicts) {
  double mass = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (verdicts[i] == Verdict::True) mass += weights[i];
  }
  return mass;
}

}  // namespace

double weighted_precision(std::span<const double> weights, std::span<const Verdict> verdicts) {
  check_lengths(weights, verdicts);
  if (weights.empty()) return 0.0;
  double all = 0.0;
  for (double w : weights) all += w;
  return true_mass(weights, verdicts) / all;
}

double weighted_recall(std::span<const double> weights, std::span<const Verdict> verdicts,
                       double golden_weight_mass, double gamma) {
  check_lengths(weights, verdicts);
  if (!(gamma > 0.0 && gamma <= 1.0)) throw Error(ErrorCode::InvalidArgument, "gamma must lie in (0,1]");
  if (!(golden_weight_mass > 0.0)) throw Error(ErrorCode::EmptyGoldenSet, "golden weight mass is zero");
  return std::min(true_mass(weights, verdicts) / golden_weight_mass / gamma, 1.0);
}

double weighted_f1(double prec, double recall, std::size_t count_true) {
  if (count_true == 0) return 0.0;
  if (prec + recall <= 0.0) return 0.0;
  return 2.0 * prec * recall / (prec + recall);
}

WeightedScores weighted_scores(std::span<const double> weights, std::span<const Verdict> verdicts,
                               double golden_weight_mass, double gamma) {
  WeightedScores s;
  s.gamma = gamma;
  s.prec_w = weighted_precision(weights, verdicts);
  s.recall_w = weighted_recall(weights, verdicts, golden_weight_mass, gamma);
  s.count_true = static_cast<std::size_t>(std::count(verdicts.begin(), verdicts.end(), Verdict::True));
  s.count_false = verdicts.size() - s.count_true;
  s.f1 = weighted_f1(s.prec_w, s.recall_w, s.count_true);
  s.degenerate = verdicts.empty();
  return s;
}

json to_json(const WeightedScores& s) {
  return {{"prec_w", s.prec_w},         {"recall_w", s.recall_w},         {"f1", s.f1},
          {"gamma", s.gamma},           {"count_true", s.count_true},     {"count_false", s.count_false},
          {"degenerate", s.degenerate}};
}

}  // namespace madfact
