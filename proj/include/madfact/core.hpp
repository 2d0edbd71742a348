#pragma once

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace madfact {

enum class Verdict { True, False };

std::string_view to_string(Verdict v);
std::optional<Verdict> parse_verdict(std::string_view token);

struct Question {
  std::string id;
  std::string text;
};

struct LongFormResponse {
  std::string id;
  std::string question_id;
  std::string text;
  std::string producer;
};

struct AtomicClaim {
  std::string id;
  std::string text;
  std::string source_response;

  friend bool operator==(const AtomicClaim&, const AtomicClaim&) = default;
};

struct VerdictRecord {
  Verdict verdict = Verdict::False;
  std::string explanation;
  int agent_index = 0;
  int round = 1;
  std::optional<double> confidence;

  friend bool operator==(const VerdictRecord&, const VerdictRecord&) = default;
};

struct RoleProfile {
  std::string name;
  std::string description;

  friend bool operator==(const RoleProfile&, const RoleProfile&) = default;
};

enum class DebateRule { FreeDebate, MandatorySearch, Adaptive };
enum class Ablation { None, NoRolePlay, NoDebate, NoSearch };

std::string_view to_string(DebateRule rule);
std::string_view to_string(Ablation ablation);
DebateRule parse_rule(std::string_view s);
Ablation parse_ablation(std::string_view s);

struct SystemConfig {
  int jury_size = 3;
  int rounds = 2;
  DebateRule rule = DebateRule::FreeDebate;
  double theta = 0.8;
  std::vector<RoleProfile> roles;
  std::vector<std::string> evaluator_backends;
  std::string clerk_backend = "gpt-4o-mini";
  std::string judge_backend = "llama-3.3-70b-instruct";
  double gamma = 0.8;
  Ablation ablation = Ablation::None;
  bool search_enabled = true;

  friend bool operator==(const SystemConfig&, const SystemConfig&) = default;
};

/// The six referee personas, in table order.
const std::vector<RoleProfile>& default_roles();

/// First n personas; beyond six the list cycles with numeric suffixes ("Critic 2").
std::vector<RoleProfile> roles_for_jury(int n);

RoleProfile generic_referee_role();

/// N agents on one backend, Rule 1, the default personas.
SystemConfig default_config(int jury_size = 3, std::string backend = "gpt-4o-mini");

/// Returns config unchanged iff every invariant holds; otherwise throws
/// InvalidConfigError listing each violated field.
SystemConfig validate_config(const SystemConfig& config);

SystemConfig apply_ablation(const SystemConfig& config, Ablation variant);

nlohmann::json config_to_json(const SystemConfig& config);
/// Missing keys take defaults; unknown keys are rejected.
SystemConfig config_from_json(const nlohmann::json& j);
SystemConfig load_config_file(const std::string& path);

/// SHA-256 over the canonical JSON dump of the config.
std::string config_hash(const SystemConfig& config);

/// ISO-8601 UTC timestamps, or a fixed one for reproducible output.
class Clock {
 public:
  static Clock system();
  static Clock frozen(std::string stamp = "1970-01-01T00:00:00Z");

  std::string now() const;
  bool is_frozen() const { return frozen_.has_value(); }

 private:
  std::optional<std::string> frozen_;
};

nlohmann::json to_json(const VerdictRecord& r);
VerdictRecord verdict_record_from_json(const nlohmann::json& j);
nlohmann::json to_json(const AtomicClaim& c);
AtomicClaim atomic_claim_from_json(const nlohmann::json& j);

}  // namespace madfact
