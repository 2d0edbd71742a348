#include "madfact/core.hpp"

#include "madfact/errors.hpp"
#include "madfact/text.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <set>
#include <sstream>

namespace madfact {

using nlohmann::json;

std::string_view to_string(Verdict v) { return v == Verdict::True ? "TRUE" : "FALSE"; }

std::optional<Verdict> parse_verdict(std::string_view token) {
  std::string t = text::trim(token);
  for (auto& c : t) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  if (t == "TRUE") return Verdict::True;
  if (t == "FALSE") return Verdict::False;
  return std::nullopt;
}

std::string_view to_string(DebateRule rule) {
  switch (rule) {
    case DebateRule::FreeDebate: return "free-debate";
    case DebateRule::MandatorySearch: return "mandatory-search";
    case DebateRule::Adaptive: return "adaptive";
  }
  return "free-debate";
}

std::string_view to_string(Ablation ablation) {
  switch (ablation) {
    case Ablation::None: return "none";
    case Ablation::NoRolePlay: return "no-role-play";
    case Ablation::NoDebate: return "no-debate";
    case Ablation::NoSearch: return "no-search";
  }
  return "none";
}

DebateRule parse_rule(std::string_view s) {
  std::string n = text::normalize(s);
  if (n == "free-debate" || n == "rule1" || n == "1" || n == "free") return DebateRule::FreeDebate;
  if (n == "mandatory-search" || n == "rule2" || n == "2" || n == "search")
    return DebateRule::MandatorySearch;
  if (n == "adaptive" || n == "rule3" || n == "3" || n == "adapt") return DebateRule::Adaptive;
  throw Error(ErrorCode::InvalidConfig, "unknown debate rule '" + std::string(s) + "'");
}

Ablation parse_ablation(std::string_view s) {
  std::string n = text::normalize(s);
  if (n == "none" || n.empty()) return Ablation::None;
  if (n == "no-role-play" || n == "norole" || n == "no-roleplay") return Ablation::NoRolePlay;
  if (n == "no-debate") return Ablation::NoDebate;
  if (n == "no-search") return Ablation::NoSearch;
  throw Error(ErrorCode::InvalidConfig, "unknown ablation variant '" + std::string(s) + "'");
}

const std::vector<RoleProfile>& default_roles() {
  static const std::vector<RoleProfile> roles = {
      {"General Public",
       "You are General Public, a referee on this fact-checking panel. You read the claim as an "
       "ordinary, curious reader who wants to know how the checking turns out. Judge what the "
       "statement plainly means instead of dwelling on individual word choices."},
      {"Critic",
       "You are Critic, a referee on this fact-checking panel. You challenge the conclusions of "
       "the other referees by following the evidence step by step. You insist on exact figures "
       "and notice small discrepancies between a claim and its sources."},
      {"News Author",
       "You are News Author, a referee on this fact-checking panel. You care about the factual "
       "grounding of the claim and about recent developments, and you confirm details by "
       "consulting many sources. If the evidence is thin you look for more before deciding."},
      {"Scientist",
       "You are Scientist, a referee on this fact-checking panel. Trained in data-driven "
       "research, you reason critically, pay close attention to numbers and check claims "
       "against cited references."},
      {"Psychologist",
       "You are Psychologist, a referee on this fact-checking panel. You study how people think "
       "and behave, and you help the panel weigh the competing positions to settle on the "
       "best-supported answer."},
      {"Data Analyst",
       "You are Data Analyst, a referee on this fact-checking panel. You examine the claim "
       "quantitatively, collecting relevant data from varied sources and organizing it until "
       "the facts it supports become clear."},
  };
  return roles;
}

std::vector<RoleProfile> roles_for_jury(int n) {
  const auto& base = default_roles();
  std::vector<RoleProfile> out;
  for (int i = 0; i < n; ++i) {
    RoleProfile role = base[static_cast<std::size_t>(i) % base.size()];
    int cycle = i / static_cast<int>(base.size());
    if (cycle > 0) role.name += " " + std::to_string(cycle + 1);
    out.push_back(std::move(role));
  }
  return out;
}

RoleProfile generic_referee_role() {
  return {"Referee",
          "You are a referee on this fact-checking panel. Decide whether the claim is factually accurate "
          "and explain your judgment."};
}

SystemConfig default_config(int jury_size, std::string backend) {
  SystemConfig c;
  c.jury_size = jury_size;
  c.roles = roles_for_jury(jury_size);
  c.evaluator_backends.assign(static_cast<std::size_t>(std::max(jury_size, 0)), backend);
  c.clerk_backend = std::move(backend);
  return c;
}

SystemConfig validate_config(const SystemConfig& config) {
  std::vector<InvalidConfigError::Violation> v;
  const auto n = config.jury_size;
  if (n < 1) v.push_back({"jury_size", "must be >= 1, got " + std::to_string(n)});
  if (config.rounds < 1) v.push_back({"rounds", "must be >= 1, got " + std::to_string(config.rounds)});
  if (!(config.theta >= 0.0 && config.theta <= 1.0))
    v.push_back({"theta", "must lie in [0,1]"});
  if (!(config.gamma > 0.0 && config.gamma <= 1.0))
    v.push_back({"gamma", "must lie in (0,1]"});
  if (n >= 1 && config.roles.size() != static_cast<std::size_t>(n))
    v.push_back({"roles", "expected " + std::to_string(n) + " roles, got " +
                              std::to_string(config.roles.size())});
  if (n >= 1 && config.evaluator_backends.size() != static_cast<std::size_t>(n))
    v.push_back({"evaluator_backends", "expected " + std::to_string(n) + " backends, got " +
                                           std::to_string(config.evaluator_backends.size())});
  std::set<std::string> names;
  for (const auto& role : config.roles) {
    if (role.name.empty()) v.push_back({"roles", "role name must be non-empty"});
    if (!names.insert(role.name).second)
      v.push_back({"roles", "duplicate role name '" + role.name + "'"});
    if (text::trim(role.description).empty())
      v.push_back({"roles", "role '" + role.name + "' has an empty description"});
  }
  for (const auto& b : config.evaluator_backends) {
    if (b.empty()) v.push_back({"evaluator_backends", "backend id must be non-empty"});
  }
  if (config.clerk_backend.empty()) v.push_back({"clerk_backend", "must be non-empty"});
  if (config.judge_backend.empty()) v.push_back({"judge_backend", "must be non-empty"});
  if (!config.search_enabled && config.rule == DebateRule::MandatorySearch)
    v.push_back({"ablation", "mandatory-search rule requires search; cannot run without it"});
  if (!config.search_enabled && config.rule == DebateRule::Adaptive && config.rounds > 1)
    v.push_back({"ablation", "adaptive rule retrieves after disagreement; cannot run without search"});
  if (!v.empty()) throw InvalidConfigError(std::move(v));
  return config;
}

SystemConfig apply_ablation(const SystemConfig& config, Ablation variant) {
  SystemConfig out = config;
  out.ablation = variant;
  switch (variant) {
    case Ablation::None:
      out.ablation = config.ablation;
      break;
    case Ablation::NoRolePlay: {
      const RoleProfile generic = generic_referee_role();
      out.roles.clear();
      for (int i = 0; i < config.jury_size; ++i) {
        out.roles.push_back({generic.name + " " + std::to_string(i + 1), generic.description});
      }
      break;
    }
    case Ablation::NoDebate:
      out.rounds = 1;
      break;
    case Ablation::NoSearch:
      out.search_enabled = false;
      break;
  }
  return out;
}

json config_to_json(const SystemConfig& c) {
  json roles = json::array();
  for (const auto& r : c.roles) roles.push_back({{"name", r.name}, {"description", r.description}});
  return json{
      {"jury_size", c.jury_size},
      {"rounds", c.rounds},
      {"rule", std::string(to_string(c.rule))},
      {"theta", c.theta},
      {"roles", roles},
      {"evaluator_backends", c.evaluator_backends},
      {"clerk_backend", c.clerk_backend},
      {"judge_backend", c.judge_backend},
      {"gamma", c.gamma},
      {"ablation", std::string(to_string(c.ablation))},
      {"search_enabled", c.search_enabled},
  };
}

SystemConfig config_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, "config must be a JSON object");
  static const std::set<std::string> known = {
      "jury_size", "rounds",        "rule",          "theta",   "roles",         "evaluator_backends",
      "clerk_backend", "judge_backend", "gamma",     "ablation", "search_enabled"};
  std::vector<InvalidConfigError::Violation> unknown;
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) unknown.push_back({key, "unknown key"});
  }
  if (!unknown.empty()) throw InvalidConfigError(std::move(unknown));

  try {
    SystemConfig c;
    c.jury_size = j.value("jury_size", c.jury_size);
    c.rounds = j.value("rounds", c.rounds);
    if (j.contains("rule")) c.rule = parse_rule(j.at("rule").get<std::string>());
    c.theta = j.value("theta", c.theta);
    c.gamma = j.value("gamma", c.gamma);
    c.clerk_backend = j.value("clerk_backend", c.clerk_backend);
    c.judge_backend = j.value("judge_backend", c.judge_backend);
    c.search_enabled = j.value("search_enabled", c.search_enabled);
    if (j.contains("roles")) {
      for (const auto& r : j.at("roles")) {
        c.roles.push_back({r.at("name").get<std::string>(), r.at("description").get<std::string>()});
      }
    } else {
      c.roles = roles_for_jury(c.jury_size);
    }
    if (j.contains("evaluator_backends")) {
      c.evaluator_backends = j.at("evaluator_backends").get<std::vector<std::string>>();
    } else {
      c.evaluator_backends.assign(static_cast<std::size_t>(std::max(c.jury_size, 0)),
                                  c.clerk_backend);
    }
    if (j.contains("ablation")) {
      // apply_ablation is idempotent, so re-reading a written config is stable
      c = apply_ablation(c, parse_ablation(j.at("ablation").get<std::string>()));
    }
    return c;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("config field has the wrong type: ") + e.what());
  }
}

SystemConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::FileNotFound, "cannot open config file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, "config file '" + path + "' is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

std::string config_hash(const SystemConfig& config) {
  return text::sha256_hex(config_to_json(config).dump());
}

Clock Clock::system() { return Clock{}; }

Clock Clock::frozen(std::string stamp) {
  Clock c;
  c.frozen_ = std::move(stamp);
  return c;
}

std::string Clock::now() const {
  if (frozen_) return *frozen_;
  auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json to_json(const VerdictRecord& r) {
  json j = {{"round", r.round},
            {"agent", r.agent_index},
            {"verdict", std::string(to_string(r.verdict))},
            {"explanation", r.explanation}};
  j["confidence"] = r.confidence ? json(*r.confidence) : json(nullptr);
  return j;
}

VerdictRecord verdict_record_from_json(const json& j) {
  VerdictRecord r;
  r.round = j.at("round").get<int>();
  r.agent_index = j.at("agent").get<int>();
  auto v = parse_verdict(j.at("verdict").get<std::string>());
  if (!v) throw Error(ErrorCode::ParseError, "bad verdict in record");
  r.verdict = *v;
  r.explanation = j.value("explanation", "");
  if (j.contains("confidence") && !j.at("confidence").is_null())
    r.confidence = j.at("confidence").get<double>();
  return r;
}

json to_json(const AtomicClaim& c) {
  return {{"id", c.id}, {"text", c.text}, {"source_response", c.source_response}};
}

AtomicClaim atomic_claim_from_json(const json& j) {
  return {j.at("id").get<std::string>(), j.at("text").get<std::string>(),
          j.value("source_response", "")};
}

}  // namespace madfact
