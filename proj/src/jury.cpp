#include "madfact/jury.hpp"

#include "madfact/text.hpp"

#include <charconv>
#include <deque>

namespace madfact {

using nlohmann::json;

void MessagePool::append(VerdictRecord record) {
  if (record.round < 1) throw Error(ErrorCode::InvalidArgument, "verdict round must be >= 1");
  if (!entries_.empty()) {
    const auto& last = entries_.back();
    if (std::pair(record.round, record.agent_index) <= std::pair(last.round, last.agent_index)) {
      throw Error(ErrorCode::InvalidArgument, "message pool entries must follow speaking order");
    }
  }
  entries_.push_back(std::move(record));
}

bool KnowledgeBase::has_query(std::string_view query) const {
  return issued_.count(text::normalize(query)) > 0;
}

void KnowledgeBase::append(SearchResult result) {
  std::string key = text::normalize(result.query);
  if (key.empty()) throw Error(ErrorCode::EmptyQuery, "knowledge base entry has an empty query");
  if (!issued_.insert(key).second)
    throw Error(ErrorCode::InvalidArgument, "query '" + result.query + "' already issued");
  entries_.push_back(std::move(result));
}

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::Direct: return "direct";
    case Strategy::Retrieval: return "retrieval";
    case Strategy::Conditional: return "conditional";
  }
  return "direct";
}

int next_speaker(int turn, int jury_size) {
  if (turn < 1 || jury_size < 1)
    throw Error(ErrorCode::InvalidArgument, "next_speaker needs turn >= 1 and jury size >= 1");
  return (turn - 1) % jury_size;
}

std::optional<ParsedVerdict> parse_verdict_reply(std::string_view reply) {
  const std::string line = text::trim(reply);
  const auto bar = line.find('|');
  const std::string head = text::trim(bar == std::string::npos ? line : line.substr(0, bar));
  auto verdict = parse_verdict(head);
  if (!verdict) return std::nullopt;
  std::string why = bar == std::string::npos ? "" : text::collapse_whitespace(line.substr(bar + 1));
  return ParsedVerdict{*verdict, std::move(why)};
}

ParsedConfidence parse_confidence_reply(std::string_view reply) {
  ParsedConfidence out;
  const std::string line = text::trim(reply);
  if (!text::starts_with_ci(line, "CONF:")) {
    out.malformed = true;
    out.remainder = line;
    return out;
  }
  const auto bar = line.find('|');
  const std::string number = text::trim(line.substr(5, bar == std::string::npos ? std::string::npos : bar - 5));
  out.remainder = bar == std::string::npos ? "" : line.substr(bar + 1);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(number.data(), number.data() + number.size(), value);
  if (ec != std::errc() || ptr != number.data() + number.size() || !(value >= 0.0 && value <= 1.0)) {
    out.malformed = true;
    out.confidence = 0.0;
    return out;
  }
  out.confidence = value;
  return out;
}

std::optional<std::string> parse_query_reply(std::string_view reply) {
  std::string line = text::trim(reply);
  if (auto nl = line.find('\n'); nl != std::string::npos) line = text::trim(line.substr(0, nl));
  if (text::starts_with_ci(line, "QUERY:")) line = line.substr(6);
  line = text::collapse_whitespace(line);
  if (line.size() >= 2 && line.front() == '"' && line.back() == '"') line = line.substr(1, line.size() - 2);
  if (line.empty()) return std::nullopt;
  return line;
}

Jury::Jury(ProviderRegistry& providers, SystemConfig config, PromptSet prompts, DebateOptions options)
    : providers_(providers),
      config_(std::move(config)),
      prompts_(std::move(prompts)),
      options_(options) {}

Strategy Jury::strategy_for_round(int round) const {
  if (!config_.search_enabled) return Strategy::Direct;
  switch (config_.rule) {
    case DebateRule::FreeDebate:
      return round == 1 ? Strategy::Conditional : Strategy::Direct;
    case DebateRule::MandatorySearch:
      return round == 1 ? Strategy::Retrieval : Strategy::Direct;
    case DebateRule::Adaptive:
      // round 2 only happens after a round-1 disagreement
      if (round == 1) return Strategy::Conditional;
      return round == 2 ? Strategy::Retrieval : Strategy::Direct;
  }
  return Strategy::Direct;
}

std::string Jury::render_context(const DebateTranscript& state, const std::string& instruction) const {
  struct Piece {
    std::string text;
    std::size_t group;  // kb entry index, for re-emitting the query header
  };
  std::deque<Piece> evidence;
  for (std::size_t i = 0; i < state.kb.entries().size(); ++i) {
    const auto& entry = state.kb.entries()[i];
    for (const auto& s : entry.snippets) {
      std::string line = "- " + s.title;
      if (!s.url.empty()) line += " (" + s.url + ")";
      line += ": " + s.text;
      evidence.push_back({std::move(line), i});
    }
  }
  std::deque<std::string> statements;
  for (const auto& r : state.pool.entries()) {
    const std::string& role = config_.roles.at(static_cast<std::size_t>(r.agent_index)).name;
    std::string line = "Round " + std::to_string(r.round) + ", " + role + ": " +
                       std::string(to_string(r.verdict));
    if (!r.explanation.empty()) line += ". " + r.explanation;
    statements.push_back(std::move(line));
  }

  auto total = [&] {
    std::size_t n = 0;
    for (const auto& p : evidence) n += p.text.size() + 1;
    for (const auto& s : statements) n += s.size() + 1;
    return n;
  };
  std::size_t dropped_evidence = 0;
  std::size_t dropped_statements = 0;
  std::size_t size = total();
  while (size > options_.context_budget_chars && !evidence.empty()) {
    size -= evidence.front().text.size() + 1;
    evidence.pop_front();
    ++dropped_evidence;
  }
  while (size > options_.context_budget_chars && !statements.empty()) {
    size -= statements.front().size() + 1;
    statements.pop_front();
    ++dropped_statements;
  }

  std::string knowledge;
  if (dropped_evidence) knowledge += "(" + std::to_string(dropped_evidence) + " earlier snippets omitted)\n";
  std::optional<std::size_t> group;
  for (const auto& p : evidence) {
    if (group != p.group) {
      group = p.group;
      knowledge += "Search: " + state.kb.entries()[p.group].query + "\n";
    }
    knowledge += p.text + "\n";
  }
  if (knowledge.empty()) knowledge = "(none)\n";

  std::string said;
  if (dropped_statements) said += "(" + std::to_string(dropped_statements) + " earlier statements omitted)\n";
  for (const auto& s : statements) said += s + "\n";
  if (said.empty()) said = "(none)\n";

  return text::fill_template(prompts_.get("evaluator_context"), {{"claim", state.claim.text},
                                                                 {"knowledge", text::trim(knowledge)},
                                                                 {"statements", text::trim(said)},
                                                                 {"instruction", text::trim(instruction)}});
}

ChatRequest Jury::base_request(const DebateTranscript& state, int agent) const {
  const auto idx = static_cast<std::size_t>(agent);
  ChatRequest request;
  request.backend_id = config_.evaluator_backends.at(idx);
  request.temperature = options_.temperature;
  request.max_tokens = options_.max_tokens;
  request.route = "evaluator/" + std::to_string(agent);
  request.scope = state.claim.id;
  request.messages.push_back(
      {ChatRole::System,
       text::fill_template(prompts_.get("evaluator_system"), {{"role", config_.roles.at(idx).description}})});
  return request;
}

ParsedVerdict Jury::repair_verdict(ChatRequest request, const std::string& bad_reply) const {
  request.messages.push_back({ChatRole::Assistant, bad_reply});
  request.messages.push_back(
      {ChatRole::User, text::fill_template(prompts_.get("evaluator_repair"),
                                           {{"instruction", text::trim(prompts_.get("evaluator_verdict"))}})});
  const std::string reply = providers_.chat(request);
  if (auto v = parse_verdict_reply(reply)) return *v;
  throw Error(ErrorCode::MalformedEvaluatorOutput,
              "evaluator reply is not TRUE|... or FALSE|...: '" + text::trim(reply).substr(0, 80) + "'");
}

ParsedVerdict Jury::ask_verdict(const DebateTranscript& state, int agent) const {
  ChatRequest request = base_request(state, agent);
  request.messages.push_back({ChatRole::User, render_context(state, prompts_.get("evaluator_verdict"))});
  const std::string reply = providers_.chat(request);
  if (auto v = parse_verdict_reply(reply)) return *v;
  return repair_verdict(std::move(request), reply);
}

VerdictRecord Jury::append_verdict(DebateTranscript& state, int agent, int round, ParsedVerdict v,
                                   std::optional<double> confidence, Strategy effective) const {
  VerdictRecord record{v.verdict, std::move(v.explanation), agent, round, confidence};
  state.pool.append(record);
  state.turn_strategies.push_back(effective);
  return record;
}

VerdictRecord Jury::direct_impl(DebateTranscript& state, int agent, int round,
                                std::optional<double> confidence) const {
  ParsedVerdict v = ask_verdict(state, agent);
  return append_verdict(state, agent, round, std::move(v), confidence, Strategy::Direct);
}

VerdictRecord Jury::retrieval_impl(DebateTranscript& state, int agent, int round,
                                   std::optional<double> confidence) const {
  if (!config_.search_enabled)
    throw Error(ErrorCode::SearchDisabled, "retrieval response requested while search is disabled");

  ChatRequest request = base_request(state, agent);
  std::string issued;
  for (const auto& e : state.kb.entries()) issued += "- " + e.query + "\n";
  if (issued.empty()) issued = "(none)";
  request.messages.push_back(
      {ChatRole::User,
       render_context(state, text::fill_template(prompts_.get("evaluator_query"), {{"issued", text::trim(issued)}}))});

  std::optional<std::string> query;
  std::string last_attempt;
  for (int attempt = 0; attempt <= options_.max_query_regenerations; ++attempt) {
    const std::string reply = providers_.chat(request);
    auto candidate = parse_query_reply(reply);
    if (candidate && !state.kb.has_query(*candidate)) {
      query = std::move(candidate);
      break;
    }
    last_attempt = candidate.value_or("");
    request.messages.push_back({ChatRole::Assistant, reply});
    request.messages.push_back(
        {ChatRole::User, text::fill_template(prompts_.get("evaluator_query_retry"), {{"query", last_attempt}})});
  }
  if (!query) {
    state.notes.push_back({round, agent, "query_dedup_exhausted",
                           "every proposed query duplicated an issued one (last: '" + last_attempt +
                               "'); answered directly"});
    return direct_impl(state, agent, round, confidence);
  }

  SearchResult result = providers_.search(*query);
  state.kb.append(std::move(result));
  state.search_events.push_back({round, agent, *query});
  ParsedVerdict v = ask_verdict(state, agent);
  return append_verdict(state, agent, round, std::move(v), confidence, Strategy::Retrieval);
}

VerdictRecord Jury::direct_response(DebateTranscript& state, int agent, int round) const {
  return direct_impl(state, agent, round, std::nullopt);
}

VerdictRecord Jury::retrieval_response(DebateTranscript& state, int agent, int round) const {
  return retrieval_impl(state, agent, round, std::nullopt);
}

VerdictRecord Jury::conditional_response(DebateTranscript& state, int agent, int round,
                                         double theta) const {
  if (!(theta >= 0.0 && theta <= 1.0))
    throw Error(ErrorCode::InvalidArgument, "theta must lie in [0,1]");
  ChatRequest request = base_request(state, agent);
  request.messages.push_back({ChatRole::User, render_context(state, prompts_.get("evaluator_confidence"))});
  const std::string reply = providers_.chat(request);
  ParsedConfidence parsed = parse_confidence_reply(reply);
  if (parsed.malformed) {
    state.notes.push_back({round, agent, "malformed_confidence",
                           "could not read CONF:x from '" + text::trim(reply).substr(0, 80) +
                               "'; treated as 0 and retrieved"});
    return retrieval_impl(state, agent, round, 0.0);
  }
  if (parsed.confidence < theta) return retrieval_impl(state, agent, round, parsed.confidence);

  auto verdict = parse_verdict_reply(parsed.remainder);
  ParsedVerdict v = verdict ? *verdict : repair_verdict(std::move(request), reply);
  return append_verdict(state, agent, round, std::move(v), parsed.confidence, Strategy::Direct);
}

namespace {

bool unanimous(const std::vector<VerdictRecord>& records) {
  for (const auto& r : records) {
    if (r.verdict != records.front().verdict) return false;
  }
  return true;
}

std::vector<VerdictRecord> round_entries(const MessagePool& pool, int round) {
  std::vector<VerdictRecord> out;
  for (const auto& r : pool.entries()) {
    if (r.round == round) out.push_back(r);
  }
  return out;
}

}  // namespace

DebateTranscript Jury::run_debate(const AtomicClaim& claim) const {
  if (text::trim(claim.text).empty()) throw Error(ErrorCode::InvalidArgument, "claim text is empty");
  DebateTranscript t;
  t.claim = claim;
  t.rule = config_.rule;
  const int n = config_.jury_size;
  int turn = 0;
  int round = 0;
  int agent = 0;
  try {
    for (round = 1; round <= config_.rounds; ++round) {
      const Strategy strategy = strategy_for_round(round);
      for (int i = 0; i < n; ++i) {
        agent = next_speaker(++turn, n);
        switch (strategy) {
          case Strategy::Direct: direct_response(t, agent, round); break;
          case Strategy::Retrieval: retrieval_response(t, agent, round); break;
          case Strategy::Conditional: conditional_response(t, agent, round, config_.theta); break;
        }
      }
      t.rounds_executed = round;
      if (config_.rule == DebateRule::Adaptive && unanimous(round_entries(t.pool, round))) break;
    }
  } catch (const Error& e) {
    t.failure = TurnFailure{e.code(), e.what(), round, agent};
  }
  if (t.rounds_executed > 0) t.final_round_verdicts = round_entries(t.pool, t.rounds_executed);
  return t;
}

json to_json(const DebateTranscript& t, const std::vector<RoleProfile>& roles) {
  json turns = json::array();
  const auto& entries = t.pool.entries();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    json turn = to_json(entries[i]);
    const auto a = static_cast<std::size_t>(entries[i].agent_index);
    turn["role"] = a < roles.size() ? roles[a].name : "";
    turn["strategy"] = std::string(to_string(t.turn_strategies.at(i)));
    turns.push_back(std::move(turn));
  }
  json events = json::array();
  for (const auto& e : t.search_events)
    events.push_back({{"round", e.round}, {"agent", e.agent_index}, {"query", e.query}});
  json kb = json::array();
  for (const auto& r : t.kb.entries()) kb.push_back(to_json(r));
  json notes = json::array();
  for (const auto& n : t.notes)
    notes.push_back({{"round", n.round}, {"agent", n.agent_index}, {"kind", n.kind}, {"detail", n.detail}});
  json finals = json::array();
  for (const auto& r : t.final_round_verdicts) finals.push_back(to_json(r));
  json failure = nullptr;
  if (t.failure) {
    failure = {{"code", std::string(to_string(t.failure->code))},
               {"message", t.failure->message},
               {"round", t.failure->round},
               {"agent", t.failure->agent_index}};
  }
  return {{"claim", to_json(t.claim)},
          {"rule", std::string(to_string(t.rule))},
          {"rounds_executed", t.rounds_executed},
          {"turns", turns},
          {"search_events", events},
          {"knowledge_base", kb},
          {"notes", notes},
          {"final_round_verdicts", finals},
          {"failure", failure}};
}

}  // namespace madfact
