#pragma once

#include "madfact/core.hpp"
#include "madfact/errors.hpp"
#include "madfact/prompts.hpp"
#include "madfact/providers.hpp"

#include <optional>
#include <set>
#include <string>
#include <vector>

namespace madfact {

/// Shared log of juror statements. Append-only, in speaking order.
class MessagePool {
 public:
  /// Throws InvalidArgument if the record would break (round, agent) ordering.
  void append(VerdictRecord record);

  const std::vector<VerdictRecord>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

 private:
  std::vector<VerdictRecord> entries_;
};

/// Shared retrieval store. Append-only; no two entries share a normalized query.
class KnowledgeBase {
 public:
  bool has_query(std::string_view query) const;
  /// Throws InvalidArgument on a duplicate normalized query.
  void append(SearchResult result);

  const std::vector<SearchResult>& entries() const { return entries_; }
  const std::set<std::string>& issued_queries() const { return issued_; }
  std::size_t size() const { return entries_.size(); }

 private:
  std::vector<SearchResult> entries_;
  std::set<std::string> issued_;
};

enum class Strategy { Direct, Retrieval, Conditional };
std::string_view to_string(Strategy s);

struct SearchEvent {
  int round;
  int agent_index;
  std::string query;

  friend bool operator==(const SearchEvent&, const SearchEvent&) = default;
};

/// Non-fatal events worth keeping in the transcript.
struct TranscriptNote {
  int round;
  int agent_index;
  std::string kind;  // "malformed_confidence", "query_dedup_exhausted"
  std::string detail;
};

struct TurnFailure {
  ErrorCode code;
  std::string message;
  int round;
  int agent_index;
};

struct DebateTranscript {
  AtomicClaim claim;
  MessagePool pool;
  KnowledgeBase kb;
  DebateRule rule = DebateRule::FreeDebate;
  int rounds_executed = 0;
  std::vector<VerdictRecord> final_round_verdicts;
  std::vector<SearchEvent> search_events;
  /// Effective strategy of each pool entry (Direct or Retrieval).
  std::vector<Strategy> turn_strategies;
  std::vector<TranscriptNote> notes;
  std::optional<TurnFailure> failure;

  bool failed() const { return failure.has_value(); }
};

nlohmann::json to_json(const DebateTranscript& t, const std::vector<RoleProfile>& roles);

/// 0-based speaker for 1-based global turn t: (t - 1) mod N.
int next_speaker(int turn, int jury_size);

struct DebateOptions {
  /// Character budget for evidence + statements in one prompt.
  std::size_t context_budget_chars = 24000;
  int max_query_regenerations = 3;
  int max_tokens = 512;
  double temperature = 0.0;
};

struct ParsedVerdict {
  Verdict verdict;
  std::string explanation;
};

/// "TRUE|why" / "FALSE|why"; nullopt if the reply does not match.
std::optional<ParsedVerdict> parse_verdict_reply(std::string_view reply);

struct ParsedConfidence {
  double confidence = 0.0;
  bool malformed = false;
  std::string remainder;  // text after "CONF:x|", or the whole reply when malformed
};

/// Reads a leading "CONF:x.xx|". Missing, unparseable or out-of-range values
/// give confidence 0 with malformed = true.
ParsedConfidence parse_confidence_reply(std::string_view reply);

/// "QUERY: text" or a bare line; nullopt when empty.
std::optional<std::string> parse_query_reply(std::string_view reply);

class Jury {
 public:
  /// config must already be validated.
  Jury(ProviderRegistry& providers, SystemConfig config, PromptSet prompts = PromptSet::builtin(),
       DebateOptions options = {});

  DebateTranscript run_debate(const AtomicClaim& claim) const;

  // Individual response strategies. Each appends exactly one entry to
  // state.pool and returns it.
  VerdictRecord direct_response(DebateTranscript& state, int agent, int round) const;
  VerdictRecord retrieval_response(DebateTranscript& state, int agent, int round) const;
  VerdictRecord conditional_response(DebateTranscript& state, int agent, int round,
                                     double theta) const;

  /// Strategy every agent uses in the given round under the configured rule.
  Strategy strategy_for_round(int round) const;

  const SystemConfig& config() const { return config_; }

  /// Builds the user prompt body; exposed so truncation can be tested.
  std::string render_context(const DebateTranscript& state, const std::string& instruction) const;

 private:
  ChatRequest base_request(const DebateTranscript& state, int agent) const;
  ParsedVerdict ask_verdict(const DebateTranscript& state, int agent) const;
  ParsedVerdict repair_verdict(ChatRequest request, const std::string& bad_reply) const;
  VerdictRecord direct_impl(DebateTranscript& state, int agent, int round,
                            std::optional<double> confidence) const;
  VerdictRecord retrieval_impl(DebateTranscript& state, int agent, int round,
                               std::optional<double> confidence) const;
  VerdictRecord append_verdict(DebateTranscript& state, int agent, int round, ParsedVerdict v,
                               std::optional<double> confidence, Strategy effective) const;

  ProviderRegistry& providers_;
  SystemConfig config_;
  PromptSet prompts_;
  DebateOptions options_;
};

}  // namespace madfact
