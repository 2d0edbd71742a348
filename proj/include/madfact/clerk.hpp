#pragma once

#include "madfact/core.hpp"
#include "madfact/prompts.hpp"
#include "madfact/providers.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace madfact {

enum class DiscardReason { Instruction, Suggestion, Subjective, Duplicate };

std::string_view to_string(DiscardReason reason);

struct DiscardedItem {
  std::string text;
  DiscardReason reason;

  friend bool operator==(const DiscardedItem&, const DiscardedItem&) = default;
};

struct DecompositionResult {
  std::vector<AtomicClaim> claims;
  std::vector<DiscardedItem> discarded;
};

/// Raw parse of one Clerk reply, before ids and dedup are applied.
struct ClerkReply {
  std::vector<std::string> claims;
  std::vector<DiscardedItem> skipped;
};

/// Line grammar:
///   CLAIM: <text>
///   SKIP:<instruction|suggestion|subjective>: <text>
///   NONE            (only as the sole non-blank line)
/// Anything else raises MalformedClerkOutput; nothing is dropped silently.
ClerkReply parse_clerk_reply(std::string_view reply);

class Clerk {
 public:
  Clerk(ProviderRegistry& providers, std::string backend_id,
        PromptSet prompts = PromptSet::builtin());

  /// Claims keep reply order. Exact duplicates (after casefold and whitespace
  /// collapse) keep their first occurrence; later ones are discarded as Duplicate.
  DecompositionResult decompose(const Question& question, const LongFormResponse& response) const;

 private:
  ProviderRegistry& providers_;
  std::string backend_id_;
  PromptSet prompts_;
};

nlohmann::json to_json(const DecompositionResult& result);

}  // namespace madfact
