#include "madfact/clerk.hpp"

#include "madfact/errors.hpp"
#include "madfact/text.hpp"

#include <set>

namespace madfact {

std::string_view to_string(DiscardReason reason) {
  switch (reason) {
    case DiscardReason::Instruction: return "instruction";
    case DiscardReason::Suggestion: return "suggestion";
    case DiscardReason::Subjective: return "subjective";
    case DiscardReason::Duplicate: return "duplicate";
  }
  return "subjective";
}

namespace {

[[noreturn]] void malformed(std::size_t line, const std::string& why) {
  throw Error(ErrorCode::MalformedClerkOutput,
              "clerk reply line " + std::to_string(line) + ": " + why);
}

}  // namespace

ClerkReply parse_clerk_reply(std::string_view reply) {
  ClerkReply out;
  std::size_t nonblank = 0;
  bool saw_none = false;
  std::size_t lineno = 0;
  for (const auto& raw : text::split_lines(reply)) {
    ++lineno;
    const std::string line = text::trim(raw);
    if (line.empty()) continue;
    ++nonblank;
    if (line == "NONE" || line == "none") {
      saw_none = true;
      continue;
    }
    if (text::starts_with_ci(line, "CLAIM:")) {
      std::string claim = text::collapse_whitespace(line.substr(6));
      if (claim.empty()) malformed(lineno, "empty CLAIM");
      out.claims.push_back(std::move(claim));
      continue;
    }
    if (text::starts_with_ci(line, "SKIP:")) {
      const std::string rest = line.substr(5);
      const auto colon = rest.find(':');
      if (colon == std::string::npos) malformed(lineno, "SKIP without reason");
      const std::string reason = text::normalize(rest.substr(0, colon));
      std::string item = text::collapse_whitespace(rest.substr(colon + 1));
      if (item.empty()) malformed(lineno, "empty SKIP text");
      DiscardReason r;
      if (reason == "instruction") {
        r = DiscardReason::Instruction;
      } else if (reason == "suggestion") {
        r = DiscardReason::Suggestion;
      } else if (reason == "subjective") {
        r = DiscardReason::Subjective;
      } else {
        malformed(lineno, "unknown SKIP reason '" + reason + "'");
      }
      out.skipped.push_back({std::move(item), r});
      continue;
    }
    malformed(lineno, "unrecognized line '" + line.substr(0, 60) + "'");
  }
  if (saw_none && nonblank > 1) malformed(lineno, "NONE mixed with other lines");
  if (nonblank == 0) malformed(lineno, "empty reply");
  return out;
}

Clerk::Clerk(ProviderRegistry& providers, std::string backend_id, PromptSet prompts)
    : providers_(providers), backend_id_(std::move(backend_id)), prompts_(std::move(prompts)) {}

DecompositionResult Clerk::decompose(const Question& question,
                                     const LongFormResponse& response) const {
  DecompositionResult result;
  if (text::trim(response.text).empty()) return result;

  ChatRequest request;
  request.backend_id = backend_id_;
  request.temperature = 0.0;
  request.max_tokens = 2048;
  request.route = "clerk";
  request.scope = response.id;
  request.messages.push_back({ChatRole::System, prompts_.get("clerk_system")});
  request.messages.push_back(
      {ChatRole::User, text::fill_template(prompts_.get("clerk_user"),
                                           {{"question", question.text}, {"response", response.text}})});

  std::string reply = providers_.chat(request);
  ClerkReply parsed;
  try {
    parsed = parse_clerk_reply(reply);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::MalformedClerkOutput) throw;
    request.messages.push_back({ChatRole::Assistant, reply});
    request.messages.push_back({ChatRole::User, prompts_.get("clerk_repair")});
    parsed = parse_clerk_reply(providers_.chat(request));
  }

  std::set<std::string> seen;
  for (auto& text_ : parsed.claims) {
    if (!seen.insert(text::normalize(text_)).second) {
      result.discarded.push_back({std::move(text_), DiscardReason::Duplicate});
      continue;
    }
    AtomicClaim claim;
    claim.id = response.id + "-c" + std::to_string(result.claims.size() + 1);
    claim.text = std::move(text_);
    claim.source_response = response.id;
    result.claims.push_back(std::move(claim));
  }
  for (auto& item : parsed.skipped) {
    // an item both claimed and skipped stays a claim
    if (seen.count(text::normalize(item.text))) continue;
    result.discarded.push_back(std::move(item));
  }
  return result;
}

nlohmann::json to_json(const DecompositionResult& result) {
  nlohmann::json claims = nlohmann::json::array();
  for (const auto& c : result.claims) claims.push_back(to_json(c));
  nlohmann::json discarded = nlohmann::json::array();
  for (const auto& d : result.discarded)
    discarded.push_back({{"text", d.text}, {"reason", std::string(to_string(d.reason))}});
  return {{"claims", claims}, {"discarded", discarded}};
}

}  // namespace madfact
