#pragma once

#include "madfact/core.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <vector>

namespace madfact {

enum class ChatRole { System, User, Assistant };
std::string_view to_string(ChatRole role);

struct ChatMessage {
  ChatRole role;
  std::string content;
};

struct ChatRequest {
  std::string backend_id;
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
  int max_tokens = 1024;
  // Routing metadata for scripted backends: "<route>@<scope>" is looked up
  // before "<route>". Never sent upstream and not part of the cache key.
  std::string route;
  std::string scope;
};

/// Throws InvalidArgument if the request violates its invariants.
void validate_request(const ChatRequest& request);

/// Canonical JSON of the upstream-visible request (sorted keys, whitespace-normalized content).
nlohmann::json canonical_request(const ChatRequest& request);
std::string cache_key(const ChatRequest& request);
std::string search_cache_key(std::string_view query);

struct Snippet {
  std::string title;
  std::string url;
  std::string text;

  friend bool operator==(const Snippet&, const Snippet&) = default;
};

struct SearchResult {
  std::string query;
  std::vector<Snippet> snippets;
  std::string retrieved_at;

  friend bool operator==(const SearchResult&, const SearchResult&) = default;
};

nlohmann::json to_json(const SearchResult& r);
SearchResult search_result_from_json(const nlohmann::json& j);

/// Whitespace-normalizes every field, drops url duplicates (first wins) and
/// truncates to k_max.
std::vector<Snippet> clean_snippets(std::vector<Snippet> snippets, std::size_t k_max);

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual std::string complete(const ChatRequest& request) = 0;
};

class SearchBackend {
 public:
  virtual ~SearchBackend() = default;
  virtual std::vector<Snippet> search(std::string_view query) = 0;
};

/// Content-addressed file cache: <dir>/<key[0:2]>/<key>. Writes go through a
/// temp file + rename, so concurrent writers of one key settle on last-write-wins.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir);

  std::optional<std::string> get(const std::string& key) const;
  void put(const std::string& key, std::string_view value) const;

  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path path_for(const std::string& key) const;
  std::filesystem::path dir_;
};

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{250};
  double multiplier = 2.0;
  // Injected so tests can observe backoff without sleeping.
  std::function<void(std::chrono::milliseconds)> sleep = nullptr;

  void wait(int attempt) const;
};

/// Replies scripted per key, consumed in order. Lookup tries "<route>@<scope>",
/// "<route>", then "*". Running out is a test bug and raises ScriptExhausted.
class ScriptedChatBackend : public ChatBackend {
 public:
  ScriptedChatBackend() = default;
  explicit ScriptedChatBackend(std::map<std::string, std::vector<std::string>> scripts);

  static std::shared_ptr<ScriptedChatBackend> from_json(const nlohmann::json& j);
  static std::shared_ptr<ScriptedChatBackend> from_file(const std::filesystem::path& path);

  void add(const std::string& key, std::vector<std::string> replies);
  std::string complete(const ChatRequest& request) override;

  std::size_t calls() const { return calls_.load(); }
  std::size_t remaining(const std::string& key) const;
  /// Prompts seen so far, for assertions on prompt content.
  std::vector<ChatRequest> history() const;

 private:
  mutable std::mutex mu_;
  std::map<std::string, std::vector<std::string>> scripts_;
  std::map<std::string, std::size_t> cursor_;
  std::vector<ChatRequest> history_;
  std::atomic<std::size_t> calls_{0};
};

/// Fixture snippets keyed by normalized query; "*" is the fallback fixture.
class FixtureSearchBackend : public SearchBackend {
 public:
  FixtureSearchBackend() = default;

  static std::shared_ptr<FixtureSearchBackend> from_json(const nlohmann::json& j);
  static std::shared_ptr<FixtureSearchBackend> from_file(const std::filesystem::path& path);

  void add(std::string_view query, std::vector<Snippet> snippets);
  std::vector<Snippet> search(std::string_view query) override;

  std::size_t calls() const { return calls_.load(); }

 private:
  mutable std::mutex mu_;
  std::map<std::string, std::vector<Snippet>> fixtures_;
  std::atomic<std::size_t> calls_{0};
};

/// Chat-completions style HTTP backend: POST {base}/chat/completions.
class HttpChatBackend : public ChatBackend {
 public:
  HttpChatBackend(std::string base_url, std::string api_key, std::string model,
                  RetryPolicy retry = {});

  std::string complete(const ChatRequest& request) override;

  static nlohmann::json build_body(const ChatRequest& request, const std::string& model);
  /// Extracts choices[0].message.content; throws BackendUnavailable on anything else.
  static std::string parse_reply(const std::string& body);

 private:
  std::string base_url_;
  std::string api_key_;
  std::string model_;
  RetryPolicy retry_;
};

/// Serper-style search: POST {"q": query, "num": k} with X-API-KEY; reads "organic".
class SerperSearchBackend : public SearchBackend {
 public:
  SerperSearchBackend(std::string endpoint, std::string api_key, std::size_t num_results = 5,
                      RetryPolicy retry = {});

  std::vector<Snippet> search(std::string_view query) override;

  static std::vector<Snippet> parse_results(const std::string& body);

 private:
  std::string endpoint_;
  std::string api_key_;
  std::size_t num_results_;
  RetryPolicy retry_;
};

/// Splits "https://host:port/prefix" into ("https://host:port", "/prefix").
std::pair<std::string, std::string> split_base_url(std::string_view url);

struct ProviderOptions {
  std::size_t k_max = 5;
  std::size_t max_in_flight = 8;
};

/// Routes chat requests to registered backends and searches to the one search
/// backend, with optional caching and a global bound on in-flight requests.
class ProviderRegistry {
 public:
  explicit ProviderRegistry(Clock clock = Clock::system(), ProviderOptions options = {});

  void register_chat(const std::string& backend_id, std::shared_ptr<ChatBackend> backend);
  /// Used for any backend id without its own registration.
  void register_default_chat(std::shared_ptr<ChatBackend> backend);
  void set_search(std::shared_ptr<SearchBackend> backend);
  void set_cache(std::shared_ptr<ResponseCache> cache);

  bool has_chat(const std::string& backend_id) const;
  bool has_search() const { return search_ != nullptr; }
  const Clock& clock() const { return clock_; }
  const ProviderOptions& options() const { return options_; }

  /// Non-empty reply text unless allow_empty is set.
  std::string chat(const ChatRequest& request, bool allow_empty = false);
  SearchResult search(std::string_view query);

  /// Upstream calls, i.e. excluding cache hits.
  std::size_t upstream_chat_calls() const { return chat_calls_.load(); }
  std::size_t upstream_search_calls() const { return search_calls_.load(); }

  /// Mock providers read from <dir>/chat.json and <dir>/search.json (either may be absent).
  static std::shared_ptr<ProviderRegistry> from_fixtures(const std::filesystem::path& dir,
                                                         Clock clock = Clock::system());
  /// Live providers from MADFACT_* environment variables; cache on by default.
  static std::shared_ptr<ProviderRegistry> from_environment(const SystemConfig& config,
                                                            Clock clock = Clock::system());

 private:
  ChatBackend* resolve(const std::string& backend_id) const;

  Clock clock_;
  ProviderOptions options_;
  std::map<std::string, std::shared_ptr<ChatBackend>> chat_;
  std::shared_ptr<ChatBackend> default_chat_;
  std::shared_ptr<SearchBackend> search_;
  std::shared_ptr<ResponseCache> cache_;
  std::unique_ptr<std::counting_semaphore<>> in_flight_;
  std::atomic<std::size_t> chat_calls_{0};
  std::atomic<std::size_t> search_calls_{0};
};

}  // namespace madfact
