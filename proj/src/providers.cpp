#include "madfact/providers.hpp"

#include "madfact/errors.hpp"
#include "madfact/text.hpp"

#include <httplib.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

namespace madfact {

using nlohmann::json;
namespace fs = std::filesystem;

std::string_view to_string(ChatRole role) {
  switch (role) {
    case ChatRole::System: return "system";
    case ChatRole::User: return "user";
    case ChatRole::Assistant: return "assistant";
  }
  return "user";
}

void validate_request(const ChatRequest& request) {
  if (request.messages.empty())
    throw Error(ErrorCode::InvalidArgument, "chat request has no messages");
  if (request.messages.front().role != ChatRole::System)
    throw Error(ErrorCode::InvalidArgument, "first chat message must have the system role");
  if (request.temperature < 0.0)
    throw Error(ErrorCode::InvalidArgument, "temperature must be >= 0");
  if (request.max_tokens <= 0)
    throw Error(ErrorCode::InvalidArgument, "max_tokens must be positive");
}

json canonical_request(const ChatRequest& request) {
  json messages = json::array();
  for (const auto& m : request.messages) {
    messages.push_back({{"content", text::collapse_whitespace(m.content)},
                        {"role", std::string(to_string(m.role))}});
  }
  // nlohmann::json objects are std::map-backed, so dump() emits sorted keys
  return json{{"backend_id", request.backend_id},
              {"max_tokens", request.max_tokens},
              {"messages", messages},
              {"temperature", request.temperature}};
}

std::string cache_key(const ChatRequest& request) {
  return text::sha256_hex(canonical_request(request).dump());
}

std::string search_cache_key(std::string_view query) {
  return text::sha256_hex(json{{"search", text::normalize(query)}}.dump());
}

json to_json(const SearchResult& r) {
  json snippets = json::array();
  for (const auto& s : r.snippets)
    snippets.push_back({{"title", s.title}, {"url", s.url}, {"snippet", s.text}});
  return {{"query", r.query}, {"snippets", snippets}, {"retrieved_at", r.retrieved_at}};
}

namespace {

Snippet snippet_from_json(const json& j) {
  return {j.value("title", ""), j.value("url", j.value("link", "")), j.value("snippet", "")};
}

}  // namespace

SearchResult search_result_from_json(const json& j) {
  SearchResult r;
  r.query = j.at("query").get<std::string>();
  r.retrieved_at = j.value("retrieved_at", "");
  for (const auto& s : j.at("snippets")) r.snippets.push_back(snippet_from_json(s));
  return r;
}

std::vector<Snippet> clean_snippets(std::vector<Snippet> snippets, std::size_t k_max) {
  std::vector<Snippet> out;
  std::set<std::string> seen;
  for (auto& s : snippets) {
    if (out.size() >= k_max) break;
    s.title = text::collapse_whitespace(s.title);
    s.url = text::trim(s.url);
    s.text = text::collapse_whitespace(s.text);
    if (s.text.empty() && s.title.empty()) continue;
    if (!s.url.empty() && !seen.insert(s.url).second) continue;
    out.push_back(std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------- cache

ResponseCache::ResponseCache(fs::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec) throw Error(ErrorCode::CacheIO, "cannot create cache dir '" + dir_.string() + "': " + ec.message());
}

fs::path ResponseCache::path_for(const std::string& key) const {
  if (key.size() < 3) throw Error(ErrorCode::CacheIO, "cache key too short");
  return dir_ / key.substr(0, 2) / key;
}

std::optional<std::string> ResponseCache::get(const std::string& key) const {
  const fs::path p = path_for(key);
  std::ifstream in(p, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw Error(ErrorCode::CacheIO, "failed reading cache entry " + p.string());
  return ss.str();
}

void ResponseCache::put(const std::string& key, std::string_view value) const {
  const fs::path p = path_for(key);
  std::error_code ec;
  fs::create_directories(p.parent_path(), ec);
  if (ec) throw Error(ErrorCode::CacheIO, "cannot create " + p.parent_path().string());
  std::ostringstream tmp_name;
  tmp_name << key << ".tmp." << std::hash<std::thread::id>{}(std::this_thread::get_id());
  const fs::path tmp = p.parent_path() / tmp_name.str();
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(value.data(), static_cast<std::streamsize>(value.size()));
    if (!out) throw Error(ErrorCode::CacheIO, "failed writing " + tmp.string());
  }
  fs::rename(tmp, p, ec);
  if (ec) throw Error(ErrorCode::CacheIO, "failed to commit cache entry " + p.string());
}

void RetryPolicy::wait(int attempt) const {
  auto ms = std::chrono::milliseconds(static_cast<long long>(
      static_cast<double>(initial_backoff.count()) * std::pow(multiplier, attempt - 1)));
  if (sleep) {
    sleep(ms);
  } else {
    std::this_thread::sleep_for(ms);
  }
}

// ---------------------------------------------------------------- mocks

ScriptedChatBackend::ScriptedChatBackend(std::map<std::string, std::vector<std::string>> scripts)
    : scripts_(std::move(scripts)) {}

std::shared_ptr<ScriptedChatBackend> ScriptedChatBackend::from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::ParseError, "chat script must be a JSON object");
  auto backend = std::make_shared<ScriptedChatBackend>();
  for (const auto& [key, replies] : j.items()) {
    backend->add(key, replies.get<std::vector<std::string>>());
  }
  return backend;
}

std::shared_ptr<ScriptedChatBackend> ScriptedChatBackend::from_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::FileNotFound, "cannot open chat script " + path.string());
  try {
    return from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, "bad chat script " + path.string() + ": " + e.what());
  }
}

void ScriptedChatBackend::add(const std::string& key, std::vector<std::string> replies) {
  std::lock_guard lock(mu_);
  auto& list = scripts_[key];
  list.insert(list.end(), std::make_move_iterator(replies.begin()),
              std::make_move_iterator(replies.end()));
}

std::string ScriptedChatBackend::complete(const ChatRequest& request) {
  std::lock_guard lock(mu_);
  ++calls_;
  history_.push_back(request);
  std::vector<std::string> keys;
  if (!request.scope.empty()) keys.push_back(request.route + "@" + request.scope);
  keys.push_back(request.route);
  keys.emplace_back("*");
  for (const auto& key : keys) {
    auto it = scripts_.find(key);
    if (it == scripts_.end()) continue;
    auto& pos = cursor_[key];
    if (pos >= it->second.size()) {
      throw Error(ErrorCode::ScriptExhausted, "script '" + key + "' exhausted after " +
                                                  std::to_string(pos) + " replies");
    }
    return it->second[pos++];
  }
  throw Error(ErrorCode::ScriptExhausted,
              "no script for route '" + request.route + "' (scope '" + request.scope + "')");
}

std::size_t ScriptedChatBackend::remaining(const std::string& key) const {
  std::lock_guard lock(mu_);
  auto it = scripts_.find(key);
  if (it == scripts_.end()) return 0;
  auto c = cursor_.find(key);
  std::size_t used = c == cursor_.end() ? 0 : c->second;
  return it->second.size() - used;
}

std::vector<ChatRequest> ScriptedChatBackend::history() const {
  std::lock_guard lock(mu_);
  return history_;
}

std::shared_ptr<FixtureSearchBackend> FixtureSearchBackend::from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::ParseError, "search fixtures must be a JSON object");
  auto backend = std::make_shared<FixtureSearchBackend>();
  for (const auto& [query, list] : j.items()) {
    std::vector<Snippet> snippets;
    for (const auto& s : list) snippets.push_back(snippet_from_json(s));
    backend->add(query, std::move(snippets));
  }
  return backend;
}

std::shared_ptr<FixtureSearchBackend> FixtureSearchBackend::from_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::FileNotFound, "cannot open search fixtures " + path.string());
  try {
    return from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, "bad search fixtures " + path.string() + ": " + e.what());
  }
}

void FixtureSearchBackend::add(std::string_view query, std::vector<Snippet> snippets) {
  std::lock_guard lock(mu_);
  std::string key = query == "*" ? std::string("*") : text::normalize(query);
  fixtures_[key] = std::move(snippets);
}

std::vector<Snippet> FixtureSearchBackend::search(std::string_view query) {
  std::lock_guard lock(mu_);
  ++calls_;
  auto it = fixtures_.find(text::normalize(query));
  if (it == fixtures_.end()) it = fixtures_.find("*");
  if (it == fixtures_.end())
    throw Error(ErrorCode::SearchUnavailable, "no search fixture for '" + std::string(query) + "'");
  return it->second;
}

// ---------------------------------------------------------------- HTTP

std::pair<std::string, std::string> split_base_url(std::string_view url) {
  std::string u = text::trim(url);
  while (!u.empty() && u.back() == '/') u.pop_back();
  auto scheme_end = u.find("://");
  std::size_t host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
  auto path_start = u.find('/', host_start);
  if (path_start == std::string::npos) return {u, ""};
  return {u.substr(0, path_start), u.substr(path_start)};
}

namespace {

struct HttpOutcome {
  int status = -1;
  std::string body;
  std::string error;
};

HttpOutcome post_json(const std::string& scheme_host, const std::string& path,
                      const httplib::Headers& headers, const std::string& body) {
  HttpOutcome out;
  try {
    httplib::Client client(scheme_host);
    client.set_connection_timeout(10, 0);
    client.set_read_timeout(120, 0);
    auto res = client.Post(path, headers, body, "application/json");
    if (!res) {
      out.error = httplib::to_string(res.error());
      return out;
    }
    out.status = res->status;
    out.body = res->body;
  } catch (const std::exception& e) {
    out.error = e.what();
  }
  return out;
}

template <typename Parse>
auto post_with_retry(const RetryPolicy& retry, const std::string& scheme_host,
                     const std::string& path, const httplib::Headers& headers,
                     const std::string& body, ErrorCode failure, Parse parse) {
  std::string last_error;
  for (int attempt = 1; attempt <= retry.max_attempts; ++attempt) {
    HttpOutcome outcome = post_json(scheme_host, path, headers, body);
    if (outcome.status == 200) {
      try {
        return parse(outcome.body);
      } catch (const Error& e) {
        last_error = e.what();
      }
    } else if (outcome.status > 0) {
      last_error = "HTTP " + std::to_string(outcome.status) + ": " + outcome.body.substr(0, 200);
    } else {
      last_error = outcome.error;
    }
    if (attempt < retry.max_attempts) retry.wait(attempt);
  }
  throw Error(failure, scheme_host + path + " failed after " +
                           std::to_string(retry.max_attempts) + " attempts: " + last_error);
}

}  // namespace

HttpChatBackend::HttpChatBackend(std::string base_url, std::string api_key, std::string model,
                                 RetryPolicy retry)
    : base_url_(std::move(base_url)),
      api_key_(std::move(api_key)),
      model_(std::move(model)),
      retry_(std::move(retry)) {}

json HttpChatBackend::build_body(const ChatRequest& request, const std::string& model) {
  json messages = json::array();
  for (const auto& m : request.messages)
    messages.push_back({{"role", std::string(to_string(m.role))}, {"content", m.content}});
  return {{"model", model},
          {"messages", messages},
          {"temperature", request.temperature},
          {"max_tokens", request.max_tokens}};
}

std::string HttpChatBackend::parse_reply(const std::string& body) {
  json j = json::parse(body, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::BackendUnavailable, "reply is not JSON");
  const json* content = nullptr;
  if (j.contains("choices") && j["choices"].is_array() && !j["choices"].empty()) {
    const json& choice = j["choices"][0];
    if (choice.contains("message") && choice["message"].contains("content"))
      content = &choice["message"]["content"];
  }
  if (!content || !content->is_string())
    throw Error(ErrorCode::BackendUnavailable, "reply has no choices[0].message.content");
  return content->get<std::string>();
}

std::string HttpChatBackend::complete(const ChatRequest& request) {
  auto [host, prefix] = split_base_url(base_url_);
  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
  return post_with_retry(retry_, host, prefix + "/chat/completions", headers,
                         build_body(request, model_).dump(), ErrorCode::BackendUnavailable,
                         [](const std::string& b) { return parse_reply(b); });
}

SerperSearchBackend::SerperSearchBackend(std::string endpoint, std::string api_key,
                                         std::size_t num_results, RetryPolicy retry)
    : endpoint_(std::move(endpoint)),
      api_key_(std::move(api_key)),
      num_results_(num_results),
      retry_(std::move(retry)) {}

std::vector<Snippet> SerperSearchBackend::parse_results(const std::string& body) {
  json j = json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object())
    throw Error(ErrorCode::SearchUnavailable, "search reply is not a JSON object");
  std::vector<Snippet> out;
  if (!j.contains("organic")) return out;
  for (const auto& item : j["organic"]) {
    out.push_back({item.value("title", ""), item.value("link", ""), item.value("snippet", "")});
  }
  return out;
}

std::vector<Snippet> SerperSearchBackend::search(std::string_view query) {
  auto [host, path] = split_base_url(endpoint_);
  httplib::Headers headers;
  headers.emplace("X-API-KEY", api_key_);
  json body = {{"q", std::string(query)}, {"num", num_results_}};
  return post_with_retry(retry_, host, path.empty() ? "/search" : path, headers, body.dump(),
                         ErrorCode::SearchUnavailable,
                         [](const std::string& b) { return parse_results(b); });
}

// ---------------------------------------------------------------- registry

ProviderRegistry::ProviderRegistry(Clock clock, ProviderOptions options)
    : clock_(std::move(clock)),
      options_(options),
      in_flight_(std::make_unique<std::counting_semaphore<>>(
          static_cast<std::ptrdiff_t>(std::max<std::size_t>(options.max_in_flight, 1)))) {}

void ProviderRegistry::register_chat(const std::string& backend_id,
                                     std::shared_ptr<ChatBackend> backend) {
  chat_[backend_id] = std::move(backend);
}

void ProviderRegistry::register_default_chat(std::shared_ptr<ChatBackend> backend) {
  default_chat_ = std::move(backend);
}

void ProviderRegistry::set_search(std::shared_ptr<SearchBackend> backend) {
  search_ = std::move(backend);
}

void ProviderRegistry::set_cache(std::shared_ptr<ResponseCache> cache) { cache_ = std::move(cache); }

bool ProviderRegistry::has_chat(const std::string& backend_id) const {
  return resolve(backend_id) != nullptr;
}

ChatBackend* ProviderRegistry::resolve(const std::string& backend_id) const {
  auto it = chat_.find(backend_id);
  if (it != chat_.end()) return it->second.get();
  return default_chat_.get();
}

namespace {

class SlotGuard {
 public:
  explicit SlotGuard(std::counting_semaphore<>& sem) : sem_(sem) { sem_.acquire(); }
  ~SlotGuard() { sem_.release(); }
  SlotGuard(const SlotGuard&) = delete;
  SlotGuard& operator=(const SlotGuard&) = delete;

 private:
  std::counting_semaphore<>& sem_;
};

}  // namespace

std::string ProviderRegistry::chat(const ChatRequest& request, bool allow_empty) {
  validate_request(request);
  ChatBackend* backend = resolve(request.backend_id);
  if (!backend)
    throw Error(ErrorCode::BackendUnavailable, "no chat backend registered for '" + request.backend_id + "'");
  std::string key;
  if (cache_) {
    key = cache_key(request);
    if (auto hit = cache_->get(key)) return *hit;
  }
  std::string reply;
  {
    SlotGuard slot(*in_flight_);
    ++chat_calls_;
    reply = backend->complete(request);
  }
  if (!allow_empty && text::trim(reply).empty())
    throw Error(ErrorCode::BackendUnavailable, "backend '" + request.backend_id + "' returned empty text");
  if (cache_) cache_->put(key, reply);
  return reply;
}

SearchResult ProviderRegistry::search(std::string_view query) {
  if (text::trim(query).empty()) throw Error(ErrorCode::EmptyQuery, "search query is empty");
  if (!search_) throw Error(ErrorCode::SearchUnavailable, "no search backend configured");
  std::string key;
  if (cache_) {
    key = search_cache_key(query);
    if (auto hit = cache_->get(key)) {
      SearchResult cached = search_result_from_json(json::parse(*hit));
      cached.query = text::collapse_whitespace(query);
      return cached;
    }
  }
  std::vector<Snippet> raw;
  {
    SlotGuard slot(*in_flight_);
    ++search_calls_;
    raw = search_->search(query);
  }
  SearchResult result{text::collapse_whitespace(query), clean_snippets(std::move(raw), options_.k_max),
                      clock_.now()};
  if (cache_) cache_->put(key, to_json(result).dump());
  return result;
}

std::shared_ptr<ProviderRegistry> ProviderRegistry::from_fixtures(const fs::path& dir, Clock clock) {
  if (!fs::is_directory(dir))
    throw Error(ErrorCode::FileNotFound, "mock fixtures directory '" + dir.string() + "' not found");
  auto registry = std::make_shared<ProviderRegistry>(std::move(clock));
  if (fs::exists(dir / "chat.json")) {
    registry->register_default_chat(ScriptedChatBackend::from_file(dir / "chat.json"));
  }
  if (fs::exists(dir / "search.json")) {
    registry->set_search(FixtureSearchBackend::from_file(dir / "search.json"));
  }
  return registry;
}

namespace {

std::string env_or(const char* name, std::string fallback) {
  const char* v = std::getenv(name);
  return v && *v ? std::string(v) : std::move(fallback);
}

class ModelRoutedChatBackend : public ChatBackend {
 public:
  ModelRoutedChatBackend(std::string base, std::string key)
      : base_(std::move(base)), key_(std::move(key)) {}

  std::string complete(const ChatRequest& request) override {
    return HttpChatBackend(base_, key_, request.backend_id).complete(request);
  }

 private:
  std::string base_;
  std::string key_;
};

}  // namespace

std::shared_ptr<ProviderRegistry> ProviderRegistry::from_environment(const SystemConfig& /*config*/,
                                                                     Clock clock) {
  auto registry = std::make_shared<ProviderRegistry>(std::move(clock));
  const std::string base = env_or("MADFACT_LLM_BASE_URL", "https://api.openai.com/v1");
  const std::string key = env_or("MADFACT_LLM_API_KEY", "");
  // the backend id doubles as the upstream model name
  registry->register_default_chat(std::make_shared<ModelRoutedChatBackend>(base, key));
  const std::string search_key = env_or("MADFACT_SEARCH_API_KEY", "");
  if (!search_key.empty()) {
    registry->set_search(std::make_shared<SerperSearchBackend>("https://google.serper.dev/search",
                                                               search_key, registry->options().k_max));
  }
  registry->set_cache(std::make_shared<ResponseCache>(env_or("MADFACT_CACHE_DIR", ".madfact-cache")));
  return registry;
}

}  // namespace madfact
