#include "madfact/providers.hpp"
#include "madfact/text.hpp"

#include "mock_support.hpp"

#include <doctest.h>
#include <httplib.h>

#include <atomic>
#include <chrono>
#include <thread>

using namespace madfact;
using nlohmann::json;
using testsupport::error_code_of;

namespace {

ChatRequest request_for(std::string backend, std::string user, std::string route = "r") {
  ChatRequest r;
  r.backend_id = std::move(backend);
  r.route = std::move(route);
  r.messages = {{ChatRole::System, "sys"}, {ChatRole::User, std::move(user)}};
  return r;
}

RetryPolicy no_sleep(std::vector<std::chrono::milliseconds>* waits = nullptr) {
  RetryPolicy p;
  p.sleep = [waits](std::chrono::milliseconds d) {
    if (waits) waits->push_back(d);
  };
  return p;
}

/// Local HTTP server on an ephemeral port, stopped on scope exit.
class LocalServer {
 public:
  explicit LocalServer(std::function<void(httplib::Server&)> routes) {
    routes(server_);
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~LocalServer() {
    server_.stop();
    thread_.join();
  }
  std::string base() const { return "http://127.0.0.1:" + std::to_string(port_); }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

}  // namespace

TEST_CASE("validate_request: non-empty, system first, sane decode params") {
  ChatRequest r = request_for("m", "hi");
  CHECK_NOTHROW(validate_request(r));
  r.messages.front().role = ChatRole::User;
  CHECK(error_code_of([&] { validate_request(r); }) == ErrorCode::InvalidArgument);
  r = request_for("m", "hi");
  r.temperature = -1;
  CHECK(error_code_of([&] { validate_request(r); }) == ErrorCode::InvalidArgument);
  r = request_for("m", "hi");
  r.max_tokens = 0;
  CHECK(error_code_of([&] { validate_request(r); }) == ErrorCode::InvalidArgument);
  r.messages.clear();
  CHECK(error_code_of([&] { validate_request(r); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("cache_key: canonical over whitespace, blind to routing metadata") {
  ChatRequest a = request_for("m", "Is  the sky\nblue?", "evaluator/0");
  ChatRequest b = request_for("m", "Is the sky blue?", "clerk");
  b.scope = "other";
  CHECK(cache_key(a) == cache_key(b));
  b.temperature = 0.5;
  CHECK(cache_key(a) != cache_key(b));
  CHECK(cache_key(a).size() == 64);
  ChatRequest c = request_for("other-model", "Is the sky blue?");
  CHECK(cache_key(a) != cache_key(c));
}

TEST_CASE("cache_key: key order of the canonical form does not matter") {
  const ChatRequest r = request_for("m", "x");
  const json canon = canonical_request(r);
  // nlohmann sorts object keys, so a reordered parse dumps identically
  json reordered = json::parse(R"({"temperature":0.0,"messages":[{"content":"sys","role":"system"},)"
                               R"({"role":"user","content":"x"}],"max_tokens":1024,"backend_id":"m"})");
  CHECK(canon.dump() == reordered.dump());
  CHECK(text::sha256_hex(reordered.dump()) == cache_key(r));
}

TEST_CASE("response cache: roundtrip, miss, overwrite") {
  testsupport::TempDir dir;
  ResponseCache cache(dir.path());
  const std::string key = std::string(64, 'a');
  CHECK_FALSE(cache.get(key).has_value());
  const std::string value = "TRUE|because \xE2\x9C\x93\n\0tail";
  cache.put(key, value);
  REQUIRE(cache.get(key).has_value());
  CHECK(*cache.get(key) == value);
  cache.put(key, "second");
  CHECK(*cache.get(key) == "second");
  CHECK(std::filesystem::exists(dir.path() / "aa" / key));
}

TEST_CASE("response cache: unwritable directory raises CacheIO") {
  testsupport::TempDir dir;
  testsupport::spit(dir / "blocker", "file");
  CHECK(error_code_of([&] {
          ResponseCache cache(dir / "blocker" / "sub");
          cache.put(std::string(64, 'b'), "v");
        }) == ErrorCode::CacheIO);
}

TEST_CASE("response cache: concurrent writers of one key settle on the value") {
  testsupport::TempDir dir;
  ResponseCache cache(dir.path());
  const std::string key(64, 'c');
  std::vector<std::thread> threads;
  for (int i = 0; i < 8; ++i) {
    threads.emplace_back([&] {
      for (int k = 0; k < 20; ++k) cache.put(key, "same value");
    });
  }
  for (auto& t : threads) t.join();
  CHECK(*cache.get(key) == "same value");
}

TEST_CASE("scripted backend: passthrough, key precedence, exhaustion") {
  ScriptedChatBackend backend({{"r", {"TRUE|because X"}}, {"r@s1", {"scoped"}}, {"*", {"any"}}});
  ChatRequest req = request_for("m", "q");
  CHECK(backend.complete(req) == "TRUE|because X");
  req.scope = "s1";
  CHECK(backend.complete(req) == "scoped");
  req.route = "unknown";
  CHECK(backend.complete(req) == "any");
  CHECK(error_code_of([&] { backend.complete(req); }) == ErrorCode::ScriptExhausted);
  CHECK(backend.calls() == 4);

  ScriptedChatBackend empty;
  CHECK(error_code_of([&] { empty.complete(request_for("m", "q")); }) == ErrorCode::ScriptExhausted);
}

TEST_CASE("scripted backend from JSON") {
  auto backend = ScriptedChatBackend::from_json(json{{"clerk", {"CLAIM: a", "CLAIM: b"}}});
  CHECK(backend->remaining("clerk") == 2);
  CHECK(backend->complete(request_for("m", "q", "clerk")) == "CLAIM: a");
  CHECK(backend->remaining("clerk") == 1);
  CHECK(error_code_of([] { ScriptedChatBackend::from_json(json::array()); }) == ErrorCode::ParseError);
}

TEST_CASE("registry chat: unregistered backend, empty replies") {
  ProviderRegistry registry(Clock::frozen());
  CHECK(error_code_of([&] { registry.chat(request_for("nobody", "q")); }) == ErrorCode::BackendUnavailable);

  auto backend = std::make_shared<ScriptedChatBackend>(std::map<std::string, std::vector<std::string>>{
      {"r", {"  ", ""}}});
  registry.register_chat("m", backend);
  CHECK(registry.has_chat("m"));
  CHECK_FALSE(registry.has_chat("other"));
  CHECK(error_code_of([&] { registry.chat(request_for("m", "q")); }) == ErrorCode::BackendUnavailable);
  CHECK(registry.chat(request_for("m", "q"), /*allow_empty=*/true).empty());
}

TEST_CASE("registry chat: cache serves repeats with one upstream call") {
  testsupport::TempDir dir;
  auto backend = std::make_shared<ScriptedChatBackend>(std::map<std::string, std::vector<std::string>>{
      {"r", {"TRUE|cached"}}});
  ProviderRegistry registry(Clock::frozen());
  registry.register_chat("m", backend);
  registry.set_cache(std::make_shared<ResponseCache>(dir.path()));
  const std::string first = registry.chat(request_for("m", "q"));
  const std::string second = registry.chat(request_for("m", "q"));
  CHECK(first == "TRUE|cached");
  CHECK(second == first);
  CHECK(registry.upstream_chat_calls() == 1);
  CHECK(backend->calls() == 1);
}

TEST_CASE("property: cache transparency over random request streams") {
  testsupport::Rng rng(5);
  testsupport::TempDir dir;
  for (int trial = 0; trial < 20; ++trial) {
    std::map<std::string, std::vector<std::string>> script;
    std::vector<std::string> users;
    for (int i = 0; i < 5; ++i) {
      const std::string route = "route" + std::to_string(i);
      users.push_back("prompt " + std::to_string(trial) + "-" + std::to_string(i));
      script[route] = std::vector<std::string>(20, "reply " + std::to_string(trial * 10 + i));
    }
    ProviderRegistry plain(Clock::frozen());
    plain.register_default_chat(std::make_shared<ScriptedChatBackend>(script));
    ProviderRegistry cached(Clock::frozen());
    cached.register_default_chat(std::make_shared<ScriptedChatBackend>(script));
    cached.set_cache(std::make_shared<ResponseCache>(dir.path()));
    std::set<int> distinct;
    for (int k = 0; k < 15; ++k) {
      const int i = static_cast<int>(rng.below(5));
      distinct.insert(i);
      const ChatRequest r = request_for("m", users[static_cast<std::size_t>(i)], "route" + std::to_string(i));
      CHECK(plain.chat(r) == cached.chat(r));
    }
    CHECK(cached.upstream_chat_calls() == distinct.size());
    CHECK(plain.upstream_chat_calls() == 15);
  }
}

TEST_CASE("registry search: empty query, fixtures, dedup and k_max") {
  testsupport::MockProviders mock;
  CHECK(error_code_of([&] { mock.registry->search("   "); }) == ErrorCode::EmptyQuery);

  mock.search->add("Zhuang population", {{"A", "https://a", "The Zhuang number about 19.6 million."},
                                         {"B", "https://b", "Largest minority   group."}});
  const SearchResult r = mock.registry->search("  zhuang   POPULATION ");
  CHECK(r.snippets.size() == 2);
  CHECK(r.snippets[1].text == "Largest minority group.");
  CHECK(r.retrieved_at == "1970-01-01T00:00:00Z");

  mock.search->add("dup", {{"A", "https://same", "one"}, {"B", "https://same", "two"}});
  CHECK(mock.registry->search("dup").snippets.size() == 1);

  std::vector<Snippet> many;
  for (int i = 0; i < 9; ++i) many.push_back({"t", "https://u/" + std::to_string(i), "s"});
  mock.search->add("many", many);
  CHECK(mock.registry->search("many").snippets.size() == 5);

  ProviderRegistry bare(Clock::frozen());
  CHECK(error_code_of([&] { bare.search("q"); }) == ErrorCode::SearchUnavailable);

  FixtureSearchBackend strict;
  CHECK(error_code_of([&] { strict.search("q"); }) == ErrorCode::SearchUnavailable);
}

TEST_CASE("clean_snippets: first url wins, whitespace collapsed") {
  const auto out = clean_snippets({{" T ", "u1", "a\n b"}, {"X", "u1", "dup"}, {"Y", "u2", "c"}}, 5);
  REQUIRE(out.size() == 2);
  CHECK(out[0].title == "T");
  CHECK(out[0].text == "a b");
  CHECK(out[1].url == "u2");
}

TEST_CASE("search result JSON roundtrip") {
  SearchResult r{"q", {{"t", "u", "s"}}, "1970-01-01T00:00:00Z"};
  CHECK(search_result_from_json(to_json(r)) == r);
}

TEST_CASE("retry policy: exponential backoff schedule") {
  std::vector<std::chrono::milliseconds> waits;
  RetryPolicy p = no_sleep(&waits);
  p.wait(1);
  p.wait(2);
  REQUIRE(waits.size() == 2);
  CHECK(waits[0].count() == 250);
  CHECK(waits[1].count() == 500);
}

TEST_CASE("split_base_url") {
  CHECK(split_base_url("https://api.example.com/v1/") ==
        std::pair<std::string, std::string>{"https://api.example.com", "/v1"});
  CHECK(split_base_url("http://127.0.0.1:8080") == std::pair<std::string, std::string>{"http://127.0.0.1:8080", ""});
}

TEST_CASE("http chat backend speaks the chat-completions wire format") {
  std::atomic<int> hits{0};
  json seen;
  std::string auth;
  LocalServer server([&](httplib::Server& s) {
    s.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
      ++hits;
      seen = json::parse(req.body);
      auth = req.get_header_value("Authorization");
      res.set_content(R"({"choices":[{"message":{"role":"assistant","content":"TRUE|wire ok"}}]})",
                      "application/json");
    });
  });
  HttpChatBackend backend(server.base() + "/v1", "sk-test", "gpt-4o-mini", no_sleep());
  ChatRequest r = request_for("ignored", "Is water wet?");
  r.max_tokens = 64;
  CHECK(backend.complete(r) == "TRUE|wire ok");
  CHECK(hits == 1);
  CHECK(auth == "Bearer sk-test");
  CHECK(seen["model"] == "gpt-4o-mini");
  CHECK(seen["max_tokens"] == 64);
  CHECK(seen["messages"][0]["role"] == "system");
  CHECK(seen["messages"][1]["content"] == "Is water wet?");
  CHECK_FALSE(seen.contains("route"));
}

TEST_CASE("http chat backend retries transient failures, then gives up") {
  std::atomic<int> hits{0};
  LocalServer server([&](httplib::Server& s) {
    s.Post("/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
      if (++hits < 3) {
        res.status = 503;
        res.set_content("busy", "text/plain");
        return;
      }
      res.set_content(R"({"choices":[{"message":{"content":"FALSE|third time"}}]})", "application/json");
    });
  });
  std::vector<std::chrono::milliseconds> waits;
  HttpChatBackend ok(server.base(), "", "m", no_sleep(&waits));
  CHECK(ok.complete(request_for("m", "q")) == "FALSE|third time");
  CHECK(hits == 3);
  CHECK(waits.size() == 2);

  LocalServer down([&](httplib::Server& s) {
    s.Post("/chat/completions", [&](const httplib::Request&, httplib::Response& res) { res.status = 401; });
  });
  HttpChatBackend failing(down.base(), "bad", "m", no_sleep());
  CHECK(error_code_of([&] { failing.complete(request_for("m", "q")); }) == ErrorCode::BackendUnavailable);
}

TEST_CASE("http chat backend: malformed bodies are BackendUnavailable") {
  CHECK(error_code_of([] { HttpChatBackend::parse_reply("not json"); }) == ErrorCode::BackendUnavailable);
  CHECK(error_code_of([] { HttpChatBackend::parse_reply(R"({"choices":[]})"); }) == ErrorCode::BackendUnavailable);
  CHECK(HttpChatBackend::parse_reply(R"({"choices":[{"message":{"content":"x"}}]})") == "x");
}

TEST_CASE("serper backend posts q and reads organic results") {
  json seen;
  std::string key;
  LocalServer server([&](httplib::Server& s) {
    s.Post("/search", [&](const httplib::Request& req, httplib::Response& res) {
      seen = json::parse(req.body);
      key = req.get_header_value("X-API-KEY");
      res.set_content(R"({"organic":[{"title":"Zhuang","link":"https://z","snippet":"Largest minority."},)"
                      R"({"title":"Dup","link":"https://z","snippet":"again"}]})",
                      "application/json");
    });
  });
  auto backend = std::make_shared<SerperSearchBackend>(server.base() + "/search", "serper-key", 5, no_sleep());
  ProviderRegistry registry(Clock::frozen());
  registry.set_search(backend);
  const SearchResult r = registry.search("zhuang population");
  CHECK(seen["q"] == "zhuang population");
  CHECK(seen["num"] == 5);
  CHECK(key == "serper-key");
  REQUIRE(r.snippets.size() == 1);
  CHECK(r.snippets[0].title == "Zhuang");
  CHECK(r.snippets[0].text == "Largest minority.");
}

TEST_CASE("serper backend: unreachable endpoint is SearchUnavailable") {
  SerperSearchBackend backend("http://127.0.0.1:1/search", "k", 5, no_sleep());
  CHECK(error_code_of([&] { backend.search("q"); }) == ErrorCode::SearchUnavailable);
}

TEST_CASE("from_fixtures loads chat.json and search.json") {
  testsupport::TempDir dir;
  testsupport::spit(dir / "chat.json", R"({"r": ["hello"]})");
  testsupport::spit(dir / "search.json", R"({"capital of france": [{"title":"P","url":"https://p","snippet":"Paris"}]})");
  auto registry = ProviderRegistry::from_fixtures(dir.path(), Clock::frozen());
  CHECK(registry->chat(request_for("anything", "q")) == "hello");
  CHECK(registry->search("Capital of France").snippets.at(0).text == "Paris");
  CHECK(error_code_of([] { ProviderRegistry::from_fixtures("/nonexistent/fixtures"); }) == ErrorCode::FileNotFound);
}

TEST_CASE("in-flight bound holds under concurrency") {
  class SlowBackend : public ChatBackend {
   public:
    std::string complete(const ChatRequest&) override {
      const int now = ++active;
      int seen = peak.load();
      while (now > seen && !peak.compare_exchange_weak(seen, now)) {
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(5));
      --active;
      return "ok";
    }
    std::atomic<int> active{0};
    std::atomic<int> peak{0};
  };
  auto slow = std::make_shared<SlowBackend>();
  ProviderRegistry registry(Clock::frozen(), ProviderOptions{5, 2});
  registry.register_default_chat(slow);
  std::vector<std::thread> threads;
  for (int i = 0; i < 6; ++i) {
    threads.emplace_back([&] {
      for (int k = 0; k < 3; ++k) registry.chat(request_for("m", "q"));
    });
  }
  for (auto& t : threads) t.join();
  CHECK(slow->peak.load() <= 2);
  CHECK(registry.upstream_chat_calls() == 18);
}
