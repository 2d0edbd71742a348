#include "support.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <sys/wait.h>

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const std::string kMock = std::string(MADFACT_FIXTURES_DIR) + "/mock";

struct Result {
  int exit_code;
  std::string out;
  std::string err;
};

std::string quote(const std::string& s) {
  std::string q = "'";
  for (char c : s) q += c == '\'' ? std::string("'\\''") : std::string(1, c);
  return q + "'";
}

Result run(const testsupport::TempDir& dir, const std::vector<std::string>& args) {
  std::string cmd = quote(MADFACT_CLI_PATH);
  for (const auto& a : args) cmd += " " + quote(a);
  const fs::path out = dir / "stdout.txt", err = dir / "stderr.txt";
  cmd += " >" + quote(out.string()) + " 2>" + quote(err.string());
  const int status = std::system(cmd.c_str());
  REQUIRE(WIFEXITED(status));
  return {WEXITSTATUS(status), testsupport::slurp(out), testsupport::slurp(err)};
}

std::vector<std::string> mock_flags(const fs::path& out) {
  return {"--config", kMock + "/config.json", "--mock", kMock, "--frozen-clock", "--jobs", "2", "--out", out.string()};
}

std::vector<std::string> operator+(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

TEST_CASE("verify with a one-claim file writes one transcript and one decision") {
  testsupport::TempDir dir;
  testsupport::spit(dir / "one.jsonl",
                    "{\"id\":\"r1-c1\",\"claim\":\"The Zhuang are the largest ethnic minority in China.\",\"response_id\":\"r1\"}\n");
  const Result r = run(dir, mock_flags(dir / "out") + std::vector<std::string>{"verify", "--claims", (dir / "one.jsonl").string()});
  CHECK(r.exit_code == 0);
  CHECK(json::parse(r.out)["decided"] == 1);
  CHECK(fs::exists(dir / "out" / "transcripts" / "r1" / "r1-c1.json"));
  CHECK(fs::exists(dir / "out" / "decisions.json"));
}

TEST_CASE("missing config file exits 2 and names the path") {
  testsupport::TempDir dir;
  const Result r = run(dir, {"--config", "/nonexistent/madfact.json", "--mock", kMock, "verify", "--claims",
                             kMock + "/claims.jsonl"});
  CHECK(r.exit_code == 2);
  CHECK(r.err.find("/nonexistent/madfact.json") != std::string::npos);
}

TEST_CASE("no-search with a search-dependent rule is refused as a config error") {
  testsupport::TempDir dir;
  const Result r = run(dir, mock_flags(dir / "out") + std::vector<std::string>{"--rule", "mandatory-search", "--ablation",
                                                                               "no-search", "verify", "--claims",
                                                                               kMock + "/claims.jsonl"});
  CHECK(r.exit_code == 1);
  CHECK(r.err.find("ablation") != std::string::npos);
  CHECK_FALSE(fs::exists(dir / "out" / "decisions.json"));
}

TEST_CASE("exit codes: provider exhaustion 3, usage 4, IO 2") {
  testsupport::TempDir dir;
  testsupport::spit(dir / "c.jsonl", "{\"id\":\"unscripted\",\"claim\":\"Nobody scripted this.\"}\n");
  CHECK(run(dir, mock_flags(dir / "out") + std::vector<std::string>{"verify", "--claims", (dir / "c.jsonl").string()})
            .exit_code == 3);
  CHECK(run(dir, {"verify"}).exit_code == 4);
  CHECK(run(dir, {"--no-such-flag"}).exit_code == 4);
  CHECK(run(dir, mock_flags(dir / "out") + std::vector<std::string>{"verify", "--claims", "/nonexistent.jsonl"})
            .exit_code == 2);
  CHECK(run(dir, {"--help"}).exit_code == 0);
}

TEST_CASE("build-pyramid, score with two gammas, then bench and ablate") {
  testsupport::TempDir dir;
  const fs::path out = dir / "out";
  REQUIRE(run(dir, mock_flags(out / "verify") + std::vector<std::string>{"verify", "--claims", kMock + "/claims.jsonl"})
              .exit_code == 0);
  const Result b = run(dir, mock_flags(out / "pyr") + std::vector<std::string>{"build-pyramid", "--question-file",
                                                                               kMock + "/questions.jsonl", "--experts",
                                                                               "e1,e2,e3"});
  REQUIRE(b.exit_code == 0);
  const json pyramid = json::parse(testsupport::slurp(out / "pyr" / "q1.pyramid.json"));
  CHECK(pyramid["G"] == 3);
  CHECK(pyramid["entries"][0]["layer"] == 1);
  CHECK(pyramid["entries"][0]["weight"] == 4.0);

  CHECK(run(dir, mock_flags(out / "dup") + std::vector<std::string>{"build-pyramid", "--question-file",
                                                                    kMock + "/questions.jsonl", "--experts", "e1,e1"})
            .exit_code == 1);

  const Result s = run(dir, mock_flags(out / "score") +
                                std::vector<std::string>{"score", "--pyramids", (out / "pyr").string(), "--decisions",
                                                         (out / "verify" / "decisions.json").string(), "--gamma", "1.0",
                                                         "--gamma", "0.8"});
  REQUIRE(s.exit_code == 0);
  const std::string csv = testsupport::slurp(out / "score" / "scores.csv");
  CHECK(csv.rfind("response_id,question_id,Prec_w,R_w@1,F1@1,R_w@0.8,F1@0.8\n", 0) == 0);

  const Result bench = run(dir, mock_flags(out / "bench") + std::vector<std::string>{"bench", "--dataset", kMock + "/dataset.jsonl"});
  REQUIRE(bench.exit_code == 0);
  CHECK(json::parse(bench.out)["metrics"]["confusion"]["tp"] == 2);

  const Result ablate = run(dir, mock_flags(out / "ablate") + std::vector<std::string>{"ablate", "--dataset", kMock + "/dataset.jsonl"});
  REQUIRE(ablate.exit_code == 0);
  CHECK(fs::exists(out / "ablate" / "ablation.json"));
}

TEST_CASE("repeated mock runs are byte-identical") {
  testsupport::TempDir dir;
  for (const char* sub : {"a", "b"}) {
    REQUIRE(run(dir, mock_flags(dir / sub) + std::vector<std::string>{"verify", "--claims", kMock + "/claims.jsonl"})
                .exit_code == 0);
  }
  for (const char* f : {"decisions.json", "manifest.json", "transcripts/r1/r1-c2.json"}) {
    CAPTURE(f);
    const std::string a = testsupport::slurp(dir / "a" / f);
    CHECK(!a.empty());
    CHECK(a == testsupport::slurp(dir / "b" / f));
  }
}
