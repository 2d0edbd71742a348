#include "madfact/pipeline.hpp"

#include "mock_support.hpp"

#include <doctest.h>

#include <filesystem>

using namespace madfact;
using testsupport::error_code_of;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const fs::path kMock = fs::path(MADFACT_FIXTURES_DIR) / "mock";

Session mock_session() {
  Session s;
  s.config = load_config_file(kMock / "config.json");
  s.providers = ProviderRegistry::from_fixtures(kMock, Clock::frozen());
  s.clock = Clock::frozen();
  s.jobs = 2;
  return s;
}

json read_json(const fs::path& p) { return json::parse(testsupport::slurp(p)); }

bool violates(const std::function<void()>& fn, const std::string& field) {
  try {
    fn();
  } catch (const InvalidConfigError& e) {
    return e.has_field(field);
  }
  return false;
}

// Writes a decisions document where every claim carries the given verdict.
void write_decisions(const fs::path& path, const std::vector<std::pair<std::string, std::vector<std::pair<std::string, bool>>>>& responses) {
  json doc = {{"responses", json::array()}};
  for (const auto& [rid, claims] : responses) {
    json cl = json::array(), ds = json::array();
    for (std::size_t i = 0; i < claims.size(); ++i) {
      const std::string id = rid + "-c" + std::to_string(i + 1);
      cl.push_back({{"id", id}, {"text", claims[i].first}, {"source_response", rid}});
      ds.push_back({{"claim_id", id}, {"verdict", claims[i].second ? "TRUE" : "FALSE"}});
    }
    doc["responses"].push_back({{"response_id", rid}, {"question_id", "q1"}, {"claims", cl}, {"decisions", ds}});
  }
  testsupport::spit(path, doc.dump(2));
}

const std::vector<std::string> kGolden = {"The Zhuang are the largest ethnic minority in China.",
                                          "The Zhuang number about 19.6 million people.",
                                          "The Zhuang live mainly in Guangxi.", "Zhuang is a Tai language."};

}  // namespace

TEST_CASE("load_claims_file groups claims by response and rejects duplicate ids") {
  const auto batches = load_claims_file(kMock / "claims.jsonl");
  REQUIRE(batches.size() == 1);
  CHECK(batches[0].response_id == "r1");
  CHECK(batches[0].question_id == "q1");
  CHECK(batches[0].claims.size() == 3);

  testsupport::TempDir dir;
  testsupport::spit(dir / "dup.jsonl", "{\"id\":\"a\",\"claim\":\"X.\"}\n{\"id\":\"a\",\"claim\":\"Y.\"}\n");
  CHECK(error_code_of([&] { load_claims_file(dir / "dup.jsonl"); }) == ErrorCode::ParseError);
  testsupport::spit(dir / "plain.jsonl", "{\"claim\":\"X.\"}\n{\"text\":\"Y.\"}\n");
  const auto plain = load_claims_file(dir / "plain.jsonl");
  REQUIRE(plain.size() == 1);
  CHECK(plain[0].response_id == "plain");
  CHECK(plain[0].claims[1].id == "plain-c2");
}

TEST_CASE("verify: one claim gives one transcript and one decision") {
  testsupport::TempDir dir;
  testsupport::spit(dir / "one.jsonl", "{\"id\":\"r1-c1\",\"claim\":\"The Zhuang are the largest ethnic minority in China.\",\"response_id\":\"r1\",\"question_id\":\"q1\"}\n");
  const Session s = mock_session();
  const VerifyReport r = run_verify(s, load_claims_file(dir / "one.jsonl"), dir / "out", {"one.jsonl"});
  CHECK(r.claims == 1);
  CHECK(r.decided == 1);
  CHECK(r.failures.empty());
  CHECK(fs::exists(dir / "out" / "transcripts" / "r1" / "r1-c1.json"));
  const json d = read_json(dir / "out" / "decisions.json");
  REQUIRE(d["responses"].size() == 1);
  REQUIRE(d["responses"][0]["decisions"].size() == 1);
  CHECK(d["responses"][0]["decisions"][0]["verdict"] == "TRUE");
  const json m = read_json(dir / "out" / "manifest.json");
  CHECK(m["command"] == "verify");
  CHECK(m["started_at"] == "1970-01-01T00:00:00Z");
  CHECK(m["config_hash"] == config_hash(s.config));
}

TEST_CASE("verify: scripted claims file end to end") {
  testsupport::TempDir dir;
  const VerifyReport r = run_verify(mock_session(), load_claims_file(kMock / "claims.jsonl"), dir.path(), {});
  CHECK(r.decided == 3);
  const json t = read_json(dir / "transcripts" / "r1" / "r1-c2.json");
  CHECK(t["search_events"].size() == 1);
  CHECK(t["turns"].size() == 6);
  const json d = read_json(dir / "decisions.json");
  const auto& ds = d["responses"][0]["decisions"];
  CHECK(ds[0]["verdict"] == "TRUE");
  CHECK(ds[1]["verdict"] == "TRUE");
  CHECK(ds[2]["verdict"] == "FALSE");
}

TEST_CASE("verify: a response file is decomposed first") {
  testsupport::TempDir dir;
  const Session s = mock_session();
  const ClaimBatch batch = decompose_response(s, load_response_file(kMock / "response.json"));
  CHECK(batch.claims.size() == 3);
  REQUIRE(batch.decomposition);
  CHECK(batch.decomposition->discarded.size() == 1);
  const VerifyReport r = run_verify(s, {batch}, dir.path(), {});
  CHECK(r.decided == 3);
  CHECK(fs::exists(dir / "decompositions" / "r1.json"));
  CHECK(read_json(dir / "decisions.json")["responses"][0]["decomposition"] == "decompositions/r1.json");
}

TEST_CASE("verify: failing claims are reported and the rest still decided") {
  testsupport::TempDir dir;
  testsupport::spit(dir / "c.jsonl",
                    "{\"id\":\"r1-c1\",\"claim\":\"A.\",\"response_id\":\"r1\"}\n{\"id\":\"zz\",\"claim\":\"Unscripted.\",\"response_id\":\"r1\"}\n");
  const VerifyReport r = run_verify(mock_session(), load_claims_file(dir / "c.jsonl"), dir / "out", {});
  CHECK(r.decided == 1);
  REQUIRE(r.failures.size() == 1);
  CHECK(r.failures[0].first == "zz");
  CHECK(r.first_failure == ErrorCode::ScriptExhausted);
  CHECK(read_json(dir / "out" / "decisions.json")["responses"][0]["failures"].size() == 1);
}

TEST_CASE("build-pyramid: three experts give G = 3 and the shared claim sits on top") {
  testsupport::TempDir dir;
  const auto pyramids = run_build_pyramids(mock_session(), load_questions_file(kMock / "questions.jsonl"),
                                           {"e1", "e2", "e3"}, "exact", dir.path(), {});
  REQUIRE(pyramids.size() == 1);
  const Pyramid& p = pyramids[0];
  CHECK(p.levels == 3);
  CHECK(p.question_id == "q1");
  REQUIRE(p.layers.at(1).size() == 1);
  CHECK(p.layers.at(1)[0].golden.text == kGolden[0]);
  CHECK(p.layers.at(1)[0].weight == 4.0);
  CHECK(p.layers.at(2).size() == 1);
  CHECK(p.layers.at(3).size() == 2);
  CHECK(p.golden_weight_mass() == 11.0);
  CHECK(p.expert_backends == std::vector<std::string>{"e1", "e2", "e3"});

  const json j = read_json(dir / "q1.pyramid.json");
  CHECK(j["G"] == 3);
  CHECK(fs::exists(dir / "references" / "q1.json"));
  CHECK(fs::exists(dir / "manifest.json"));
}

TEST_CASE("build-pyramid: expert list validation") {
  testsupport::TempDir dir;
  const Session s = mock_session();
  const auto qs = load_questions_file(kMock / "questions.jsonl");
  CHECK(violates([&] { run_build_pyramids(s, qs, {"e1", "e1", "e2"}, "exact", dir.path(), {}); }, "experts"));
  CHECK(violates([&] { run_build_pyramids(s, qs, {}, "exact", dir.path(), {}); }, "experts"));
  CHECK(violates([&] { run_build_pyramids(s, qs, {"e1"}, "fuzzy", dir.path(), {}); }, "matcher"));
}

TEST_CASE("score: verify output against the built pyramid") {
  testsupport::TempDir dir;
  const Session s = mock_session();
  run_verify(s, load_claims_file(kMock / "claims.jsonl"), dir / "verify", {});
  run_build_pyramids(s, load_questions_file(kMock / "questions.jsonl"), {"e1", "e2", "e3"}, "exact", dir / "pyr", {});
  const ScoreReport r = run_score(s, dir / "pyr", dir / "verify" / "decisions.json", {1.0, 0.8}, "exact", dir / "score");
  REQUIRE(r.per_gamma.size() == 2);
  const ResponseScore& at1 = r.per_gamma[0][0];
  CHECK(at1.weights == std::vector<double>{4.0, 3.0, 1.0});
  CHECK(at1.scores.prec_w == doctest::Approx(7.0 / 8.0).epsilon(1e-12));
  CHECK(at1.scores.recall_w == doctest::Approx(7.0 / 11.0).epsilon(1e-12));
  CHECK(at1.value() == doctest::Approx(14.0 / 19.0).epsilon(1e-12));
  CHECK(r.per_gamma[1][0].value() == doctest::Approx(5.0 / 6.0).epsilon(1e-12));

  const std::string csv = testsupport::slurp(dir / "score" / "scores.csv");
  CHECK(csv.rfind("response_id,question_id,Prec_w,R_w@1,F1@1,R_w@0.8,F1@0.8\n", 0) == 0);
  CHECK(csv.find("r1,q1,0.875000,0.636364,0.736842,0.795455,0.833333\n") != std::string::npos);
  const json j = read_json(dir / "score" / "scores.json");
  CHECK(j["gammas"] == json::array({"1", "0.8"}));
}

TEST_CASE("score: exact coverage gives mean 1; one perfect and one empty response give 0.5") {
  testsupport::TempDir dir;
  const Session s = mock_session();
  run_build_pyramids(s, load_questions_file(kMock / "questions.jsonl"), {"e1", "e2", "e3"}, "exact", dir / "pyr", {});

  std::vector<std::pair<std::string, bool>> all_true;
  for (const auto& g : kGolden) all_true.push_back({g, true});
  write_decisions(dir / "perfect.json", {{"a", all_true}});
  CHECK(run_score(s, dir / "pyr", dir / "perfect.json", {1.0}, "exact", dir / "s1").dataset_mean[0] == 1.0);

  std::vector<std::pair<std::string, bool>> all_false;
  for (const auto& g : kGolden) all_false.push_back({g, false});
  write_decisions(dir / "half.json", {{"a", all_true}, {"b", all_false}});
  const ScoreReport half = run_score(s, dir / "pyr", dir / "half.json", {1.0}, "exact", dir / "s2");
  CHECK(half.dataset_mean[0] == 0.5);
  CHECK(testsupport::slurp(dir / "s2" / "scores.csv").find("\nmean,,0.500000,0.500000,0.500000\n") != std::string::npos);
}

TEST_CASE("score: bad gamma and missing pyramid") {
  testsupport::TempDir dir;
  const Session s = mock_session();
  write_decisions(dir / "d.json", {{"a", {{"X.", true}}}});
  CHECK(violates([&] { run_score(s, dir.path(), dir / "d.json", {1.5}, "exact", dir / "o"); }, "gamma"));
  CHECK(error_code_of([&] { run_score(s, dir.path(), dir / "d.json", {1.0}, "exact", dir / "o"); }) ==
        ErrorCode::FileNotFound);
}

TEST_CASE("format_gamma uses the shortest form") {
  CHECK(format_gamma(1.0) == "1");
  CHECK(format_gamma(0.8) == "0.8");
}

TEST_CASE("bench: mock dataset, resumable run directory") {
  testsupport::TempDir dir;
  const Session s = mock_session();
  const BenchRun run = run_bench(s, {kMock / "dataset.jsonl", std::nullopt, std::nullopt}, dir.path());
  CHECK(run.report.complete());
  REQUIRE(run.report.metrics);
  CHECK(run.report.metrics->counts == ConfusionCounts{2, 1, 0, 1});
  CHECK(run.run_dir == dir / "runs" / run.run_id);
  CHECK(fs::exists(run.run_dir / "manifest.json"));
  CHECK(make_run_id("bench", s.config, {kMock / "dataset.jsonl"}) ==
        make_run_id("bench", s.config, {kMock / "dataset.jsonl"}));
  CHECK(make_run_id("bench", s.config, {kMock / "dataset.jsonl"}, "n=1") !=
        make_run_id("bench", s.config, {kMock / "dataset.jsonl"}));
}

TEST_CASE("ablate: all four variants over the mock dataset") {
  testsupport::TempDir dir;
  const auto outcomes = run_ablation(mock_session(), {kMock / "dataset.jsonl", std::nullopt, std::nullopt},
                                     {Ablation::None, Ablation::NoRolePlay, Ablation::NoDebate, Ablation::NoSearch},
                                     dir.path());
  REQUIRE(outcomes.size() == 4);
  for (const auto& o : outcomes) {
    CAPTURE(to_string(o.variant));
    REQUIRE(o.run);
    CHECK(o.run->report.complete());
  }
  CHECK(outcomes[2].run->report.metrics->counts.total() == 4);
  const json j = read_json(dir / "ablation.json");
  CHECK(j.size() == 4);
}

TEST_CASE("ablate: a variant that contradicts the rule is refused, the others run") {
  testsupport::TempDir dir;
  Session s = mock_session();
  s.config.rule = DebateRule::MandatorySearch;
  const auto outcomes = run_ablation(s, {kMock / "dataset.jsonl", std::nullopt, std::nullopt}, {Ablation::NoSearch},
                                     dir.path());
  REQUIRE(outcomes.size() == 1);
  CHECK(outcomes[0].refused);
  CHECK_FALSE(outcomes[0].run);
  CHECK(read_json(dir / "ablation.json")[0].contains("refused"));
}
