#include "madfact/pipeline.hpp"

#include "internal/fs_util.hpp"
#include "internal/worker_pool.hpp"
#include "madfact/errors.hpp"
#include "madfact/text.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <set>

namespace madfact {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void require_providers(const Session& session) {
  if (!session.providers) throw Error(ErrorCode::InvalidArgument, "session has no providers configured");
}

json parse_json_file(const fs::path& path) {
  const std::string body = detail::read_file(path);
  json j = json::parse(body, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::ParseError, "'" + path.string() + "' is not valid JSON");
  return j;
}

std::string pyramid_file_name(const std::string& question_id) {
  return text::safe_filename(question_id) + ".pyramid.json";
}

void write_manifest(const fs::path& dir, RunManifest manifest, const Session& session) {
  manifest.finished_at = session.clock.now();
  detail::write_file_atomic(dir / "manifest.json", to_json(manifest).dump(2) + "\n");
}

std::string fixed(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

json to_json(const RunManifest& m) {
  return {{"run_id", m.run_id},         {"command", m.command},         {"config_hash", m.config_hash},
          {"started_at", m.started_at}, {"finished_at", m.finished_at}, {"input_paths", m.input_paths},
          {"outputs", m.outputs}};
}

std::string make_run_id(const std::string& command, const SystemConfig& config,
                        const std::vector<fs::path>& inputs, const std::string& extra) {
  std::string material = command + "\n" + config_hash(config) + "\n" + extra + "\n";
  for (const auto& input : inputs) {
    std::error_code ec;
    if (fs::is_regular_file(input, ec)) {
      material += text::sha256_hex(detail::read_file(input)) + "\n";
    } else {
      material += input.string() + "\n";
    }
  }
  return command + "-" + text::sha256_hex(material).substr(0, 16);
}

// ------------------------------------------------------------------- verify

std::vector<ClaimBatch> load_claims_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::FileNotFound, "cannot open claims file '" + path.string() + "'");
  const std::string default_response = path.stem().string();
  std::vector<ClaimBatch> batches;
  std::map<std::string, std::size_t> index;
  std::set<std::string> seen_ids;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw ParseError(lineno, "not a JSON object");
    std::string claim_text;
    if (j.contains("claim") && j["claim"].is_string()) {
      claim_text = j["claim"].get<std::string>();
    } else if (j.contains("text") && j["text"].is_string()) {
      claim_text = j["text"].get<std::string>();
    } else {
      throw ParseError(lineno, "missing \"claim\"");
    }
    claim_text = text::collapse_whitespace(claim_text);
    if (claim_text.empty()) throw ParseError(lineno, "claim text is empty");
    const std::string response_id = j.value("response_id", default_response);
    auto [it, inserted] = index.emplace(response_id, batches.size());
    if (inserted) batches.push_back({response_id, j.value("question_id", response_id), {}, std::nullopt});
    ClaimBatch& batch = batches[it->second];
    AtomicClaim claim;
    claim.id = j.value("id", response_id + "-c" + std::to_string(batch.claims.size() + 1));
    claim.text = claim_text;
    claim.source_response = response_id;
    if (!seen_ids.insert(claim.id).second) throw ParseError(lineno, "duplicate claim id '" + claim.id + "'");
    batch.claims.push_back(std::move(claim));
  }
  return batches;
}

ResponseInput load_response_file(const fs::path& path) {
  const json j = parse_json_file(path);
  if (!j.is_object()) throw Error(ErrorCode::ParseError, "response file must hold one JSON object");
  ResponseInput input;
  try {
    input.response.id = j.value("id", path.stem().string());
    input.response.question_id = j.value("question_id", input.response.id);
    input.response.producer = j.value("producer", "");
    if (j.contains("response")) {
      input.response.text = j["response"].get<std::string>();
    } else if (j.contains("text")) {
      input.response.text = j["text"].get<std::string>();
    } else {
      throw Error(ErrorCode::ParseError, "response file lacks \"response\"");
    }
    input.question.id = input.response.question_id;
    input.question.text = j.value("question", "");
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("malformed response file: ") + e.what());
  }
  return input;
}

ClaimBatch decompose_response(const Session& session, const ResponseInput& input) {
  require_providers(session);
  const Clerk clerk(*session.providers, session.config.clerk_backend, session.prompts);
  DecompositionResult result = clerk.decompose(input.question, input.response);
  ClaimBatch batch{input.response.id, input.question.id, result.claims, std::move(result)};
  return batch;
}

VerifyReport run_verify(const Session& session, const std::vector<ClaimBatch>& batches, const fs::path& out_dir,
                        const std::vector<std::string>& input_paths) {
  require_providers(session);
  const SystemConfig config = validate_config(session.config);
  RunManifest manifest;
  manifest.command = "verify";
  manifest.config_hash = config_hash(config);
  manifest.started_at = session.clock.now();
  manifest.input_paths = input_paths;
  {
    std::vector<fs::path> inputs(input_paths.begin(), input_paths.end());
    manifest.run_id = make_run_id("verify", config, inputs);
  }

  struct Job {
    std::size_t batch;
    std::size_t claim;
  };
  std::vector<Job> jobs;
  for (std::size_t b = 0; b < batches.size(); ++b) {
    for (std::size_t c = 0; c < batches[b].claims.size(); ++c) jobs.push_back({b, c});
  }
  std::vector<std::optional<ClaimDecision>> decisions(jobs.size());
  std::vector<std::optional<TurnFailure>> failures(jobs.size());
  std::vector<std::string> transcript_paths(jobs.size());

  const Jury jury(*session.providers, config, session.prompts, session.debate);
  detail::parallel_for(jobs.size(), session.jobs, [&](std::size_t k) {
    const ClaimBatch& batch = batches[jobs[k].batch];
    const AtomicClaim& claim = batch.claims[jobs[k].claim];
    DebateTranscript transcript = jury.run_debate(claim);
    const std::string rel = "transcripts/" + text::safe_filename(batch.response_id) + "/" +
                            text::safe_filename(claim.id) + ".json";
    detail::write_file_atomic(out_dir / rel, to_json(transcript, config.roles).dump(2) + "\n");
    transcript_paths[k] = rel;
    if (transcript.failed()) {
      failures[k] = transcript.failure;
    } else {
      decisions[k] = adjudicate(transcript.final_round_verdicts, claim.id);
    }
  });

  VerifyReport report;
  json responses = json::array();
  std::size_t k = 0;
  for (const auto& batch : batches) {
    json claims = json::array();
    json decided = json::array();
    json failed = json::array();
    for (const auto& claim : batch.claims) {
      claims.push_back(to_json(claim));
      ++report.claims;
      if (decisions[k]) {
        json d = to_json(*decisions[k]);
        d["transcript"] = transcript_paths[k];
        decided.push_back(std::move(d));
        ++report.decided;
      } else {
        const auto& f = *failures[k];
        const std::string message = std::string(to_string(f.code)) + ": " + f.message;
        failed.push_back({{"claim_id", claim.id}, {"error", message}, {"transcript", transcript_paths[k]}});
        report.failures.emplace_back(claim.id, message);
        if (!report.first_failure) report.first_failure = f.code;
      }
      ++k;
    }
    json entry = {{"response_id", batch.response_id},
                  {"question_id", batch.question_id},
                  {"claims", claims},
                  {"decisions", decided},
                  {"failures", failed}};
    if (batch.decomposition) {
      const std::string rel = "decompositions/" + text::safe_filename(batch.response_id) + ".json";
      detail::write_file_atomic(out_dir / rel, to_json(*batch.decomposition).dump(2) + "\n");
      entry["decomposition"] = rel;
      manifest.outputs.push_back(rel);
    }
    responses.push_back(std::move(entry));
  }
  const json doc = {{"config_hash", manifest.config_hash}, {"responses", responses}};
  detail::write_file_atomic(out_dir / "decisions.json", doc.dump(2) + "\n");
  manifest.outputs.push_back("decisions.json");
  manifest.outputs.push_back("transcripts/");
  write_manifest(out_dir, manifest, session);
  return report;
}

// ------------------------------------------------------------ build-pyramid

std::vector<Question> load_questions_file(const fs::path& path) {
  const std::string body = detail::read_file(path);
  std::vector<json> objects;
  json whole = json::parse(body, nullptr, false);
  if (!whole.is_discarded()) {
    if (whole.is_array()) {
      objects.assign(whole.begin(), whole.end());
    } else {
      objects.push_back(whole);
    }
  } else {
    std::size_t lineno = 0;
    for (const auto& line : text::split_lines(body)) {
      ++lineno;
      if (text::trim(line).empty()) continue;
      json j = json::parse(line, nullptr, false);
      if (j.is_discarded()) throw ParseError(lineno, "not a JSON object");
      objects.push_back(std::move(j));
    }
  }
  std::vector<Question> out;
  std::set<std::string> ids;
  for (std::size_t i = 0; i < objects.size(); ++i) {
    const json& j = objects[i];
    if (!j.is_object()) throw ParseError(i + 1, "question entry is not an object");
    Question q;
    q.id = j.contains("id") && j["id"].is_string() ? j["id"].get<std::string>() : "q" + std::to_string(i + 1);
    if (j.contains("question") && j["question"].is_string()) {
      q.text = j["question"].get<std::string>();
    } else if (j.contains("text") && j["text"].is_string()) {
      q.text = j["text"].get<std::string>();
    } else {
      throw ParseError(i + 1, "missing \"question\"");
    }
    if (!ids.insert(q.id).second) throw ParseError(i + 1, "duplicate question id '" + q.id + "'");
    out.push_back(std::move(q));
  }
  return out;
}

std::unique_ptr<ClaimMatcher> make_matcher(const std::string& spec, const Session& session) {
  if (spec.empty() || spec == "exact" || spec == "exact-normalized") return std::make_unique<ExactNormalizedMatcher>();
  const std::string prefix = "backend:";
  if (spec.rfind(prefix, 0) == 0 && spec.size() > prefix.size()) {
    require_providers(session);
    return std::make_unique<BackendJudgedMatcher>(*session.providers, spec.substr(prefix.size()), session.prompts);
  }
  throw InvalidConfigError(std::vector<InvalidConfigError::Violation>{
      {"matcher", "unknown matcher '" + spec + "' (use exact or backend:<id>)"}});
}

std::vector<Pyramid> run_build_pyramids(const Session& session, const std::vector<Question>& questions,
                                        const std::vector<std::string>& experts, const std::string& matcher_spec,
                                        const fs::path& out_dir, const std::vector<std::string>& input_paths) {
  require_providers(session);
  std::vector<InvalidConfigError::Violation> violations;
  if (experts.empty()) violations.push_back({"experts", "at least one expert backend is required"});
  std::set<std::string> seen;
  for (const auto& e : experts) {
    if (e.empty()) violations.push_back({"experts", "expert id is empty"});
    if (!seen.insert(e).second) violations.push_back({"experts", "duplicate expert id '" + e + "'"});
  }
  if (!violations.empty()) throw InvalidConfigError(std::move(violations));
  const SystemConfig config = validate_config(session.config);
  const auto matcher = make_matcher(matcher_spec, session);

  RunManifest manifest;
  manifest.command = "build-pyramid";
  manifest.config_hash = config_hash(config);
  manifest.started_at = session.clock.now();
  manifest.input_paths = input_paths;
  {
    std::string extra = matcher->id();
    for (const auto& e : experts) extra += "|" + e;
    std::vector<fs::path> inputs(input_paths.begin(), input_paths.end());
    manifest.run_id = make_run_id("build-pyramid", config, inputs, extra);
  }

  const Clerk clerk(*session.providers, config.clerk_backend, session.prompts);
  std::vector<Pyramid> pyramids(questions.size());
  detail::parallel_for(questions.size(), session.jobs, [&](std::size_t i) {
    const Question& q = questions[i];
    const auto refs = generate_references(q, experts, *session.providers, clerk, session.prompts);
    std::vector<std::vector<std::string>> claim_sets;
    json refs_json = json::array();
    for (const auto& r : refs) {
      std::vector<std::string> texts;
      json claims = json::array();
      for (const auto& c : r.claims) {
        texts.push_back(c.text);
        claims.push_back(c.text);
      }
      claim_sets.push_back(std::move(texts));
      refs_json.push_back({{"expert", r.expert_id}, {"answer", r.text}, {"claims", claims}});
    }
    Pyramid p = build_pyramid(merge_golden_set(claim_sets, *matcher, experts), static_cast<int>(experts.size()));
    p.question_id = q.id;
    p.expert_backends = experts;
    detail::write_file_atomic(out_dir / "references" / (text::safe_filename(q.id) + ".json"),
                              json{{"question_id", q.id}, {"question", q.text}, {"references", refs_json}}.dump(2) +
                                  "\n");
    detail::write_file_atomic(out_dir / pyramid_file_name(q.id), to_json(p).dump(2) + "\n");
    pyramids[i] = std::move(p);
  });
  for (const auto& q : questions) manifest.outputs.push_back(pyramid_file_name(q.id));
  write_manifest(out_dir, manifest, session);
  return pyramids;
}

// -------------------------------------------------------------------- score

std::string format_gamma(double gamma) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, gamma);
  return std::string(buf, end);
}

ScoreReport run_score(const Session& session, const fs::path& pyramids_dir, const fs::path& decisions_path,
                      const std::vector<double>& gammas, const std::string& matcher_spec, const fs::path& out_dir) {
  if (gammas.empty()) throw Error(ErrorCode::InvalidArgument, "at least one gamma is required");
  for (double g : gammas) {
    if (!(g > 0.0 && g <= 1.0)) throw InvalidConfigError(std::vector<InvalidConfigError::Violation>{{"gamma", "gamma must lie in (0,1]"}});
  }
  const auto matcher = make_matcher(matcher_spec, session);
  const json doc = parse_json_file(decisions_path);
  if (!doc.contains("responses") || !doc["responses"].is_array())
    throw Error(ErrorCode::ParseError, "decisions file lacks a \"responses\" array");

  ScoreReport report;
  report.gammas = gammas;
  report.per_gamma.resize(gammas.size());
  std::map<std::string, Pyramid> pyramids;
  json responses = json::array();
  for (const auto& r : doc["responses"]) {
    std::string response_id;
    std::string question_id;
    std::vector<AtomicClaim> claims;
    std::vector<ClaimDecision> decisions;
    try {
      response_id = r.at("response_id").get<std::string>();
      question_id = r.at("question_id").get<std::string>();
      std::map<std::string, ClaimDecision> by_id;
      for (const auto& d : r.at("decisions")) {
        ClaimDecision decision = claim_decision_from_json(d);
        by_id.emplace(decision.claim_id, decision);
      }
      // claims whose debate failed carry no decision and are left out
      for (const auto& c : r.at("claims")) {
        AtomicClaim claim = atomic_claim_from_json(c);
        auto it = by_id.find(claim.id);
        if (it == by_id.end()) continue;
        claims.push_back(std::move(claim));
        decisions.push_back(it->second);
      }
    } catch (const json::exception& e) {
      throw Error(ErrorCode::ParseError, std::string("malformed decisions file: ") + e.what());
    }
    auto pit = pyramids.find(question_id);
    if (pit == pyramids.end()) {
      Pyramid p = pyramid_from_json(parse_json_file(pyramids_dir / pyramid_file_name(question_id)));
      pit = pyramids.emplace(question_id, std::move(p)).first;
    }
    json per_gamma = json::object();
    json claim_rows = json::array();
    for (std::size_t g = 0; g < gammas.size(); ++g) {
      ResponseScore s = score_response(response_id, question_id, claims, decisions, pit->second, gammas[g], *matcher);
      per_gamma[format_gamma(gammas[g])] = to_json(s.scores);
      if (g == 0) {
        for (std::size_t i = 0; i < claims.size(); ++i) {
          claim_rows.push_back({{"claim_id", claims[i].id},
                                {"text", claims[i].text},
                                {"verdict", std::string(to_string(decisions[i].final_verdict))},
                                {"weight", s.weights[i]}});
        }
      }
      report.per_gamma[g].push_back(std::move(s));
    }
    responses.push_back({{"response_id", response_id},
                         {"question_id", question_id},
                         {"scores", per_gamma},
                         {"claims", claim_rows}});
  }
  json means = json::object();
  for (std::size_t g = 0; g < gammas.size(); ++g) {
    report.dataset_mean.push_back(score_dataset(std::span<const ResponseScore>(report.per_gamma[g])));
    means[format_gamma(gammas[g])] = report.dataset_mean.back();
  }
  json gamma_labels = json::array();
  for (double g : gammas) gamma_labels.push_back(format_gamma(g));
  const json out = {{"matcher", matcher->id()}, {"gammas", gamma_labels}, {"responses", responses},
                    {"dataset_mean", means}};
  detail::write_file_atomic(out_dir / "scores.json", out.dump(2) + "\n");

  std::string csv = "response_id,question_id,Prec_w";
  for (double g : gammas) csv += ",R_w@" + format_gamma(g) + ",F1@" + format_gamma(g);
  csv += "\n";
  const auto& first = report.per_gamma[0];
  double prec_sum = 0.0;
  for (std::size_t i = 0; i < first.size(); ++i) {
    csv += first[i].response_id + "," + first[i].question_id + "," + fixed(first[i].scores.prec_w);
    prec_sum += first[i].scores.prec_w;
    for (std::size_t g = 0; g < gammas.size(); ++g) {
      const auto& s = report.per_gamma[g][i].scores;
      csv += "," + fixed(s.recall_w) + "," + fixed(s.f1);
    }
    csv += "\n";
  }
  csv += "mean,," + fixed(prec_sum / static_cast<double>(first.size()));
  for (std::size_t g = 0; g < gammas.size(); ++g) {
    double recall_sum = 0.0;
    for (const auto& s : report.per_gamma[g]) recall_sum += s.scores.recall_w;
    csv += "," + fixed(recall_sum / static_cast<double>(first.size())) + "," + fixed(report.dataset_mean[g]);
  }
  csv += "\n";
  detail::write_file_atomic(out_dir / "scores.csv", csv);
  return report;
}

// ------------------------------------------------------------ bench, ablate

namespace {

std::vector<LabeledClaim> load_bench_dataset(const Session& session, const BenchRequest& request) {
  auto dataset = load_claim_dataset(request.dataset);
  if (request.n_true) dataset = stratified_sample(dataset, *request.n_true, session.seed);
  return dataset;
}

BenchRun bench_with(const Session& session, const SystemConfig& config, const std::vector<LabeledClaim>& dataset,
                    const BenchRequest& request, const fs::path& out_dir) {
  require_providers(session);
  const SystemConfig validated = validate_config(config);
  std::string extra;
  if (request.n_true) extra = "n_true=" + std::to_string(*request.n_true) + ";seed=" + std::to_string(session.seed);
  BenchRun run;
  run.run_id = make_run_id("bench", validated, {request.dataset}, extra);
  run.run_dir = out_dir / "runs" / run.run_id;

  RunManifest manifest;
  manifest.run_id = run.run_id;
  manifest.command = "bench";
  manifest.config_hash = config_hash(validated);
  manifest.started_at = session.clock.now();
  manifest.input_paths = {request.dataset.string()};

  BenchmarkOptions options;
  options.jobs = session.jobs;
  options.stop_after = request.stop_after;
  options.debate = session.debate;
  options.prompts = session.prompts;
  run.report = run_benchmark(dataset, validated, *session.providers, run.run_dir, options);
  manifest.outputs = {"config.json", "transcripts/", "predictions.jsonl", "report.json", "failures.jsonl"};
  write_manifest(run.run_dir, manifest, session);
  return run;
}

}  // namespace

BenchRun run_bench(const Session& session, const BenchRequest& request, const fs::path& out_dir) {
  const auto dataset = load_bench_dataset(session, request);
  return bench_with(session, session.config, dataset, request, out_dir);
}

std::vector<AblationOutcome> run_ablation(const Session& session, const BenchRequest& request,
                                          const std::vector<Ablation>& variants, const fs::path& out_dir) {
  const auto dataset = load_bench_dataset(session, request);
  std::vector<AblationOutcome> outcomes;
  json summary = json::array();
  for (Ablation variant : variants) {
    AblationOutcome outcome;
    outcome.variant = variant;
    const SystemConfig config = apply_ablation(session.config, variant);
    json row = {{"variant", std::string(to_string(variant))}};
    try {
      validate_config(config);
    } catch (const InvalidConfigError& e) {
      outcome.refused = e.what();
      row["refused"] = e.what();
      summary.push_back(std::move(row));
      outcomes.push_back(std::move(outcome));
      continue;
    }
    outcome.run = bench_with(session, config, dataset, request, out_dir);
    row["run_id"] = outcome.run->run_id;
    row["metrics"] = outcome.run->report.metrics ? to_json(*outcome.run->report.metrics) : json(nullptr);
    row["failed"] = outcome.run->report.failed;
    row["pending"] = outcome.run->report.pending;
    summary.push_back(std::move(row));
    outcomes.push_back(std::move(outcome));
  }
  detail::write_file_atomic(out_dir / "ablation.json", summary.dump(2) + "\n");
  return outcomes;
}

}  // namespace madfact
