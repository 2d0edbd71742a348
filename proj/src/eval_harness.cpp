#include "madfact/eval_harness.hpp"

#include "madfact/errors.hpp"
#include "madfact/text.hpp"
#include "internal/fs_util.hpp"
#include "internal/worker_pool.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <mutex>
#include <random>

namespace madfact {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

Verdict parse_label(const json& label, std::size_t line) {
  if (label.is_boolean()) return label.get<bool>() ? Verdict::True : Verdict::False;
  if (label.is_string()) {
    if (auto v = parse_verdict(label.get<std::string>())) return *v;
  }
  throw ParseError(line, "label must be true or false");
}

}  // namespace

std::vector<LabeledClaim> load_claim_dataset(const fs::path& path, std::string dataset_id) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::FileNotFound, "cannot open dataset '" + path.string() + "'");
  if (dataset_id.empty()) dataset_id = path.stem().string();
  std::vector<LabeledClaim> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw ParseError(lineno, "not a JSON object");
    if (!j.contains("claim") || !j["claim"].is_string()) throw ParseError(lineno, "missing \"claim\"");
    if (!j.contains("label")) throw ParseError(lineno, "missing \"label\"");
    LabeledClaim c;
    c.claim.text = text::collapse_whitespace(j["claim"].get<std::string>());
    if (c.claim.text.empty()) throw ParseError(lineno, "claim text is empty");
    c.gold_label = parse_label(j["label"], lineno);
    c.claim.id = j.contains("id") && j["id"].is_string() ? j["id"].get<std::string>()
                                                          : dataset_id + "-" + std::to_string(lineno);
    c.question = j.value("question", "");
    c.response = j.value("response", "");
    c.claim.source_response = j.value("response_id", "");
    c.dataset_id = dataset_id;
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<LabeledClaim> stratified_sample(std::span<const LabeledClaim> claims, std::size_t n_true,
                                            std::uint64_t seed) {
  std::vector<std::size_t> true_idx;
  for (std::size_t i = 0; i < claims.size(); ++i) {
    if (claims[i].gold_label == Verdict::True) true_idx.push_back(i);
  }
  if (n_true > true_idx.size())
    throw Error(ErrorCode::InsufficientTrue, "asked for " + std::to_string(n_true) + " TRUE claims, only " +
                                                 std::to_string(true_idx.size()) + " available");
  // partial Fisher-Yates with a fixed engine, so the sample is identical across platforms
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < n_true; ++i) {
    const std::uint64_t span = true_idx.size() - i;
    const std::size_t j = i + static_cast<std::size_t>(rng() % span);
    std::swap(true_idx[i], true_idx[j]);
  }
  std::vector<bool> keep(claims.size(), false);
  for (std::size_t i = 0; i < n_true; ++i) keep[true_idx[i]] = true;
  std::vector<LabeledClaim> out;
  for (std::size_t i = 0; i < claims.size(); ++i) {
    if (claims[i].gold_label == Verdict::False || keep[i]) out.push_back(claims[i]);
  }
  return out;
}

namespace {

ClassMetrics metrics_for(std::size_t tp, std::size_t fp, std::size_t fn) {
  ClassMetrics m;
  if (tp + fp == 0) {
    m.precision_undefined = true;
  } else {
    m.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  }
  if (tp + fn == 0) {
    m.recall_undefined = true;
  } else {
    m.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  }
  if (m.precision + m.recall == 0.0) {
    m.f1_undefined = true;
  } else {
    m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
  }
  return m;
}

}  // namespace

ClassReport class_metrics(std::span<const Verdict> predictions, std::span<const Verdict> gold) {
  if (predictions.size() != gold.size())
    throw Error(ErrorCode::LengthMismatch, "predictions and gold labels differ in length");
  if (predictions.empty()) throw Error(ErrorCode::EmptyInput, "no predictions to score");
  ClassReport r;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const bool pred = predictions[i] == Verdict::True;
    const bool truth = gold[i] == Verdict::True;
    if (pred && truth) ++r.counts.tp;
    if (pred && !truth) ++r.counts.fp;
    if (!pred && truth) ++r.counts.fn;
    if (!pred && !truth) ++r.counts.tn;
  }
  r.positive = metrics_for(r.counts.tp, r.counts.fp, r.counts.fn);
  // FALSE as the target: its true positives are tn, false positives fn, false negatives fp
  r.negative = metrics_for(r.counts.tn, r.counts.fn, r.counts.fp);
  return r;
}

json to_json(const ClassMetrics& m) {
  json undefined = json::array();
  if (m.precision_undefined) undefined.push_back("precision");
  if (m.recall_undefined) undefined.push_back("recall");
  if (m.f1_undefined) undefined.push_back("f1");
  return {{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}, {"zero_denominator", undefined}};
}

json to_json(const ClassReport& r) {
  return {{"label_true", to_json(r.positive)},
          {"label_false", to_json(r.negative)},
          {"confusion", {{"tp", r.counts.tp}, {"fp", r.counts.fp}, {"fn", r.counts.fn}, {"tn", r.counts.tn}}}};
}

std::string claim_content_hash(const LabeledClaim& claim) {
  return text::sha256_hex(claim.claim.id + "\n" + claim.claim.text);
}

json to_json(const BenchmarkReport& r) {
  json outcomes = json::array();
  for (const auto& o : r.outcomes) {
    json j = {{"claim_id", o.claim_id},
              {"gold", std::string(to_string(o.gold))},
              {"transcript", o.transcript_path}};
    if (o.decision) {
      j["prediction"] = std::string(to_string(o.decision->final_verdict));
      j["decision"] = to_json(*o.decision);
    } else {
      j["prediction"] = nullptr;
    }
    if (o.error) j["error"] = *o.error;
    outcomes.push_back(std::move(j));
  }
  return {{"metrics", r.metrics ? to_json(*r.metrics) : json(nullptr)},
          {"claims", r.outcomes.size()},
          {"adjudicated", r.outcomes.size() - r.failed - r.pending},
          {"failed", r.failed},
          {"pending", r.pending},
          {"outcomes", outcomes}};
}

namespace {

struct PredictionLine {
  ClaimDecision decision;
  std::string transcript;
};

std::map<std::string, PredictionLine> load_predictions(const fs::path& path) {
  std::map<std::string, PredictionLine> done;
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    json j = json::parse(line, nullptr, false);
    // a line cut short by an interruption is simply not done yet
    if (j.is_discarded() || !j.contains("hash") || !j.contains("decision")) continue;
    try {
      done[j["hash"].get<std::string>()] = {claim_decision_from_json(j["decision"]),
                                            j.value("transcript", "")};
    } catch (const std::exception&) {
      continue;
    }
  }
  return done;
}

}  // namespace

BenchmarkReport run_benchmark(std::span<const LabeledClaim> dataset, const SystemConfig& config,
                              ProviderRegistry& providers, const fs::path& run_dir,
                              const BenchmarkOptions& options) {
  const SystemConfig validated = validate_config(config);
  std::error_code ec;
  fs::create_directories(run_dir / "transcripts", ec);
  if (ec) throw Error(ErrorCode::IO, "cannot create run directory " + run_dir.string());

  const std::string config_text = config_to_json(validated).dump(2) + "\n";
  const fs::path config_path = run_dir / "config.json";
  if (fs::exists(config_path)) {
    std::ifstream in(config_path);
    json existing = json::parse(in, nullptr, false);
    if (existing.is_discarded() || config_from_json(existing) != validated)
      throw Error(ErrorCode::InvalidConfig,
                  "run directory " + run_dir.string() + " was started with a different config");
  } else {
    detail::write_file_atomic(config_path, config_text);
  }

  const fs::path predictions_path = run_dir / "predictions.jsonl";
  std::map<std::string, PredictionLine> done = load_predictions(predictions_path);

  BenchmarkReport report;
  std::vector<std::size_t> pending;
  std::vector<std::string> hashes(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    hashes[i] = claim_content_hash(dataset[i]);
    if (done.count(hashes[i])) {
      ++report.resumed;
    } else {
      pending.push_back(i);
    }
  }
  if (options.stop_after && pending.size() > *options.stop_after) pending.resize(*options.stop_after);

  const Jury jury(providers, validated, options.prompts, options.debate);
  std::map<std::size_t, std::string> errors;
  std::mutex mu;
  detail::terminate_last_line(predictions_path);
  std::ofstream predictions_out(predictions_path, std::ios::app);
  if (!predictions_out) throw Error(ErrorCode::IO, "cannot append to " + predictions_path.string());

  detail::parallel_for(pending.size(), options.jobs, [&](std::size_t k) {
    const std::size_t i = pending[k];
    const LabeledClaim& item = dataset[i];
    DebateTranscript transcript = jury.run_debate(item.claim);
    const std::string rel = "transcripts/" + text::safe_filename(item.claim.id) + "-" +
                            hashes[i].substr(0, 12) + ".json";
    detail::write_file_atomic(run_dir / rel, to_json(transcript, validated.roles).dump(2) + "\n");
    std::lock_guard lock(mu);
    ++report.executed;
    if (transcript.failed()) {
      errors[i] = std::string(to_string(transcript.failure->code)) + ": " + transcript.failure->message;
      return;
    }
    ClaimDecision decision = adjudicate(transcript.final_round_verdicts, item.claim.id);
    json line = {{"hash", hashes[i]},
                 {"claim_id", item.claim.id},
                 {"gold", std::string(to_string(item.gold_label))},
                 {"decision", to_json(decision)},
                 {"transcript", rel}};
    predictions_out << line.dump() << '\n';
    predictions_out.flush();
    done[hashes[i]] = {decision, rel};
  });

  std::vector<Verdict> predictions;
  std::vector<Verdict> gold;
  std::string failures_text;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    ClaimOutcome o;
    o.claim_id = dataset[i].claim.id;
    o.content_hash = hashes[i];
    o.gold = dataset[i].gold_label;
    if (auto it = done.find(hashes[i]); it != done.end()) {
      o.decision = it->second.decision;
      o.transcript_path = it->second.transcript;
      predictions.push_back(o.decision->final_verdict);
      gold.push_back(o.gold);
    } else if (auto e = errors.find(i); e != errors.end()) {
      o.error = e->second;
      ++report.failed;
      failures_text += json{{"claim_id", o.claim_id}, {"hash", hashes[i]}, {"error", e->second}}.dump() + "\n";
    } else {
      ++report.pending;
    }
    report.outcomes.push_back(std::move(o));
  }
  if (!predictions.empty()) report.metrics = class_metrics(predictions, gold);

  detail::write_file_atomic(run_dir / "failures.jsonl", failures_text);
  detail::write_file_atomic(run_dir / "report.json", to_json(report).dump(2) + "\n");
  return report;
}

}  // namespace madfact
