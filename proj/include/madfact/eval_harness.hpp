#pragma once

#include "madfact/core.hpp"
#include "madfact/judge.hpp"
#include "madfact/jury.hpp"
#include "madfact/providers.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace madfact {

struct LabeledClaim {
  AtomicClaim claim;
  Verdict gold_label = Verdict::True;
  std::string dataset_id;
  std::string question;
  std::string response;
};

/// JSON lines with {question, response, claim, label}; optional "id".
/// Blank lines are skipped. Missing files raise FileNotFound, bad lines ParseError.
std::vector<LabeledClaim> load_claim_dataset(const std::filesystem::path& path,
                                             std::string dataset_id = {});

/// Keeps every FALSE claim and a seeded uniform sample of n_true TRUE claims,
/// preserving dataset order.
std::vector<LabeledClaim> stratified_sample(std::span<const LabeledClaim> claims, std::size_t n_true,
                                            std::uint64_t seed);

struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;

  std::size_t total() const { return tp + fp + fn + tn; }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  // set when the metric's denominator was zero and 0 was reported
  bool precision_undefined = false;
  bool recall_undefined = false;
  bool f1_undefined = false;
};

struct ClassReport {
  ClassMetrics positive;  // TRUE is the target class
  ClassMetrics negative;  // FALSE is the target class
  ConfusionCounts counts;
};

ClassReport class_metrics(std::span<const Verdict> predictions, std::span<const Verdict> gold);

nlohmann::json to_json(const ClassMetrics& m);
nlohmann::json to_json(const ClassReport& r);

/// Stable identity of a dataset claim inside a run directory.
std::string claim_content_hash(const LabeledClaim& claim);

struct BenchmarkOptions {
  std::size_t jobs = 1;
  /// Run at most this many pending debates, then stop (as if interrupted).
  std::optional<std::size_t> stop_after;
  DebateOptions debate;
  PromptSet prompts = PromptSet::builtin();
};

struct ClaimOutcome {
  std::string claim_id;
  std::string content_hash;
  Verdict gold = Verdict::True;
  std::optional<ClaimDecision> decision;
  std::string transcript_path;  // relative to the run directory
  std::optional<std::string> error;
};

struct BenchmarkReport {
  std::optional<ClassReport> metrics;  // absent when nothing has been adjudicated
  std::vector<ClaimOutcome> outcomes;  // dataset order
  std::size_t executed = 0;            // debates run by this invocation
  std::size_t resumed = 0;             // claims already adjudicated on entry
  std::size_t failed = 0;
  std::size_t pending = 0;             // neither adjudicated nor failed yet

  bool complete() const { return pending == 0 && failed == 0; }
};

nlohmann::json to_json(const BenchmarkReport& r);

/// Debates every dataset claim and adjudicates it, inside
/// run_dir/{config.json, transcripts/, predictions.jsonl, report.json, failures.jsonl}.
/// Claims already in predictions.jsonl are skipped, so an interrupted run resumes
/// where it stopped. Per-claim provider failures are listed, never counted.
BenchmarkReport run_benchmark(std::span<const LabeledClaim> dataset, const SystemConfig& config,
                              ProviderRegistry& providers, const std::filesystem::path& run_dir,
                              const BenchmarkOptions& options = {});

}  // namespace madfact
