#pragma once

#include "madfact/clerk.hpp"
#include "madfact/core.hpp"
#include "madfact/eval_harness.hpp"
#include "madfact/judge.hpp"
#include "madfact/jury.hpp"
#include "madfact/prompts.hpp"
#include "madfact/providers.hpp"
#include "madfact/pyramid.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace madfact {

/// Everything a batch command needs: config, providers, prompts and knobs.
struct Session {
  SystemConfig config = default_config();
  std::shared_ptr<ProviderRegistry> providers;
  PromptSet prompts = PromptSet::builtin();
  Clock clock = Clock::system();
  std::size_t jobs = 1;
  std::uint64_t seed = 0;
  DebateOptions debate;
};

struct RunManifest {
  std::string run_id;
  std::string command;
  std::string config_hash;
  std::string started_at;
  std::string finished_at;
  std::vector<std::string> input_paths;
  std::vector<std::string> outputs;
};

nlohmann::json to_json(const RunManifest& m);

/// Derived from the command, the config, the input bytes and any extra
/// parameters, so a repeated invocation lands in the same run directory and resumes it.
std::string make_run_id(const std::string& command, const SystemConfig& config,
                        const std::vector<std::filesystem::path>& inputs, const std::string& extra = {});

// ------------------------------------------------------------------- verify

struct ClaimBatch {
  std::string response_id;
  std::string question_id;
  std::vector<AtomicClaim> claims;
  std::optional<DecompositionResult> decomposition;
};

/// JSON lines {claim|text, id?, response_id?, question_id?}, grouped by
/// response_id in first-appearance order.
std::vector<ClaimBatch> load_claims_file(const std::filesystem::path& path);

struct ResponseInput {
  Question question;
  LongFormResponse response;
};

/// One JSON object {id, question_id?, question, response|text, producer?}.
ResponseInput load_response_file(const std::filesystem::path& path);

ClaimBatch decompose_response(const Session& session, const ResponseInput& input);

struct VerifyReport {
  std::size_t claims = 0;
  std::size_t decided = 0;
  std::vector<std::pair<std::string, std::string>> failures;  // claim id, message
  std::optional<ErrorCode> first_failure;
};

/// Debates and adjudicates every claim. Writes out/transcripts/<response>/<claim>.json,
/// out/decisions.json and out/manifest.json.
VerifyReport run_verify(const Session& session, const std::vector<ClaimBatch>& batches,
                        const std::filesystem::path& out_dir,
                        const std::vector<std::string>& input_paths);

// ------------------------------------------------------------ build-pyramid

/// JSON lines {id, question|text}, or a single object, or an array of objects.
std::vector<Question> load_questions_file(const std::filesystem::path& path);

/// "exact" or "backend:<id>".
std::unique_ptr<ClaimMatcher> make_matcher(const std::string& spec, const Session& session);

/// Writes out/<question id>.pyramid.json per question, plus out/references/ and a manifest.
/// Duplicate expert ids raise InvalidConfigError.
std::vector<Pyramid> run_build_pyramids(const Session& session, const std::vector<Question>& questions,
                                        const std::vector<std::string>& experts,
                                        const std::string& matcher_spec,
                                        const std::filesystem::path& out_dir,
                                        const std::vector<std::string>& input_paths);

// -------------------------------------------------------------------- score

struct ScoreReport {
  std::vector<double> gammas;
  std::vector<std::vector<ResponseScore>> per_gamma;  // parallel to gammas
  std::vector<double> dataset_mean;                   // parallel to gammas
};

/// Reads <pyramids_dir>/<question id>.pyramid.json for each response in the
/// decisions file. Writes out/scores.json and out/scores.csv.
ScoreReport run_score(const Session& session, const std::filesystem::path& pyramids_dir,
                      const std::filesystem::path& decisions_path, const std::vector<double>& gammas,
                      const std::string& matcher_spec, const std::filesystem::path& out_dir);

/// Shortest decimal form, e.g. "1" or "0.8".
std::string format_gamma(double gamma);

// ------------------------------------------------------------ bench, ablate

struct BenchRequest {
  std::filesystem::path dataset;
  std::optional<std::size_t> n_true;  // stratified sampling when set
  std::optional<std::size_t> stop_after;
};

struct BenchRun {
  std::string run_id;
  std::filesystem::path run_dir;
  BenchmarkReport report;
};

/// Runs under out/runs/<run-id>/.
BenchRun run_bench(const Session& session, const BenchRequest& request, const std::filesystem::path& out_dir);

struct AblationOutcome {
  Ablation variant = Ablation::None;
  std::optional<BenchRun> run;
  std::optional<std::string> refused;  // validation message when the variant is inconsistent
};

/// One bench per variant; writes out/ablation.json.
std::vector<AblationOutcome> run_ablation(const Session& session, const BenchRequest& request,
                                          const std::vector<Ablation>& variants,
                                          const std::filesystem::path& out_dir);

}  // namespace madfact
