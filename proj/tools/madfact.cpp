#include "madfact/madfact.h"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace {

constexpr int kUsageExit = MADFACT_CLASS_USAGE;
constexpr std::size_t kMaxDefaultJobs = 8;

struct GlobalOptions {
  std::string config;
  std::string out = "out";
  std::size_t jobs = 0;
  std::string mock;
  std::uint64_t seed = 0;
  bool frozen_clock = false;
  std::string prompts;
  std::string rule;
  std::string ablation;
};

using ContextPtr = std::unique_ptr<madfact_context, decltype(&madfact_context_free)>;

int report(madfact_status status) {
  if (status == MADFACT_OK) return 0;
  std::fprintf(stderr, "madfact: %s: %s\n", madfact_status_name(status), madfact_last_error());
  return static_cast<int>(madfact_status_class(status));
}

void print_summary(char* summary) {
  if (!summary) return;
  std::printf("%s\n", summary);
  madfact_string_free(summary);
}

std::vector<const char*> c_strings(const std::vector<std::string>& v) {
  std::vector<const char*> out;
  for (const auto& s : v) out.push_back(s.c_str());
  return out;
}

std::vector<std::string> split_commas(const std::vector<std::string>& items) {
  std::vector<std::string> out;
  for (const auto& item : items) {
    std::size_t start = 0;
    while (start <= item.size()) {
      const std::size_t comma = std::min(item.find(',', start), item.size());
      if (comma > start) out.push_back(item.substr(start, comma - start));
      start = comma + 1;
    }
  }
  return out;
}

/// Applies the global flags in dependency order: config, overrides, clock, providers.
madfact_status prepare(madfact_context* ctx, const GlobalOptions& g) {
  madfact_status s = MADFACT_OK;
  if (!g.config.empty() && (s = madfact_load_config(ctx, g.config.c_str())) != MADFACT_OK) return s;
  if (!g.rule.empty() && (s = madfact_set_rule(ctx, g.rule.c_str())) != MADFACT_OK) return s;
  if (!g.ablation.empty() && (s = madfact_set_ablation(ctx, g.ablation.c_str())) != MADFACT_OK) return s;
  if (!g.prompts.empty() && (s = madfact_set_prompt_dir(ctx, g.prompts.c_str())) != MADFACT_OK) return s;
  std::size_t jobs = g.jobs;
  if (jobs == 0) jobs = std::clamp<std::size_t>(std::thread::hardware_concurrency(), 1, kMaxDefaultJobs);
  if ((s = madfact_set_jobs(ctx, jobs)) != MADFACT_OK) return s;
  if ((s = madfact_set_seed(ctx, g.seed)) != MADFACT_OK) return s;
  if ((s = madfact_set_frozen_clock(ctx, g.frozen_clock ? 1 : 0)) != MADFACT_OK) return s;
  return g.mock.empty() ? madfact_use_environment(ctx) : madfact_use_mock(ctx, g.mock.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-agent debate fact-checking for long-form answers"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions g;
  app.add_option("--config", g.config, "System config JSON");
  app.add_option("--out", g.out, "Output directory")->capture_default_str();
  app.add_option("--jobs", g.jobs, "Concurrent debates (default: processors, at most 8)");
  app.add_option("--mock", g.mock, "Fixtures directory with chat.json and search.json");
  app.add_option("--seed", g.seed, "Sampling seed")->capture_default_str();
  app.add_flag("--frozen-clock", g.frozen_clock, "Stamp every timestamp 1970-01-01T00:00:00Z");
  app.add_option("--prompts", g.prompts, "Directory of prompt template overrides");
  app.add_option("--rule", g.rule, "Debate rule: free-debate, mandatory-search, adaptive");
  app.add_option("--ablation", g.ablation, "Ablation: none, no-role-play, no-debate, no-search");

  auto* verify = app.add_subcommand("verify", "Debate and adjudicate claims");
  std::string claims_file;
  std::string response_file;
  auto* claims_opt = verify->add_option("--claims", claims_file, "JSONL claims file");
  auto* response_opt = verify->add_option("--response", response_file, "Response JSON to decompose first");
  claims_opt->excludes(response_opt);
  response_opt->excludes(claims_opt);
  verify->require_option(1, 1);

  auto* build = app.add_subcommand("build-pyramid", "Build one pyramid per question from expert answers");
  std::string question_file;
  std::vector<std::string> experts;
  std::string build_matcher = "exact";
  build->add_option("--question-file", question_file, "Questions (JSON or JSONL)")->required();
  build->add_option("--experts", experts, "Expert backend ids (comma separated or repeated)")->required();
  build->add_option("--matcher", build_matcher, "exact or backend:<id>")->capture_default_str();

  auto* score = app.add_subcommand("score", "Weighted precision, recall and F1 per response");
  std::string pyramids_dir;
  std::string decisions_file;
  std::vector<double> gammas;
  std::string score_matcher = "exact";
  score->add_option("--pyramids", pyramids_dir, "Directory of <question>.pyramid.json")->required();
  score->add_option("--decisions", decisions_file, "decisions.json from verify")->required();
  score->add_option("--gamma", gammas, "Recall calibration, repeatable (default: config gamma)");
  score->add_option("--matcher", score_matcher, "exact or backend:<id>")->capture_default_str();

  auto* bench = app.add_subcommand("bench", "Per-class metrics over a labeled claim dataset");
  std::string dataset;
  std::int64_t n_true = -1;
  std::int64_t stop_after = -1;
  bench->add_option("--dataset", dataset, "JSONL {question, response, claim, label}")->required();
  bench->add_option("--n-true", n_true, "Keep all FALSE claims and sample this many TRUE ones");
  bench->add_option("--stop-after", stop_after, "Run at most this many pending claims");

  auto* ablate = app.add_subcommand("ablate", "Bench each ablation variant");
  std::string ablate_dataset;
  std::vector<std::string> variants;
  std::int64_t ablate_n_true = -1;
  ablate->add_option("--dataset", ablate_dataset, "JSONL {question, response, claim, label}")->required();
  ablate->add_option("--variants", variants, "Variants (default: all four)");
  ablate->add_option("--n-true", ablate_n_true, "Keep all FALSE claims and sample this many TRUE ones");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsageExit;
  }

  madfact_context* raw = nullptr;
  if (madfact_context_new(&raw) != MADFACT_OK) return report(MADFACT_ERR_INTERNAL);
  ContextPtr ctx(raw, &madfact_context_free);
  if (const madfact_status s = prepare(ctx.get(), g); s != MADFACT_OK) return report(s);

  char* summary = nullptr;
  madfact_status status = MADFACT_OK;
  if (verify->parsed()) {
    status = claims_file.empty() ? madfact_verify_response(ctx.get(), response_file.c_str(), g.out.c_str(), &summary)
                                 : madfact_verify_claims(ctx.get(), claims_file.c_str(), g.out.c_str(), &summary);
  } else if (build->parsed()) {
    const auto ids = split_commas(experts);
    const auto c_ids = c_strings(ids);
    status = madfact_build_pyramids(ctx.get(), question_file.c_str(), c_ids.data(), c_ids.size(),
                                    build_matcher.c_str(), g.out.c_str(), &summary);
  } else if (score->parsed()) {
    status = madfact_score(ctx.get(), pyramids_dir.c_str(), decisions_file.c_str(), gammas.data(), gammas.size(),
                           score_matcher.c_str(), g.out.c_str(), &summary);
  } else if (bench->parsed()) {
    status = madfact_bench(ctx.get(), dataset.c_str(), n_true, stop_after, g.out.c_str(), &summary);
  } else if (ablate->parsed()) {
    const auto names = split_commas(variants);
    const auto c_names = c_strings(names);
    status = madfact_ablate(ctx.get(), ablate_dataset.c_str(), c_names.data(), c_names.size(), ablate_n_true,
                            g.out.c_str(), &summary);
  }
  print_summary(summary);
  return report(status);
}
