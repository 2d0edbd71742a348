#include "capi/capi_internal.hpp"

#include <vector>

using namespace madfact;
using madfact::capi::emit;
using madfact::capi::guarded;
using madfact::capi::require;
using nlohmann::json;

namespace {

json verify_summary(const VerifyReport& r, const char* out_dir) {
  json failures = json::array();
  for (const auto& [id, message] : r.failures) failures.push_back({{"claim_id", id}, {"error", message}});
  return {{"claims", r.claims}, {"decided", r.decided}, {"failures", failures}, {"out", out_dir}};
}

// Outputs are complete even when some debates failed; the status still reports it.
madfact_status verify_status(const VerifyReport& r) {
  if (!r.first_failure) return MADFACT_OK;
  madfact::capi::set_last_error(std::to_string(r.failures.size()) + " claim(s) failed; first: " +
                                r.failures.front().second);
  return madfact::capi::status_for(*r.first_failure);
}

json bench_summary(const BenchRun& run) {
  json j = to_json(run.report);
  j.erase("outcomes");
  j["run_id"] = run.run_id;
  j["run_dir"] = run.run_dir.string();
  j["executed"] = run.report.executed;
  j["resumed"] = run.report.resumed;
  return j;
}

std::optional<std::size_t> optional_count(int64_t v) {
  if (v < 0) return std::nullopt;
  return static_cast<std::size_t>(v);
}

}  // namespace

extern "C" {

madfact_status madfact_verify_claims(madfact_context* ctx, const char* claims_path, const char* out_dir,
                                     char** out_summary) {
  return guarded([&] {
    require(ctx && claims_path && out_dir, "context, claims_path and out_dir are required");
    madfact::capi::providers(ctx);
    const auto batches = load_claims_file(claims_path);
    const auto report = run_verify(ctx->session, batches, out_dir, {claims_path});
    emit(out_summary, verify_summary(report, out_dir));
    return verify_status(report);
  });
}

madfact_status madfact_verify_response(madfact_context* ctx, const char* response_path, const char* out_dir,
                                       char** out_summary) {
  return guarded([&] {
    require(ctx && response_path && out_dir, "context, response_path and out_dir are required");
    madfact::capi::providers(ctx);
    const auto input = load_response_file(response_path);
    const std::vector<ClaimBatch> batches = {decompose_response(ctx->session, input)};
    const auto report = run_verify(ctx->session, batches, out_dir, {response_path});
    emit(out_summary, verify_summary(report, out_dir));
    return verify_status(report);
  });
}

madfact_status madfact_build_pyramids(madfact_context* ctx, const char* questions_path, const char* const* experts,
                                      size_t n_experts, const char* matcher, const char* out_dir,
                                      char** out_summary) {
  return guarded([&] {
    require(ctx && questions_path && out_dir, "context, questions_path and out_dir are required");
    require(n_experts == 0 || experts != nullptr, "experts must not be null");
    std::vector<std::string> ids;
    for (size_t i = 0; i < n_experts; ++i) {
      require(experts[i] != nullptr, "expert id must not be null");
      ids.emplace_back(experts[i]);
    }
    madfact::capi::providers(ctx);
    const auto questions = load_questions_file(questions_path);
    const auto pyramids =
        run_build_pyramids(ctx->session, questions, ids, matcher ? matcher : "exact", out_dir, {questions_path});
    json list = json::array();
    for (const auto& p : pyramids) {
      list.push_back({{"question_id", p.question_id},
                      {"G", p.levels},
                      {"entries", p.entry_count()},
                      {"golden_weight_mass", p.golden_weight_mass()}});
    }
    emit(out_summary, {{"pyramids", list}, {"out", out_dir}});
    return MADFACT_OK;
  });
}

madfact_status madfact_score(madfact_context* ctx, const char* pyramids_dir, const char* decisions_path,
                             const double* gammas, size_t n_gammas, const char* matcher, const char* out_dir,
                             char** out_summary) {
  return guarded([&] {
    require(ctx && pyramids_dir && decisions_path && out_dir,
            "context, pyramids_dir, decisions_path and out_dir are required");
    std::vector<double> gamma_list;
    if (n_gammas == 0) {
      gamma_list.push_back(ctx->session.config.gamma);
    } else {
      require(gammas != nullptr, "gammas must not be null");
      gamma_list.assign(gammas, gammas + n_gammas);
    }
    const std::string matcher_spec = matcher ? matcher : "exact";
    if (matcher_spec.rfind("backend:", 0) == 0) madfact::capi::providers(ctx);
    const auto report = run_score(ctx->session, pyramids_dir, decisions_path, gamma_list, matcher_spec, out_dir);
    json means = json::object();
    for (size_t g = 0; g < report.gammas.size(); ++g) means[format_gamma(report.gammas[g])] = report.dataset_mean[g];
    emit(out_summary, {{"responses", report.per_gamma.front().size()}, {"dataset_mean", means}, {"out", out_dir}});
    return MADFACT_OK;
  });
}

madfact_status madfact_bench(madfact_context* ctx, const char* dataset_path, int64_t n_true, int64_t stop_after,
                             const char* out_dir, char** out_summary) {
  return guarded([&] {
    require(ctx && dataset_path && out_dir, "context, dataset_path and out_dir are required");
    madfact::capi::providers(ctx);
    BenchRequest request{dataset_path, optional_count(n_true), optional_count(stop_after)};
    const auto run = run_bench(ctx->session, request, out_dir);
    emit(out_summary, bench_summary(run));
    if (run.report.failed > 0) {
      madfact::capi::set_last_error(std::to_string(run.report.failed) + " claim(s) failed; see " +
                                    (run.run_dir / "failures.jsonl").string());
      return MADFACT_ERR_BACKEND_UNAVAILABLE;
    }
    return MADFACT_OK;
  });
}

madfact_status madfact_ablate(madfact_context* ctx, const char* dataset_path, const char* const* variants,
                              size_t n_variants, int64_t n_true, const char* out_dir, char** out_summary) {
  return guarded([&] {
    require(ctx && dataset_path && out_dir, "context, dataset_path and out_dir are required");
    std::vector<Ablation> list;
    if (n_variants == 0) {
      list = {Ablation::None, Ablation::NoRolePlay, Ablation::NoDebate, Ablation::NoSearch};
    } else {
      require(variants != nullptr, "variants must not be null");
      for (size_t i = 0; i < n_variants; ++i) {
        require(variants[i] != nullptr, "variant must not be null");
        list.push_back(parse_ablation(variants[i]));
      }
    }
    madfact::capi::providers(ctx);
    BenchRequest request{dataset_path, optional_count(n_true), std::nullopt};
    const auto outcomes = run_ablation(ctx->session, request, list, out_dir);
    json rows = json::array();
    for (const auto& o : outcomes) {
      json row = {{"variant", std::string(to_string(o.variant))}};
      if (o.refused) row["refused"] = *o.refused;
      if (o.run) row["run"] = bench_summary(*o.run);
      rows.push_back(std::move(row));
    }
    emit(out_summary, {{"variants", rows}, {"out", out_dir}});
    return MADFACT_OK;
  });
}

madfact_status madfact_adjudicate(const int* verdicts, const int* agent_indices, size_t n, int* out_verdict,
                                  int* out_tie_broken) {
  return guarded([&] {
    require(out_verdict != nullptr, "out_verdict must not be null");
    require(n == 0 || verdicts != nullptr, "verdicts must not be null");
    std::vector<VerdictRecord> records;
    for (size_t i = 0; i < n; ++i) {
      VerdictRecord r;
      r.verdict = verdicts[i] ? Verdict::True : Verdict::False;
      r.agent_index = agent_indices ? agent_indices[i] : static_cast<int>(i);
      records.push_back(r);
    }
    const ClaimDecision d = adjudicate(records);
    *out_verdict = d.final_verdict == Verdict::True ? 1 : 0;
    if (out_tie_broken) *out_tie_broken = d.tie_broken ? 1 : 0;
    return MADFACT_OK;
  });
}

madfact_status madfact_weighted_scores(const double* weights, const int* verdicts, size_t n, double golden_mass,
                                       double gamma, madfact_scores* out) {
  return guarded([&] {
    require(out != nullptr, "out must not be null");
    require(n == 0 || (weights != nullptr && verdicts != nullptr), "weights and verdicts must not be null");
    std::vector<Verdict> v;
    for (size_t i = 0; i < n; ++i) v.push_back(verdicts[i] ? Verdict::True : Verdict::False);
    const WeightedScores s = weighted_scores(std::span<const double>(weights, n), v, golden_mass, gamma);
    *out = {s.prec_w, s.recall_w, s.f1, s.count_true, s.count_false, s.degenerate ? 1 : 0};
    return MADFACT_OK;
  });
}

}  // extern "C"
