#include "capi/capi_internal.hpp"

#include <cstdlib>
#include <cstring>
#include <new>

namespace madfact::capi {

namespace {

thread_local std::string last_error;

}  // namespace

void set_last_error(std::string message) { last_error = std::move(message); }
void clear_last_error() { last_error.clear(); }

madfact_status status_for(ErrorCode code) {
  return static_cast<madfact_status>(static_cast<int>(code) + 1);
}

void require(bool condition, const char* message) {
  if (!condition) throw Error(ErrorCode::InvalidArgument, message);
}

ProviderRegistry& providers(madfact_context* ctx) {
  auto& session = ctx->session;
  if (!session.providers || ctx->providers_stale) {
    switch (ctx->source) {
      case madfact_context::Source::None:
        throw Error(ErrorCode::BackendUnavailable, "no providers selected (use a mock fixtures directory or the environment)");
      case madfact_context::Source::Mock:
        session.providers = ProviderRegistry::from_fixtures(ctx->fixtures, session.clock);
        break;
      case madfact_context::Source::Environment:
        session.providers = ProviderRegistry::from_environment(session.config, session.clock);
        break;
    }
    ctx->providers_stale = false;
  }
  return *session.providers;
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void emit(char** out, const nlohmann::json& j) {
  if (out) *out = dup_string(j.dump(2));
}

}  // namespace madfact::capi

using namespace madfact;
using madfact::capi::guarded;
using madfact::capi::require;

extern "C" {

const char* madfact_version(void) { return "0.1.0"; }

const char* madfact_status_name(madfact_status status) {
  if (status == MADFACT_OK) return "OK";
  if (status == MADFACT_ERR_INTERNAL) return "Internal";
  const int index = static_cast<int>(status) - 1;
  if (index < 0 || index > static_cast<int>(ErrorCode::IO)) return "Unknown";
  static thread_local std::string name;
  name = std::string(to_string(static_cast<ErrorCode>(index)));
  return name.c_str();
}

madfact_error_class madfact_status_class(madfact_status status) {
  if (status == MADFACT_OK) return MADFACT_CLASS_NONE;
  const int index = static_cast<int>(status) - 1;
  if (index < 0 || index > static_cast<int>(ErrorCode::IO)) return MADFACT_CLASS_USAGE;
  switch (classify(static_cast<ErrorCode>(index))) {
    case ErrorClass::Config:
      return MADFACT_CLASS_CONFIG;
    case ErrorClass::IO:
      return MADFACT_CLASS_IO;
    case ErrorClass::Provider:
      return MADFACT_CLASS_PROVIDER;
    case ErrorClass::Usage:
      return MADFACT_CLASS_USAGE;
  }
  return MADFACT_CLASS_USAGE;
}

const char* madfact_last_error(void) { return madfact::capi::last_error.c_str(); }

void madfact_string_free(char* s) { std::free(s); }

madfact_status madfact_context_new(madfact_context** out) {
  return guarded([&] {
    require(out != nullptr, "out must not be null");
    *out = new madfact_context();
    return MADFACT_OK;
  });
}

void madfact_context_free(madfact_context* ctx) { delete ctx; }

madfact_status madfact_load_config(madfact_context* ctx, const char* path) {
  return guarded([&] {
    require(ctx && path, "context and path are required");
    ctx->session.config = validate_config(load_config_file(path));
    ctx->providers_stale = ctx->source == madfact_context::Source::Environment;
    return MADFACT_OK;
  });
}

madfact_status madfact_set_config_json(madfact_context* ctx, const char* json) {
  return guarded([&] {
    require(ctx && json, "context and json are required");
    const auto j = nlohmann::json::parse(json, nullptr, false);
    if (j.is_discarded()) throw Error(ErrorCode::ParseError, "config is not valid JSON");
    ctx->session.config = validate_config(config_from_json(j));
    ctx->providers_stale = ctx->source == madfact_context::Source::Environment;
    return MADFACT_OK;
  });
}

madfact_status madfact_get_config_json(madfact_context* ctx, char** out_json) {
  return guarded([&] {
    require(ctx && out_json, "context and out_json are required");
    *out_json = madfact::capi::dup_string(config_to_json(ctx->session.config).dump(2));
    return MADFACT_OK;
  });
}

madfact_status madfact_set_rule(madfact_context* ctx, const char* rule) {
  return guarded([&] {
    require(ctx && rule, "context and rule are required");
    SystemConfig config = ctx->session.config;
    config.rule = parse_rule(rule);
    ctx->session.config = validate_config(config);
    return MADFACT_OK;
  });
}

madfact_status madfact_set_ablation(madfact_context* ctx, const char* variant) {
  return guarded([&] {
    require(ctx && variant, "context and variant are required");
    ctx->session.config = validate_config(apply_ablation(ctx->session.config, parse_ablation(variant)));
    return MADFACT_OK;
  });
}

madfact_status madfact_set_prompt_dir(madfact_context* ctx, const char* dir) {
  return guarded([&] {
    require(ctx && dir, "context and dir are required");
    ctx->session.prompts = PromptSet::with_overrides(dir);
    return MADFACT_OK;
  });
}

madfact_status madfact_set_jobs(madfact_context* ctx, size_t jobs) {
  return guarded([&] {
    require(ctx && jobs > 0, "jobs must be positive");
    ctx->session.jobs = jobs;
    return MADFACT_OK;
  });
}

madfact_status madfact_set_seed(madfact_context* ctx, uint64_t seed) {
  return guarded([&] {
    require(ctx, "context is required");
    ctx->session.seed = seed;
    return MADFACT_OK;
  });
}

madfact_status madfact_set_frozen_clock(madfact_context* ctx, int enabled) {
  return guarded([&] {
    require(ctx, "context is required");
    ctx->session.clock = enabled ? Clock::frozen() : Clock::system();
    ctx->providers_stale = true;
    return MADFACT_OK;
  });
}

madfact_status madfact_use_mock(madfact_context* ctx, const char* fixtures_dir) {
  return guarded([&] {
    require(ctx && fixtures_dir, "context and fixtures_dir are required");
    ctx->source = madfact_context::Source::Mock;
    ctx->fixtures = fixtures_dir;
    ctx->providers_stale = true;
    madfact::capi::providers(ctx);
    return MADFACT_OK;
  });
}

madfact_status madfact_use_environment(madfact_context* ctx) {
  return guarded([&] {
    require(ctx, "context is required");
    ctx->source = madfact_context::Source::Environment;
    ctx->providers_stale = true;
    madfact::capi::providers(ctx);
    return MADFACT_OK;
  });
}

size_t madfact_upstream_chat_calls(const madfact_context* ctx) {
  return ctx && ctx->session.providers ? ctx->session.providers->upstream_chat_calls() : 0;
}

size_t madfact_upstream_search_calls(const madfact_context* ctx) {
  return ctx && ctx->session.providers ? ctx->session.providers->upstream_search_calls() : 0;
}

}  // extern "C"
