#pragma once

#include "madfact/errors.hpp"
#include "madfact/madfact.h"
#include "madfact/pipeline.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <string>

struct madfact_context {
  enum class Source { None, Mock, Environment };

  madfact::Session session;
  Source source = Source::None;
  std::filesystem::path fixtures;
  bool providers_stale = false;
};

namespace madfact::capi {

void set_last_error(std::string message);
void clear_last_error();

madfact_status status_for(ErrorCode code);

/// Runs fn, mapping any exception to a status and recording its message.
template <typename Fn>
madfact_status guarded(Fn&& fn) noexcept {
  try {
    clear_last_error();
    return fn();
  } catch (const Error& e) {
    set_last_error(e.what());
    return status_for(e.code());
  } catch (const nlohmann::json::exception& e) {
    set_last_error(e.what());
    return MADFACT_ERR_PARSE;
  } catch (const std::bad_alloc&) {
    set_last_error("out of memory");
    return MADFACT_ERR_INTERNAL;
  } catch (const std::exception& e) {
    set_last_error(e.what());
    return MADFACT_ERR_INTERNAL;
  } catch (...) {
    set_last_error("unknown error");
    return MADFACT_ERR_INTERNAL;
  }
}

void require(bool condition, const char* message);

/// Builds the registry from the recorded source if it is missing or stale.
ProviderRegistry& providers(madfact_context* ctx);

char* dup_string(const std::string& s);
void emit(char** out, const nlohmann::json& j);

}  // namespace madfact::capi
