#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

namespace madfact {

/// Named prompt templates. Built-in copies are compiled from prompts/*.txt;
/// a directory of same-named files overrides them at runtime.
class PromptSet {
 public:
  static PromptSet builtin();
  /// Built-ins overlaid with every <name>.txt found in dir.
  static PromptSet with_overrides(const std::filesystem::path& dir);

  const std::string& get(std::string_view name) const;
  void set(std::string name, std::string text);

 private:
  std::map<std::string, std::string, std::less<>> templates_;
};

}  // namespace madfact
