#include "madfact/prompts.hpp"

#include "madfact/errors.hpp"

#include <fstream>
#include <sstream>
#include <utility>
#include <vector>

namespace madfact {

// generated from prompts/*.txt
const std::vector<std::pair<std::string, std::string>>& builtin_prompt_texts();

PromptSet PromptSet::builtin() {
  PromptSet set;
  for (const auto& [name, text] : builtin_prompt_texts()) set.templates_[name] = text;
  return set;
}

PromptSet PromptSet::with_overrides(const std::filesystem::path& dir) {
  PromptSet set = builtin();
  if (!std::filesystem::is_directory(dir))
    throw Error(ErrorCode::FileNotFound, "prompt directory '" + dir.string() + "' not found");
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.path().extension() != ".txt") continue;
    std::ifstream in(entry.path());
    std::ostringstream ss;
    ss << in.rdbuf();
    set.templates_[entry.path().stem().string()] = ss.str();
  }
  return set;
}

const std::string& PromptSet::get(std::string_view name) const {
  auto it = templates_.find(name);
  if (it == templates_.end())
    throw Error(ErrorCode::InvalidArgument, "unknown prompt template '" + std::string(name) + "'");
  return it->second;
}

void PromptSet::set(std::string name, std::string text) { templates_[std::move(name)] = std::move(text); }

}  // namespace madfact
