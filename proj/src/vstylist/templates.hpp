#pragma once

#include <array>
#include <string>

#include "vstylist/util.hpp"

namespace vstylist {

inline constexpr int kExpertCount = 5;

struct ChatTemplate {
  std::string system;
  std::string user;
  std::string retry;
};

/// All agent prompt text. Loaded from TOML so wording can be changed without
/// rebuilding; snapshotted into every job.
struct PromptTemplates {
  ChatTemplate captioner;
  ChatTemplate translator;
  ChatTemplate identifier;
  std::array<std::string, kExpertCount> personas;
  std::string expert;
  std::string chairman;
  std::string chairman_retry;
  ChatTemplate scorer;
  ChatTemplate refiner;
  ChatTemplate tree_builder;

  static PromptTemplates load(const fs::path& path);
  static PromptTemplates from_toml_text(std::string_view text, const std::string& origin);
  json to_json() const;
  static PromptTemplates from_json(const json& j);
};

}  // namespace vstylist
