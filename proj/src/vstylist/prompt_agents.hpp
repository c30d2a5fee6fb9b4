#pragma once

#include <span>
#include <string>
#include <vector>

#include "vstylist/backends/client.hpp"
#include "vstylist/frames.hpp"
#include "vstylist/style_tree.hpp"
#include "vstylist/templates.hpp"

namespace vstylist {

inline constexpr std::size_t kMaxPromptChars = 300;

struct ShotCaption {
  int shot_index = 0;
  std::string caption;
};

struct ShotPrompt {
  int shot_index = 0;
  std::string prompt;
};

struct PromptRecord {
  int shot_index = 0;
  std::string caption;
  std::string prompt;
};

json prompts_to_json(std::span<const PromptRecord> records);
std::vector<PromptRecord> prompts_from_json(const json& doc);

ShotCaption caption_shot(int shot_index, std::span<const Frame> keyframes,
                         backends::BackendClient& vision, const PromptTemplates& templates,
                         const backends::SamplingParams& sampling);

ShotPrompt translate_caption(const ShotCaption& caption, backends::BackendClient& text,
                             const PromptTemplates& templates,
                             const backends::SamplingParams& sampling);

/// Single-line, at most kMaxPromptChars, cut back to the last comma when too long.
std::string clean_prompt(std::string_view raw);

/// "trigger words, style phrase, shot prompt" with repeated tokens dropped
/// case-insensitively (first occurrence wins).
std::string compose_render_prompt(const ShotPrompt& shot_prompt, const ModelCard* card,
                                  const std::string& style);

}  // namespace vstylist
