#pragma once

#include <optional>
#include <string>
#include <vector>

#include "vstylist/backends/client.hpp"
#include "vstylist/style_tree.hpp"
#include "vstylist/templates.hpp"

namespace vstylist {

inline constexpr std::size_t kMaxStyleChars = 64;

struct StyleResolution {
  std::string style;
  std::string query_kind = "prompt";  // prompt | inspiration | instruction | hypothesis
};

struct ExpertVote {
  std::string reply;                 // raw, trimmed
  std::optional<std::string> match;  // candidate it resolved to, if any
};

struct LevelDecision {
  int level = 0;
  std::vector<std::string> candidates;
  std::vector<ExpertVote> votes;  // always kExpertCount entries
  std::optional<std::string> chairman_pick;
  std::vector<std::string> chairman_replies;
  int retries_used = 0;
  std::string decided_by;  // "chairman", "majority" or "none"
};

struct StyleDecision {
  StyleResolution resolution;
  std::vector<std::string> path;  // [class, style] on success
  std::optional<ModelCard> card;
  bool base_model_fallback = false;
  std::string base_model;
  std::vector<LevelDecision> trace;           // completed levels only
  std::optional<LevelDecision> failed_level;  // the level that produced no pick

  json to_json() const;
  static StyleDecision from_json(const json& j);
};

struct SearchOptions {
  std::string base_model = "SD 1.5";
  bool parallel_experts = true;
};

StyleResolution identify_style(const std::string& query, backends::BackendClient& text,
                               const PromptTemplates& templates,
                               const backends::SamplingParams& sampling);

/// `expert_id` is 1-based; the request seed is base seed + expert_id.
ExpertVote expert_vote(const std::string& style, const std::vector<std::string>& candidates,
                       int level, int expert_id, backends::BackendClient& text,
                       const PromptTemplates& templates, const backends::SamplingParams& sampling);

/// Chairman pick with one retry, then majority of valid votes (ties go to the
/// earlier candidate). `chairman_pick` stays empty when nothing is valid.
LevelDecision chairman_decide(const std::string& style, int level,
                              const std::vector<std::string>& candidates,
                              std::vector<ExpertVote> votes, backends::BackendClient& text,
                              const PromptTemplates& templates,
                              const backends::SamplingParams& sampling);

StyleDecision search_tree(const StyleResolution& resolution, const StyleTree& tree,
                          backends::BackendClient& text, const PromptTemplates& templates,
                          const backends::SamplingParams& sampling, const SearchOptions& options = {});

/// Case-insensitive match of a model reply against candidates (exact, then
/// quoted/punctuated variants).
std::optional<std::string> match_candidate(const std::string& reply,
                                           const std::vector<std::string>& candidates);

}  // namespace vstylist
