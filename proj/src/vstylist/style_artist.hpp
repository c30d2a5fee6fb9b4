#pragma once

#include <functional>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "vstylist/backends/client.hpp"
#include "vstylist/frames.hpp"
#include "vstylist/style_tree.hpp"
#include "vstylist/templates.hpp"

namespace vstylist {

struct ControlWeights {
  double tile = 0.0;
  double depth = 0.0;
  double softedge = 0.0;
  double lineart = 0.0;

  static ControlWeights uniform(double v) { return {v, v, v, v}; }
  ControlWeights clamped() const;
  double mean() const { return (tile + depth + softedge + lineart) / 4.0; }
  std::vector<backends::ControlEntry> entries() const;
  json to_json() const;
  /// Requires all four keys to be numbers; clamps each to [0, 1].
  static std::optional<ControlWeights> parse(const json& j);
  bool operator==(const ControlWeights&) const = default;
};

struct ReflectionParams {
  int threshold = 60;
  int max_rounds = 3;
  double init_low = 0.1;
  double init_high = 0.3;
  std::uint64_t seed = 0;
  int scorer_keyframes = 3;

  void validate() const;
  json to_json() const;
  static ReflectionParams from_json(const json& j);
};

struct ReflectionRound {
  int round = 1;
  ControlWeights weights;
  int score = 0;
  std::string frames_ref;  // relative to the job directory
  std::string scorer_reply;
  int scorer_retries = 0;
  std::string refiner_reply;  // reply that produced these weights (rounds >= 2)
  bool refiner_fallback = false;
};

struct ReflectionTrace {
  int shot_index = 0;
  ReflectionParams params;
  std::vector<ReflectionRound> rounds;
  int best_round = 0;
  bool accepted_early = false;
  std::string status = "done";  // done | failed
  std::string error;

  const ReflectionRound& best() const { return rounds.at(static_cast<std::size_t>(best_round - 1)); }
  json to_json() const;
  static ReflectionTrace from_json(const json& j);
};

/// Index (1-based) of the highest score, earliest on ties.
int best_round_of(std::span<const ReflectionRound> rounds);

/// One shared draw from Uniform[init_low, init_high] for all four controls.
ControlWeights init_weights(const ReflectionParams& params, std::mt19937_64& rng);

struct ScoreResult {
  int score = 0;
  std::string raw;
  int retries_used = 0;
};

struct RefineResult {
  ControlWeights weights;
  std::string raw;
  bool used_fallback = false;
};

/// Everything that stays fixed across the rounds of one shot.
struct ShotRenderJob {
  Shot shot;
  std::span<const Frame> frames;
  double fps = 30.0;
  std::string prompt;
  const ModelCard* card = nullptr;  // null renders with the base model
  std::string base_model = "SD 1.5";
  std::string style;
  std::int64_t render_seed = 0;
  std::optional<std::string> negative_prompt;
  std::map<std::string, std::string> extras;
};

struct AgentContext {
  backends::BackendClient* render = nullptr;
  backends::BackendClient* vision = nullptr;
  const PromptTemplates* templates = nullptr;
  backends::SamplingParams sampling;
};

/// Renders the shot with `weights` and stores the frames under
/// `job_dir / rel_dir`. Returns `rel_dir` as the frames reference.
std::string render_shot(const ShotRenderJob& job, const ControlWeights& weights,
                        backends::BackendClient& render, const fs::path& job_dir,
                        const std::string& rel_dir);

ScoreResult score_style(std::span<const Frame> frames, const std::string& style,
                        const ControlWeights& weights, int round, const AgentContext& agents,
                        int keyframes);

/// Latest frames plus the numeric history; deterministic fallback on double
/// parse failure moves each weight halfway toward 0.5.
RefineResult refine_weights(std::span<const ReflectionRound> history, std::span<const Frame> latest_frames,
                            const std::string& style, const AgentContext& agents, int keyframes);

/// Render, score, refine until the score reaches the threshold or the round
/// cap. The trace is rewritten to `trace_path` after every round when given.
ReflectionTrace stylize_shot(const ShotRenderJob& job, const ReflectionParams& params,
                             const AgentContext& agents, const fs::path& job_dir,
                             const std::optional<fs::path>& trace_path = std::nullopt);

}  // namespace vstylist
