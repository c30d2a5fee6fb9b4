#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "vstylist/backends/client.hpp"
#include "vstylist/config.hpp"
#include "vstylist/frames.hpp"
#include "vstylist/metrics.hpp"
#include "vstylist/prompt_agents.hpp"
#include "vstylist/style_search.hpp"
#include "vstylist/style_tree.hpp"

namespace vstylist {

enum class Stage { Created, Ingested, ShotsDetected, Prompted, StyleResolved, Rendering, Stitched, Evaluated, Done };

inline constexpr std::array<Stage, 9> kStages = {Stage::Created,       Stage::Ingested,  Stage::ShotsDetected,
                                                 Stage::Prompted,      Stage::StyleResolved, Stage::Rendering,
                                                 Stage::Stitched,      Stage::Evaluated, Stage::Done};

std::string_view to_string(Stage s);
Stage stage_from_string(std::string_view s);

struct StageFailure {
  std::string stage;
  std::string reason;
};

/// Persisted as state.json. `stage` is the last completed stage.
struct JobState {
  Stage stage = Stage::Created;
  std::vector<bool> rendered;                    // per-shot completion, by shot index
  std::map<std::string, std::string> checksums;  // artifact path -> sha256
  std::optional<StageFailure> failed;

  json to_json() const;
  static JobState from_json(const json& j);
};

/// One client per service. In mock mode all five share one in-process mock.
struct Services {
  std::shared_ptr<backends::BackendClient> text, vision, render, embed, score;
  std::string embed_location, score_location;

  static Services from_config(const Config& config);
  /// All services over one transport (tests and the mock server path).
  static Services over(std::shared_ptr<backends::Transport> transport, int retries = 0, int backoff_ms = 0);
};

struct RunOptions {
  /// Test hook: stop cleanly after this stage has been checkpointed.
  std::optional<Stage> stop_after;
  /// Test hook: stop after this many shots have been rendered in this run.
  std::optional<int> stop_after_shots;
  std::function<void(const std::string&)> progress;
  /// Overrides the services built from the job's config snapshot.
  std::optional<Services> services;
};

struct JobResult {
  fs::path job_dir;
  JobState state;
  bool complete() const { return state.stage == Stage::Done; }
};

inline constexpr const char* kJobFile = "job.json";
inline constexpr const char* kStateFile = "state.json";
inline constexpr const char* kShotsFile = "shots.json";
inline constexpr const char* kPromptsFile = "prompts.json";
inline constexpr const char* kDecisionFile = "style_decision.json";
inline constexpr const char* kReportFile = "report.json";
inline constexpr const char* kFinalDir = "final";

std::string reflection_file(int shot_index);

/// Loads a frame source: a directory with manifest.json, a directory of
/// frame_%06d.png files, or (with a decoder command) a video file.
FrameManifest open_source(const fs::path& video, const Config& config, const fs::path& job_dir);

/// Creates the job directory with its frozen config snapshot and runs it.
JobResult run(const fs::path& video, const std::string& query, const Config& config, const fs::path& out_dir,
              const RunOptions& options = {});

/// Continues from the last completed stage after verifying checkpoint checksums.
JobResult resume(const fs::path& job_dir, const RunOptions& options = {});

/// Concatenates per-shot outputs (ordered by shot) into `out_dir`.
FrameManifest stitch(const fs::path& job_dir, const std::vector<std::string>& frames_refs,
                     std::span<const Shot> shots, double fps, const fs::path& out_dir);

/// sha256 over every frame file listed by the manifest, in order.
std::string sequence_digest(const FrameManifest& manifest);

}  // namespace vstylist
