#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vstylist/backends/client.hpp"
#include "vstylist/shot_detector.hpp"
#include "vstylist/style_artist.hpp"

namespace vstylist {

/// Environment lookup used for overrides; returns nullopt for unset names.
using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;
EnvLookup process_env();

struct Config {
  std::string backend_mode = "mock";  // mock | http
  fs::path scenario;                  // mock mode; empty uses the default mock behavior
  backends::BackendEndpoints endpoints;
  backends::SamplingParams sampling;
  DetectorParams detector;
  ReflectionParams reflection;
  std::string base_model = "SD 1.5";
  bool parallel_experts = true;
  std::int64_t render_seed = 0;
  std::optional<std::string> negative_prompt;
  std::map<std::string, std::string> extras;
  int keyframes = 3;
  int max_parallel_shots = 2;
  bool evaluate = true;
  std::size_t clip_stride = 1;
  bool exclude_boundaries = false;
  std::string decoder_command;
  double ingest_fps = 30.0;
  fs::path style_tree;
  fs::path prompts;

  void validate() const;
  /// Resolved snapshot; paths are absolute.
  json to_json() const;
  static Config from_json(const json& j);

  /// Built-in defaults, then the TOML file, then VSTYLIST_* environment
  /// variables, then `key=value` overrides (dotted TOML keys).
  static Config resolve(const std::optional<fs::path>& file, const EnvLookup& env,
                        const std::vector<std::string>& overrides);
};

/// Names of the environment variables that override configuration keys.
const std::vector<std::pair<std::string, std::string>>& env_overrides();

fs::path default_data_dir();

}  // namespace vstylist
