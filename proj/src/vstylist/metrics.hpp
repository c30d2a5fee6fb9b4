#pragma once

#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vstylist/backends/client.hpp"
#include "vstylist/frames.hpp"

namespace vstylist {

struct SsimParams {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 255.0;

  double c1() const { return (k1 * dynamic_range) * (k1 * dynamic_range); }
  double c2() const { return (k2 * dynamic_range) * (k2 * dynamic_range); }
  void validate() const;
};

/// BT.601 luma of every pixel, row-major, in double precision.
std::vector<double> luma_plane(const Frame& f);

/// Normalized 1-D Gaussian taps; the 2-D window is their outer product.
std::vector<double> gaussian_taps(const SsimParams& params);

/// Mean local SSIM over all valid window positions of the luma channel.
double ssim(const Frame& a, const Frame& b, const SsimParams& params = {});

/// Mean SSIM of consecutive pairs. With `exclude_at` set, pairs whose second
/// frame starts a shot are skipped.
double structure_consistency(std::span<const Frame> frames, const SsimParams& params = {},
                             const std::vector<Shot>* exclude_at = nullptr);

double cosine(std::span<const double> a, std::span<const double> b);

inline constexpr std::size_t kEmbedBatch = 16;

/// Frame embeddings in index order, batched.
std::vector<std::vector<double>> embed_frames_batched(std::span<const Frame> frames,
                                                      backends::BackendClient& embed,
                                                      std::size_t stride = 1);

double clip_t(std::span<const Frame> frames, const std::map<int, std::string>& shot_prompts,
              std::span<const Shot> shots, backends::BackendClient& embed, std::size_t stride = 1);

double clip_w(std::span<const Frame> frames, const std::string& style_words,
              backends::BackendClient& embed, std::size_t stride = 1);

double semantic_consistency(std::span<const Frame> frames, backends::BackendClient& embed);

struct QualityScores {
  double aesthetic_i = 0;
  double distortion_i = 0;
  double aesthetic_v = 0;
  double distortion_v = 0;
};

QualityScores quality_scores(std::span<const Frame> frames, backends::BackendClient& score);

inline constexpr std::array<const char*, 8> kMetricFields = {
    "clip_t", "clip_w", "structure", "semantics", "aesthetic_i", "aesthetic_v", "distortion_i", "distortion_v"};

struct MetricReport {
  double clip_t = 0;
  double clip_w = 0;
  double structure = 0;
  double semantics = 0;
  double aesthetic_i = 0;
  double aesthetic_v = 0;
  double distortion_i = 0;
  double distortion_v = 0;
  double overall = 0;
  json provenance = json::object();

  std::array<double, 8> values() const;
  json to_json() const;
  /// Requires all eight metric fields; `overall` is recomputed.
  static MetricReport from_values(const json& j);
};

/// Arithmetic mean of the eight metric values.
double overall(std::span<const double, 8> values);

struct EvalOptions {
  std::size_t clip_stride = 1;
  bool exclude_boundaries = false;
  SsimParams ssim;
};

struct EvalInputs {
  std::span<const Frame> stylized;
  std::span<const Shot> shots;
  std::map<int, std::string> shot_prompts;
  std::string style_words;
};

struct EvalBackends {
  backends::BackendClient* embed = nullptr;
  backends::BackendClient* score = nullptr;
  std::string embed_url;
  std::string score_url;
};

MetricReport evaluate(const EvalInputs& inputs, const EvalBackends& clients, const EvalOptions& options);

}  // namespace vstylist
