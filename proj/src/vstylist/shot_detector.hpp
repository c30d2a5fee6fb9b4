#pragma once

#include <memory>
#include <span>
#include <vector>

#include "vstylist/frames.hpp"

namespace vstylist {

/// Concatenated per-channel (R, G, B) histograms, each normalized to sum 1.
struct Histogram {
  int bins = 0;
  std::vector<double> values;  // 3 * bins
};

struct DetectorParams {
  int bins = 32;
  int window = 60;
  double k_sigma = 3.0;
  double abs_threshold = 0.3;
  int min_shot_len = 8;

  void validate() const;
};

Histogram frame_histogram(const Frame& frame, int bins);

/// Total-variation distance averaged over the three channels, in [0, 1].
double frame_distance(const Histogram& a, const Histogram& b);

/// Consecutive-frame distances: element t is d(frame t-1, frame t); element 0 is 0.
std::vector<double> distance_profile(std::span<const Frame> frames, int bins);

/// Boundary decision over a precomputed distance profile.
std::vector<Shot> shots_from_profile(std::span<const double> distances, const DetectorParams& params);

/// Pluggable shot detector so a served model can replace the histogram detector.
class ShotDetector {
 public:
  virtual ~ShotDetector() = default;
  virtual std::vector<Shot> detect(const FrameManifest& manifest) const = 0;
};

class HistogramShotDetector final : public ShotDetector {
 public:
  explicit HistogramShotDetector(DetectorParams params = {});
  std::vector<Shot> detect(const FrameManifest& manifest) const override;
  std::vector<Shot> detect(std::span<const Frame> frames) const;

 private:
  DetectorParams params_;
};

std::vector<Shot> detect_shots(const FrameManifest& manifest, const DetectorParams& params);
std::vector<Shot> detect_shots(std::span<const Frame> frames, const DetectorParams& params);

/// True iff shots cover [0, frame_count) contiguously with increasing indices.
bool is_partition(std::span<const Shot> shots, std::int64_t frame_count);

}  // namespace vstylist
