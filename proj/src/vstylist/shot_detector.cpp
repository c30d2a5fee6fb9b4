#include "vstylist/shot_detector.hpp"

#include <cmath>
#include <deque>

#include "vstylist/error.hpp"

namespace vstylist {

void DetectorParams::validate() const {
  if (bins < 2) fail(ErrorKind::Invalid, "detector bins must be >= 2");
  if (window < 2) fail(ErrorKind::Invalid, "detector window must be >= 2");
  if (!(k_sigma > 0)) fail(ErrorKind::Invalid, "detector k_sigma must be > 0");
  if (!(abs_threshold > 0 && abs_threshold < 1))
    fail(ErrorKind::Invalid, "detector abs_threshold must lie in (0, 1)");
  if (min_shot_len < 1) fail(ErrorKind::Invalid, "detector min_shot_len must be >= 1");
}

Histogram frame_histogram(const Frame& frame, int bins) {
  if (bins < 2) fail(ErrorKind::Invalid, "histogram bins must be >= 2");
  if (frame.pixel_count() == 0 || !frame.valid()) fail(ErrorKind::Invalid, "histogram of empty frame");
  Histogram h{bins, std::vector<double>(static_cast<std::size_t>(3 * bins), 0.0)};
  std::vector<std::size_t> counts(h.values.size(), 0);
  const std::size_t n = frame.pixel_count();
  for (std::size_t p = 0; p < n; ++p)
    for (int c = 0; c < 3; ++c) {
      int bin = frame.pixels[p * 3 + c] * bins / 256;
      ++counts[static_cast<std::size_t>(c * bins + bin)];
    }
  for (std::size_t i = 0; i < counts.size(); ++i)
    h.values[i] = static_cast<double>(counts[i]) / static_cast<double>(n);
  return h;
}

double frame_distance(const Histogram& a, const Histogram& b) {
  if (a.values.size() != b.values.size() || a.bins != b.bins)
    fail(ErrorKind::Invalid, "histogram length mismatch");
  double total = 0.0;
  for (int c = 0; c < 3; ++c) {
    double channel = 0.0;
    for (int i = 0; i < a.bins; ++i) {
      auto k = static_cast<std::size_t>(c * a.bins + i);
      channel += std::abs(a.values[k] - b.values[k]);
    }
    total += 0.5 * channel;
  }
  return total / 3.0;
}

std::vector<double> distance_profile(std::span<const Frame> frames, int bins) {
  std::vector<double> d(frames.size(), 0.0);
  if (frames.empty()) return d;
  Histogram prev = frame_histogram(frames[0], bins);
  for (std::size_t t = 1; t < frames.size(); ++t) {
    Histogram cur = frame_histogram(frames[t], bins);
    d[t] = frame_distance(prev, cur);
    prev = std::move(cur);
  }
  return d;
}

std::vector<Shot> shots_from_profile(std::span<const double> distances,
                                     const DetectorParams& params) {
  params.validate();
  const auto n = static_cast<std::int64_t>(distances.size());
  if (n < 1) fail(ErrorKind::Invalid, "cannot detect shots in an empty video");

  std::vector<std::int64_t> cuts;
  std::deque<double> window;  // trailing non-boundary distances
  std::int64_t last_boundary = 0;
  for (std::int64_t t = 1; t < n; ++t) {
    const double d = distances[static_cast<std::size_t>(t)];
    double threshold = params.abs_threshold;
    if (window.size() >= 2) {
      double mean = 0.0;
      for (double v : window) mean += v;
      mean /= static_cast<double>(window.size());
      double var = 0.0;
      for (double v : window) var += (v - mean) * (v - mean);
      var /= static_cast<double>(window.size());
      threshold = std::max(threshold, mean + params.k_sigma * std::sqrt(var));
    }
    if (d > threshold && t - last_boundary >= params.min_shot_len) {
      cuts.push_back(t);
      last_boundary = t;
      continue;
    }
    window.push_back(d);
    if (window.size() > static_cast<std::size_t>(params.window)) window.pop_front();
  }

  std::vector<Shot> shots;
  std::int64_t start = 0;
  for (auto c : cuts) {
    shots.push_back({static_cast<int>(shots.size()), start, c});
    start = c;
  }
  shots.push_back({static_cast<int>(shots.size()), start, n});
  return shots;
}

HistogramShotDetector::HistogramShotDetector(DetectorParams params) : params_(params) {
  params_.validate();
}

std::vector<Shot> HistogramShotDetector::detect(std::span<const Frame> frames) const {
  return shots_from_profile(distance_profile(frames, params_.bins), params_);
}

std::vector<Shot> HistogramShotDetector::detect(const FrameManifest& manifest) const {
  if (manifest.frame_count < 1) fail(ErrorKind::Invalid, "cannot detect shots in an empty video");
  // Streams frames so only two are resident at a time.
  std::vector<double> d(static_cast<std::size_t>(manifest.frame_count), 0.0);
  Histogram prev = frame_histogram(read_frame(manifest, 0), params_.bins);
  for (std::int64_t t = 1; t < manifest.frame_count; ++t) {
    Histogram cur = frame_histogram(read_frame(manifest, t), params_.bins);
    d[static_cast<std::size_t>(t)] = frame_distance(prev, cur);
    prev = std::move(cur);
  }
  return shots_from_profile(d, params_);
}

std::vector<Shot> detect_shots(const FrameManifest& manifest, const DetectorParams& params) {
  return HistogramShotDetector(params).detect(manifest);
}

std::vector<Shot> detect_shots(std::span<const Frame> frames, const DetectorParams& params) {
  return HistogramShotDetector(params).detect(frames);
}

bool is_partition(std::span<const Shot> shots, std::int64_t frame_count) {
  std::int64_t expect = 0;
  for (std::size_t i = 0; i < shots.size(); ++i) {
    const auto& s = shots[i];
    if (s.index != static_cast<int>(i) || s.start_frame != expect || s.end_frame <= s.start_frame)
      return false;
    expect = s.end_frame;
  }
  return !shots.empty() && expect == frame_count;
}

}  // namespace vstylist
