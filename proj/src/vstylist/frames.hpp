#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vstylist/util.hpp"

namespace vstylist {

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  bool operator==(const Rgb&) const = default;
};

/// One RGB8 raster, row-major, tightly packed.
struct Frame {
  std::int64_t index = 0;
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  Frame() = default;
  Frame(int w, int h, std::int64_t idx = 0)
      : index(idx), width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3, 0) {}

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
  bool valid() const { return width > 0 && height > 0 && pixels.size() == pixel_count() * 3; }

  Rgb at(int x, int y) const {
    const auto* p = &pixels[(static_cast<std::size_t>(y) * width + x) * 3];
    return {p[0], p[1], p[2]};
  }
  void set(int x, int y, Rgb c) {
    auto* p = &pixels[(static_cast<std::size_t>(y) * width + x) * 3];
    p[0] = c.r;
    p[1] = c.g;
    p[2] = c.b;
  }

  /// Pixel-content equality; the index is bookkeeping only.
  bool same_pixels(const Frame& o) const {
    return width == o.width && height == o.height && pixels == o.pixels;
  }
};

/// Half-open frame range [start_frame, end_frame) of one shot.
struct Shot {
  int index = 0;
  std::int64_t start_frame = 0;
  std::int64_t end_frame = 0;

  std::int64_t length() const { return end_frame - start_frame; }
  bool operator==(const Shot&) const = default;
};

json shots_to_json(std::span<const Shot> shots);
std::vector<Shot> shots_from_json(const json& doc);

inline constexpr const char* kDefaultFramePattern = "frame_%06d.png";
inline constexpr const char* kManifestFile = "manifest.json";

struct FrameManifest {
  fs::path directory;
  double fps = 30.0;
  int width = 0;
  int height = 0;
  std::int64_t frame_count = 0;
  std::string name_pattern = kDefaultFramePattern;

  fs::path frame_path(std::int64_t index) const;
  json descriptor() const;
};

// PNG codec.
std::vector<std::uint8_t> encode_png(const Frame& frame);
Frame decode_png(std::span<const std::uint8_t> bytes);
Frame read_png(const fs::path& path);
void write_png(const fs::path& path, const Frame& frame);

/// Reads `manifest.json` from `dir` and checks every frame against it.
FrameManifest load_manifest(const fs::path& dir);
Frame read_frame(const FrameManifest& manifest, std::int64_t index);
std::vector<Frame> read_frames(const FrameManifest& manifest, std::int64_t begin, std::int64_t end);
std::vector<Frame> read_all_frames(const FrameManifest& manifest);

/// Writes frames losslessly as `frame_%06d.png` (renumbered from 0) plus the
/// descriptor. Existing frame files in `dir` beyond the new count are removed.
FrameManifest write_sequence(std::span<const Frame> frames, double fps, const fs::path& dir);

/// Builds a descriptor for a directory of PNGs produced by an external tool.
FrameManifest index_sequence(const fs::path& dir, double fps,
                             const std::string& pattern = kDefaultFramePattern);

/// Runs an external decoder command template with `{input}`, `{outdir}` and
/// `{fps}` substituted, then indexes and validates the produced PNG sequence.
FrameManifest ingest_with_decoder(const std::string& command_template, const fs::path& input,
                                  const fs::path& outdir, double fps);

enum class SceneKind { Solid, HorizontalGradient, MovingRectangle };

std::string to_string(SceneKind kind);
SceneKind scene_kind_from_string(std::string_view name);

struct SceneSpec {
  int duration_frames = 1;
  SceneKind kind = SceneKind::Solid;
  Rgb palette;
  int motion = 0;  // pixels per frame, rectangle scenes only
};

/// Minimum per-channel distance between consecutive scene palettes.
inline constexpr int kPaletteSeparation = 64;

std::vector<Frame> synthesize_frames(std::span<const SceneSpec> scenes, int width, int height,
                                     std::uint64_t seed);
FrameManifest generate_synthetic(std::span<const SceneSpec> scenes, double fps, int width,
                                 int height, std::uint64_t seed, const fs::path& dir);

/// Random but valid scene list (2..max_scenes scenes) for fixtures and tests.
std::vector<SceneSpec> random_scenes(std::uint64_t seed, int min_scenes, int max_scenes,
                                     int min_len, int max_len, int width);

/// Evenly spaced indices including the shot's first and last frame.
std::vector<std::int64_t> keyframe_indices(const Shot& shot, int k);
std::vector<Frame> sample_keyframes(const FrameManifest& manifest, const Shot& shot, int k = 3);
/// Same rule applied to an in-memory shot (element 0 is the shot's first frame).
std::vector<Frame> sample_keyframes(std::span<const Frame> shot_frames, int k = 3);

/// Drops repeated frame indices, keeping first occurrences in order.
std::vector<Frame> dedupe_keyframes(std::vector<Frame> frames);

}  // namespace vstylist
