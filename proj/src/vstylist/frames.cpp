#include "vstylist/frames.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <random>
#include <regex>
#include <set>

#include <png.h>

#include "vstylist/error.hpp"

namespace vstylist {

namespace {

// Only `prefix%0Nd suffix` patterns are accepted.
void check_pattern(const std::string& pattern) {
  static const std::regex re(R"(^[^%]*%0[1-9]d[^%]*$)");
  if (!std::regex_match(pattern, re))
    fail(ErrorKind::Invalid, "unsupported frame name pattern '" + pattern + "'");
}

std::string format_index(const std::string& pattern, std::int64_t index) {
  char buf[512];
  std::snprintf(buf, sizeof buf, pattern.c_str(), static_cast<int>(index));
  return buf;
}

std::uint8_t clamp_u8(int v) { return static_cast<std::uint8_t>(std::clamp(v, 0, 255)); }

}  // namespace

json shots_to_json(std::span<const Shot> shots) {
  json arr = json::array();
  for (const auto& s : shots)
    arr.push_back({{"index", s.index}, {"start_frame", s.start_frame}, {"end_frame", s.end_frame}});
  return arr;
}

std::vector<Shot> shots_from_json(const json& doc) {
  if (!doc.is_array()) fail(ErrorKind::Parse, "shots document must be an array");
  std::vector<Shot> shots;
  try {
    for (const auto& s : doc)
      shots.push_back({s.at("index").get<int>(), s.at("start_frame").get<std::int64_t>(),
                       s.at("end_frame").get<std::int64_t>()});
  } catch (const json::exception& e) {
    fail(ErrorKind::Parse, std::string("shots document: ") + e.what());
  }
  return shots;
}

fs::path FrameManifest::frame_path(std::int64_t index) const {
  return directory / format_index(name_pattern, index);
}

json FrameManifest::descriptor() const {
  return {{"fps", fps},
          {"width", width},
          {"height", height},
          {"frame_count", frame_count},
          {"pattern", name_pattern}};
}

std::vector<std::uint8_t> encode_png(const Frame& frame) {
  if (!frame.valid()) fail(ErrorKind::Invalid, "encode_png: malformed frame");
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(frame.width);
  image.height = static_cast<png_uint_32>(frame.height);
  image.format = PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, frame.pixels.data(), 0, nullptr))
    fail(ErrorKind::Io, std::string("png sizing failed: ") + image.message);
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, frame.pixels.data(), 0, nullptr))
    fail(ErrorKind::Io, std::string("png encode failed: ") + image.message);
  out.resize(size);
  return out;
}

Frame decode_png(std::span<const std::uint8_t> bytes) {
  if (bytes.empty()) fail(ErrorKind::Parse, "png: empty buffer");
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size()))
    fail(ErrorKind::Parse, std::string("png: ") + image.message);
  image.format = PNG_FORMAT_RGB;
  Frame frame(static_cast<int>(image.width), static_cast<int>(image.height));
  if (!png_image_finish_read(&image, nullptr, frame.pixels.data(), 0, nullptr)) {
    png_image_free(&image);
    fail(ErrorKind::Parse, std::string("png: ") + image.message);
  }
  return frame;
}

Frame read_png(const fs::path& path) {
  std::string bytes = read_text_file(path);
  try {
    return decode_png({reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()});
  } catch (const Error& e) {
    fail(e.kind(), path.string() + ": " + e.what());
  }
}

void write_png(const fs::path& path, const Frame& frame) {
  auto bytes = encode_png(frame);
  write_text_file_atomic(path, {reinterpret_cast<const char*>(bytes.data()), bytes.size()});
}

FrameManifest load_manifest(const fs::path& dir) {
  fs::path desc = dir / kManifestFile;
  if (!fs::exists(desc)) fail(ErrorKind::Io, "missing frame descriptor " + desc.string());
  json doc = read_json_file(desc);
  FrameManifest m;
  m.directory = dir;
  try {
    m.fps = doc.at("fps").get<double>();
    m.width = doc.at("width").get<int>();
    m.height = doc.at("height").get<int>();
    m.frame_count = doc.at("frame_count").get<std::int64_t>();
    m.name_pattern = doc.value("pattern", std::string(kDefaultFramePattern));
  } catch (const json::exception& e) {
    fail(ErrorKind::Parse, desc.string() + ": " + e.what());
  }
  check_pattern(m.name_pattern);
  if (!(m.fps > 0)) fail(ErrorKind::Invalid, "fps must be positive");
  if (m.width <= 0 || m.height <= 0) fail(ErrorKind::Invalid, "frame dimensions must be positive");
  if (m.frame_count < 0) fail(ErrorKind::Invalid, "negative frame_count");

  std::int64_t present = 0;
  while (fs::exists(m.frame_path(present))) ++present;
  if (present != m.frame_count)
    fail(ErrorKind::Invalid, "descriptor claims " + std::to_string(m.frame_count) +
                                 " frames but " + std::to_string(present) + " are present in " +
                                 dir.string());
  for (std::int64_t i = 0; i < m.frame_count; ++i) {
    Frame f = read_png(m.frame_path(i));
    if (f.width != m.width || f.height != m.height)
      fail(ErrorKind::Invalid, m.frame_path(i).string() + " is " + std::to_string(f.width) + "x" +
                                   std::to_string(f.height) + ", expected " +
                                   std::to_string(m.width) + "x" + std::to_string(m.height));
  }
  return m;
}

Frame read_frame(const FrameManifest& manifest, std::int64_t index) {
  if (index < 0 || index >= manifest.frame_count)
    fail(ErrorKind::Invalid, "frame index " + std::to_string(index) + " out of range");
  Frame f = read_png(manifest.frame_path(index));
  if (f.width != manifest.width || f.height != manifest.height)
    fail(ErrorKind::Invalid, "dimension mismatch in " + manifest.frame_path(index).string());
  f.index = index;
  return f;
}

std::vector<Frame> read_frames(const FrameManifest& manifest, std::int64_t begin,
                               std::int64_t end) {
  std::vector<Frame> out;
  out.reserve(static_cast<std::size_t>(std::max<std::int64_t>(0, end - begin)));
  for (std::int64_t i = begin; i < end; ++i) out.push_back(read_frame(manifest, i));
  return out;
}

std::vector<Frame> read_all_frames(const FrameManifest& manifest) {
  return read_frames(manifest, 0, manifest.frame_count);
}

FrameManifest write_sequence(std::span<const Frame> frames, double fps, const fs::path& dir) {
  if (frames.empty()) fail(ErrorKind::Invalid, "write_sequence: no frames");
  if (!(fps > 0)) fail(ErrorKind::Invalid, "write_sequence: fps must be positive");
  const int w = frames.front().width, h = frames.front().height;
  for (const auto& f : frames) {
    if (!f.valid()) fail(ErrorKind::Invalid, "write_sequence: malformed frame");
    if (f.width != w || f.height != h)
      fail(ErrorKind::Invalid, "write_sequence: frames have heterogeneous dimensions");
  }
  fs::create_directories(dir);
  FrameManifest m;
  m.directory = dir;
  m.fps = fps;
  m.width = w;
  m.height = h;
  m.frame_count = static_cast<std::int64_t>(frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i)
    write_png(m.frame_path(static_cast<std::int64_t>(i)), frames[i]);
  for (std::int64_t i = m.frame_count; fs::exists(m.frame_path(i)); ++i) fs::remove(m.frame_path(i));
  write_json_file(dir / kManifestFile, m.descriptor());
  return m;
}

FrameManifest index_sequence(const fs::path& dir, double fps, const std::string& pattern) {
  check_pattern(pattern);
  FrameManifest m;
  m.directory = dir;
  m.fps = fps;
  m.name_pattern = pattern;
  while (fs::exists(m.frame_path(m.frame_count))) ++m.frame_count;
  if (m.frame_count == 0) fail(ErrorKind::Invalid, "no frames matching " + pattern + " in " + dir.string());
  Frame first = read_png(m.frame_path(0));
  m.width = first.width;
  m.height = first.height;
  write_json_file(dir / kManifestFile, m.descriptor());
  return load_manifest(dir);
}

FrameManifest ingest_with_decoder(const std::string& command_template, const fs::path& input,
                                  const fs::path& outdir, double fps) {
  fs::create_directories(outdir);
  std::string cmd = fill_template(command_template, {{"input", input.string()},
                                                     {"outdir", outdir.string()},
                                                     {"fps", json(fps).dump()}});
  int rc = std::system(cmd.c_str());
  if (rc != 0) fail(ErrorKind::Io, "decoder command failed (" + std::to_string(rc) + "): " + cmd);
  return index_sequence(outdir, fps);
}

std::string to_string(SceneKind kind) {
  switch (kind) {
    case SceneKind::Solid: return "solid";
    case SceneKind::HorizontalGradient: return "horizontal-gradient";
    case SceneKind::MovingRectangle: return "moving-rectangle";
  }
  return "solid";
}

SceneKind scene_kind_from_string(std::string_view name) {
  if (name == "solid") return SceneKind::Solid;
  if (name == "horizontal-gradient") return SceneKind::HorizontalGradient;
  if (name == "moving-rectangle") return SceneKind::MovingRectangle;
  fail(ErrorKind::Invalid, "unknown scene kind '" + std::string(name) + "'");
}

namespace {

constexpr int kGradientSpan = 24;
constexpr int kNoise = 2;

int rect_width(int width) { return std::max(1, width / 3); }
int rect_height(int height) { return std::max(1, height / 3); }

Rgb rect_color(Rgb palette) {
  return {static_cast<std::uint8_t>(palette.r ^ 0x80), static_cast<std::uint8_t>(palette.g ^ 0x80),
          static_cast<std::uint8_t>(palette.b ^ 0x80)};
}

void validate_scenes(std::span<const SceneSpec> scenes, int width, int height) {
  if (scenes.empty()) fail(ErrorKind::Invalid, "generate_synthetic: no scenes");
  if (width < 1 || height < 1) fail(ErrorKind::Invalid, "generate_synthetic: degenerate dimensions");
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    const auto& s = scenes[i];
    if (s.duration_frames < 1) fail(ErrorKind::Invalid, "scene duration must be >= 1");
    if (s.kind == SceneKind::MovingRectangle) {
      long travel = static_cast<long>(std::abs(s.motion)) * (s.duration_frames - 1);
      if (travel + rect_width(width) > width)
        fail(ErrorKind::Invalid, "scene " + std::to_string(i) + ": rectangle leaves the frame");
    }
    if (i > 0) {
      const Rgb a = scenes[i - 1].palette, b = s.palette;
      if (std::abs(a.r - b.r) < kPaletteSeparation || std::abs(a.g - b.g) < kPaletteSeparation ||
          std::abs(a.b - b.b) < kPaletteSeparation)
        fail(ErrorKind::Invalid, "scenes " + std::to_string(i - 1) + " and " + std::to_string(i) +
                                     " are not palette-separated");
    }
  }
}

}  // namespace

std::vector<Frame> synthesize_frames(std::span<const SceneSpec> scenes, int width, int height,
                                     std::uint64_t seed) {
  validate_scenes(scenes, width, height);
  std::mt19937_64 rng(seed);
  std::vector<Frame> out;
  std::int64_t index = 0;
  for (const auto& scene : scenes) {
    // Noise is drawn once per scene so frames within a scene differ only by motion.
    std::vector<int> noise(static_cast<std::size_t>(width) * height * 3);
    for (auto& n : noise) n = static_cast<int>(rng() % (2 * kNoise + 1)) - kNoise;
    const int rw = rect_width(width), rh = rect_height(height);
    const int x0 = scene.motion >= 0 ? 0 : width - rw;
    const int y0 = (height - rh) / 2;
    for (int t = 0; t < scene.duration_frames; ++t, ++index) {
      Frame f(width, height, index);
      for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
          Rgb c = scene.palette;
          int shift = 0;
          if (scene.kind == SceneKind::HorizontalGradient && width > 1)
            shift = -kGradientSpan + (2 * kGradientSpan * x) / (width - 1);
          if (scene.kind == SceneKind::MovingRectangle) {
            int rx = x0 + scene.motion * t;
            if (x >= rx && x < rx + rw && y >= y0 && y < y0 + rh) c = rect_color(scene.palette);
          }
          const int* n = &noise[(static_cast<std::size_t>(y) * width + x) * 3];
          f.set(x, y, {clamp_u8(c.r + shift + n[0]), clamp_u8(c.g + shift + n[1]),
                       clamp_u8(c.b + shift + n[2])});
        }
      }
      out.push_back(std::move(f));
    }
  }
  return out;
}

FrameManifest generate_synthetic(std::span<const SceneSpec> scenes, double fps, int width,
                                 int height, std::uint64_t seed, const fs::path& dir) {
  auto frames = synthesize_frames(scenes, width, height, seed);
  return write_sequence(frames, fps, dir);
}

std::vector<SceneSpec> random_scenes(std::uint64_t seed, int min_scenes, int max_scenes,
                                     int min_len, int max_len, int width) {
  std::mt19937_64 rng(seed);
  auto uniform = [&](int lo, int hi) { return lo + static_cast<int>(rng() % (hi - lo + 1)); };
  auto separated = [&](int prev) {
    int v;
    do v = uniform(0, 255);
    while (std::abs(v - prev) < kPaletteSeparation);
    return static_cast<std::uint8_t>(v);
  };
  const int n = uniform(min_scenes, max_scenes);
  std::vector<SceneSpec> scenes;
  for (int i = 0; i < n; ++i) {
    SceneSpec s;
    s.duration_frames = uniform(min_len, max_len);
    s.kind = static_cast<SceneKind>(uniform(0, 2));
    if (i == 0) {
      s.palette = {static_cast<std::uint8_t>(uniform(0, 255)),
                   static_cast<std::uint8_t>(uniform(0, 255)),
                   static_cast<std::uint8_t>(uniform(0, 255))};
    } else {
      const Rgb p = scenes.back().palette;
      s.palette = {separated(p.r), separated(p.g), separated(p.b)};
    }
    if (s.kind == SceneKind::MovingRectangle) {
      int max_motion = (width - rect_width(width)) / std::max(1, s.duration_frames - 1);
      s.motion = uniform(0, std::min(max_motion, 3));
    }
    scenes.push_back(s);
  }
  return scenes;
}

std::vector<std::int64_t> keyframe_indices(const Shot& shot, int k) {
  if (k < 1) fail(ErrorKind::Invalid, "keyframe count must be >= 1");
  if (shot.length() < 1) fail(ErrorKind::Invalid, "empty shot");
  std::vector<std::int64_t> idx;
  const std::int64_t last = shot.length() - 1;
  for (int j = 0; j < k; ++j)
    idx.push_back(shot.start_frame + (k == 1 ? 0 : (j * last) / (k - 1)));
  return idx;
}

std::vector<Frame> sample_keyframes(const FrameManifest& manifest, const Shot& shot, int k) {
  if (shot.start_frame < 0 || shot.end_frame > manifest.frame_count || shot.length() < 1)
    fail(ErrorKind::Invalid, "shot [" + std::to_string(shot.start_frame) + "," +
                                 std::to_string(shot.end_frame) + ") out of range");
  std::vector<Frame> out;
  for (auto i : keyframe_indices(shot, k)) out.push_back(read_frame(manifest, i));
  return out;
}

std::vector<Frame> sample_keyframes(std::span<const Frame> shot_frames, int k) {
  Shot local{0, 0, static_cast<std::int64_t>(shot_frames.size())};
  std::vector<Frame> out;
  for (auto i : keyframe_indices(local, k)) out.push_back(shot_frames[static_cast<std::size_t>(i)]);
  return out;
}

std::vector<Frame> dedupe_keyframes(std::vector<Frame> frames) {
  std::set<std::int64_t> seen;
  std::vector<Frame> out;
  for (auto& f : frames)
    if (seen.insert(f.index).second) out.push_back(std::move(f));
  return out;
}

}  // namespace vstylist
