#pragma once

#include <atomic>
#include <cstdlib>
#include <map>
#include <random>
#include <set>
#include <string>

#include "vstylist/backends/client.hpp"
#include "vstylist/backends/mock.hpp"
#include "vstylist/frames.hpp"
#include "vstylist/style_tree.hpp"
#include "vstylist/templates.hpp"

namespace vstylist::testing {

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    fs::path base = fs::temp_directory_path() / "vstylist-tests";
    fs::create_directories(base);
    std::string tmpl = (base / ("t" + std::to_string(counter++) + "-XXXXXX")).string();
    if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    if (!std::getenv("VSTYLIST_KEEP_TEST_DIRS")) fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  fs::path path_;
};

inline fs::path data_dir() { return fs::path(VSTYLIST_DATA_DIR); }
inline fs::path protocol_dir() { return fs::path(VSTYLIST_PROTOCOL_DIR); }

inline const PromptTemplates& default_templates() {
  static const PromptTemplates t = PromptTemplates::load(data_dir() / "prompts.toml");
  return t;
}

inline const StyleTree& default_tree() {
  static const StyleTree t = StyleTree::load(data_dir() / "style_tree.json");
  return t;
}

/// A client over an in-process mock with the given scenario document.
struct MockRig {
  std::shared_ptr<const backends::MockService> mock;
  std::shared_ptr<backends::InProcessTransport> transport;
  std::shared_ptr<backends::BackendClient> client;

  explicit MockRig(const json& scenario = json::object(), int retries = 0)
      : mock(std::make_shared<const backends::MockService>(backends::Scenario::from_json(scenario))),
        transport(std::make_shared<backends::InProcessTransport>(mock)),
        client(std::make_shared<backends::BackendClient>(transport, retries, 0)) {}

  backends::BackendClient& operator*() { return *client; }
  backends::BackendClient* operator->() { return client.get(); }
};

inline Frame solid_frame(int w, int h, Rgb c, std::int64_t index = 0) {
  Frame f(w, h, index);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) f.set(x, y, c);
  return f;
}

inline Frame random_frame(int w, int h, std::mt19937_64& rng, std::int64_t index = 0) {
  Frame f(w, h, index);
  for (auto& p : f.pixels) p = static_cast<std::uint8_t>(rng() & 0xFF);
  return f;
}

inline std::vector<Frame> static_video(int n, int w, int h, Rgb c) {
  std::vector<Frame> out;
  for (int i = 0; i < n; ++i) out.push_back(solid_frame(w, h, c, i));
  return out;
}

/// Scenes of the given lengths with alternating kinds and well separated palettes.
inline std::vector<SceneSpec> fixture_scenes(const std::vector<int>& lengths) {
  static const Rgb palettes[] = {{20, 30, 200}, {200, 180, 40}, {30, 100, 120}, {220, 20, 210}};
  std::vector<SceneSpec> scenes;
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    SceneSpec s;
    s.duration_frames = lengths[i];
    s.kind = static_cast<SceneKind>(i % 3);
    s.palette = palettes[i % 4];
    s.motion = s.kind == SceneKind::MovingRectangle ? 1 : 0;
    scenes.push_back(s);
  }
  return scenes;
}

/// The three-scene, 120-frame fixture video.
inline FrameManifest fixture_video(const fs::path& dir, const std::vector<int>& lengths = {40, 40, 40}) {
  return generate_synthetic(fixture_scenes(lengths), 30.0, 64, 48, 7, dir);
}

/// Relative path -> file bytes for every regular file under `root`.
inline std::map<std::string, std::string> tree_bytes(const fs::path& root,
                                                     const std::set<std::string>& skip = {}) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    const std::string rel = fs::relative(e.path(), root).string();
    if (skip.count(rel)) continue;
    out[rel] = read_text_file(e.path());
  }
  return out;
}

/// Scenario whose style scorer replies `scores[i]` in round i + 1.
inline json score_script(const std::vector<int>& scores) {
  json rules = json::array();
  for (std::size_t i = 0; i < scores.size(); ++i)
    rules.push_back({{"task", "style_score"},
                     {"match", "\"round\":" + std::to_string(i + 1) + ","},
                     {"reply", json{{"score", scores[i]}, {"reasons", "scripted"}}.dump()}});
  return {{"rules", rules}};
}

}  // namespace vstylist::testing
