#include <doctest.h>

#include "support.hpp"
#include "vstylist/error.hpp"
#include "vstylist/frames.hpp"

using namespace vstylist;
using testing::TempDir;

namespace {

SceneSpec scene(int frames, SceneKind kind, Rgb palette, int motion = 0) {
  SceneSpec s;
  s.duration_frames = frames;
  s.kind = kind;
  s.palette = palette;
  s.motion = motion;
  return s;
}

}  // namespace

TEST_CASE("load_manifest accepts a valid three-frame directory") {
  TempDir dir;
  std::mt19937_64 rng(1);
  std::vector<Frame> frames;
  for (int i = 0; i < 3; ++i) frames.push_back(testing::random_frame(64, 64, rng, i));
  write_sequence(frames, 30.0, dir.path());
  auto m = load_manifest(dir.path());
  CHECK(m.frame_count == 3);
  CHECK(m.width == 64);
  CHECK(m.height == 64);
  CHECK(m.fps == 30.0);
}

TEST_CASE("load_manifest rejects a descriptor that overstates the frame count") {
  TempDir dir;
  auto m = write_sequence(testing::static_video(3, 8, 8, {1, 2, 3}), 30.0, dir.path());
  json desc = m.descriptor();
  desc["frame_count"] = 4;
  write_json_file(dir / kManifestFile, desc);
  CHECK_THROWS_AS(load_manifest(dir.path()), Error);
}

TEST_CASE("load_manifest rejects missing descriptors, bad dimensions and undecodable frames") {
  TempDir dir;
  CHECK_THROWS_AS(load_manifest(dir.path()), Error);
  auto m = write_sequence(testing::static_video(2, 8, 8, {1, 2, 3}), 30.0, dir.path());
  write_png(m.frame_path(1), testing::solid_frame(9, 8, {0, 0, 0}));
  CHECK_THROWS_AS(load_manifest(dir.path()), Error);
  write_text_file_atomic(m.frame_path(1), "not a png");
  CHECK_THROWS_AS(load_manifest(dir.path()), Error);
}

TEST_CASE("write_sequence round-trips pixels exactly") {
  TempDir dir;
  std::vector<SceneSpec> scenes = {scene(30, SceneKind::HorizontalGradient, {20, 200, 90}),
                                   scene(30, SceneKind::MovingRectangle, {200, 40, 200}, 1),
                                   scene(30, SceneKind::Solid, {90, 120, 10})};
  auto frames = synthesize_frames(scenes, 48, 32, 9);
  REQUIRE(frames.size() == 90);
  auto m = write_sequence(frames, 24.0, dir.path());
  CHECK(m.frame_count == 90);
  auto loaded = load_manifest(dir.path());
  for (std::int64_t i = 0; i < loaded.frame_count; ++i) CHECK(read_frame(loaded, i).same_pixels(frames[i]));

  TempDir single;
  CHECK(write_sequence(std::vector<Frame>{frames[0]}, 30.0, single.path()).frame_count == 1);
}

TEST_CASE("write_sequence rejects empty and heterogeneous input") {
  TempDir dir;
  CHECK_THROWS_AS(write_sequence(std::vector<Frame>{}, 30.0, dir.path()), Error);
  std::vector<Frame> mixed = {testing::solid_frame(8, 8, {}), testing::solid_frame(8, 9, {})};
  CHECK_THROWS_AS(write_sequence(mixed, 30.0, dir.path()), Error);
}

TEST_CASE("write_sequence removes stale frames from a previous longer sequence") {
  TempDir dir;
  write_sequence(testing::static_video(5, 8, 8, {9, 9, 9}), 30.0, dir.path());
  write_sequence(testing::static_video(2, 8, 8, {7, 7, 7}), 30.0, dir.path());
  auto m = load_manifest(dir.path());
  CHECK(m.frame_count == 2);
  CHECK(!fs::exists(dir / "frame_000002.png"));
}

TEST_CASE("one solid scene yields identical frames") {
  auto frames = synthesize_frames(std::vector<SceneSpec>{scene(30, SceneKind::Solid, {100, 50, 200})}, 32, 24, 3);
  REQUIRE(frames.size() == 30);
  for (const auto& f : frames) CHECK(f.same_pixels(frames.front()));
}

TEST_CASE("synthetic cut sits exactly at the scene boundary") {
  std::vector<SceneSpec> scenes = {scene(50, SceneKind::Solid, {10, 10, 10}),
                                   scene(40, SceneKind::Solid, {200, 200, 200})};
  auto frames = synthesize_frames(scenes, 32, 24, 4);
  REQUIRE(frames.size() == 90);
  CHECK(frames[48].same_pixels(frames[49]));
  CHECK(!frames[49].same_pixels(frames[50]));
  CHECK(frames[50].same_pixels(frames[89]));
}

TEST_CASE("generate_synthetic is bit-deterministic for a seed") {
  TempDir a, b;
  auto scenes = random_scenes(77, 2, 6, 10, 30, 40);
  auto ma = generate_synthetic(scenes, 30, 40, 30, 5, a.path());
  auto mb = generate_synthetic(scenes, 30, 40, 30, 5, b.path());
  REQUIRE(ma.frame_count == mb.frame_count);
  for (std::int64_t i = 0; i < ma.frame_count; ++i)
    CHECK(read_text_file(ma.frame_path(i)) == read_text_file(mb.frame_path(i)));
}

TEST_CASE("generate_synthetic validates its preconditions") {
  TempDir dir;
  std::vector<SceneSpec> close = {scene(10, SceneKind::Solid, {100, 100, 100}),
                                  scene(10, SceneKind::Solid, {120, 200, 10})};
  CHECK_THROWS_AS(synthesize_frames(close, 16, 16, 1), Error);
  CHECK_THROWS_AS(synthesize_frames(std::vector<SceneSpec>{}, 16, 16, 1), Error);
  CHECK_THROWS_AS(synthesize_frames(std::vector<SceneSpec>{scene(5, SceneKind::Solid, {})}, 0, 16, 1), Error);
  CHECK_THROWS_AS(synthesize_frames(std::vector<SceneSpec>{scene(20, SceneKind::MovingRectangle, {}, 5)}, 30, 16, 1),
                  Error);
}

TEST_CASE("random_scenes always satisfy the generator preconditions") {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    auto scenes = random_scenes(seed, 2, 6, 12, 40, 48);
    CHECK(scenes.size() >= 2);
    CHECK(scenes.size() <= 6);
    CHECK_NOTHROW(synthesize_frames(scenes, 48, 8, seed));
  }
}

TEST_CASE("scene kinds round-trip through their names") {
  for (auto k : {SceneKind::Solid, SceneKind::HorizontalGradient, SceneKind::MovingRectangle})
    CHECK(scene_kind_from_string(to_string(k)) == k);
  CHECK_THROWS_AS(scene_kind_from_string("spiral"), Error);
}

TEST_CASE("keyframe indices follow the evenly spaced rule") {
  CHECK(keyframe_indices({0, 0, 90}, 3) == std::vector<std::int64_t>{0, 44, 89});
  CHECK(keyframe_indices({0, 5, 6}, 3) == std::vector<std::int64_t>{5, 5, 5});
  CHECK(keyframe_indices({0, 0, 2}, 3) == std::vector<std::int64_t>{0, 0, 1});
  CHECK(keyframe_indices({0, 10, 20}, 1) == std::vector<std::int64_t>{10});
  CHECK_THROWS_AS(keyframe_indices({0, 3, 3}, 3), Error);
  CHECK_THROWS_AS(keyframe_indices({0, 0, 5}, 0), Error);
}

TEST_CASE("sampled keyframes deduplicate by frame index") {
  TempDir dir;
  std::mt19937_64 rng(2);
  std::vector<Frame> frames;
  for (int i = 0; i < 8; ++i) frames.push_back(testing::random_frame(8, 8, rng, i));
  auto m = write_sequence(frames, 30, dir.path());
  auto single = dedupe_keyframes(sample_keyframes(m, {0, 5, 6}, 3));
  REQUIRE(single.size() == 1);
  CHECK(single[0].index == 5);
  CHECK(single[0].same_pixels(frames[5]));
  auto pair = dedupe_keyframes(sample_keyframes(m, {0, 0, 2}, 3));
  REQUIRE(pair.size() == 2);
  CHECK(pair[0].index == 0);
  CHECK(pair[1].index == 1);
  CHECK_THROWS_AS(sample_keyframes(m, {0, 4, 9}, 3), Error);

  auto in_memory = sample_keyframes(std::span<const Frame>(frames).subspan(2, 4), 3);
  REQUIRE(in_memory.size() == 3);
  CHECK(in_memory[0].same_pixels(frames[2]));
  CHECK(in_memory[2].same_pixels(frames[5]));
}

TEST_CASE("keyframe indices are nondecreasing and inside the shot") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 500; ++trial) {
    const std::int64_t start = static_cast<std::int64_t>(rng() % 1000);
    const std::int64_t len = 1 + static_cast<std::int64_t>(rng() % 300);
    const int k = 1 + static_cast<int>(rng() % 6);
    auto idx = keyframe_indices({0, start, start + len}, k);
    REQUIRE(idx.size() == static_cast<std::size_t>(k));
    CHECK(idx.front() == start);
    if (k > 1) CHECK(idx.back() == start + len - 1);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      CHECK(idx[i] >= start);
      CHECK(idx[i] < start + len);
      if (i) CHECK(idx[i] >= idx[i - 1]);
    }
  }
}

TEST_CASE("shots serialize and parse") {
  std::vector<Shot> shots = {{0, 0, 50}, {1, 50, 90}};
  CHECK(shots_from_json(shots_to_json(shots)) == shots);
  CHECK_THROWS_AS(shots_from_json(json::parse(R"([{"index": 0}])")), Error);
}

TEST_CASE("external decoder hook produces an indexed sequence") {
  TempDir src, out;
  write_sequence(testing::static_video(4, 8, 8, {1, 2, 3}), 30, src.path());
  fs::remove(src / kManifestFile);
  auto m = ingest_with_decoder("cp {input}/frame_*.png {outdir}/", src.path(), out.path(), 25.0);
  CHECK(m.frame_count == 4);
  CHECK(m.fps == 25.0);
  CHECK(fs::exists(out / kManifestFile));
  CHECK_THROWS_AS(ingest_with_decoder("false", src.path(), out / "x", 25.0), Error);
}
