#include <doctest.h>

#include "support.hpp"
#include "vstylist/config.hpp"
#include "vstylist/error.hpp"

using namespace vstylist;
using testing::TempDir;

namespace {

EnvLookup env_of(std::map<std::string, std::string> vars) {
  return [vars = std::move(vars)](const std::string& name) -> std::optional<std::string> {
    auto it = vars.find(name);
    if (it == vars.end()) return std::nullopt;
    return it->second;
  };
}

const EnvLookup kNoEnv = env_of({});

}  // namespace

TEST_CASE("defaults carry the documented constants") {
  auto c = Config::resolve(std::nullopt, kNoEnv, {});
  CHECK(c.sampling.temperature == 0.7);
  CHECK(c.sampling.top_p == 0.95);
  CHECK(c.sampling.top_k == 10);
  CHECK(c.reflection.threshold == 60);
  CHECK(c.reflection.max_rounds == 3);
  CHECK(c.reflection.init_low == 0.1);
  CHECK(c.reflection.init_high == 0.3);
  CHECK(c.keyframes == 3);
  CHECK(c.reflection.scorer_keyframes == 3);
  CHECK(c.max_parallel_shots == 2);
  CHECK(c.base_model == "SD 1.5");
  CHECK(c.backend_mode == "mock");
  CHECK(c.clip_stride == 1);
  CHECK(!c.exclude_boundaries);
  CHECK(fs::exists(c.style_tree));
  CHECK(fs::exists(c.prompts));
}

TEST_CASE("file, environment and flags apply in that order") {
  TempDir dir;
  write_text_file_atomic(dir / "c.toml", R"(
[reflection]
threshold = 70
max_rounds = 4

[backends]
mode = "http"
text_url = "http://file-text"
vision_url = "http://file-vision"
render_url = "http://file-render"
embed_url = "http://file-embed"
score_url = "http://file-score"

[pipeline]
max_parallel_shots = 3
)");
  auto file_only = Config::resolve(dir / "c.toml", kNoEnv, {});
  CHECK(file_only.reflection.threshold == 70);
  CHECK(file_only.endpoints.text_url == "http://file-text");
  CHECK(file_only.max_parallel_shots == 3);

  auto env = env_of({{"VSTYLIST_TEXT_URL", "http://env-text"}, {"VSTYLIST_RENDER_URL", "http://env-render"},
                     {"VSTYLIST_BEARER_TOKEN", "secret"}});
  auto with_env = Config::resolve(dir / "c.toml", env, {});
  CHECK(with_env.endpoints.text_url == "http://env-text");
  CHECK(with_env.endpoints.vision_url == "http://file-vision");
  CHECK(with_env.endpoints.bearer_token == "secret");
  CHECK(with_env.to_json().dump().find("secret") == std::string::npos);

  auto with_flags = Config::resolve(dir / "c.toml", env,
                                    {"backends.text_url=http://flag-text", "reflection.threshold=80",
                                     "render.extras.steps=20", "search.parallel_experts=false"});
  CHECK(with_flags.endpoints.text_url == "http://flag-text");
  CHECK(with_flags.endpoints.render_url == "http://env-render");
  CHECK(with_flags.reflection.threshold == 80);
  CHECK(with_flags.reflection.max_rounds == 4);
  CHECK(with_flags.extras.at("steps") == "20");
  CHECK(!with_flags.parallel_experts);
}

TEST_CASE("every endpoint has an environment override") {
  std::map<std::string, std::string> vars;
  for (const char* n : {"TEXT", "VISION", "RENDER", "EMBED", "SCORE"})
    vars[std::string("VSTYLIST_") + n + "_URL"] = std::string("http://") + n;
  vars["VSTYLIST_BACKEND_MODE"] = "http";
  auto c = Config::resolve(std::nullopt, env_of(vars), {});
  CHECK(c.backend_mode == "http");
  CHECK(c.endpoints.text_url == "http://TEXT");
  CHECK(c.endpoints.vision_url == "http://VISION");
  CHECK(c.endpoints.render_url == "http://RENDER");
  CHECK(c.endpoints.embed_url == "http://EMBED");
  CHECK(c.endpoints.score_url == "http://SCORE");
}

TEST_CASE("relative paths in a config file resolve against its directory") {
  TempDir dir;
  fs::create_directories(dir / "conf");
  fs::copy_file(testing::data_dir() / "style_tree.json", dir / "conf/tree.json");
  write_text_file_atomic(dir / "conf/c.toml", "[paths]\nstyle_tree = \"tree.json\"\n");
  auto c = Config::resolve(dir / "conf/c.toml", kNoEnv, {});
  CHECK(c.style_tree == fs::weakly_canonical(dir / "conf/tree.json"));
  CHECK(c.style_tree.is_absolute());
}

TEST_CASE("unknown keys, bad values and missing files are errors") {
  TempDir dir;
  write_text_file_atomic(dir / "typo.toml", "[reflection]\nthreshhold = 50\n");
  CHECK_THROWS_AS(Config::resolve(dir / "typo.toml", kNoEnv, {}), Error);
  write_text_file_atomic(dir / "table.toml", "[reflections]\nthreshold = 50\n");
  CHECK_THROWS_AS(Config::resolve(dir / "table.toml", kNoEnv, {}), Error);
  write_text_file_atomic(dir / "type.toml", "[reflection]\nthreshold = \"high\"\n");
  CHECK_THROWS_AS(Config::resolve(dir / "type.toml", kNoEnv, {}), Error);
  write_text_file_atomic(dir / "syntax.toml", "[reflection\n");
  CHECK_THROWS_AS(Config::resolve(dir / "syntax.toml", kNoEnv, {}), Error);
  CHECK_THROWS_AS(Config::resolve(dir / "absent.toml", kNoEnv, {}), Error);
  CHECK_THROWS_AS(Config::resolve(std::nullopt, kNoEnv, {"reflection.threshold=101"}), Error);
  CHECK_THROWS_AS(Config::resolve(std::nullopt, kNoEnv, {"novalue"}), Error);
  CHECK_THROWS_AS(Config::resolve(std::nullopt, kNoEnv, {"paths.style_tree=/nonexistent/tree.json"}), Error);
  CHECK_THROWS_AS(Config::resolve(std::nullopt, kNoEnv, {"backends.mode=grpc"}), Error);
  CHECK_THROWS_AS(Config::resolve(std::nullopt, kNoEnv, {"backends.mode=http"}), Error);
  CHECK_THROWS_AS(Config::resolve(std::nullopt, kNoEnv, {"detector.bins=1"}), Error);
}

TEST_CASE("resolved snapshots round-trip through JSON") {
  auto c = Config::resolve(std::nullopt, kNoEnv, {"render.negative_prompt=blurry", "sampling.seed=12"});
  auto back = Config::from_json(c.to_json());
  CHECK(back.to_json() == c.to_json());
  CHECK(back.negative_prompt == std::optional<std::string>("blurry"));
  CHECK(back.sampling.seed == std::optional<std::int64_t>(12));
}
