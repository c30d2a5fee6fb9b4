#include "vstylist/vstylist.h"

#include <cstring>
#include <memory>

#include "vstylist/backends/mock.hpp"
#include "vstylist/config.hpp"
#include "vstylist/error.hpp"
#include "vstylist/metrics.hpp"
#include "vstylist/pipeline.hpp"
#include "vstylist/shot_detector.hpp"
#include "vstylist/style_search.hpp"
#include "vstylist/style_tree.hpp"

using namespace vstylist;

struct vs_config {
  Config config;
};

struct vs_mock_server {
  std::unique_ptr<backends::MockServer> server;
};

namespace {

thread_local std::string g_last_error;

vs_status status_of(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Invalid: return VS_ERR_INVALID;
    case ErrorKind::Io: return VS_ERR_IO;
    case ErrorKind::Parse: return VS_ERR_PARSE;
    case ErrorKind::Transport: return VS_ERR_TRANSPORT;
    case ErrorKind::Protocol: return VS_ERR_PROTOCOL;
    case ErrorKind::Checksum: return VS_ERR_CHECKSUM;
    case ErrorKind::SearchFailed: return VS_ERR_SEARCH;
  }
  return VS_ERR_INTERNAL;
}

template <class F>
vs_status guarded(F&& fn) {
  try {
    g_last_error.clear();
    return fn();
  } catch (const Error& e) {
    g_last_error = e.what();
    return status_of(e.kind());
  } catch (const json::exception& e) {
    g_last_error = e.what();
    return VS_ERR_PARSE;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return VS_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return VS_ERR_INTERNAL;
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void put(char** out, const json& j) {
  if (out) *out = dup_string(j.dump(2));
}

void require(const void* p, const char* what) {
  if (!p) fail(ErrorKind::Invalid, std::string(what) + " must not be NULL");
}

RunOptions options_for(vs_progress_fn progress, void* user) {
  RunOptions o;
  if (progress) o.progress = [progress, user](const std::string& line) { progress(line.c_str(), user); };
  return o;
}

vs_status job_result(const JobResult& r, char** out) {
  json j = {{"job_dir", r.job_dir.string()},
            {"stage", to_string(r.state.stage)},
            {"complete", r.complete()}};
  if (r.state.failed) j["failed"] = {{"stage", r.state.failed->stage}, {"reason", r.state.failed->reason}};
  if (fs::exists(r.job_dir / kReportFile)) j["report"] = (r.job_dir / kReportFile).string();
  if (fs::exists(r.job_dir / kFinalDir)) j["final"] = (r.job_dir / kFinalDir).string();
  put(out, j);
  if (r.state.failed) {
    g_last_error = "stage " + r.state.failed->stage + " failed: " + r.state.failed->reason;
    return VS_ERR_STAGE;
  }
  return VS_OK;
}

}  // namespace

extern "C" {

const char* vs_last_error(void) { return g_last_error.c_str(); }

const char* vs_version(void) { return "0.3.0"; }

const char* vs_status_name(vs_status s) {
  switch (s) {
    case VS_OK: return "ok";
    case VS_ERR_INVALID: return "invalid";
    case VS_ERR_IO: return "io";
    case VS_ERR_PARSE: return "parse";
    case VS_ERR_TRANSPORT: return "transport";
    case VS_ERR_PROTOCOL: return "protocol";
    case VS_ERR_CHECKSUM: return "checksum";
    case VS_ERR_SEARCH: return "search";
    case VS_ERR_STAGE: return "stage";
    case VS_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

void vs_string_free(char* s) { std::free(s); }

vs_status vs_config_load(const char* path, const char* const* overrides, size_t n, vs_config** out) {
  return guarded([&] {
    require(out, "out");
    std::vector<std::string> ov;
    for (size_t i = 0; i < n; ++i) {
      require(overrides[i], "override");
      ov.emplace_back(overrides[i]);
    }
    std::optional<fs::path> file;
    if (path) file = fs::path(path);
    auto cfg = std::make_unique<vs_config>();
    cfg->config = Config::resolve(file, process_env(), ov);
    *out = cfg.release();
    return VS_OK;
  });
}

vs_status vs_config_to_json(const vs_config* config, char** out) {
  return guarded([&] {
    require(config, "config");
    put(out, config->config.to_json());
    return VS_OK;
  });
}

void vs_config_free(vs_config* config) { delete config; }

vs_status vs_stylize(const vs_config* config, const char* video, const char* query, const char* out_dir,
                     vs_progress_fn progress, void* user, char** out) {
  return guarded([&] {
    require(config, "config");
    require(video, "video");
    require(query, "query");
    require(out_dir, "out_dir");
    return job_result(run(video, query, config->config, out_dir, options_for(progress, user)), out);
  });
}

vs_status vs_resume(const char* job_dir, vs_progress_fn progress, void* user, char** out) {
  return guarded([&] {
    require(job_dir, "job_dir");
    return job_result(resume(job_dir, options_for(progress, user)), out);
  });
}

vs_status vs_tree_validate(const char* tree_path, int strict, char** out) {
  return guarded([&] {
    require(tree_path, "tree_path");
    const auto tree = StyleTree::parse_unchecked(read_json_file(tree_path));
    const auto violations = tree.violations(strict != 0);
    const auto st = tree.stats();
    put(out, {{"valid", violations.empty()},
              {"violations", violations},
              {"classes", st.classes},
              {"styles", st.styles},
              {"models", st.cards},
              {"depth", st.depth}});
    return VS_OK;
  });
}

vs_status vs_tree_list(const char* tree_path, char** out) {
  return guarded([&] {
    require(tree_path, "tree_path");
    const auto tree = StyleTree::load(tree_path);
    json rows = json::array();
    for (const auto& p : tree.card_paths()) rows.push_back({{"class", p[0]}, {"style", p[1]}, {"model", p[2]}});
    put(out, rows);
    return VS_OK;
  });
}

vs_status vs_tree_search(const vs_config* config, const char* query, char** out) {
  return guarded([&] {
    require(config, "config");
    require(query, "query");
    const Config& c = config->config;
    const auto templates = PromptTemplates::load(c.prompts);
    const auto tree = StyleTree::load(c.style_tree);
    auto services = Services::from_config(c);
    const auto resolution = identify_style(query, *services.text, templates, c.sampling);
    SearchOptions opts;
    opts.base_model = c.base_model;
    opts.parallel_experts = c.parallel_experts;
    put(out, search_tree(resolution, tree, *services.text, templates, c.sampling, opts).to_json());
    return VS_OK;
  });
}

vs_status vs_eval(const vs_config* config, const char* source_dir, const char* stylized_dir, const char* prompts_path,
                  const char* style_words, const char* shots_path, char** out) {
  return guarded([&] {
    require(config, "config");
    require(source_dir, "source_dir");
    require(stylized_dir, "stylized_dir");
    require(prompts_path, "prompts_path");
    const Config& c = config->config;
    if (!fs::is_regular_file(prompts_path)) fail(ErrorKind::Invalid, std::string("prompts file not found: ") + prompts_path);
    const auto source = load_manifest(source_dir);
    const auto stylized = read_all_frames(load_manifest(stylized_dir));
    if (static_cast<std::int64_t>(stylized.size()) != source.frame_count)
      fail(ErrorKind::Invalid, "stylized video has " + std::to_string(stylized.size()) + " frames, source has " +
                                   std::to_string(source.frame_count));
    std::vector<Shot> shots = shots_path ? shots_from_json(read_json_file(shots_path)) : detect_shots(source, c.detector);
    EvalInputs in;
    in.stylized = stylized;
    in.shots = shots;
    for (const auto& p : prompts_from_json(read_json_file(prompts_path))) in.shot_prompts[p.shot_index] = p.prompt;
    if (style_words) {
      in.style_words = style_words;
    } else {
      const fs::path decision = fs::path(prompts_path).parent_path() / kDecisionFile;
      if (!fs::exists(decision)) fail(ErrorKind::Invalid, "no style words given and no style_decision.json beside the prompts");
      in.style_words = StyleDecision::from_json(read_json_file(decision)).resolution.style;
    }
    auto services = Services::from_config(c);
    EvalOptions opts;
    opts.clip_stride = c.clip_stride;
    opts.exclude_boundaries = c.exclude_boundaries;
    EvalBackends clients{services.embed.get(), services.score.get(), services.embed_location, services.score_location};
    put(out, evaluate(in, clients, opts).to_json());
    return VS_OK;
  });
}

vs_status vs_eval_values(const char* values_json, char** out) {
  return guarded([&] {
    require(values_json, "values_json");
    json j;
    try {
      j = json::parse(values_json);
    } catch (const json::exception& e) {
      fail(ErrorKind::Invalid, std::string("metric values: ") + e.what());
    }
    put(out, MetricReport::from_values(j).to_json());
    return VS_OK;
  });
}

vs_status vs_fixtures_synth(int scenes, int frames_per_scene, int width, int height, double fps, uint64_t seed,
                            const char* out_dir, char** out) {
  return guarded([&] {
    require(out_dir, "out_dir");
    if (scenes < 1) fail(ErrorKind::Invalid, "scenes must be >= 1");
    if (frames_per_scene < 1) fail(ErrorKind::Invalid, "frames per scene must be >= 1");
    const auto specs = random_scenes(seed, scenes, scenes, frames_per_scene, frames_per_scene, width);
    const auto m = generate_synthetic(specs, fps, width, height, seed, out_dir);
    json list = json::array();
    json boundaries = json::array();
    std::int64_t start = 0;
    for (const auto& s : specs) {
      if (start > 0) boundaries.push_back(start);
      list.push_back({{"kind", to_string(s.kind)},
                      {"frames", s.duration_frames},
                      {"palette", {s.palette.r, s.palette.g, s.palette.b}},
                      {"motion", s.motion}});
      start += s.duration_frames;
    }
    put(out, {{"directory", m.directory.string()},
              {"frame_count", m.frame_count},
              {"scenes", list},
              {"boundaries", boundaries}});
    return VS_OK;
  });
}

vs_status vs_mock_server_start(const char* scenario_path, const char* host, int port, vs_mock_server** out) {
  return guarded([&] {
    require(out, "out");
    backends::Scenario scenario = scenario_path ? backends::Scenario::load(scenario_path) : backends::Scenario{};
    auto s = std::make_unique<vs_mock_server>();
    s->server = std::make_unique<backends::MockServer>(
        std::make_shared<const backends::MockService>(std::move(scenario)));
    s->server->start(host ? host : "127.0.0.1", port);
    *out = s.release();
    return VS_OK;
  });
}

int vs_mock_server_port(const vs_mock_server* server) { return server ? server->server->port() : -1; }

vs_status vs_mock_server_wait(vs_mock_server* server) {
  return guarded([&] {
    require(server, "server");
    server->server->wait();
    return VS_OK;
  });
}

void vs_mock_server_stop(vs_mock_server* server) {
  if (server) server->server->stop();
}

void vs_mock_server_free(vs_mock_server* server) { delete server; }

}  // extern "C"
