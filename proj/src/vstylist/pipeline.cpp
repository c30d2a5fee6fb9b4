#include "vstylist/pipeline.hpp"

#include <atomic>
#include <mutex>
#include <thread>

#include "vstylist/backends/mock.hpp"
#include "vstylist/error.hpp"
#include "vstylist/shot_detector.hpp"
#include "vstylist/style_artist.hpp"

namespace vstylist {

using namespace backends;

namespace {

constexpr std::array<std::string_view, 9> kStageNames = {"Created",       "Ingested",  "ShotsDetected",
                                                         "Prompted",      "StyleResolved", "Rendering",
                                                         "Stitched",      "Evaluated", "Done"};

}  // namespace

std::string_view to_string(Stage s) { return kStageNames[static_cast<std::size_t>(s)]; }

Stage stage_from_string(std::string_view s) {
  for (std::size_t i = 0; i < kStageNames.size(); ++i)
    if (kStageNames[i] == s) return kStages[i];
  fail(ErrorKind::Parse, "unknown stage: " + std::string(s));
}

std::string reflection_file(int shot_index) { return "reflection_shot_" + std::to_string(shot_index) + ".json"; }

json JobState::to_json() const {
  json bits = json::array();
  for (bool b : rendered) bits.push_back(b);
  json j = {{"stage", to_string(stage)}, {"rendered", bits}, {"checksums", checksums}};
  if (failed) j["failed"] = {{"stage", failed->stage}, {"reason", failed->reason}};
  return j;
}

JobState JobState::from_json(const json& j) {
  JobState s;
  try {
    s.stage = stage_from_string(j.at("stage").get<std::string>());
    for (const auto& b : j.at("rendered")) s.rendered.push_back(b.get<bool>());
    s.checksums = j.at("checksums").get<std::map<std::string, std::string>>();
    if (j.contains("failed"))
      s.failed = StageFailure{j["failed"].at("stage").get<std::string>(), j["failed"].at("reason").get<std::string>()};
  } catch (const json::exception& e) {
    fail(ErrorKind::Parse, std::string("state.json: ") + e.what());
  }
  return s;
}

Services Services::from_config(const Config& config) {
  std::shared_ptr<Transport> transport;
  Services s;
  if (config.backend_mode == "mock") {
    Scenario scenario = config.scenario.empty() ? Scenario{} : Scenario::load(config.scenario);
    transport = std::make_shared<InProcessTransport>(std::make_shared<const MockService>(std::move(scenario)));
    s = over(transport, config.endpoints.retries, config.endpoints.backoff_ms);
  } else {
    transport = std::make_shared<HttpTransport>(config.endpoints);
    s = over(transport, config.endpoints.retries, config.endpoints.backoff_ms);
  }
  return s;
}

Services Services::over(std::shared_ptr<Transport> transport, int retries, int backoff_ms) {
  Services s;
  s.text = std::make_shared<BackendClient>(transport, retries, backoff_ms);
  s.vision = std::make_shared<BackendClient>(transport, retries, backoff_ms);
  s.render = std::make_shared<BackendClient>(transport, retries, backoff_ms);
  s.embed = std::make_shared<BackendClient>(transport, retries, backoff_ms);
  s.score = std::make_shared<BackendClient>(transport, retries, backoff_ms);
  s.embed_location = transport->describe(Service::Embed);
  s.score_location = transport->describe(Service::Score);
  return s;
}

std::string sequence_digest(const FrameManifest& manifest) {
  std::string acc;
  for (std::int64_t i = 0; i < manifest.frame_count; ++i) acc += sha256_hex(read_text_file(manifest.frame_path(i)));
  acc += manifest.descriptor().dump();
  return sha256_hex(acc);
}

FrameManifest open_source(const fs::path& video, const Config& config, const fs::path& job_dir) {
  if (fs::is_directory(video)) {
    if (fs::exists(video / kManifestFile)) return load_manifest(video);
    return index_sequence(video, config.ingest_fps);
  }
  if (!fs::exists(video)) fail(ErrorKind::Io, "input video not found: " + video.string());
  if (config.decoder_command.empty())
    fail(ErrorKind::Invalid, "input is a file but no ingest.decoder command is configured: " + video.string());
  return ingest_with_decoder(config.decoder_command, fs::absolute(video), job_dir / "source", config.ingest_fps);
}

FrameManifest stitch(const fs::path& job_dir, const std::vector<std::string>& frames_refs, std::span<const Shot> shots,
                     double fps, const fs::path& out_dir) {
  if (frames_refs.size() != shots.size())
    fail(ErrorKind::Invalid, "stitch: " + std::to_string(frames_refs.size()) + " shot outputs for " +
                                 std::to_string(shots.size()) + " shots");
  std::vector<Frame> all;
  for (std::size_t i = 0; i < shots.size(); ++i) {
    if (frames_refs[i].empty()) fail(ErrorKind::Invalid, "stitch: missing output for shot " + std::to_string(shots[i].index));
    auto m = load_manifest(job_dir / frames_refs[i]);
    if (m.frame_count != shots[i].length())
      fail(ErrorKind::Invalid, "stitch: shot " + std::to_string(shots[i].index) + " has " +
                                   std::to_string(m.frame_count) + " frames, expected " +
                                   std::to_string(shots[i].length()));
    for (auto& f : read_all_frames(m)) all.push_back(std::move(f));
  }
  return write_sequence(all, fps, out_dir);
}

namespace {

// Runs fn(i) for i in [0, n) on at most `limit` threads. Rethrows the error of
// the lowest failing index once every worker has stopped.
void parallel_for(std::size_t n, int limit, const std::function<bool(std::size_t)>& admit,
                  const std::function<void(std::size_t)>& fn) {
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::mutex mu;
  std::optional<std::size_t> failed_at;
  std::exception_ptr error;
  auto worker = [&] {
    while (!stop) {
      const std::size_t i = next++;
      if (i >= n) return;
      if (!admit(i)) continue;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failed_at || i < *failed_at) {
          failed_at = i;
          error = std::current_exception();
        }
        stop = true;
      }
    }
  };
  const std::size_t threads = std::min<std::size_t>(static_cast<std::size_t>(std::max(1, limit)), n);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);
}

struct Stopped {};

class JobRunner {
 public:
  JobRunner(fs::path dir, const RunOptions& options) : dir_(std::move(dir)), options_(options) {
    job_ = read_json_file(dir_ / kJobFile);
    try {
      config_ = Config::from_json(job_.at("config"));
      templates_ = PromptTemplates::from_json(job_.at("templates"));
      tree_ = StyleTree::from_json(job_.at("style_tree"));
      query_ = job_.at("query").get<std::string>();
      source_ = job_.at("source").get<std::string>();
    } catch (const json::exception& e) {
      fail(ErrorKind::Parse, std::string("job.json: ") + e.what());
    }
    state_ = JobState::from_json(read_json_file(dir_ / kStateFile));
    verify_checksums();
    services_ = options.services ? *options.services : Services::from_config(config_);
  }

  JobResult run() {
    state_.failed.reset();
    Stage attempting = next_stage(state_.stage);
    try {
      while (state_.stage != Stage::Done) {
        attempting = next_stage(state_.stage);
        execute(attempting);
        if (options_.stop_after && state_.stage == *options_.stop_after && state_.stage != Stage::Done) break;
      }
    } catch (const Stopped&) {
    } catch (const std::exception& e) {
      state_.failed = StageFailure{std::string(to_string(attempting)), e.what()};
      save_state();
      progress("failed at " + std::string(to_string(attempting)) + ": " + e.what());
    }
    return {dir_, state_};
  }

 private:
  static Stage next_stage(Stage s) {
    if (s == Stage::Done) return Stage::Done;
    return kStages[static_cast<std::size_t>(s) + 1];
  }

  void progress(const std::string& line) const {
    if (options_.progress) options_.progress(line);
  }

  void verify_checksums() const {
    for (const auto& [rel, digest] : state_.checksums) {
      std::string actual;
      if (!rel.empty() && rel.back() == '/') {
        if (!fs::exists(dir_ / rel / kManifestFile)) fail(ErrorKind::Checksum, "checkpoint artifact missing: " + rel);
        actual = sequence_digest(load_manifest(dir_ / rel));
      } else {
        if (!fs::exists(dir_ / rel)) fail(ErrorKind::Checksum, "checkpoint artifact missing: " + rel);
        actual = sha256_hex(read_text_file(dir_ / rel));
      }
      if (actual != digest) fail(ErrorKind::Checksum, "checksum mismatch for " + rel);
    }
  }

  void save_state() { write_json_file(dir_ / kStateFile, state_.to_json()); }

  void record(const std::string& rel) {
    if (!rel.empty() && rel.back() == '/')
      state_.checksums[rel] = sequence_digest(load_manifest(dir_ / rel));
    else
      state_.checksums[rel] = sha256_hex(read_text_file(dir_ / rel));
  }

  void complete(Stage s, const std::string& detail) {
    state_.stage = s;
    save_state();
    progress("stage " + std::string(to_string(s)) + (detail.empty() ? "" : ": " + detail));
  }

  FrameManifest source_manifest() {
    const json doc = read_json_file(dir_ / kManifestFile);
    fs::path src = doc.at("source_dir").get<std::string>();
    if (src.is_relative()) src = dir_ / src;
    return load_manifest(src);
  }

  std::vector<Shot> shots() { return shots_from_json(read_json_file(dir_ / kShotsFile)); }

  void execute(Stage s) {
    switch (s) {
      case Stage::Ingested: return ingest();
      case Stage::ShotsDetected: return detect();
      case Stage::Prompted: return prompt();
      case Stage::StyleResolved: return resolve_style();
      case Stage::Rendering: return render();
      case Stage::Stitched: return stitch_stage();
      case Stage::Evaluated: return evaluate_stage();
      case Stage::Done: return finish();
      case Stage::Created: break;
    }
    fail(ErrorKind::Invalid, "cannot execute stage Created");
  }

  void ingest() {
    FrameManifest m = open_source(source_, config_, dir_);
    json doc = m.descriptor();
    const fs::path rel = fs::relative(m.directory, dir_);
    const bool inside = !rel.empty() && *rel.begin() != "..";
    doc["source_dir"] = inside ? rel.generic_string() : fs::absolute(m.directory).lexically_normal().string();
    doc["source_sha256"] = sequence_digest(m);
    write_json_file(dir_ / kManifestFile, doc);
    record(kManifestFile);
    complete(Stage::Ingested, std::to_string(m.frame_count) + " frames");
  }

  void detect() {
    const auto m = source_manifest();
    const auto found = detect_shots(m, config_.detector);
    write_json_file(dir_ / kShotsFile, shots_to_json(found));
    record(kShotsFile);
    state_.rendered.assign(found.size(), false);
    complete(Stage::ShotsDetected, std::to_string(found.size()) + " shots");
  }

  void prompt() {
    const auto m = source_manifest();
    const auto all = shots();
    std::vector<PromptRecord> records(all.size());
    parallel_for(
        all.size(), config_.max_parallel_shots, [](std::size_t) { return true; },
        [&](std::size_t i) {
          const auto keys = dedupe_keyframes(sample_keyframes(m, all[i], config_.keyframes));
          auto caption = caption_shot(all[i].index, keys, *services_.vision, templates_, config_.sampling);
          auto prompt = translate_caption(caption, *services_.text, templates_, config_.sampling);
          records[i] = {all[i].index, caption.caption, prompt.prompt};
        });
    write_json_file(dir_ / kPromptsFile, prompts_to_json(records));
    record(kPromptsFile);
    complete(Stage::Prompted, std::to_string(records.size()) + " prompts");
  }

  void resolve_style() {
    const auto resolution = identify_style(query_, *services_.text, templates_, config_.sampling);
    SearchOptions opts;
    opts.base_model = config_.base_model;
    opts.parallel_experts = config_.parallel_experts;
    const auto decision = search_tree(resolution, tree_, *services_.text, templates_, config_.sampling, opts);
    write_json_file(dir_ / kDecisionFile, decision.to_json());
    record(kDecisionFile);
    const std::string what = decision.card ? decision.card->file : "base model " + decision.base_model;
    complete(Stage::StyleResolved, "\"" + resolution.style + "\" -> " + what);
  }

  void render() {
    const auto m = source_manifest();
    const auto all = shots();
    const auto prompts = prompts_from_json(read_json_file(dir_ / kPromptsFile));
    const auto decision = StyleDecision::from_json(read_json_file(dir_ / kDecisionFile));
    if (state_.rendered.size() != all.size()) state_.rendered.assign(all.size(), false);
    std::map<int, std::string> prompt_of;
    for (const auto& p : prompts) prompt_of[p.shot_index] = p.prompt;

    AgentContext agents{services_.render.get(), services_.vision.get(), &templates_, config_.sampling};
    std::mutex mu;
    std::atomic<int> started{0};
    const int budget = options_.stop_after_shots.value_or(-1);
    parallel_for(
        all.size(), config_.max_parallel_shots,
        [&](std::size_t i) {
          if (state_.rendered[i]) return false;
          if (budget >= 0 && started.fetch_add(1) >= budget) return false;
          return true;
        },
        [&](std::size_t i) {
          const Shot& shot = all[i];
          auto it = prompt_of.find(shot.index);
          if (it == prompt_of.end()) fail(ErrorKind::Invalid, "no prompt for shot " + std::to_string(shot.index));
          const auto frames = read_frames(m, shot.start_frame, shot.end_frame);
          ShotRenderJob job;
          job.shot = shot;
          job.frames = frames;
          job.fps = m.fps;
          job.card = decision.card ? &*decision.card : nullptr;
          job.base_model = decision.base_model.empty() ? config_.base_model : decision.base_model;
          job.style = decision.resolution.style;
          job.prompt = compose_render_prompt({shot.index, it->second}, job.card, job.style);
          job.render_seed = config_.render_seed + shot.index;
          job.negative_prompt = config_.negative_prompt;
          job.extras = config_.extras;
          const auto trace_name = reflection_file(shot.index);
          const auto trace = stylize_shot(job, config_.reflection, agents, dir_, dir_ / trace_name);
          std::lock_guard lock(mu);
          record(trace_name);
          record(trace.best().frames_ref + "/");
          state_.rendered[i] = true;
          save_state();
          progress("shot " + std::to_string(shot.index) + " rendered: best round " + std::to_string(trace.best_round) +
                   " score " + std::to_string(trace.best().score));
        });
    for (bool done : state_.rendered)
      if (!done) throw Stopped{};
    complete(Stage::Rendering, std::to_string(all.size()) + " shots");
  }

  void stitch_stage() {
    const auto m = source_manifest();
    const auto all = shots();
    std::vector<std::string> refs;
    for (const auto& s : all) {
      const auto trace = ReflectionTrace::from_json(read_json_file(dir_ / reflection_file(s.index)));
      if (trace.status != "done" || trace.best_round < 1)
        fail(ErrorKind::Invalid, "shot " + std::to_string(s.index) + " has no completed reflection trace");
      refs.push_back(trace.best().frames_ref);
    }
    const auto out = stitch(dir_, refs, all, m.fps, dir_ / kFinalDir);
    if (out.frame_count != m.frame_count)
      fail(ErrorKind::Invalid, "stitched output has " + std::to_string(out.frame_count) + " frames, source has " +
                                   std::to_string(m.frame_count));
    record(std::string(kFinalDir) + "/");
    complete(Stage::Stitched, std::to_string(out.frame_count) + " frames");
  }

  void evaluate_stage() {
    if (!config_.evaluate) {
      complete(Stage::Evaluated, "skipped");
      return;
    }
    const auto stylized = read_all_frames(load_manifest(dir_ / kFinalDir));
    const auto all = shots();
    const auto decision = StyleDecision::from_json(read_json_file(dir_ / kDecisionFile));
    EvalInputs in;
    in.stylized = stylized;
    in.shots = all;
    for (const auto& p : prompts_from_json(read_json_file(dir_ / kPromptsFile))) in.shot_prompts[p.shot_index] = p.prompt;
    in.style_words = decision.resolution.style;
    EvalOptions opts;
    opts.clip_stride = config_.clip_stride;
    opts.exclude_boundaries = config_.exclude_boundaries;
    EvalBackends clients{services_.embed.get(), services_.score.get(), services_.embed_location,
                         services_.score_location};
    if (stylized.size() < 2) {
      complete(Stage::Evaluated, "skipped: temporal metrics need at least 2 frames");
      return;
    }
    const MetricReport report = vstylist::evaluate(in, clients, opts);
    write_json_file(dir_ / kReportFile, report.to_json());
    record(kReportFile);
    complete(Stage::Evaluated, "overall " + json(report.overall).dump());
  }

  void finish() {
    const auto all = shots();
    for (const auto& s : all)
      if (!fs::exists(dir_ / reflection_file(s.index)))
        fail(ErrorKind::Invalid, "artifact inventory: missing " + reflection_file(s.index));
    for (const char* f : {kManifestFile, kShotsFile, kPromptsFile, kDecisionFile})
      if (!fs::exists(dir_ / f)) fail(ErrorKind::Invalid, std::string("artifact inventory: missing ") + f);
    complete(Stage::Done, "");
  }

  fs::path dir_;
  RunOptions options_;
  json job_;
  Config config_;
  PromptTemplates templates_;
  StyleTree tree_;
  std::string query_;
  fs::path source_;
  JobState state_;
  Services services_;
};

}  // namespace

JobResult run(const fs::path& video, const std::string& query, const Config& config, const fs::path& out_dir,
              const RunOptions& options) {
  if (trim(query).empty()) fail(ErrorKind::Invalid, "query must not be empty");
  config.validate();
  if (!fs::exists(video)) fail(ErrorKind::Io, "input video not found: " + video.string());
  if (fs::exists(out_dir / kStateFile)) fail(ErrorKind::Invalid, "job directory already exists: " + out_dir.string());
  const auto templates = PromptTemplates::load(config.prompts);
  const auto tree = StyleTree::load(config.style_tree);
  fs::create_directories(out_dir);
  json job = {{"query", query},
              {"source", fs::absolute(video).lexically_normal().string()},
              {"config", config.to_json()},
              {"templates", templates.to_json()},
              {"style_tree", tree.to_json()}};
  job["id"] = sha256_hex(job.dump()).substr(0, 16);
  write_json_file(out_dir / kJobFile, job);
  JobState state;
  state.checksums[kJobFile] = sha256_hex(read_text_file(out_dir / kJobFile));
  write_json_file(out_dir / kStateFile, state.to_json());
  if (options.progress) options.progress("stage Created: job " + job["id"].get<std::string>());
  if (options.stop_after == Stage::Created) return {out_dir, state};
  return JobRunner(out_dir, options).run();
}

JobResult resume(const fs::path& job_dir, const RunOptions& options) {
  if (!fs::exists(job_dir / kStateFile) || !fs::exists(job_dir / kJobFile))
    fail(ErrorKind::Invalid, "not a job directory: " + job_dir.string());
  return JobRunner(job_dir, options).run();
}

}  // namespace vstylist
