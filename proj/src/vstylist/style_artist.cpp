#include "vstylist/style_artist.hpp"

#include <algorithm>
#include <cmath>

#include "vstylist/error.hpp"

namespace vstylist {

using namespace backends;

ControlWeights ControlWeights::clamped() const {
  auto c = [](double v) { return std::isnan(v) ? 0.0 : std::clamp(v, 0.0, 1.0); };
  return {c(tile), c(depth), c(softedge), c(lineart)};
}

std::vector<ControlEntry> ControlWeights::entries() const {
  return {{ControlType::Tile, tile},
          {ControlType::Depth, depth},
          {ControlType::Softedge, softedge},
          {ControlType::Lineart, lineart}};
}

json ControlWeights::to_json() const {
  return {{"tile", tile}, {"depth", depth}, {"softedge", softedge}, {"lineart", lineart}};
}

std::optional<ControlWeights> ControlWeights::parse(const json& j) {
  if (!j.is_object()) return std::nullopt;
  for (const char* k : {"tile", "depth", "softedge", "lineart"})
    if (!j.contains(k) || !j[k].is_number()) return std::nullopt;
  return ControlWeights{j["tile"].get<double>(), j["depth"].get<double>(), j["softedge"].get<double>(),
                        j["lineart"].get<double>()}
      .clamped();
}

void ReflectionParams::validate() const {
  if (threshold < 0 || threshold > 100) fail(ErrorKind::Invalid, "reflection threshold must lie in [0, 100]");
  if (max_rounds < 1) fail(ErrorKind::Invalid, "reflection max_rounds must be >= 1");
  if (!(0 <= init_low && init_low <= init_high && init_high <= 1))
    fail(ErrorKind::Invalid, "reflection init range must satisfy 0 <= low <= high <= 1");
  if (scorer_keyframes < 1) fail(ErrorKind::Invalid, "scorer_keyframes must be >= 1");
}

json ReflectionParams::to_json() const {
  return {{"threshold", threshold}, {"max_rounds", max_rounds}, {"init_low", init_low},
          {"init_high", init_high}, {"seed", seed},             {"scorer_keyframes", scorer_keyframes}};
}

ReflectionParams ReflectionParams::from_json(const json& j) {
  ReflectionParams p;
  p.threshold = j.value("threshold", p.threshold);
  p.max_rounds = j.value("max_rounds", p.max_rounds);
  p.init_low = j.value("init_low", p.init_low);
  p.init_high = j.value("init_high", p.init_high);
  p.seed = j.value("seed", p.seed);
  p.scorer_keyframes = j.value("scorer_keyframes", p.scorer_keyframes);
  return p;
}

json ReflectionTrace::to_json() const {
  json rounds_json = json::array();
  for (const auto& r : rounds)
    rounds_json.push_back({{"round", r.round},
                           {"weights", r.weights.to_json()},
                           {"score", r.score},
                           {"frames_ref", r.frames_ref},
                           {"scorer_reply", r.scorer_reply},
                           {"scorer_retries", r.scorer_retries},
                           {"refiner_reply", r.refiner_reply},
                           {"refiner_fallback", r.refiner_fallback}});
  json j = {{"shot_index", shot_index},
            {"params", params.to_json()},
            {"rounds", rounds_json},
            {"best_round", best_round},
            {"accepted_early", accepted_early},
            {"status", status}};
  if (best_round > 0) j["final_frames_ref"] = best().frames_ref;
  if (!error.empty()) j["error"] = error;
  return j;
}

ReflectionTrace ReflectionTrace::from_json(const json& j) {
  ReflectionTrace t;
  try {
    t.shot_index = j.at("shot_index").get<int>();
    t.params = ReflectionParams::from_json(j.at("params"));
    for (const auto& r : j.at("rounds")) {
      ReflectionRound round;
      round.round = r.at("round").get<int>();
      auto w = ControlWeights::parse(r.at("weights"));
      if (!w) fail(ErrorKind::Parse, "reflection trace: bad weights");
      round.weights = *w;
      round.score = r.at("score").get<int>();
      round.frames_ref = r.at("frames_ref").get<std::string>();
      round.scorer_reply = r.value("scorer_reply", std::string());
      round.scorer_retries = r.value("scorer_retries", 0);
      round.refiner_reply = r.value("refiner_reply", std::string());
      round.refiner_fallback = r.value("refiner_fallback", false);
      t.rounds.push_back(std::move(round));
    }
    t.best_round = j.at("best_round").get<int>();
    t.accepted_early = j.at("accepted_early").get<bool>();
    t.status = j.value("status", std::string("done"));
    t.error = j.value("error", std::string());
  } catch (const json::exception& e) {
    fail(ErrorKind::Parse, std::string("reflection trace: ") + e.what());
  }
  return t;
}

int best_round_of(std::span<const ReflectionRound> rounds) {
  if (rounds.empty()) return 0;
  std::size_t best = 0;
  for (std::size_t i = 1; i < rounds.size(); ++i)
    if (rounds[i].score > rounds[best].score) best = i;
  return static_cast<int>(best) + 1;
}

ControlWeights init_weights(const ReflectionParams& params, std::mt19937_64& rng) {
  params.validate();
  // 53 random bits -> [0, 1); avoids the implementation-defined distributions.
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  const double v = params.init_low == params.init_high
                       ? params.init_low
                       : params.init_low + (params.init_high - params.init_low) * u;
  return ControlWeights::uniform(v);
}

std::string render_shot(const ShotRenderJob& job, const ControlWeights& weights, BackendClient& render,
                        const fs::path& job_dir, const std::string& rel_dir) {
  if (job.frames.empty()) fail(ErrorKind::Invalid, "render_shot: shot has no frames");
  RenderRequest req;
  req.model_file = job.card ? job.card->file : std::string();
  req.base_model = job.card && !job.card->base_model.empty() ? job.card->base_model : job.base_model;
  req.prompt = job.prompt;
  req.negative_prompt = job.negative_prompt;
  for (const auto& f : job.frames) req.frames.push_back(frame_to_base64(f));
  req.control = weights.clamped().entries();
  req.seed = job.render_seed;
  req.extras = job.extras;
  auto out = render.render(std::move(req));
  write_sequence(out, job.fps, job_dir / rel_dir);
  return rel_dir;
}

namespace {


std::vector<Frame> keyframes_of(std::span<const Frame> frames, int k) {
  return dedupe_keyframes(sample_keyframes(frames, k));
}

ChatRequest make_vision_request(const ChatTemplate& tmpl, const std::string& user_text,
                                std::span<const Frame> images, const SamplingParams& sampling,
                                std::string task, json context) {
  ChatRequest req;
  req.sampling = sampling;
  req.task = std::move(task);
  req.context = std::move(context);
  if (!tmpl.system.empty()) req.messages.push_back({Role::System, {ContentPart::text(tmpl.system)}});
  ChatMessage user{Role::User, {}};
  for (const auto& f : images) user.parts.push_back(ContentPart::image(f));
  user.parts.push_back(ContentPart::text(user_text));
  req.messages.push_back(std::move(user));
  return req;
}

std::string fmt_weight(double v) { return json(v).dump(); }

}  // namespace

ScoreResult score_style(std::span<const Frame> frames, const std::string& style, const ControlWeights& weights,
                        int round, const AgentContext& agents, int keyframes) {
  if (frames.empty()) fail(ErrorKind::Invalid, "score_style: no frames");
  const auto keys = keyframes_of(frames, keyframes);
  const auto& tmpl = agents.templates->scorer;
  const std::string first = fill_template(tmpl.user, {{"count", std::to_string(keys.size())},
                                                      {"style", style},
                                                      {"tile", fmt_weight(weights.tile)},
                                                      {"depth", fmt_weight(weights.depth)},
                                                      {"softedge", fmt_weight(weights.softedge)},
                                                      {"lineart", fmt_weight(weights.lineart)}});
  ScoreResult result;
  for (int attempt = 0; attempt < 2; ++attempt) {
    const std::string text = attempt == 0 ? first : first + "\n" + tmpl.retry;
    auto req = make_vision_request(tmpl, text, keys, agents.sampling, "style_score",
                                   {{"style", style}, {"weights", weights.to_json()}, {"round", round},
                                    {"attempt", attempt}});
    result.raw = agents.vision->vision_generate(req);
    result.retries_used = attempt;
    auto parsed = first_json_object(result.raw);
    if (parsed && parsed->contains("score") && (*parsed)["score"].is_number()) {
      double s = (*parsed)["score"].get<double>();
      if (std::isfinite(s)) {
        result.score = static_cast<int>(std::lround(std::clamp(s, 0.0, 100.0)));
        return result;
      }
    }
  }
  fail(ErrorKind::Parse, "style scorer reply unparseable after retry: " + result.raw.substr(0, 200));
}

RefineResult refine_weights(std::span<const ReflectionRound> history, std::span<const Frame> latest_frames,
                            const std::string& style, const AgentContext& agents, int keyframes) {
  if (history.empty()) fail(ErrorKind::Invalid, "refine_weights: empty history");
  const auto& latest = history.back();
  json hist = json::array();
  for (const auto& r : history) hist.push_back({{"round", r.round}, {"weights", r.weights.to_json()}, {"score", r.score}});
  const auto keys = keyframes_of(latest_frames, keyframes);
  const auto& tmpl = agents.templates->refiner;
  const std::string first = fill_template(
      tmpl.user, {{"style", style}, {"score", std::to_string(latest.score)}, {"history", hist.dump()}});
  RefineResult result;
  for (int attempt = 0; attempt < 2; ++attempt) {
    const std::string text = attempt == 0 ? first : first + "\n" + tmpl.retry;
    auto req = make_vision_request(tmpl, text, keys, agents.sampling, "control_refine",
                                   {{"style", style}, {"score", latest.score}, {"history", hist},
                                    {"round", latest.round + 1}, {"attempt", attempt}});
    result.raw = agents.vision->vision_generate(req);
    auto parsed = first_json_object(result.raw);
    if (parsed)
      if (auto w = ControlWeights::parse(*parsed)) {
        result.weights = *w;
        return result;
      }
  }
  const ControlWeights& w = latest.weights;
  auto nudge = [](double v) { return v + (0.5 - v) / 2.0; };
  result.weights = ControlWeights{nudge(w.tile), nudge(w.depth), nudge(w.softedge), nudge(w.lineart)}.clamped();
  result.used_fallback = true;
  return result;
}

ReflectionTrace stylize_shot(const ShotRenderJob& job, const ReflectionParams& params, const AgentContext& agents,
                             const fs::path& job_dir, const std::optional<fs::path>& trace_path) {
  params.validate();
  ReflectionTrace trace;
  trace.shot_index = job.shot.index;
  trace.params = params;
  auto persist = [&] {
    if (trace_path) write_json_file(*trace_path, trace.to_json());
  };
  const std::string shot_dir = "shots/shot_" + std::to_string(job.shot.index);
  std::mt19937_64 rng(params.seed + static_cast<std::uint64_t>(job.shot.index));

  try {
    ControlWeights weights = init_weights(params, rng);
    std::vector<Frame> latest;
    std::string refiner_reply;
    bool refiner_fallback = false;
    for (int round = 1;; ++round) {
      ReflectionRound r;
      r.round = round;
      r.weights = weights;
      r.refiner_reply = refiner_reply;
      r.refiner_fallback = refiner_fallback;
      r.frames_ref = render_shot(job, weights, *agents.render, job_dir, shot_dir + "/round_" + std::to_string(round));
      latest = read_all_frames(load_manifest(job_dir / r.frames_ref));
      auto scored = score_style(latest, job.style, weights, round, agents, params.scorer_keyframes);
      r.score = scored.score;
      r.scorer_reply = scored.raw;
      r.scorer_retries = scored.retries_used;
      trace.rounds.push_back(std::move(r));
      trace.best_round = best_round_of(trace.rounds);
      persist();
      if (scored.score >= params.threshold) {
        trace.accepted_early = true;
        break;
      }
      if (round >= params.max_rounds) break;
      auto refined = refine_weights(trace.rounds, latest, job.style, agents, params.scorer_keyframes);
      weights = refined.weights;
      refiner_reply = refined.raw;
      refiner_fallback = refined.used_fallback;
    }
  } catch (const Error& e) {
    trace.status = "failed";
    trace.error = e.what();
    persist();
    throw;
  }
  trace.status = "done";
  persist();
  return trace;
}

}  // namespace vstylist
