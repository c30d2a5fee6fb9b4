#include "vstylist/metrics.hpp"

#include <cmath>
#include <numeric>

#include "vstylist/error.hpp"
#include "vstylist/shot_detector.hpp"

namespace vstylist {

using backends::BackendClient;
using backends::ScoreKind;

void SsimParams::validate() const {
  if (window < 1 || window % 2 == 0) fail(ErrorKind::Invalid, "ssim window must be odd and positive");
  if (!(sigma > 0)) fail(ErrorKind::Invalid, "ssim sigma must be positive");
  if (!(k1 > 0) || !(k2 > 0) || !(dynamic_range > 0)) fail(ErrorKind::Invalid, "ssim constants must be positive");
}

std::vector<double> luma_plane(const Frame& f) {
  std::vector<double> out(f.pixel_count());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto* p = &f.pixels[i * 3];
    out[i] = 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2];
  }
  return out;
}

std::vector<double> gaussian_taps(const SsimParams& params) {
  params.validate();
  const int half = params.window / 2;
  std::vector<double> taps(static_cast<std::size_t>(params.window));
  double sum = 0;
  for (int i = 0; i < params.window; ++i) {
    const double d = i - half;
    taps[i] = std::exp(-(d * d) / (2 * params.sigma * params.sigma));
    sum += taps[i];
  }
  for (auto& t : taps) t /= sum;
  return taps;
}

namespace {

// Valid-mode separable filtering: (h - w + 1) x (wd - w + 1) output.
std::vector<double> filter_valid(const std::vector<double>& img, int width, int height, const std::vector<double>& taps) {
  const int w = static_cast<int>(taps.size());
  const int ow = width - w + 1, oh = height - w + 1;
  std::vector<double> rows(static_cast<std::size_t>(height) * ow);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0;
      for (int k = 0; k < w; ++k) s += taps[k] * img[static_cast<std::size_t>(y) * width + x + k];
      rows[static_cast<std::size_t>(y) * ow + x] = s;
    }
  std::vector<double> out(static_cast<std::size_t>(oh) * ow);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0;
      for (int k = 0; k < w; ++k) s += taps[k] * rows[static_cast<std::size_t>(y + k) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = s;
    }
  return out;
}

std::vector<double> product(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

double mean_of(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

double ssim(const Frame& a, const Frame& b, const SsimParams& params) {
  params.validate();
  if (a.width != b.width || a.height != b.height)
    fail(ErrorKind::Invalid, "ssim: frame dimensions differ");
  if (std::min(a.width, a.height) < params.window)
    fail(ErrorKind::Invalid, "ssim: frame smaller than the window");
  const auto taps = gaussian_taps(params);
  const auto la = luma_plane(a), lb = luma_plane(b);
  const auto mu_a = filter_valid(la, a.width, a.height, taps);
  const auto mu_b = filter_valid(lb, a.width, a.height, taps);
  const auto e_aa = filter_valid(product(la, la), a.width, a.height, taps);
  const auto e_bb = filter_valid(product(lb, lb), a.width, a.height, taps);
  const auto e_ab = filter_valid(product(la, lb), a.width, a.height, taps);
  const double c1 = params.c1(), c2 = params.c2();
  std::vector<double> map(mu_a.size());
  for (std::size_t i = 0; i < map.size(); ++i) {
    const double ma = mu_a[i], mb = mu_b[i];
    const double va = e_aa[i] - ma * ma;
    const double vb = e_bb[i] - mb * mb;
    const double cov = e_ab[i] - ma * mb;
    map[i] = ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
  }
  return mean_of(map);
}

double structure_consistency(std::span<const Frame> frames, const SsimParams& params,
                             const std::vector<Shot>* exclude_at) {
  if (frames.size() < 2) fail(ErrorKind::Invalid, "structure consistency needs at least 2 frames");
  std::vector<bool> cut(frames.size(), false);
  if (exclude_at)
    for (const auto& s : *exclude_at)
      if (s.start_frame > 0 && s.start_frame < static_cast<std::int64_t>(frames.size())) cut[s.start_frame] = true;
  double sum = 0;
  std::size_t n = 0;
  for (std::size_t i = 1; i < frames.size(); ++i) {
    if (cut[i]) continue;
    sum += ssim(frames[i - 1], frames[i], params);
    ++n;
  }
  if (n == 0) fail(ErrorKind::Invalid, "structure consistency: every pair straddles a shot boundary");
  return sum / static_cast<double>(n);
}

double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.empty()) fail(ErrorKind::Invalid, "cosine: vector sizes differ");
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0 || nb == 0) fail(ErrorKind::Invalid, "cosine: zero vector");
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::vector<std::vector<double>> embed_frames_batched(std::span<const Frame> frames, BackendClient& embed,
                                                      std::size_t stride) {
  if (stride == 0) fail(ErrorKind::Invalid, "frame stride must be >= 1");
  std::vector<Frame> picked;
  for (std::size_t i = 0; i < frames.size(); i += stride) picked.push_back(frames[i]);
  std::vector<std::vector<double>> out;
  out.reserve(picked.size());
  for (std::size_t i = 0; i < picked.size(); i += kEmbedBatch) {
    const std::size_t n = std::min(kEmbedBatch, picked.size() - i);
    auto vecs = embed.embed_frames(std::span<const Frame>(picked).subspan(i, n));
    for (auto& v : vecs) out.push_back(std::move(v));
  }
  return out;
}

double clip_t(std::span<const Frame> frames, const std::map<int, std::string>& shot_prompts,
              std::span<const Shot> shots, BackendClient& embed, std::size_t stride) {
  if (frames.empty()) fail(ErrorKind::Invalid, "clip_t: no frames");
  if (!is_partition(shots, static_cast<std::int64_t>(frames.size())))
    fail(ErrorKind::Invalid, "clip_t: shots do not cover the frames");
  std::vector<std::string> texts;
  std::map<int, std::size_t> text_of_shot;
  for (const auto& s : shots) {
    auto it = shot_prompts.find(s.index);
    if (it == shot_prompts.end()) fail(ErrorKind::Invalid, "clip_t: missing prompt for shot " + std::to_string(s.index));
    text_of_shot[s.index] = texts.size();
    texts.push_back(it->second);
  }
  const auto text_vecs = embed.embed_texts(texts);
  const auto frame_vecs = embed_frames_batched(frames, embed, stride);
  double sum = 0;
  std::size_t shot_pos = 0;
  for (std::size_t j = 0; j < frame_vecs.size(); ++j) {
    const auto idx = static_cast<std::int64_t>(j * stride);
    while (idx >= shots[shot_pos].end_frame) ++shot_pos;
    sum += cosine(frame_vecs[j], text_vecs[text_of_shot[shots[shot_pos].index]]);
  }
  return sum / static_cast<double>(frame_vecs.size());
}

double clip_w(std::span<const Frame> frames, const std::string& style_words, BackendClient& embed,
              std::size_t stride) {
  if (trim(style_words).empty()) fail(ErrorKind::Invalid, "clip_w: empty style words");
  if (frames.empty()) fail(ErrorKind::Invalid, "clip_w: no frames");
  const auto text = embed.embed_texts({style_words});
  const auto frame_vecs = embed_frames_batched(frames, embed, stride);
  double sum = 0;
  for (const auto& v : frame_vecs) sum += cosine(v, text.at(0));
  return sum / static_cast<double>(frame_vecs.size());
}

double semantic_consistency(std::span<const Frame> frames, BackendClient& embed) {
  if (frames.size() < 2) fail(ErrorKind::Invalid, "semantic consistency needs at least 2 frames");
  const auto vecs = embed_frames_batched(frames, embed, 1);
  double sum = 0;
  for (std::size_t i = 1; i < vecs.size(); ++i) sum += cosine(vecs[i - 1], vecs[i]);
  return sum / static_cast<double>(vecs.size() - 1);
}

QualityScores quality_scores(std::span<const Frame> frames, BackendClient& score) {
  if (frames.empty()) fail(ErrorKind::Invalid, "quality scores: empty video");
  auto image_level = [&](ScoreKind kind) {
    double sum = 0;
    for (std::size_t i = 0; i < frames.size(); ++i) sum += score.score_frames(kind, frames.subspan(i, 1));
    return sum / static_cast<double>(frames.size());
  };
  QualityScores q;
  q.aesthetic_i = image_level(ScoreKind::AestheticI);
  q.distortion_i = image_level(ScoreKind::DistortionI);
  q.aesthetic_v = score.score_frames(ScoreKind::AestheticV, frames);
  q.distortion_v = score.score_frames(ScoreKind::DistortionV, frames);
  return q;
}

double overall(std::span<const double, 8> values) {
  double sum = 0;
  for (double v : values) sum += v;
  return sum / 8.0;
}

std::array<double, 8> MetricReport::values() const {
  return {clip_t, clip_w, structure, semantics, aesthetic_i, aesthetic_v, distortion_i, distortion_v};
}

json MetricReport::to_json() const {
  json j = json::object();
  const auto v = values();
  for (std::size_t i = 0; i < kMetricFields.size(); ++i) j[kMetricFields[i]] = v[i];
  j["overall"] = overall;
  j["provenance"] = provenance;
  return j;
}

MetricReport MetricReport::from_values(const json& j) {
  if (!j.is_object()) fail(ErrorKind::Parse, "metric values must be a JSON object");
  std::array<double, 8> v{};
  for (std::size_t i = 0; i < kMetricFields.size(); ++i) {
    if (!j.contains(kMetricFields[i]) || !j[kMetricFields[i]].is_number())
      fail(ErrorKind::Invalid, std::string("missing metric field: ") + kMetricFields[i]);
    v[i] = j[kMetricFields[i]].get<double>();
  }
  MetricReport r;
  r.clip_t = v[0];
  r.clip_w = v[1];
  r.structure = v[2];
  r.semantics = v[3];
  r.aesthetic_i = v[4];
  r.aesthetic_v = v[5];
  r.distortion_i = v[6];
  r.distortion_v = v[7];
  r.overall = vstylist::overall(v);
  if (j.contains("provenance")) r.provenance = j["provenance"];
  return r;
}

MetricReport evaluate(const EvalInputs& in, const EvalBackends& clients, const EvalOptions& opt) {
  if (!clients.embed || !clients.score) fail(ErrorKind::Invalid, "evaluate: backends not configured");
  std::vector<Shot> shots(in.shots.begin(), in.shots.end());
  MetricReport r;
  r.clip_t = clip_t(in.stylized, in.shot_prompts, in.shots, *clients.embed, opt.clip_stride);
  r.clip_w = clip_w(in.stylized, in.style_words, *clients.embed, opt.clip_stride);
  r.structure = structure_consistency(in.stylized, opt.ssim, opt.exclude_boundaries ? &shots : nullptr);
  r.semantics = semantic_consistency(in.stylized, *clients.embed);
  const auto q = quality_scores(in.stylized, *clients.score);
  r.aesthetic_i = q.aesthetic_i;
  r.aesthetic_v = q.aesthetic_v;
  r.distortion_i = q.distortion_i;
  r.distortion_v = q.distortion_v;
  const auto v = r.values();
  r.overall = overall(v);
  r.provenance = {{"embed_backend", clients.embed_url},
                  {"score_backend", clients.score_url},
                  {"clip_stride", opt.clip_stride},
                  {"exclude_boundaries", opt.exclude_boundaries},
                  {"frame_count", in.stylized.size()},
                  {"style_words", in.style_words},
                  {"ssim", {{"window", opt.ssim.window}, {"sigma", opt.ssim.sigma}, {"k1", opt.ssim.k1}, {"k2", opt.ssim.k2}}}};
  return r;
}

}  // namespace vstylist
