#include "vstylist/backends/mock.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <sstream>

#include <httplib.h>

#include "vstylist/error.hpp"

namespace vstylist::backends {

namespace {

WireResponse ok(const json& body) { return {200, body.dump()}; }

WireResponse err(int status, std::string_view code, std::string_view message) {
  return {status, error_body(code, message).dump()};
}

std::vector<std::string> tokens(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

bool token_match(const std::string& a, const std::string& b) {
  if (a == b) return true;
  const auto& shorter = a.size() < b.size() ? a : b;
  const auto& longer = a.size() < b.size() ? b : a;
  return shorter.size() >= 4 && longer.rfind(shorter, 0) == 0;
}

// Picks the candidate sharing most content tokens with the style phrase.
std::string closest_candidate(const std::string& style, const std::vector<std::string>& candidates) {
  static const std::vector<std::string> ignored = {"style", "styles", "safetensors", "ckpt", "pt"};
  auto content = [&](std::string_view s) {
    std::vector<std::string> out;
    for (auto& t : tokens(s))
      if (t.size() >= 3 && std::find(ignored.begin(), ignored.end(), t) == ignored.end())
        out.push_back(t);
    return out;
  };
  const auto style_tokens = content(style);
  std::string best = candidates.empty() ? std::string() : candidates.front();
  int best_score = -1;
  for (const auto& cand : candidates) {
    int score = 0;
    for (const auto& ct : content(cand))
      for (const auto& st : style_tokens)
        if (token_match(ct, st)) {
          ++score;
          break;
        }
    if (score > best_score) {
      best_score = score;
      best = cand;
    }
  }
  return best;
}

json default_identify(const std::string& query) {
  static const std::vector<std::string> stop = {"a",    "an",   "the", "in",   "this", "to",
                                                "of",   "with", "see", "some", "into", "is",
                                                "perhaps", "maybe", "love", "like", "would"};
  std::string q = to_lower(trim(query));
  while (!q.empty() && (q.back() == '.' || q.back() == '!' || q.back() == '?')) q.pop_back();
  auto words = tokens(q);
  std::string style;
  auto it = std::find(words.begin(), words.end(), "style");
  if (it != words.end()) {
    std::vector<std::string> phrase;
    for (auto w = it; w != words.begin() && phrase.size() < 3;) {
      --w;
      if (std::find(stop.begin(), stop.end(), *w) != stop.end()) break;
      phrase.insert(phrase.begin(), *w);
    }
    for (const auto& w : phrase) style += w + " ";
    style += "style";
  } else {
    style = q.substr(0, 64);
  }
  std::string kind = "prompt";
  if (q.rfind("perhaps", 0) == 0 || q.rfind("maybe", 0) == 0) kind = "hypothesis";
  else if (q.find("render") != std::string::npos || q.find("turn ") != std::string::npos ||
           q.find("make ") != std::string::npos)
    kind = "instruction";
  else if (q.find("love") != std::string::npos || q.find("imagine") != std::string::npos)
    kind = "inspiration";
  return {{"style", style}, {"kind", kind}};
}

std::string default_chat_reply(const std::string& task, const json& ctx,
                               const std::vector<Frame>& images, const std::string& flattened) {
  if (task == "caption") {
    std::uint64_t sum[3] = {0, 0, 0}, n = 0;
    for (const auto& f : images) {
      for (std::size_t p = 0; p < f.pixel_count(); ++p)
        for (int c = 0; c < 3; ++c) sum[c] += f.pixels[p * 3 + c];
      n += f.pixel_count();
    }
    n = std::max<std::uint64_t>(n, 1);
    std::ostringstream s;
    s << "a shot dominated by rgb(" << sum[0] / n << ", " << sum[1] / n << ", " << sum[2] / n
      << ") tones";
    return s.str();
  }
  if (task == "translate") return ctx.value("caption", std::string("a video shot")) + ", high quality";
  if (task == "identify_style") return default_identify(ctx.value("query", std::string())).dump();
  if (task == "expert_vote") {
    return closest_candidate(ctx.value("style", std::string()),
                             ctx.value("candidates", std::vector<std::string>{}));
  }
  if (task == "chairman") {
    auto candidates = ctx.value("candidates", std::vector<std::string>{});
    auto votes = ctx.value("votes", std::vector<std::string>{});
    std::string best;
    long best_count = 0;
    for (const auto& c : candidates) {
      long n = std::count(votes.begin(), votes.end(), c);
      if (n > best_count) {
        best_count = n;
        best = c;
      }
    }
    return best.empty() ? "no decision" : best;
  }
  if (task == "style_score") {
    const json& w = ctx.value("weights", json::object());
    double mean = 0.0;
    for (const char* k : {"tile", "depth", "softedge", "lineart"}) mean += w.value(k, 0.0);
    mean /= 4.0;
    return json{{"score", mock_style_score(mean)}, {"reasons", "deterministic mock scorer"}}.dump();
  }
  if (task == "control_refine") {
    const json& history = ctx.value("history", json::array());
    json last = history.empty() ? json::object() : history.back().value("weights", json::object());
    json out = json::object();
    for (const char* k : {"tile", "depth", "softedge", "lineart"})
      out[k] = mock_refine_step(last.value(k, 0.5));
    return out.dump();
  }
  if (task == "tree_assign") {
    const json& card = ctx.value("card", json::object());
    auto tags = card.value("tags", std::vector<std::string>{});
    std::string cls = "Artistic";
    std::string style;
    for (const auto& t : tags) {
      std::string lt = to_lower(t);
      if (lt.find("realistic") != std::string::npos) cls = "Realistic";
      if (style.empty() && lt != "artistic" && lt != "realistic") style = lt;
    }
    if (style.empty()) style = "general";
    if (style.size() < 5 || style.substr(style.size() - 5) != "style") style += " style";
    return json{{"class", cls}, {"style", style}}.dump();
  }
  return "mock-" + sha256_hex(flattened).substr(0, 16);
}

}  // namespace

Rgb mock_style_color(std::string_view model_key) {
  auto d = sha256_raw(model_key);
  return {d[0], d[1], d[2]};
}

std::vector<double> mock_embedding(std::string_view key, int dimension) {
  std::vector<double> v;
  v.reserve(static_cast<std::size_t>(dimension));
  const std::string base(key);
  for (int block = 0; static_cast<int>(v.size()) < dimension; ++block) {
    auto d = sha256_raw(base + "#" + std::to_string(block));
    for (int i = 0; i + 4 <= 32 && static_cast<int>(v.size()) < dimension; i += 4) {
      std::uint32_t u = (std::uint32_t{d[i]} << 24) | (std::uint32_t{d[i + 1]} << 16) |
                        (std::uint32_t{d[i + 2]} << 8) | std::uint32_t{d[i + 3]};
      v.push_back(static_cast<double>(u) / 4294967295.0 * 2.0 - 1.0);
    }
  }
  double norm = 0.0;
  for (double x : v) norm += x * x;
  norm = std::sqrt(norm);
  for (double& x : v) x /= norm;
  return v;
}

int mock_style_score(double mean_weight) {
  double s = 100.0 - 200.0 * std::abs(0.5 - std::clamp(mean_weight, 0.0, 1.0));
  return static_cast<int>(std::lround(std::clamp(s, 0.0, 100.0)));
}

double mock_refine_step(double weight) { return weight + (0.5 - weight) / 2.0; }

Scenario Scenario::from_json(const json& doc) {
  Scenario s;
  try {
    if (doc.contains("known_models")) s.known_models = doc["known_models"].get<std::vector<std::string>>();
    s.embed_dimension = doc.value("embed_dimension", 64);
    if (s.embed_dimension < 1) fail(ErrorKind::Invalid, "embed_dimension must be >= 1");
    for (const auto& r : doc.value("rules", json::array())) {
      ScenarioRule rule;
      if (r.contains("endpoint")) rule.endpoint = service_from_name(r["endpoint"].get<std::string>());
      rule.task = r.value("task", std::string());
      rule.match_source = r.value("match", std::string());
      if (!rule.match_source.empty()) {
        auto flags = std::regex::ECMAScript;
        if (r.value("icase", false)) flags |= std::regex::icase;
        rule.match.emplace(rule.match_source, flags);
      }
      rule.image_hash = r.value("image_hash", std::string());
      rule.kind = r.value("kind", std::string());
      rule.modality = r.value("modality", std::string());
      if (r.contains("reply")) {
        const json& reply = r["reply"];
        rule.reply = reply.is_string() ? reply.get<std::string>() : reply.dump();
      }
      if (r.contains("score")) rule.score = r["score"].get<double>();
      if (r.contains("vector")) rule.vector = r["vector"].get<std::vector<double>>();
      if (r.contains("render_frames")) rule.render_frames = r["render_frames"].get<int>();
      if (r.contains("status")) rule.status = r["status"].get<int>();
      rule.message = r.value("message", std::string("scripted failure"));
      s.rules.push_back(std::move(rule));
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::Parse, std::string("scenario: ") + e.what());
  } catch (const std::regex_error& e) {
    fail(ErrorKind::Parse, std::string("scenario regex: ") + e.what());
  }
  return s;
}

Scenario Scenario::load(const fs::path& path) {
  try {
    return from_json(read_json_file(path));
  } catch (const Error& e) {
    fail(e.kind(), path.string() + ": " + e.what());
  }
}

MockService::MockService(Scenario scenario) : scenario_(std::move(scenario)) {}

const ScenarioRule* MockService::find_rule(Service service, const std::string& task,
                                           const std::string& flattened,
                                           const std::vector<std::string>& image_hashes,
                                           const std::string& kind,
                                           const std::string& modality) const {
  for (const auto& rule : scenario_.rules) {
    if (rule.endpoint && *rule.endpoint != service) continue;
    if (!rule.task.empty() && rule.task != task) continue;
    if (!rule.kind.empty() && rule.kind != kind) continue;
    if (!rule.modality.empty() && rule.modality != modality) continue;
    if (rule.match && !std::regex_search(flattened, *rule.match)) continue;
    if (!rule.image_hash.empty()) {
      bool any = std::any_of(image_hashes.begin(), image_hashes.end(), [&](const std::string& h) {
        return h.rfind(rule.image_hash, 0) == 0;
      });
      if (!any) continue;
    }
    return &rule;
  }
  return nullptr;
}

WireResponse MockService::handle(Service service, const std::string& body) const {
  json parsed = json::parse(body, nullptr, false);
  if (parsed.is_discarded() || !parsed.is_object()) return err(400, "bad_request", "body is not a JSON object");
  try {
    switch (service) {
      case Service::Text:
      case Service::Vision: return chat(service, parsed);
      case Service::Render: return render(parsed);
      case Service::Embed: return embed(parsed);
      case Service::Score: return score(parsed);
    }
  } catch (const Error& e) {
    return err(400, "bad_request", e.what());
  }
  return err(404, "not_found", "unknown endpoint");
}

WireResponse MockService::chat(Service service, const json& body) const {
  ChatRequest req = decode_chat_request(body);
  if (service == Service::Text && req.has_images())
    return err(400, "bad_request", "text endpoint does not accept image parts");
  std::string flattened;
  std::vector<Frame> images;
  std::vector<std::string> hashes;
  for (const auto& m : req.messages)
    for (const auto& p : m.parts) {
      if (p.kind == ContentPart::Kind::Text) {
        flattened += p.data;
        flattened += '\n';
      } else {
        images.push_back(frame_from_base64(p.data));
        hashes.push_back(image_hash(images.back()));
      }
    }
  flattened += "task=" + req.task + "\ncontext=" + req.context.dump();
  if (const auto* rule = find_rule(service, req.task, flattened, hashes, "", "")) {
    if (rule->status) return err(*rule->status, "scripted", rule->message);
    if (rule->reply) return ok({{"text", *rule->reply}});
  }
  return ok({{"text", default_chat_reply(req.task, req.context, images, flattened)}});
}

WireResponse MockService::render(const json& body) const {
  RenderRequest req = decode_render_request(body);
  std::vector<Frame> inputs;
  if (req.frames_uri) {
    static const std::string scheme = "file://";
    if (req.frames_uri->rfind(scheme, 0) != 0) return err(400, "bad_request", "unsupported frames_uri");
    auto m = load_manifest(req.frames_uri->substr(scheme.size()));
    inputs = read_all_frames(m);
  } else {
    for (const auto& b64 : req.frames) inputs.push_back(frame_from_base64(b64));
  }
  std::vector<std::string> hashes;
  for (const auto& f : inputs) hashes.push_back(image_hash(f));
  json control = json::array();
  for (const auto& c : req.control) control.push_back({{"type", to_string(c.type)}, {"weight", c.weight}});
  std::string flattened = req.prompt + "\nmodel=" + req.model_file + "\nbase=" + req.base_model +
                          "\ncontrol=" + control.dump() + "\nextras=" + json(req.extras).dump();
  const ScenarioRule* rule = find_rule(Service::Render, "", flattened, hashes, "", "");
  if (rule && rule->status) return err(*rule->status, "scripted", rule->message);
  if (!req.model_file.empty() && !scenario_.known_models.empty() &&
      std::find(scenario_.known_models.begin(), scenario_.known_models.end(), req.model_file) ==
          scenario_.known_models.end())
    return err(404, "unknown_model", "unknown model_file '" + req.model_file + "'");

  double alpha = 0.0;
  for (const auto& c : req.control) alpha += c.weight;
  if (!req.control.empty()) alpha /= static_cast<double>(req.control.size());
  alpha = std::clamp(alpha, 0.0, 1.0);
  const Rgb style = mock_style_color(req.model_file.empty() ? req.base_model : req.model_file);
  const double sc[3] = {double(style.r), double(style.g), double(style.b)};

  std::vector<std::string> out;
  for (const auto& in : inputs) {
    Frame f(in.width, in.height, in.index);
    for (std::size_t i = 0; i < in.pixels.size(); ++i) {
      double v = alpha * in.pixels[i] + (1.0 - alpha) * sc[i % 3];
      f.pixels[i] = static_cast<std::uint8_t>(std::clamp<long>(std::lround(v), 0, 255));
    }
    out.push_back(frame_to_base64(f));
  }
  if (rule && rule->render_frames) out.resize(static_cast<std::size_t>(std::max(0, *rule->render_frames)),
                                              out.empty() ? std::string() : out.front());
  return ok({{"frames", out}});
}

WireResponse MockService::embed(const json& body) const {
  EmbedRequest req = decode_embed_request(body);
  const std::string modality(to_string(req.modality));
  json vectors = json::array();
  for (const auto& item : req.items) {
    std::string key, flattened;
    std::vector<std::string> hashes;
    if (req.modality == Modality::Text) {
      key = "text:" + item;
      flattened = item;
    } else {
      hashes.push_back(image_hash_base64(item));
      key = "image:" + hashes.back();
    }
    std::vector<double> vec;
    if (const auto* rule = find_rule(Service::Embed, "", flattened, hashes, "", modality)) {
      if (rule->status) return err(*rule->status, "scripted", rule->message);
      if (rule->vector) {
        vec = *rule->vector;
        double norm = 0.0;
        for (double x : vec) norm += x * x;
        norm = std::sqrt(norm);
        if (norm > 0)
          for (double& x : vec) x /= norm;
      }
    }
    if (vec.empty()) vec = mock_embedding(key, scenario_.embed_dimension);
    vectors.push_back(vec);
  }
  const auto dim = vectors.front().size();
  return ok({{"dimension", dim}, {"vectors", vectors}});
}

WireResponse MockService::score(const json& body) const {
  ScoreRequest req = decode_score_request(body);
  std::vector<Frame> frames;
  std::vector<std::string> hashes;
  for (const auto& b64 : req.frames) {
    frames.push_back(frame_from_base64(b64));
    hashes.push_back(image_hash(frames.back()));
  }
  const std::string kind(to_string(req.kind));
  if (const auto* rule = find_rule(Service::Score, "", kind, hashes, kind, "")) {
    if (rule->status) return err(*rule->status, "scripted", rule->message);
    if (rule->score) return ok({{"kind", kind}, {"score", *rule->score}});
  }
  double luma = 0.0;
  std::size_t n = 0;
  for (const auto& f : frames) {
    for (std::size_t p = 0; p < f.pixel_count(); ++p)
      luma += 0.299 * f.pixels[p * 3] + 0.587 * f.pixels[p * 3 + 1] + 0.114 * f.pixels[p * 3 + 2];
    n += f.pixel_count();
  }
  return ok({{"kind", kind}, {"score", luma / static_cast<double>(n) / 255.0}});
}

struct MockServer::Impl {
  httplib::Server server;
};

MockServer::MockServer(std::shared_ptr<const MockService> mock) : impl_(std::make_unique<Impl>()) {
  for (auto service : kAllServices) {
    impl_->server.Post(std::string(endpoint_path(service)),
                       [mock, service](const httplib::Request& req, httplib::Response& res) {
                         WireResponse r = mock->handle(service, req.body);
                         res.status = r.status;
                         res.set_content(r.body, "application/json");
                       });
  }
  impl_->server.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"status":"ok"})", "application/json");
  });
}

MockServer::~MockServer() { stop(); }

int MockServer::start(const std::string& host, int port) {
  host_ = host;
  if (port == 0) port_ = impl_->server.bind_to_any_port(host);
  else port_ = impl_->server.bind_to_port(host, port) ? port : -1;
  if (port_ <= 0) fail(ErrorKind::Io, "mock server cannot bind " + host + ":" + std::to_string(port));
  thread_ = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return port_;
}

void MockServer::stop() {
  if (impl_) impl_->server.stop();
  if (thread_.joinable()) thread_.join();
}

void MockServer::wait() {
  if (thread_.joinable()) thread_.join();
}

std::string MockServer::base_url() const { return "http://" + host_ + ":" + std::to_string(port_); }

}  // namespace vstylist::backends
