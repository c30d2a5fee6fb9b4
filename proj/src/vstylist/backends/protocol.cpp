#include "vstylist/backends/protocol.hpp"

#include <algorithm>
#include <set>

#include "vstylist/error.hpp"

namespace vstylist::backends {

namespace {

[[noreturn]] void schema(const std::string& where, const std::string& what) {
  fail(ErrorKind::Parse, "wire schema: " + where + ": " + what);
}

const json& field(const json& j, const char* key, const std::string& where) {
  if (!j.is_object()) schema(where, "expected object");
  auto it = j.find(key);
  if (it == j.end()) schema(where, std::string("missing field '") + key + "'");
  return *it;
}

std::string str_field(const json& j, const char* key, const std::string& where) {
  const json& v = field(j, key, where);
  if (!v.is_string()) schema(where + "." + key, "expected string");
  return v.get<std::string>();
}

std::vector<std::string> str_array(const json& v, const std::string& where) {
  if (!v.is_array()) schema(where, "expected array");
  std::vector<std::string> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_string()) schema(where + "[" + std::to_string(i) + "]", "expected string");
    out.push_back(v[i].get<std::string>());
  }
  return out;
}

std::string_view role_name(Role r) {
  switch (r) {
    case Role::System: return "system";
    case Role::User: return "user";
    case Role::Assistant: return "assistant";
  }
  return "user";
}

Role role_from(std::string_view s, const std::string& where) {
  if (s == "system") return Role::System;
  if (s == "user") return Role::User;
  if (s == "assistant") return Role::Assistant;
  schema(where, "unknown role '" + std::string(s) + "'");
}

}  // namespace

std::string_view endpoint_path(Service s) {
  switch (s) {
    case Service::Text: return "/v1/text/generate";
    case Service::Vision: return "/v1/vision/generate";
    case Service::Render: return "/v1/render";
    case Service::Embed: return "/v1/embed";
    case Service::Score: return "/v1/score";
  }
  return "";
}

std::string_view service_name(Service s) {
  switch (s) {
    case Service::Text: return "text";
    case Service::Vision: return "vision";
    case Service::Render: return "render";
    case Service::Embed: return "embed";
    case Service::Score: return "score";
  }
  return "";
}

std::optional<Service> service_from_path(std::string_view path) {
  for (auto s : kAllServices)
    if (endpoint_path(s) == path) return s;
  return std::nullopt;
}

Service service_from_name(std::string_view name) {
  for (auto s : kAllServices)
    if (service_name(s) == name) return s;
  fail(ErrorKind::Invalid, "unknown service '" + std::string(name) + "'");
}

void SamplingParams::validate() const {
  if (!(temperature >= 0)) fail(ErrorKind::Invalid, "temperature must be >= 0");
  if (!(top_p > 0 && top_p <= 1)) fail(ErrorKind::Invalid, "top_p must lie in (0, 1]");
  if (top_k < 1) fail(ErrorKind::Invalid, "top_k must be >= 1");
  if (max_tokens < 1) fail(ErrorKind::Invalid, "max_tokens must be >= 1");
}

ContentPart ContentPart::image(const Frame& f) { return {Kind::Image, frame_to_base64(f)}; }

bool ChatRequest::has_images() const {
  for (const auto& m : messages)
    for (const auto& p : m.parts)
      if (p.kind == ContentPart::Kind::Image) return true;
  return false;
}

std::string_view to_string(ControlType t) {
  switch (t) {
    case ControlType::Tile: return "tile";
    case ControlType::Depth: return "depth";
    case ControlType::Softedge: return "softedge";
    case ControlType::Lineart: return "lineart";
  }
  return "";
}

ControlType control_type_from_string(std::string_view s) {
  for (auto t : kControlTypes)
    if (to_string(t) == s) return t;
  fail(ErrorKind::Invalid, "unsupported control type '" + std::string(s) + "'");
}

void RenderRequest::normalize() {
  const bool inline_frames = !frames.empty();
  if (inline_frames == frames_uri.has_value())
    fail(ErrorKind::Invalid, "render request needs exactly one of inline frames or frames_uri");
  std::set<ControlType> seen;
  for (auto& c : control) {
    if (!seen.insert(c.type).second)
      fail(ErrorKind::Invalid, "duplicate control type " + std::string(to_string(c.type)));
    c.weight = std::clamp(c.weight, 0.0, 1.0);
  }
}

std::string_view to_string(Modality m) { return m == Modality::Text ? "text" : "image"; }

Modality modality_from_string(std::string_view s) {
  if (s == "text") return Modality::Text;
  if (s == "image") return Modality::Image;
  fail(ErrorKind::Invalid, "unknown modality '" + std::string(s) + "'");
}

std::string_view to_string(ScoreKind k) {
  switch (k) {
    case ScoreKind::AestheticI: return "aesthetic_i";
    case ScoreKind::DistortionI: return "distortion_i";
    case ScoreKind::AestheticV: return "aesthetic_v";
    case ScoreKind::DistortionV: return "distortion_v";
  }
  return "";
}

ScoreKind score_kind_from_string(std::string_view s) {
  for (auto k : kScoreKinds)
    if (to_string(k) == s) return k;
  fail(ErrorKind::Invalid, "unknown score kind '" + std::string(s) + "'");
}

bool is_video_level(ScoreKind k) {
  return k == ScoreKind::AestheticV || k == ScoreKind::DistortionV;
}

json encode(const ChatRequest& r) {
  json msgs = json::array();
  for (const auto& m : r.messages) {
    json content = json::array();
    for (const auto& p : m.parts) {
      if (p.kind == ContentPart::Kind::Text)
        content.push_back({{"type", "text"}, {"text", p.data}});
      else
        content.push_back({{"type", "image"}, {"image", p.data}});
    }
    msgs.push_back({{"role", role_name(m.role)}, {"content", std::move(content)}});
  }
  json sampling = {{"temperature", r.sampling.temperature},
                   {"top_p", r.sampling.top_p},
                   {"top_k", r.sampling.top_k},
                   {"max_tokens", r.sampling.max_tokens}};
  if (r.sampling.seed) sampling["seed"] = *r.sampling.seed;
  json body = {{"messages", std::move(msgs)}, {"sampling", std::move(sampling)}};
  if (!r.task.empty()) body["task"] = r.task;
  if (!r.context.empty()) body["context"] = r.context;
  return body;
}

json encode(const RenderRequest& r) {
  json control = json::array();
  for (const auto& c : r.control) control.push_back({{"type", to_string(c.type)}, {"weight", c.weight}});
  json body = {{"model_file", r.model_file},
               {"base_model", r.base_model},
               {"prompt", r.prompt},
               {"control", std::move(control)},
               {"seed", r.seed},
               {"extras", r.extras}};
  if (r.negative_prompt) body["negative_prompt"] = *r.negative_prompt;
  if (r.frames_uri) body["frames_uri"] = *r.frames_uri;
  else body["frames"] = r.frames;
  return body;
}

json encode(const EmbedRequest& r) {
  return {{"modality", to_string(r.modality)}, {"items", r.items}};
}

json encode(const ScoreRequest& r) { return {{"kind", to_string(r.kind)}, {"frames", r.frames}}; }

ChatRequest decode_chat_request(const json& j) {
  ChatRequest r;
  const json& msgs = field(j, "messages", "request");
  if (!msgs.is_array() || msgs.empty()) schema("messages", "expected nonempty array");
  for (std::size_t i = 0; i < msgs.size(); ++i) {
    const std::string where = "messages[" + std::to_string(i) + "]";
    ChatMessage m;
    m.role = role_from(str_field(msgs[i], "role", where), where + ".role");
    const json& content = field(msgs[i], "content", where);
    if (!content.is_array()) schema(where + ".content", "expected array");
    for (std::size_t k = 0; k < content.size(); ++k) {
      const std::string pw = where + ".content[" + std::to_string(k) + "]";
      std::string type = str_field(content[k], "type", pw);
      if (type == "text") m.parts.push_back(ContentPart::text(str_field(content[k], "text", pw)));
      else if (type == "image")
        m.parts.push_back(ContentPart::image_base64(str_field(content[k], "image", pw)));
      else schema(pw + ".type", "unknown part type '" + type + "'");
    }
    r.messages.push_back(std::move(m));
  }
  const json& s = field(j, "sampling", "request");
  try {
    r.sampling.temperature = s.at("temperature").get<double>();
    r.sampling.top_p = s.at("top_p").get<double>();
    r.sampling.top_k = s.at("top_k").get<int>();
    r.sampling.max_tokens = s.at("max_tokens").get<int>();
    if (s.contains("seed")) r.sampling.seed = s.at("seed").get<std::int64_t>();
  } catch (const json::exception& e) {
    schema("sampling", e.what());
  }
  if (j.contains("task")) r.task = str_field(j, "task", "request");
  if (j.contains("context")) {
    if (!j["context"].is_object()) schema("context", "expected object");
    r.context = j["context"];
  }
  return r;
}

RenderRequest decode_render_request(const json& j) {
  RenderRequest r;
  r.model_file = str_field(j, "model_file", "request");
  r.base_model = str_field(j, "base_model", "request");
  r.prompt = str_field(j, "prompt", "request");
  if (j.contains("negative_prompt")) r.negative_prompt = str_field(j, "negative_prompt", "request");
  if (j.contains("frames")) r.frames = str_array(j["frames"], "frames");
  if (j.contains("frames_uri")) r.frames_uri = str_field(j, "frames_uri", "request");
  const json& control = field(j, "control", "request");
  if (!control.is_array()) schema("control", "expected array");
  for (std::size_t i = 0; i < control.size(); ++i) {
    const std::string where = "control[" + std::to_string(i) + "]";
    ControlEntry c;
    try {
      c.type = control_type_from_string(str_field(control[i], "type", where));
    } catch (const Error& e) {
      schema(where + ".type", e.what());
    }
    const json& w = field(control[i], "weight", where);
    if (!w.is_number()) schema(where + ".weight", "expected number");
    c.weight = w.get<double>();
    r.control.push_back(c);
  }
  const json& seed = field(j, "seed", "request");
  if (!seed.is_number_integer()) schema("seed", "expected integer");
  r.seed = seed.get<std::int64_t>();
  if (j.contains("extras")) {
    if (!j["extras"].is_object()) schema("extras", "expected object");
    for (const auto& [k, v] : j["extras"].items()) {
      if (!v.is_string()) schema("extras." + k, "expected string");
      r.extras[k] = v.get<std::string>();
    }
  }
  try {
    r.normalize();
  } catch (const Error& e) {
    schema("request", e.what());
  }
  return r;
}

EmbedRequest decode_embed_request(const json& j) {
  EmbedRequest r;
  try {
    r.modality = modality_from_string(str_field(j, "modality", "request"));
  } catch (const Error& e) {
    schema("modality", e.what());
  }
  r.items = str_array(field(j, "items", "request"), "items");
  if (r.items.empty()) schema("items", "expected nonempty array");
  return r;
}

ScoreRequest decode_score_request(const json& j) {
  ScoreRequest r;
  try {
    r.kind = score_kind_from_string(str_field(j, "kind", "request"));
  } catch (const Error& e) {
    schema("kind", e.what());
  }
  r.frames = str_array(field(j, "frames", "request"), "frames");
  if (r.frames.empty()) schema("frames", "expected nonempty array");
  return r;
}

std::string decode_chat_response(const json& j) { return str_field(j, "text", "response"); }

std::vector<std::string> decode_render_response(const json& j) {
  return str_array(field(j, "frames", "response"), "frames");
}

std::vector<std::vector<double>> decode_embed_response(const json& j) {
  const json& v = field(j, "vectors", "response");
  if (!v.is_array()) schema("vectors", "expected array");
  std::vector<std::vector<double>> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_array()) schema("vectors[" + std::to_string(i) + "]", "expected array");
    std::vector<double> vec;
    for (const auto& x : v[i]) {
      if (!x.is_number()) schema("vectors[" + std::to_string(i) + "]", "expected numbers");
      vec.push_back(x.get<double>());
    }
    out.push_back(std::move(vec));
  }
  return out;
}

double decode_score_response(const json& j) {
  const json& s = field(j, "score", "response");
  if (!s.is_number()) schema("score", "expected number");
  return s.get<double>();
}

json error_body(std::string_view code, std::string_view message) {
  return {{"error", {{"code", code}, {"message", message}}}};
}

std::string image_hash(const Frame& f) { return sha256_hex(std::span<const std::uint8_t>(f.pixels)); }

std::string image_hash_base64(std::string_view png_b64) {
  return image_hash(frame_from_base64(png_b64));
}

Frame frame_from_base64(std::string_view png_b64) {
  auto bytes = base64_decode(png_b64);
  if (bytes.empty()) fail(ErrorKind::Invalid, "empty image payload");
  return decode_png(bytes);
}

std::string frame_to_base64(const Frame& f) { return base64_encode(encode_png(f)); }

}  // namespace vstylist::backends
