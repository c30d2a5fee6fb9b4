#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vstylist/frames.hpp"
#include "vstylist/util.hpp"

// Wire protocol shared by the HTTP client, the in-process mock and the mock
// server. Five JSON endpoints; images travel as base64 PNG.
namespace vstylist::backends {

enum class Service { Text, Vision, Render, Embed, Score };

inline constexpr std::array<Service, 5> kAllServices = {Service::Text, Service::Vision,
                                                        Service::Render, Service::Embed,
                                                        Service::Score};

std::string_view endpoint_path(Service s);
std::string_view service_name(Service s);
std::optional<Service> service_from_path(std::string_view path);
Service service_from_name(std::string_view name);

struct SamplingParams {
  double temperature = 0.7;
  double top_p = 0.95;
  int top_k = 10;
  std::optional<std::int64_t> seed;
  int max_tokens = 512;

  void validate() const;
  bool operator==(const SamplingParams&) const = default;
};

enum class Role { System, User, Assistant };

struct ContentPart {
  enum class Kind { Text, Image } kind = Kind::Text;
  std::string data;  // text, or base64 PNG for images

  static ContentPart text(std::string t) { return {Kind::Text, std::move(t)}; }
  static ContentPart image(const Frame& f);
  static ContentPart image_base64(std::string b64) { return {Kind::Image, std::move(b64)}; }
};

struct ChatMessage {
  Role role = Role::User;
  std::vector<ContentPart> parts;
};

/// `task` and `context` are optional structured metadata describing what the
/// engine is asking for; model servers may ignore them.
struct ChatRequest {
  std::vector<ChatMessage> messages;
  SamplingParams sampling;
  std::string task;
  json context = json::object();

  bool has_images() const;
};

enum class ControlType { Tile, Depth, Softedge, Lineart };
inline constexpr std::array<ControlType, 4> kControlTypes = {
    ControlType::Tile, ControlType::Depth, ControlType::Softedge, ControlType::Lineart};

std::string_view to_string(ControlType t);
ControlType control_type_from_string(std::string_view s);

struct ControlEntry {
  ControlType type = ControlType::Tile;
  double weight = 0.0;
};

struct RenderRequest {
  std::string model_file;  // empty selects the base model
  std::string base_model;
  std::string prompt;
  std::optional<std::string> negative_prompt;
  std::vector<std::string> frames;  // inline base64 PNG
  std::optional<std::string> frames_uri;
  std::vector<ControlEntry> control;
  std::int64_t seed = 0;
  std::map<std::string, std::string> extras;

  /// Checks the frame-source and control invariants and clamps weights.
  void normalize();
};

enum class Modality { Text, Image };
std::string_view to_string(Modality m);
Modality modality_from_string(std::string_view s);

struct EmbedRequest {
  Modality modality = Modality::Text;
  std::vector<std::string> items;  // text or base64 PNG
};

enum class ScoreKind { AestheticI, DistortionI, AestheticV, DistortionV };
inline constexpr std::array<ScoreKind, 4> kScoreKinds = {
    ScoreKind::AestheticI, ScoreKind::DistortionI, ScoreKind::AestheticV, ScoreKind::DistortionV};
std::string_view to_string(ScoreKind k);
ScoreKind score_kind_from_string(std::string_view s);
bool is_video_level(ScoreKind k);

struct ScoreRequest {
  ScoreKind kind = ScoreKind::AestheticI;
  std::vector<std::string> frames;
};

// Encoders produce the canonical request bodies; decoders validate strictly and
// throw Error(Parse) with a field path on schema violations.
json encode(const ChatRequest& r);
json encode(const RenderRequest& r);
json encode(const EmbedRequest& r);
json encode(const ScoreRequest& r);

ChatRequest decode_chat_request(const json& j);
RenderRequest decode_render_request(const json& j);
EmbedRequest decode_embed_request(const json& j);
ScoreRequest decode_score_request(const json& j);

std::string decode_chat_response(const json& j);
std::vector<std::string> decode_render_response(const json& j);
std::vector<std::vector<double>> decode_embed_response(const json& j);
double decode_score_response(const json& j);

json error_body(std::string_view code, std::string_view message);

/// Hash of the decoded RGB raster (not the PNG bytes), as used by scenario matchers.
std::string image_hash(const Frame& f);
std::string image_hash_base64(std::string_view png_b64);

Frame frame_from_base64(std::string_view png_b64);
std::string frame_to_base64(const Frame& f);

}  // namespace vstylist::backends
