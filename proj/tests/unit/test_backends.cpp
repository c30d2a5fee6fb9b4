#include <doctest.h>

#include <thread>

#include "support.hpp"
#include "vstylist/error.hpp"

using namespace vstylist;
using namespace vstylist::backends;
using testing::MockRig;

namespace {

ChatRequest user_text(const std::string& text, std::int64_t seed = 1) {
  ChatRequest req;
  req.sampling.seed = seed;
  req.messages.push_back({Role::User, {ContentPart::text(text)}});
  return req;
}

RenderRequest render_req(const std::vector<Frame>& frames, double weight, const std::string& model) {
  RenderRequest r;
  r.model_file = model;
  r.base_model = "SD 1.5";
  r.prompt = "red square";
  for (const auto& f : frames) r.frames.push_back(frame_to_base64(f));
  for (auto t : kControlTypes) r.control.push_back({t, weight});
  r.seed = 3;
  return r;
}

/// Fails the first `failures` posts with the given status, then delegates.
class FlakyTransport final : public Transport {
 public:
  FlakyTransport(std::shared_ptr<Transport> inner, int failures, int status)
      : inner_(std::move(inner)), failures_(failures), status_(status) {}
  WireResponse post(Service s, const std::string& body) override {
    bodies.push_back(body);
    if (failures_-- > 0) {
      if (status_ == 0) fail(ErrorKind::Transport, "connection refused");
      return {status_, error_body("unavailable", "try later").dump()};
    }
    return inner_->post(s, body);
  }
  std::string describe(Service s) const override { return inner_->describe(s); }
  std::vector<std::string> bodies;

 private:
  std::shared_ptr<Transport> inner_;
  int failures_;
  int status_;
};

class CannedTransport final : public Transport {
 public:
  explicit CannedTransport(WireResponse r) : response_(std::move(r)) {}
  WireResponse post(Service, const std::string&) override { return response_; }
  std::string describe(Service) const override { return "canned"; }

 private:
  WireResponse response_;
};

std::vector<Frame> two_frames() {
  std::mt19937_64 rng(4);
  return {testing::random_frame(6, 5, rng, 0), testing::random_frame(6, 5, rng, 1)};
}

}  // namespace

TEST_CASE("scripted text reply") {
  MockRig rig(json{{"rules", {{{"endpoint", "text"}, {"match", "^ping"}, {"reply", "pong"}}}}});
  CHECK(rig->text_generate(user_text("ping")) == "pong");
  CHECK(rig->text_generate(user_text("other")).rfind("mock-", 0) == 0);
}

TEST_CASE("text endpoint refuses image parts before sending") {
  MockRig rig;
  auto req = user_text("describe");
  req.messages[0].parts.push_back(ContentPart::image(testing::solid_frame(4, 4, {1, 2, 3})));
  CHECK_THROWS_AS(rig->text_generate(req), Error);
  CHECK(rig->log().size() == 0);
}

TEST_CASE("the mock also rejects image parts on the text endpoint") {
  MockService mock;
  auto req = user_text("describe");
  req.messages[0].parts.push_back(ContentPart::image(testing::solid_frame(4, 4, {1, 2, 3})));
  auto res = mock.handle(Service::Text, encode(req).dump());
  CHECK(res.status == 400);
  CHECK(json::parse(res.body)["error"]["code"] == "bad_request");
}

TEST_CASE("identical seeded requests give identical replies") {
  MockRig rig;
  CHECK(rig->text_generate(user_text("hello", 9)) == rig->text_generate(user_text("hello", 9)));
}

TEST_CASE("vision scenario keyed on image hash") {
  auto frame = testing::solid_frame(8, 8, {200, 10, 10});
  const std::string hash = image_hash(frame);
  MockRig rig(json{{"rules", {{{"endpoint", "vision"}, {"image_hash", hash.substr(0, 12)},
                           {"reply", "a red square on white background"}}}}});
  ChatRequest req;
  req.messages.push_back({Role::User, {ContentPart::image(frame), ContentPart::text("caption this")}});
  CHECK(rig->vision_generate(req) == "a red square on white background");
  ChatRequest other;
  other.messages.push_back(
      {Role::User, {ContentPart::image(testing::solid_frame(8, 8, {0, 0, 0})), ContentPart::text("caption this")}});
  CHECK(rig->vision_generate(other) != "a red square on white background");
  CHECK(rig->vision_generate(req) == rig->vision_generate(req));
}

TEST_CASE("empty image part is rejected") {
  MockRig rig;
  ChatRequest req;
  req.messages.push_back({Role::User, {ContentPart::image_base64(""), ContentPart::text("x")}});
  CHECK_THROWS_AS(rig->vision_generate(req), Error);
  CHECK_THROWS_AS(rig->text_generate(ChatRequest{}), Error);
}

TEST_CASE("mock render blends input toward the model colour") {
  MockRig rig;
  auto frames = two_frames();
  const Rgb style = mock_style_color("pixel_f2.safetensors");

  auto full = rig->render(render_req(frames, 1.0, "pixel_f2.safetensors"));
  REQUIRE(full.size() == 2);
  CHECK(full[0].same_pixels(frames[0]));
  CHECK(full[1].same_pixels(frames[1]));

  auto none = rig->render(render_req(frames, 0.0, "pixel_f2.safetensors"));
  for (const auto& f : none) CHECK(f.same_pixels(testing::solid_frame(6, 5, style)));

  auto quarter = rig->render(render_req(frames, 0.25, "pixel_f2.safetensors"));
  const double sc[3] = {double(style.r), double(style.g), double(style.b)};
  for (std::size_t k = 0; k < frames.size(); ++k)
    for (std::size_t i = 0; i < frames[k].pixels.size(); ++i) {
      const double expected = 0.75 * sc[i % 3] + 0.25 * frames[k].pixels[i];
      CHECK(std::abs(quarter[k].pixels[i] - expected) <= 0.5);
    }
}

TEST_CASE("mock render uses the base model colour when no model file is given") {
  MockRig rig;
  auto out = rig->render(render_req(two_frames(), 0.0, ""));
  CHECK(out[0].same_pixels(testing::solid_frame(6, 5, mock_style_color("SD 1.5"))));
}

TEST_CASE("render frame-count mismatch is a protocol error") {
  MockRig rig(json{{"rules", {{{"endpoint", "render"}, {"render_frames", 1}}}}});
  try {
    rig->render(render_req(two_frames(), 0.5, "x.safetensors"));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Protocol);
  }
}

TEST_CASE("unknown model files are refused when the scenario lists known models") {
  MockRig rig(json{{"known_models", {"pixel_f2.safetensors"}}});
  CHECK_NOTHROW(rig->render(render_req(two_frames(), 0.5, "pixel_f2.safetensors")));
  CHECK_THROWS_AS(rig->render(render_req(two_frames(), 0.5, "nope.safetensors")), Error);
}

TEST_CASE("render request invariants") {
  auto r = render_req(two_frames(), 1.7, "m");
  r.normalize();
  for (const auto& c : r.control) CHECK(c.weight == 1.0);
  auto both = render_req(two_frames(), 0.5, "m");
  both.frames_uri = "file:///tmp";
  CHECK_THROWS_AS(both.normalize(), Error);
  auto neither = render_req({}, 0.5, "m");
  CHECK_THROWS_AS(neither.normalize(), Error);
}

TEST_CASE("render from a frames_uri source") {
  testing::TempDir dir;
  auto frames = two_frames();
  write_sequence(frames, 30, dir.path());
  MockRig rig;
  auto r = render_req({}, 1.0, "m");
  r.frames_uri = "file://" + dir.path().string();
  auto out = rig->render(r);
  REQUIRE(out.size() == 2);
  CHECK(out[1].same_pixels(frames[1]));
}

TEST_CASE("embeddings are unit vectors and deterministic") {
  MockRig rig;
  auto v = rig->embed_texts({"pixel art style", "pixel art style", "oil painting"});
  REQUIRE(v.size() == 3);
  CHECK(v[0] == v[1]);
  CHECK(v[0].size() == 64);
  for (const auto& x : v) {
    double n = 0;
    for (double c : x) n += c * c;
    CHECK(std::sqrt(n) == doctest::Approx(1.0).epsilon(1e-9));
  }
  double dot = 0;
  for (std::size_t i = 0; i < v[0].size(); ++i) dot += v[0][i] * v[2][i];
  CHECK(dot >= -1.0);
  CHECK(dot <= 1.0);
  CHECK(mock_embedding("text:pixel art style", 64) == v[0]);
  CHECK(rig->embed_frames(two_frames()).size() == 2);
  CHECK_THROWS_AS(rig->embed_texts({}), Error);
}

TEST_CASE("scripted embed vectors are normalised by the mock") {
  MockRig rig(json{{"rules", {{{"endpoint", "embed"}, {"match", "^axis$"}, {"vector", {3.0, 4.0}}}}},
               {"embed_dimension", 2}});
  auto v = rig->embed_texts({"axis"});
  CHECK(v[0][0] == doctest::Approx(0.6));
  CHECK(v[0][1] == doctest::Approx(0.8));
}

TEST_CASE("embed responses with mixed dimensions are rejected") {
  auto t = std::make_shared<CannedTransport>(
      WireResponse{200, R"({"dimension":2,"vectors":[[1,0],[0,0,1]]})"});
  BackendClient client(t, 0, 0);
  CHECK_THROWS_AS(client.embed_texts({"a", "b"}), Error);
}

TEST_CASE("score values") {
  MockRig scripted(json{{"rules", {{{"endpoint", "score"}, {"kind", "aesthetic_i"}, {"score", 0.5906}}}}});
  auto frames = two_frames();
  CHECK(scripted->score_frames(ScoreKind::AestheticI, frames) == 0.5906);

  MockRig rig;
  auto gray = testing::static_video(3, 8, 8, {128, 128, 128});
  CHECK(rig->score_frames(ScoreKind::AestheticI, gray) == doctest::Approx(128.0 / 255.0).epsilon(1e-12));
  auto red = testing::static_video(1, 4, 4, {255, 0, 0});
  CHECK(rig->score_frames(ScoreKind::DistortionV, red) == doctest::Approx(0.299).epsilon(1e-12));
  CHECK_THROWS_AS(rig->score_frames(ScoreKind::AestheticI, std::vector<Frame>{}), Error);
  CHECK_THROWS_AS(score_kind_from_string("sharpness"), Error);
}

TEST_CASE("out-of-range score is a protocol violation") {
  auto t = std::make_shared<CannedTransport>(WireResponse{200, R"({"kind":"aesthetic_i","score":1.5})"});
  BackendClient client(t, 0, 0);
  try {
    client.score_frames(ScoreKind::AestheticI, two_frames());
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Protocol);
  }
}

TEST_CASE("malformed bodies are protocol errors") {
  auto t = std::make_shared<CannedTransport>(WireResponse{200, "not json"});
  BackendClient client(t, 0, 0);
  CHECK_THROWS_AS(client.text_generate(user_text("x")), Error);
  auto missing = std::make_shared<CannedTransport>(WireResponse{200, R"({"txt":"x"})"});
  BackendClient client2(missing, 0, 0);
  CHECK_THROWS_AS(client2.text_generate(user_text("x")), Error);
}

TEST_CASE("transient failures are retried with the same body") {
  auto mock = std::make_shared<const MockService>();
  auto flaky = std::make_shared<FlakyTransport>(std::make_shared<InProcessTransport>(mock), 2, 503);
  BackendClient client(flaky, 2, 1);
  CHECK(client.text_generate(user_text("retry me")).rfind("mock-", 0) == 0);
  REQUIRE(flaky->bodies.size() == 3);
  CHECK(flaky->bodies[0] == flaky->bodies[1]);
  CHECK(flaky->bodies[1] == flaky->bodies[2]);
  CHECK(client.log().size() == 3);
}

TEST_CASE("retries are bounded and connection failures count as transient") {
  auto mock = std::make_shared<const MockService>();
  auto down = std::make_shared<FlakyTransport>(std::make_shared<InProcessTransport>(mock), 100, 0);
  BackendClient client(down, 2, 0);
  CHECK_THROWS_AS(client.text_generate(user_text("x")), Error);
  CHECK(down->bodies.size() == 3);
}

TEST_CASE("client errors are not retried") {
  auto mock = std::make_shared<const MockService>();
  auto bad = std::make_shared<FlakyTransport>(std::make_shared<InProcessTransport>(mock), 1, 400);
  BackendClient client(bad, 3, 0);
  CHECK_THROWS_AS(client.text_generate(user_text("x")), Error);
  CHECK(bad->bodies.size() == 1);
}

TEST_CASE("backoff doubles between attempts") {
  auto mock = std::make_shared<const MockService>();
  auto flaky = std::make_shared<FlakyTransport>(std::make_shared<InProcessTransport>(mock), 2, 503);
  BackendClient client(flaky, 2, 20);
  auto t0 = std::chrono::steady_clock::now();
  client.text_generate(user_text("x"));
  auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0).count();
  CHECK(ms >= 60);
}

TEST_CASE("scripted status codes surface as errors") {
  MockRig rig(json{{"rules", {{{"endpoint", "text"}, {"status", 500}, {"message", "boom"}}}}}, 1);
  CHECK_THROWS_WITH_AS(rig->text_generate(user_text("x")), doctest::Contains("boom"), Error);
  CHECK(rig->log().size() == 2);
}

TEST_CASE("wire encoders and decoders round-trip") {
  ChatRequest chat = user_text("hi", 42);
  chat.task = "caption";
  chat.context = {{"shot_index", 2}};
  chat.messages.insert(chat.messages.begin(), ChatMessage{Role::System, {ContentPart::text("sys")}});
  auto back = decode_chat_request(encode(chat));
  CHECK(encode(back) == encode(chat));

  auto r = render_req(two_frames(), 0.3, "m");
  r.negative_prompt = "blurry";
  r.extras = {{"steps", "20"}};
  CHECK(encode(decode_render_request(encode(r))) == encode(r));

  EmbedRequest e{Modality::Text, {"a", "b"}};
  CHECK(encode(decode_embed_request(encode(e))) == encode(e));
  ScoreRequest s{ScoreKind::DistortionV, {frame_to_base64(two_frames()[0])}};
  CHECK(encode(decode_score_request(encode(s))) == encode(s));
}

TEST_CASE("decoders reject schema violations") {
  CHECK_THROWS_AS(decode_chat_request(json::parse(R"({"messages":[]})")), Error);
  CHECK_THROWS_AS(decode_chat_request(json::parse(R"({"messages":[{"role":"bot","content":[]}]})")), Error);
  CHECK_THROWS_AS(decode_score_request(json::parse(R"({"kind":"x","frames":[]})")), Error);
  CHECK_THROWS_AS(decode_chat_response(json::parse(R"({"text":3})")), Error);
  CHECK_THROWS_AS(decode_embed_response(json::parse(R"({"vectors":"no"})")), Error);
  CHECK_THROWS_AS(control_type_from_string("canny"), Error);
}

TEST_CASE("sampling parameters are validated") {
  SamplingParams p;
  CHECK_NOTHROW(p.validate());
  p.top_p = 1.5;
  CHECK_THROWS_AS(p.validate(), Error);
  p = {};
  p.top_k = 0;
  CHECK_THROWS_AS(p.validate(), Error);
  p = {};
  p.temperature = -1;
  CHECK_THROWS_AS(p.validate(), Error);
}

TEST_CASE("endpoint configuration is validated") {
  BackendEndpoints ep;
  CHECK_THROWS_AS(ep.validate(), Error);
  for (auto s : kAllServices) ep.url(s) = "http://127.0.0.1:1";
  CHECK_NOTHROW(ep.validate());
  ep.retries = -1;
  CHECK_THROWS_AS(ep.validate(), Error);
  ep.retries = 0;
  ep.timeout_s = 0;
  CHECK_THROWS_AS(ep.validate(), Error);
  ep.timeout_s = 1;
  ep.text_url = "ftp://x";
  CHECK_THROWS_AS(HttpTransport{ep}, Error);
}

TEST_CASE("mock is reentrant under concurrent callers") {
  MockRig rig;
  const std::string expected = rig->text_generate(user_text("same"));
  std::vector<std::thread> threads;
  std::atomic<int> mismatches{0};
  for (int t = 0; t < 8; ++t)
    threads.emplace_back([&] {
      for (int i = 0; i < 20; ++i)
        if (rig->text_generate(user_text("same")) != expected) ++mismatches;
    });
  for (auto& t : threads) t.join();
  CHECK(mismatches == 0);
}

TEST_CASE("HTTP transport against the mock server matches in-process results") {
  auto mock = std::make_shared<const MockService>(Scenario::from_json(
      {{"rules", {{{"endpoint", "text"}, {"match", "^ping"}, {"reply", "pong"}}}}}));
  MockServer server(mock);
  const int port = server.start();
  REQUIRE(port > 0);
  BackendEndpoints ep;
  for (auto s : kAllServices) ep.url(s) = server.base_url();
  ep.timeout_s = 10;
  BackendClient http(std::make_shared<HttpTransport>(ep), 0, 0);
  BackendClient local(std::make_shared<InProcessTransport>(mock), 0, 0);

  CHECK(http.text_generate(user_text("ping")) == "pong");
  CHECK(http.text_generate(user_text("zzz")) == local.text_generate(user_text("zzz")));
  auto frames = two_frames();
  auto a = http.render(render_req(frames, 0.4, "m.safetensors"));
  auto b = local.render(render_req(frames, 0.4, "m.safetensors"));
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].same_pixels(b[i]));
  CHECK(http.embed_texts({"q"}) == local.embed_texts({"q"}));
  CHECK(http.score_frames(ScoreKind::AestheticV, frames) == local.score_frames(ScoreKind::AestheticV, frames));

  std::vector<std::thread> threads;
  std::atomic<int> wrong{0};
  for (int t = 0; t < 4; ++t)
    threads.emplace_back([&] {
      for (int i = 0; i < 10; ++i)
        if (http.text_generate(user_text("ping")) != "pong") ++wrong;
    });
  for (auto& t : threads) t.join();
  CHECK(wrong == 0);
  server.stop();
  CHECK_THROWS_AS(http.text_generate(user_text("ping")), Error);
}

TEST_CASE("mock conforms to every golden fixture") {
  int cases = 0;
  MockService mock;
  for (const auto& entry : fs::directory_iterator(testing::protocol_dir() / "golden")) {
    if (entry.path().extension() != ".json") continue;
    ++cases;
    CAPTURE(entry.path().filename().string());
    json golden = read_json_file(entry.path());
    auto service = service_from_path(golden["endpoint"].get<std::string>());
    REQUIRE(service);
    auto res = mock.handle(*service, golden["request"].dump());
    CHECK(res.status == golden["status"].get<int>());
    json body = json::parse(res.body);
    json expected = golden["response"];
    if (*service == Service::Render && res.status == 200) {
      REQUIRE(body["frames"].size() == expected["frames"].size());
      for (std::size_t i = 0; i < body["frames"].size(); ++i)
        CHECK(frame_from_base64(body["frames"][i].get<std::string>())
                  .same_pixels(frame_from_base64(expected["frames"][i].get<std::string>())));
    } else if (res.status != 200) {
      CHECK(body["error"]["code"] == expected["error"]["code"]);
    } else {
      CHECK(body == expected);
    }
  }
  CHECK(cases == 14);
}
