#include "vstylist/backends/client.hpp"

#include <chrono>
#include <cmath>
#include <map>
#include <mutex>
#include <regex>
#include <thread>

#include <httplib.h>

#include "vstylist/backends/mock.hpp"
#include "vstylist/error.hpp"

namespace vstylist::backends {

const std::string& BackendEndpoints::url(Service s) const {
  switch (s) {
    case Service::Text: return text_url;
    case Service::Vision: return vision_url;
    case Service::Render: return render_url;
    case Service::Embed: return embed_url;
    case Service::Score: return score_url;
  }
  return text_url;
}

std::string& BackendEndpoints::url(Service s) {
  return const_cast<std::string&>(std::as_const(*this).url(s));
}

void BackendEndpoints::validate() const {
  if (retries < 0) fail(ErrorKind::Invalid, "backend retry count must be >= 0");
  if (!(timeout_s > 0)) fail(ErrorKind::Invalid, "backend timeout must be > 0");
  if (backoff_ms < 0) fail(ErrorKind::Invalid, "backend backoff must be >= 0");
  for (auto s : kAllServices)
    if (url(s).empty()) fail(ErrorKind::Invalid, "no URL configured for the " + std::string(service_name(s)) + " backend");
}

struct HttpTransport::Pool {
  struct Target {
    std::string host;    // scheme://host[:port]
    std::string prefix;  // path prefix before the endpoint path
  };
  std::mutex mu;
  std::map<Service, Target> targets;
  std::map<Service, std::vector<std::unique_ptr<httplib::Client>>> idle;
};

HttpTransport::HttpTransport(BackendEndpoints endpoints)
    : endpoints_(std::move(endpoints)), pool_(std::make_unique<Pool>()) {
  endpoints_.validate();
  static const std::regex url_re(R"(^(https?://[^/]+)(/.*)?$)");
  for (auto service : kAllServices) {
    const std::string& base = endpoints_.url(service);
    std::smatch m;
    if (!std::regex_match(base, m, url_re))
      fail(ErrorKind::Invalid, "bad " + std::string(service_name(service)) + " URL '" + base + "'");
    std::string prefix = m[2].matched ? m[2].str() : "";
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    pool_->targets[service] = {m[1].str(), prefix};
  }
}

HttpTransport::~HttpTransport() = default;

WireResponse HttpTransport::post(Service service, const std::string& body) {
  const auto& target = pool_->targets.at(service);
  std::unique_ptr<httplib::Client> cli;
  {
    std::lock_guard lock(pool_->mu);
    auto& idle = pool_->idle[service];
    if (!idle.empty()) {
      cli = std::move(idle.back());
      idle.pop_back();
    }
  }
  if (!cli) {
    cli = std::make_unique<httplib::Client>(target.host);
    const auto secs = static_cast<time_t>(endpoints_.timeout_s);
    const auto usecs = static_cast<time_t>((endpoints_.timeout_s - static_cast<double>(secs)) * 1e6);
    cli->set_connection_timeout(secs, usecs);
    cli->set_read_timeout(secs, usecs);
    cli->set_write_timeout(secs, usecs);
    cli->set_keep_alive(true);
  }
  httplib::Headers headers;
  if (!endpoints_.bearer_token.empty())
    headers.emplace("Authorization", "Bearer " + endpoints_.bearer_token);
  auto res = cli->Post(target.prefix + std::string(endpoint_path(service)), headers, body, "application/json");
  if (!res)
    fail(ErrorKind::Transport, std::string(service_name(service)) + " backend at " + endpoints_.url(service) +
                                   " unreachable: " + httplib::to_string(res.error()));
  WireResponse out{res->status, res->body};
  std::lock_guard lock(pool_->mu);
  pool_->idle[service].push_back(std::move(cli));
  return out;
}

std::string HttpTransport::describe(Service service) const { return endpoints_.url(service); }

InProcessTransport::InProcessTransport(std::shared_ptr<const MockService> mock)
    : mock_(std::move(mock)) {}

WireResponse InProcessTransport::post(Service service, const std::string& body) {
  return mock_->handle(service, body);
}

std::string InProcessTransport::describe(Service service) const {
  return "mock://in-process" + std::string(endpoint_path(service));
}

void CallLog::record(Service s, const std::string& body) {
  std::lock_guard lock(mu_);
  calls_.push_back({s, body});
}

std::vector<CallRecord> CallLog::snapshot() const {
  std::lock_guard lock(mu_);
  return calls_;
}

std::size_t CallLog::count(Service s) const {
  std::lock_guard lock(mu_);
  std::size_t n = 0;
  for (const auto& c : calls_) n += c.service == s;
  return n;
}

std::size_t CallLog::size() const {
  std::lock_guard lock(mu_);
  return calls_.size();
}

void CallLog::clear() {
  std::lock_guard lock(mu_);
  calls_.clear();
}

BackendClient::BackendClient(std::shared_ptr<Transport> transport, int retries, int backoff_ms)
    : transport_(std::move(transport)), retries_(retries), backoff_ms_(backoff_ms) {
  if (retries_ < 0) fail(ErrorKind::Invalid, "retry count must be >= 0");
}

json BackendClient::call(Service service, const json& body) {
  const std::string payload = body.dump();
  const std::string name(service_name(service));
  std::string last_error;
  for (int attempt = 0; attempt <= retries_; ++attempt) {
    if (attempt > 0 && backoff_ms_ > 0)
      std::this_thread::sleep_for(std::chrono::milliseconds(backoff_ms_ << (attempt - 1)));
    log_.record(service, payload);
    WireResponse res;
    try {
      res = transport_->post(service, payload);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::Transport) throw;
      last_error = e.what();
      continue;
    }
    if (res.status >= 200 && res.status < 300) {
      json parsed = json::parse(res.body, nullptr, false);
      if (parsed.is_discarded() || !parsed.is_object())
        fail(ErrorKind::Protocol, name + " backend returned a malformed body");
      return parsed;
    }
    std::string detail = res.body;
    json err = json::parse(res.body, nullptr, false);
    if (!err.is_discarded() && err.contains("error") && err["error"].is_object())
      detail = err["error"].value("message", res.body);
    last_error = name + " backend returned HTTP " + std::to_string(res.status) + ": " + detail;
    const bool transient = res.status >= 500 || res.status == 429 || res.status == 408;
    if (!transient) fail(ErrorKind::Transport, last_error);
  }
  fail(ErrorKind::Transport,
       last_error + " (after " + std::to_string(retries_ + 1) + " attempts)");
}

namespace {

void check_parts(const ChatRequest& req) {
  if (req.messages.empty()) fail(ErrorKind::Invalid, "chat request has no messages");
  req.sampling.validate();
  for (const auto& m : req.messages)
    for (const auto& p : m.parts)
      if (p.kind == ContentPart::Kind::Image && p.data.empty())
        fail(ErrorKind::Invalid, "empty image part");
}

}  // namespace

std::string BackendClient::text_generate(const ChatRequest& req) {
  check_parts(req);
  if (req.has_images()) fail(ErrorKind::Invalid, "text endpoint does not accept image parts");
  try {
    return decode_chat_response(call(Service::Text, encode(req)));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Parse) fail(ErrorKind::Protocol, e.what());
    throw;
  }
}

std::string BackendClient::vision_generate(const ChatRequest& req) {
  check_parts(req);
  try {
    return decode_chat_response(call(Service::Vision, encode(req)));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Parse) fail(ErrorKind::Protocol, e.what());
    throw;
  }
}

std::vector<Frame> BackendClient::render(RenderRequest req) {
  req.normalize();
  std::size_t expected = req.frames.size();
  int w = 0, h = 0;
  if (!req.frames.empty()) {
    Frame first = frame_from_base64(req.frames.front());
    w = first.width;
    h = first.height;
  } else {
    static const std::string scheme = "file://";
    if (req.frames_uri->rfind(scheme, 0) != 0)
      fail(ErrorKind::Invalid, "frames_uri must be a file:// URI");
    auto m = load_manifest(req.frames_uri->substr(scheme.size()));
    expected = static_cast<std::size_t>(m.frame_count);
    w = m.width;
    h = m.height;
  }
  json body = call(Service::Render, encode(req));
  std::vector<std::string> encoded;
  try {
    encoded = decode_render_response(body);
  } catch (const Error& e) {
    fail(ErrorKind::Protocol, e.what());
  }
  if (encoded.size() != expected)
    fail(ErrorKind::Protocol, "render backend returned " + std::to_string(encoded.size()) +
                                  " frames for " + std::to_string(expected) + " inputs");
  std::vector<Frame> out;
  out.reserve(encoded.size());
  for (std::size_t i = 0; i < encoded.size(); ++i) {
    Frame f;
    try {
      f = frame_from_base64(encoded[i]);
    } catch (const Error& e) {
      fail(ErrorKind::Protocol, "render frame " + std::to_string(i) + ": " + e.what());
    }
    if (f.width != w || f.height != h)
      fail(ErrorKind::Protocol, "render backend changed frame dimensions");
    f.index = static_cast<std::int64_t>(i);
    out.push_back(std::move(f));
  }
  return out;
}

std::vector<std::vector<double>> BackendClient::embed(const EmbedRequest& req) {
  if (req.items.empty()) fail(ErrorKind::Invalid, "embed request has no items");
  std::vector<std::vector<double>> vectors;
  try {
    vectors = decode_embed_response(call(Service::Embed, encode(req)));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Parse) fail(ErrorKind::Protocol, e.what());
    throw;
  }
  if (vectors.size() != req.items.size())
    fail(ErrorKind::Protocol, "embed backend returned the wrong number of vectors");
  for (auto& v : vectors) {
    if (v.empty() || v.size() != vectors.front().size())
      fail(ErrorKind::Protocol, "embedding dimension inconsistent within one response");
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (!(norm > 0)) fail(ErrorKind::Protocol, "embed backend returned a zero vector");
    if (std::abs(norm - 1.0) > 1e-6)
      for (double& x : v) x /= norm;
  }
  return vectors;
}

std::vector<std::vector<double>> BackendClient::embed_texts(const std::vector<std::string>& texts) {
  return embed({Modality::Text, texts});
}

std::vector<std::vector<double>> BackendClient::embed_frames(std::span<const Frame> frames) {
  EmbedRequest req{Modality::Image, {}};
  for (const auto& f : frames) req.items.push_back(frame_to_base64(f));
  return embed(req);
}

double BackendClient::score_frames(ScoreKind kind, std::span<const Frame> frames) {
  if (frames.empty()) fail(ErrorKind::Invalid, "score request has no frames");
  ScoreRequest req{kind, {}};
  for (const auto& f : frames) req.frames.push_back(frame_to_base64(f));
  double v = 0.0;
  try {
    v = decode_score_response(call(Service::Score, encode(req)));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Parse) fail(ErrorKind::Protocol, e.what());
    throw;
  }
  if (!(v >= 0.0 && v <= 1.0))
    fail(ErrorKind::Protocol, "score backend returned " + std::to_string(v) + " outside [0,1]");
  return v;
}

}  // namespace vstylist::backends
