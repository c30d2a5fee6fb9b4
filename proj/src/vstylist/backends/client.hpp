#pragma once

#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "vstylist/backends/protocol.hpp"

namespace vstylist::backends {

struct BackendEndpoints {
  std::string text_url;
  std::string vision_url;
  std::string render_url;
  std::string embed_url;
  std::string score_url;
  double timeout_s = 120.0;
  int retries = 2;
  int backoff_ms = 200;  // first retry delay, doubled each attempt
  std::string bearer_token;

  const std::string& url(Service s) const;
  std::string& url(Service s);
  void validate() const;
};

struct WireResponse {
  int status = 0;
  std::string body;
};

/// Moves request bodies to a service. Throws Error(Transport) when the
/// service cannot be reached at all; HTTP-level failures come back as status.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual WireResponse post(Service service, const std::string& body) = 0;
  virtual std::string describe(Service service) const = 0;
};

/// Keeps a pool of keep-alive connections per endpoint; concurrent callers
/// each check out their own connection.
class HttpTransport final : public Transport {
 public:
  explicit HttpTransport(BackendEndpoints endpoints);
  ~HttpTransport() override;
  WireResponse post(Service service, const std::string& body) override;
  std::string describe(Service service) const override;

 private:
  struct Pool;
  BackendEndpoints endpoints_;
  std::unique_ptr<Pool> pool_;
};

class MockService;

class InProcessTransport final : public Transport {
 public:
  explicit InProcessTransport(std::shared_ptr<const MockService> mock);
  WireResponse post(Service service, const std::string& body) override;
  std::string describe(Service service) const override;

 private:
  std::shared_ptr<const MockService> mock_;
};

struct CallRecord {
  Service service;
  std::string body;
};

class CallLog {
 public:
  void record(Service s, const std::string& body);
  std::vector<CallRecord> snapshot() const;
  std::size_t count(Service s) const;
  std::size_t size() const;
  void clear();

 private:
  mutable std::mutex mu_;
  std::vector<CallRecord> calls_;
};

/// Typed client over one transport. Safe for concurrent use; request bodies
/// are encoded once and resubmitted unchanged on retry.
class BackendClient {
 public:
  BackendClient(std::shared_ptr<Transport> transport, int retries, int backoff_ms);

  std::string text_generate(const ChatRequest& req);
  std::string vision_generate(const ChatRequest& req);
  std::vector<Frame> render(RenderRequest req);
  std::vector<std::vector<double>> embed(const EmbedRequest& req);
  std::vector<std::vector<double>> embed_texts(const std::vector<std::string>& texts);
  std::vector<std::vector<double>> embed_frames(std::span<const Frame> frames);
  double score_frames(ScoreKind kind, std::span<const Frame> frames);

  CallLog& log() { return log_; }
  const Transport& transport() const { return *transport_; }

 private:
  json call(Service service, const json& body);

  std::shared_ptr<Transport> transport_;
  int retries_;
  int backoff_ms_;
  CallLog log_;
};

}  // namespace vstylist::backends
