#pragma once

#include <atomic>
#include <memory>
#include <optional>
#include <regex>
#include <string>
#include <thread>
#include <vector>

#include "vstylist/backends/client.hpp"
#include "vstylist/backends/protocol.hpp"

namespace vstylist::backends {

/// One scripted matcher. Empty filter fields match anything; the first rule
/// whose filters all match supplies the response.
struct ScenarioRule {
  std::optional<Service> endpoint;
  std::string task;
  std::string match_source;
  std::optional<std::regex> match;  // searched in the flattened request text
  std::string image_hash;           // prefix of any image's hash
  std::string kind;                 // score kind filter
  std::string modality;             // embed modality filter

  std::optional<std::string> reply;           // text/vision
  std::optional<double> score;                // score
  std::optional<std::vector<double>> vector;  // embed (per matching item)
  std::optional<int> render_frames;           // render: emit this many frames
  std::optional<int> status;                  // fault injection
  std::string message;
};

struct Scenario {
  std::vector<ScenarioRule> rules;
  std::vector<std::string> known_models;  // empty accepts any model file
  int embed_dimension = 64;

  static Scenario from_json(const json& doc);
  static Scenario load(const fs::path& path);
};

/// Deterministic stand-in for every model service: a pure function of the
/// request body and the scenario. Reentrant.
class MockService {
 public:
  explicit MockService(Scenario scenario = {});

  WireResponse handle(Service service, const std::string& body) const;
  const Scenario& scenario() const { return scenario_; }

 private:
  WireResponse chat(Service service, const json& body) const;
  WireResponse render(const json& body) const;
  WireResponse embed(const json& body) const;
  WireResponse score(const json& body) const;

  const ScenarioRule* find_rule(Service service, const std::string& task,
                                const std::string& flattened,
                                const std::vector<std::string>& image_hashes,
                                const std::string& kind, const std::string& modality) const;

  Scenario scenario_;
};

/// Default-behavior helpers, exposed for tests that reason about mock outputs.
Rgb mock_style_color(std::string_view model_key);
std::vector<double> mock_embedding(std::string_view key, int dimension);
int mock_style_score(double mean_weight);
double mock_refine_step(double weight);

/// Serves a MockService over HTTP on the five protocol endpoints plus /healthz.
class MockServer {
 public:
  explicit MockServer(std::shared_ptr<const MockService> mock);
  ~MockServer();
  MockServer(const MockServer&) = delete;
  MockServer& operator=(const MockServer&) = delete;

  /// Binds (port 0 picks a free port) and starts serving in the background.
  int start(const std::string& host = "127.0.0.1", int port = 0);
  void stop();
  /// Blocks until the server stops.
  void wait();
  int port() const { return port_; }
  std::string base_url() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::thread thread_;
  std::string host_;
  int port_ = 0;
};

}  // namespace vstylist::backends
