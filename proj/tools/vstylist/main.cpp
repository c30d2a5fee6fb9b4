#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "vstylist/vstylist.h"

using json = nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct Owned {
  char* p = nullptr;
  ~Owned() { vs_string_free(p); }
  json parse() const { return json::parse(p ? p : "null"); }
};

struct ConfigHandle {
  vs_config* p = nullptr;
  ~ConfigHandle() { vs_config_free(p); }
};

void progress_line(const char* line, void*) {
  std::cout << line << std::endl;
}

int report_error(const char* what, vs_status st) {
  std::cerr << "error: " << what << ": " << vs_last_error() << " [" << vs_status_name(st) << "]" << std::endl;
  return kExitRuntime;
}

bool write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) return false;
  out << content << '\n';
  return static_cast<bool>(out);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Shot-aware video stylization with agent-driven style selection and reflective rendering", "vstylist"};
  app.fallthrough();
  app.require_subcommand(0, 1);

  std::optional<std::string> config_path;
  std::vector<std::string> overrides;
  bool print_config = false;
  app.add_option("--config", config_path, "TOML configuration file")->check(CLI::ExistingFile);
  app.add_option("--set", overrides, "Override a configuration key, e.g. --set reflection.threshold=70");
  app.add_flag("--print-config", print_config, "Print the fully resolved configuration and exit");
  app.set_version_flag("--version", vs_version());

  std::string video, query, out;
  auto* stylize = app.add_subcommand("stylize", "Run the full stylization pipeline on a frame sequence");
  stylize->add_option("--video", video, "Frame directory (manifest.json or frame_%06d.png) or video file")->required();
  stylize->add_option("--query", query, "Style request, e.g. \"Pixel art style.\"")->required();
  stylize->add_option("--out", out, "Job directory to create")->required();

  std::string job;
  auto* resume = app.add_subcommand("resume", "Continue an interrupted job from its last checkpoint");
  resume->add_option("--job", job, "Job directory")->required()->check(CLI::ExistingDirectory);

  std::optional<std::string> tree_path;
  bool strict = false;
  auto* tree = app.add_subcommand("tree", "Style tree utilities");
  tree->require_subcommand(1);
  auto* tree_validate = tree->add_subcommand("validate", "Check the style tree and print its size");
  tree_validate->add_option("--tree", tree_path, "Style tree JSON (default: configured tree)");
  tree_validate->add_flag("--strict", strict, "Also reject placeholder download URLs");
  auto* tree_list = tree->add_subcommand("list", "List class / style / model rows");
  tree_list->add_option("--tree", tree_path, "Style tree JSON (default: configured tree)");
  std::string search_query;
  auto* tree_search = tree->add_subcommand("search", "Resolve a query to a style model");
  tree_search->add_option("--query", search_query, "Style request")->required();

  std::string source, stylized, prompts, eval_out;
  std::optional<std::string> style_words, shots_path, values_path;
  auto* eval = app.add_subcommand("eval", "Compute the eight benchmark metrics and their overall mean");
  auto* src_opt = eval->add_option("--source", source, "Source frame directory");
  auto* sty_opt = eval->add_option("--stylized", stylized, "Stylized frame directory");
  auto* prm_opt = eval->add_option("--prompts", prompts, "prompts.json with one prompt per shot");
  eval->add_option("--style", style_words, "Style words (default: style_decision.json beside --prompts)");
  eval->add_option("--shots", shots_path, "shots.json (default: detect on the source)");
  auto* val_opt = eval->add_option("--values", values_path, "JSON object with the eight metric values to aggregate");
  eval->add_option("--out", eval_out, "Report path")->required();
  val_opt->excludes(src_opt)->excludes(sty_opt)->excludes(prm_opt);

  int scenes = 3, frames_per_scene = 40, width = 64, height = 48;
  double fps = 30.0;
  std::uint64_t seed = 7;
  std::string fixture_out;
  auto* fixtures = app.add_subcommand("fixtures", "Synthetic test inputs");
  fixtures->require_subcommand(1);
  auto* synth = fixtures->add_subcommand("synth", "Generate a palette-separated multi-scene frame sequence");
  synth->add_option("--scenes", scenes, "Number of scenes")->check(CLI::Range(1, 1000));
  synth->add_option("--frames-per-scene", frames_per_scene, "Frames per scene")->check(CLI::Range(1, 100000));
  synth->add_option("--width", width, "Frame width")->check(CLI::Range(16, 8192));
  synth->add_option("--height", height, "Frame height")->check(CLI::Range(16, 8192));
  synth->add_option("--fps", fps, "Frame rate")->check(CLI::PositiveNumber);
  synth->add_option("--seed", seed, "Generator seed");
  synth->add_option("--out", fixture_out, "Output directory")->required();

  std::optional<std::string> scenario;
  std::string host = "127.0.0.1";
  int port = 0;
  auto* mock = app.add_subcommand("mock-server", "Serve the deterministic mock backends over HTTP");
  mock->add_option("--scenario", scenario, "Scenario JSON with scripted replies")->check(CLI::ExistingFile);
  mock->add_option("--host", host, "Bind address");
  mock->add_option("--port", port, "Port (0 picks a free one)")->check(CLI::Range(0, 65535));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  auto load_config = [&](ConfigHandle& cfg) {
    std::vector<const char*> ov;
    for (const auto& o : overrides) ov.push_back(o.c_str());
    vs_status st = vs_config_load(config_path ? config_path->c_str() : nullptr, ov.data(), ov.size(), &cfg.p);
    if (st != VS_OK) {
      std::cerr << "error: configuration: " << vs_last_error() << std::endl;
      return false;
    }
    return true;
  };

  if (print_config) {
    ConfigHandle cfg;
    if (!load_config(cfg)) return kExitUsage;
    Owned text;
    vs_config_to_json(cfg.p, &text.p);
    std::cout << text.p << std::endl;
    return kExitOk;
  }

  if (app.get_subcommands().empty()) {
    std::cerr << app.help() << std::endl;
    return kExitUsage;
  }

  if (stylize->parsed()) {
    ConfigHandle cfg;
    if (!load_config(cfg)) return kExitUsage;
    Owned result;
    vs_status st = vs_stylize(cfg.p, video.c_str(), query.c_str(), out.c_str(), progress_line, nullptr, &result.p);
    if (st == VS_ERR_STAGE) {
      const json r = result.parse();
      std::cerr << "error: stage " << r["failed"]["stage"].get<std::string>()
                << " failed: " << r["failed"]["reason"].get<std::string>() << std::endl;
      return kExitRuntime;
    }
    if (st == VS_ERR_INVALID && !result.p) {
      std::cerr << "error: " << vs_last_error() << std::endl;
      return kExitUsage;
    }
    if (st != VS_OK) return report_error("stylize", st);
    const json r = result.parse();
    if (r.contains("final")) std::cout << "final: " << r["final"].get<std::string>() << std::endl;
    if (r.contains("report")) std::cout << "report: " << r["report"].get<std::string>() << std::endl;
    return kExitOk;
  }

  if (resume->parsed()) {
    Owned result;
    vs_status st = vs_resume(job.c_str(), progress_line, nullptr, &result.p);
    if (st == VS_ERR_STAGE) {
      const json r = result.parse();
      std::cerr << "error: stage " << r["failed"]["stage"].get<std::string>()
                << " failed: " << r["failed"]["reason"].get<std::string>() << std::endl;
      return kExitRuntime;
    }
    if (st != VS_OK) return report_error("resume", st);
    const json r = result.parse();
    if (r.contains("report")) std::cout << "report: " << r["report"].get<std::string>() << std::endl;
    std::cout << "job " << r["job_dir"].get<std::string>() << " is " << r["stage"].get<std::string>() << std::endl;
    return kExitOk;
  }

  if (tree->parsed()) {
    ConfigHandle cfg;
    if (!load_config(cfg)) return kExitUsage;
    std::string path;
    if (tree_path) {
      path = *tree_path;
    } else {
      Owned snapshot;
      vs_config_to_json(cfg.p, &snapshot.p);
      path = snapshot.parse()["paths"]["style_tree"].get<std::string>();
    }
    if (tree_validate->parsed()) {
      Owned result;
      vs_status st = vs_tree_validate(path.c_str(), strict ? 1 : 0, &result.p);
      if (st != VS_OK) return report_error("tree validate", st);
      const json r = result.parse();
      if (!r["valid"].get<bool>()) {
        std::cerr << "invalid style tree " << path << ":" << std::endl;
        for (const auto& v : r["violations"]) std::cerr << "  - " << v.get<std::string>() << std::endl;
        return kExitRuntime;
      }
      std::cout << r["styles"] << " styles, " << r["models"] << " models, depth " << r["depth"] << std::endl;
      return kExitOk;
    }
    if (tree_list->parsed()) {
      Owned result;
      vs_status st = vs_tree_list(path.c_str(), &result.p);
      if (st != VS_OK) return report_error("tree list", st);
      for (const auto& row : result.parse())
        std::cout << row["class"].get<std::string>() << " / " << row["style"].get<std::string>() << " / "
                  << row["model"].get<std::string>() << std::endl;
      return kExitOk;
    }
    Owned result;
    vs_status st = vs_tree_search(cfg.p, search_query.c_str(), &result.p);
    if (st != VS_OK) return report_error("tree search", st);
    const json r = result.parse();
    std::cout << "style: " << r["resolution"]["style"].get<std::string>() << std::endl;
    std::string joined;
    for (const auto& p : r["path"]) joined += (joined.empty() ? "" : " / ") + p.get<std::string>();
    std::cout << "path: " << joined << std::endl;
    if (r["base_model_fallback"].get<bool>())
      std::cout << "model: base model " << r["base_model"].get<std::string>() << " (fallback)" << std::endl;
    else
      std::cout << "model: " << r["card"]["file"].get<std::string>() << std::endl;
    return kExitOk;
  }

  if (eval->parsed()) {
    Owned result;
    vs_status st;
    if (values_path) {
      std::ifstream in(*values_path);
      if (!in) {
        std::cerr << "error: cannot read " << *values_path << std::endl;
        return kExitUsage;
      }
      std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
      st = vs_eval_values(text.c_str(), &result.p);
      if (st == VS_ERR_INVALID) {
        std::cerr << "error: " << vs_last_error() << std::endl;
        return kExitUsage;
      }
    } else {
      if (source.empty() || stylized.empty() || prompts.empty()) {
        std::cerr << "error: eval needs --source, --stylized and --prompts (or --values)" << std::endl;
        return kExitUsage;
      }
      for (const auto* p : {&source, &stylized, &prompts}) {
        std::error_code ec;
        if (!std::filesystem::exists(*p, ec)) {
          std::cerr << "error: not found: " << *p << std::endl;
          return kExitUsage;
        }
      }
      ConfigHandle cfg;
      if (!load_config(cfg)) return kExitUsage;
      st = vs_eval(cfg.p, source.c_str(), stylized.c_str(), prompts.c_str(),
                   style_words ? style_words->c_str() : nullptr, shots_path ? shots_path->c_str() : nullptr,
                   &result.p);
    }
    if (st != VS_OK) return report_error("eval", st);
    if (!write_file(eval_out, result.p)) {
      std::cerr << "error: cannot write " << eval_out << std::endl;
      return kExitRuntime;
    }
    const json r = result.parse();
    std::cout << "overall: " << r["overall"].dump() << std::endl << "report: " << eval_out << std::endl;
    return kExitOk;
  }

  if (synth->parsed()) {
    Owned result;
    vs_status st = vs_fixtures_synth(scenes, frames_per_scene, width, height, fps, seed, fixture_out.c_str(), &result.p);
    if (st != VS_OK) return report_error("fixtures synth", st);
    const json r = result.parse();
    std::cout << r["scenes"].size() << " scenes, " << r["frame_count"] << " frames -> "
              << r["directory"].get<std::string>() << std::endl;
    return kExitOk;
  }

  if (mock->parsed()) {
    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set, nullptr);
    vs_mock_server* server = nullptr;
    vs_status st = vs_mock_server_start(scenario ? scenario->c_str() : nullptr, host.c_str(), port, &server);
    if (st != VS_OK) return report_error("mock-server", st);
    std::cout << "listening on http://" << host << ":" << vs_mock_server_port(server) << std::endl;
    int sig = 0;
    sigwait(&set, &sig);
    vs_mock_server_stop(server);
    vs_mock_server_free(server);
    return kExitOk;
  }

  std::cerr << app.help() << std::endl;
  return kExitUsage;
}
