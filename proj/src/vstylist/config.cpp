#include "vstylist/config.hpp"

#include <cstdlib>
#include <set>

#include <toml++/toml.hpp>

#include "vstylist/error.hpp"

namespace vstylist {

EnvLookup process_env() {
  return [](const std::string& name) -> std::optional<std::string> {
    const char* v = std::getenv(name.c_str());
    if (!v) return std::nullopt;
    return std::string(v);
  };
}

fs::path default_data_dir() {
  if (const char* d = std::getenv("VSTYLIST_DATA_DIR"); d && *d) return fs::path(d);
  return fs::path(VSTYLIST_DATA_DIR);
}

const std::vector<std::pair<std::string, std::string>>& env_overrides() {
  static const std::vector<std::pair<std::string, std::string>> names = {
      {"VSTYLIST_BACKEND_MODE", "backends.mode"},   {"VSTYLIST_SCENARIO", "backends.scenario"},
      {"VSTYLIST_TEXT_URL", "backends.text_url"},   {"VSTYLIST_VISION_URL", "backends.vision_url"},
      {"VSTYLIST_RENDER_URL", "backends.render_url"}, {"VSTYLIST_EMBED_URL", "backends.embed_url"},
      {"VSTYLIST_SCORE_URL", "backends.score_url"}, {"VSTYLIST_STYLE_TREE", "paths.style_tree"},
      {"VSTYLIST_PROMPTS", "paths.prompts"}};
  return names;
}

namespace {

const std::set<std::string> kPathKeys = {"backends.scenario", "paths.style_tree", "paths.prompts"};

// Reads one table strictly: every key must be consumed.
class TableReader {
 public:
  TableReader(const json& root, std::string name) : name_(std::move(name)) {
    if (root.contains(name_)) {
      node_ = root[name_];
      if (!node_.is_object()) fail(ErrorKind::Invalid, "config: [" + name_ + "] must be a table");
    }
  }
  ~TableReader() noexcept(false) {
    if (std::uncaught_exceptions()) return;
    for (const auto& [k, _] : node_.items())
      if (!seen_.count(k)) fail(ErrorKind::Invalid, "config: unknown key " + name_ + "." + k);
  }

  template <class T>
  void get(const std::string& key, T& out) {
    seen_.insert(key);
    if (!node_.contains(key)) return;
    try {
      out = node_[key].get<T>();
    } catch (const json::exception&) {
      fail(ErrorKind::Invalid, "config: wrong type for " + name_ + "." + key);
    }
  }
  void get_path(const std::string& key, fs::path& out) {
    std::string s = out.string();
    get(key, s);
    out = s;
  }
  const json* raw(const std::string& key) {
    seen_.insert(key);
    return node_.contains(key) ? &node_[key] : nullptr;
  }

 private:
  std::string name_;
  json node_ = json::object();
  std::set<std::string> seen_;
};

json toml_to_json(const toml::node& node) {
  if (auto t = node.as_table()) {
    json j = json::object();
    for (const auto& [k, v] : *t) j[std::string(k.str())] = toml_to_json(v);
    return j;
  }
  if (auto a = node.as_array()) {
    json j = json::array();
    for (const auto& v : *a) j.push_back(toml_to_json(v));
    return j;
  }
  if (auto s = node.as_string()) return s->get();
  if (auto i = node.as_integer()) return i->get();
  if (auto f = node.as_floating_point()) return f->get();
  if (auto b = node.as_boolean()) return b->get();
  fail(ErrorKind::Invalid, "config: dates and times are not supported");
}

toml::table parse_toml(std::string_view text, const std::string& origin) {
  try {
    return toml::parse(text, origin);
  } catch (const toml::parse_error& e) {
    fail(ErrorKind::Invalid, origin + ": " + std::string(e.description()));
  }
}

void set_dotted(json& root, const std::string& dotted, json value) {
  json* node = &root;
  std::size_t pos = 0;
  while (true) {
    const auto dot = dotted.find('.', pos);
    const std::string part = dotted.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos);
    if (part.empty()) fail(ErrorKind::Invalid, "config: bad key '" + dotted + "'");
    if (dot == std::string::npos) {
      (*node)[part] = std::move(value);
      return;
    }
    if (!node->contains(part) || !(*node)[part].is_object()) (*node)[part] = json::object();
    node = &(*node)[part];
    pos = dot + 1;
  }
}

const json* get_dotted(const json& root, const std::string& dotted) {
  const json* node = &root;
  std::size_t pos = 0;
  while (true) {
    const auto dot = dotted.find('.', pos);
    const std::string part = dotted.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos);
    if (!node->is_object() || !node->contains(part)) return nullptr;
    node = &(*node)[part];
    if (dot == std::string::npos) return node;
    pos = dot + 1;
  }
}

void absolutize_paths(json& layer, const fs::path& base) {
  for (const auto& key : kPathKeys) {
    const json* v = get_dotted(layer, key);
    if (!v || !v->is_string() || v->get<std::string>().empty()) continue;
    fs::path p = v->get<std::string>();
    if (p.is_relative()) p = base / p;
    set_dotted(layer, key, fs::weakly_canonical(p).string());
  }
}

json parse_override_value(const std::string& key, const std::string& text) {
  if (kPathKeys.count(key)) return text;
  try {
    auto t = toml::parse("v = " + text);
    return toml_to_json(*t.get("v"));
  } catch (const toml::parse_error&) {
    return text;
  }
}

}  // namespace

void Config::validate() const {
  if (backend_mode != "mock" && backend_mode != "http")
    fail(ErrorKind::Invalid, "config: backends.mode must be \"mock\" or \"http\"");
  if (backend_mode == "http") endpoints.validate();
  if (!scenario.empty() && !fs::is_regular_file(scenario))
    fail(ErrorKind::Invalid, "config: scenario file not found: " + scenario.string());
  sampling.validate();
  detector.validate();
  reflection.validate();
  if (keyframes < 1 || keyframes > 3) fail(ErrorKind::Invalid, "config: pipeline.keyframes must be 1..3");
  if (max_parallel_shots < 1) fail(ErrorKind::Invalid, "config: pipeline.max_parallel_shots must be >= 1");
  if (clip_stride < 1) fail(ErrorKind::Invalid, "config: eval.clip_stride must be >= 1");
  if (!(ingest_fps > 0)) fail(ErrorKind::Invalid, "config: ingest.fps must be positive");
  if (trim(base_model).empty()) fail(ErrorKind::Invalid, "config: search.base_model is empty");
  if (!fs::is_regular_file(style_tree)) fail(ErrorKind::Invalid, "config: style tree not found: " + style_tree.string());
  if (!fs::is_regular_file(prompts)) fail(ErrorKind::Invalid, "config: prompt templates not found: " + prompts.string());
}

json Config::to_json() const {
  json sampling_j = {{"temperature", sampling.temperature},
                     {"top_p", sampling.top_p},
                     {"top_k", sampling.top_k},
                     {"max_tokens", sampling.max_tokens}};
  if (sampling.seed) sampling_j["seed"] = *sampling.seed;
  json render = {{"seed", render_seed}, {"extras", extras}};
  if (negative_prompt) render["negative_prompt"] = *negative_prompt;
  return {{"backends",
           {{"mode", backend_mode},
            {"scenario", scenario.string()},
            {"text_url", endpoints.text_url},
            {"vision_url", endpoints.vision_url},
            {"render_url", endpoints.render_url},
            {"embed_url", endpoints.embed_url},
            {"score_url", endpoints.score_url},
            {"timeout_s", endpoints.timeout_s},
            {"retries", endpoints.retries},
            {"backoff_ms", endpoints.backoff_ms}}},
          {"sampling", sampling_j},
          {"detector",
           {{"bins", detector.bins},
            {"window", detector.window},
            {"k_sigma", detector.k_sigma},
            {"abs_threshold", detector.abs_threshold},
            {"min_shot_len", detector.min_shot_len}}},
          {"reflection", reflection.to_json()},
          {"search", {{"base_model", base_model}, {"parallel_experts", parallel_experts}}},
          {"render", render},
          {"pipeline", {{"keyframes", keyframes}, {"max_parallel_shots", max_parallel_shots}, {"evaluate", evaluate}}},
          {"eval", {{"clip_stride", clip_stride}, {"exclude_boundaries", exclude_boundaries}}},
          {"ingest", {{"decoder", decoder_command}, {"fps", ingest_fps}}},
          {"paths", {{"style_tree", style_tree.string()}, {"prompts", prompts.string()}}}};
}

Config Config::from_json(const json& j) {
  if (!j.is_object()) fail(ErrorKind::Invalid, "config must be a table");
  static const std::set<std::string> tables = {"backends", "sampling", "detector", "reflection", "search",
                                               "render",   "pipeline", "eval",     "ingest",     "paths"};
  for (const auto& [k, _] : j.items())
    if (!tables.count(k)) fail(ErrorKind::Invalid, "config: unknown table [" + k + "]");
  Config c;
  {
    TableReader t(j, "backends");
    t.get("mode", c.backend_mode);
    t.get_path("scenario", c.scenario);
    t.get("text_url", c.endpoints.text_url);
    t.get("vision_url", c.endpoints.vision_url);
    t.get("render_url", c.endpoints.render_url);
    t.get("embed_url", c.endpoints.embed_url);
    t.get("score_url", c.endpoints.score_url);
    t.get("timeout_s", c.endpoints.timeout_s);
    t.get("retries", c.endpoints.retries);
    t.get("backoff_ms", c.endpoints.backoff_ms);
  }
  {
    TableReader t(j, "sampling");
    t.get("temperature", c.sampling.temperature);
    t.get("top_p", c.sampling.top_p);
    t.get("top_k", c.sampling.top_k);
    t.get("max_tokens", c.sampling.max_tokens);
    if (const json* s = t.raw("seed")) {
      if (!s->is_number_integer()) fail(ErrorKind::Invalid, "config: sampling.seed must be an integer");
      c.sampling.seed = s->get<std::int64_t>();
    }
  }
  {
    TableReader t(j, "detector");
    t.get("bins", c.detector.bins);
    t.get("window", c.detector.window);
    t.get("k_sigma", c.detector.k_sigma);
    t.get("abs_threshold", c.detector.abs_threshold);
    t.get("min_shot_len", c.detector.min_shot_len);
  }
  {
    TableReader t(j, "reflection");
    t.get("threshold", c.reflection.threshold);
    t.get("max_rounds", c.reflection.max_rounds);
    t.get("init_low", c.reflection.init_low);
    t.get("init_high", c.reflection.init_high);
    t.get("seed", c.reflection.seed);
    t.get("scorer_keyframes", c.reflection.scorer_keyframes);
  }
  {
    TableReader t(j, "search");
    t.get("base_model", c.base_model);
    t.get("parallel_experts", c.parallel_experts);
  }
  {
    TableReader t(j, "render");
    t.get("seed", c.render_seed);
    if (const json* n = t.raw("negative_prompt")) {
      if (!n->is_string()) fail(ErrorKind::Invalid, "config: render.negative_prompt must be a string");
      c.negative_prompt = n->get<std::string>();
    }
    if (const json* e = t.raw("extras")) {
      if (!e->is_object()) fail(ErrorKind::Invalid, "config: render.extras must be a table");
      for (const auto& [k, v] : e->items()) c.extras[k] = v.is_string() ? v.get<std::string>() : v.dump();
    }
  }
  {
    TableReader t(j, "pipeline");
    t.get("keyframes", c.keyframes);
    t.get("max_parallel_shots", c.max_parallel_shots);
    t.get("evaluate", c.evaluate);
  }
  {
    TableReader t(j, "eval");
    t.get("clip_stride", c.clip_stride);
    t.get("exclude_boundaries", c.exclude_boundaries);
  }
  {
    TableReader t(j, "ingest");
    t.get("decoder", c.decoder_command);
    t.get("fps", c.ingest_fps);
  }
  {
    TableReader t(j, "paths");
    t.get_path("style_tree", c.style_tree);
    t.get_path("prompts", c.prompts);
  }
  return c;
}

Config Config::resolve(const std::optional<fs::path>& file, const EnvLookup& env,
                       const std::vector<std::string>& overrides) {
  Config defaults;
  defaults.style_tree = default_data_dir() / "style_tree.json";
  defaults.prompts = default_data_dir() / "prompts.toml";
  defaults.sampling.seed = 0;
  json merged = defaults.to_json();

  if (file) {
    if (!fs::is_regular_file(*file)) fail(ErrorKind::Invalid, "config file not found: " + file->string());
    json layer = toml_to_json(parse_toml(read_text_file(*file), file->string()));
    absolutize_paths(layer, fs::absolute(*file).parent_path());
    merged.merge_patch(layer);
  }

  json env_layer = json::object();
  for (const auto& [name, key] : env_overrides())
    if (auto v = env(name)) set_dotted(env_layer, key, *v);
  absolutize_paths(env_layer, fs::current_path());
  merged.merge_patch(env_layer);

  json flag_layer = json::object();
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) fail(ErrorKind::Invalid, "override must be key=value: " + o);
    const std::string key = trim(o.substr(0, eq));
    set_dotted(flag_layer, key, parse_override_value(key, trim(o.substr(eq + 1))));
  }
  absolutize_paths(flag_layer, fs::current_path());
  merged.merge_patch(flag_layer);

  Config c = from_json(merged);
  if (auto token = env("VSTYLIST_BEARER_TOKEN")) c.endpoints.bearer_token = *token;
  c.validate();
  return c;
}

}  // namespace vstylist
