#include "vstylist/templates.hpp"

#include <toml++/toml.hpp>

#include "vstylist/error.hpp"

namespace vstylist {

namespace {

std::string required(const toml::table& t, std::string_view table, std::string_view key,
                     const std::string& origin) {
  auto v = t[table][key].value<std::string>();
  if (!v) fail(ErrorKind::Parse, origin + ": missing template " + std::string(table) + "." + std::string(key));
  return *v;
}

ChatTemplate chat(const toml::table& t, std::string_view table, const std::string& origin,
                  bool has_retry) {
  ChatTemplate c;
  c.system = t[table]["system"].value_or(std::string());
  c.user = required(t, table, "user", origin);
  if (has_retry) c.retry = required(t, table, "retry", origin);
  return c;
}

json chat_json(const ChatTemplate& c) {
  return {{"system", c.system}, {"user", c.user}, {"retry", c.retry}};
}

ChatTemplate chat_from(const json& j) {
  return {j.at("system").get<std::string>(), j.at("user").get<std::string>(),
          j.at("retry").get<std::string>()};
}

}  // namespace

PromptTemplates PromptTemplates::from_toml_text(std::string_view text, const std::string& origin) {
  toml::table t;
  try {
    t = toml::parse(text, origin);
  } catch (const toml::parse_error& e) {
    fail(ErrorKind::Parse, origin + ": " + std::string(e.description()));
  }
  PromptTemplates p;
  p.captioner = chat(t, "captioner", origin, false);
  p.translator = chat(t, "translator", origin, false);
  p.identifier = chat(t, "identifier", origin, true);
  p.scorer = chat(t, "scorer", origin, true);
  p.refiner = chat(t, "refiner", origin, true);
  p.tree_builder = chat(t, "tree_builder", origin, true);
  p.expert = required(t, "searcher", "expert", origin);
  p.chairman = required(t, "searcher", "chairman", origin);
  p.chairman_retry = required(t, "searcher", "chairman_retry", origin);
  const toml::array* personas = t["searcher"]["personas"].as_array();
  if (!personas || personas->size() != kExpertCount)
    fail(ErrorKind::Parse, origin + ": searcher.personas must list exactly 5 experts");
  for (std::size_t i = 0; i < kExpertCount; ++i) {
    auto s = (*personas)[i].value<std::string>();
    if (!s) fail(ErrorKind::Parse, origin + ": persona entries must be strings");
    p.personas[i] = *s;
  }
  return p;
}

PromptTemplates PromptTemplates::load(const fs::path& path) {
  return from_toml_text(read_text_file(path), path.string());
}

json PromptTemplates::to_json() const {
  return {{"captioner", chat_json(captioner)},
          {"translator", chat_json(translator)},
          {"identifier", chat_json(identifier)},
          {"personas", personas},
          {"expert", expert},
          {"chairman", chairman},
          {"chairman_retry", chairman_retry},
          {"scorer", chat_json(scorer)},
          {"refiner", chat_json(refiner)},
          {"tree_builder", chat_json(tree_builder)}};
}

PromptTemplates PromptTemplates::from_json(const json& j) {
  PromptTemplates p;
  try {
    p.captioner = chat_from(j.at("captioner"));
    p.translator = chat_from(j.at("translator"));
    p.identifier = chat_from(j.at("identifier"));
    p.personas = j.at("personas").get<std::array<std::string, kExpertCount>>();
    p.expert = j.at("expert").get<std::string>();
    p.chairman = j.at("chairman").get<std::string>();
    p.chairman_retry = j.at("chairman_retry").get<std::string>();
    p.scorer = chat_from(j.at("scorer"));
    p.refiner = chat_from(j.at("refiner"));
    p.tree_builder = chat_from(j.at("tree_builder"));
  } catch (const json::exception& e) {
    fail(ErrorKind::Parse, std::string("templates snapshot: ") + e.what());
  }
  return p;
}

}  // namespace vstylist
