#include "vstylist/style_tree.hpp"

#include <algorithm>
#include <set>

#include "vstylist/error.hpp"

namespace vstylist {

json ModelCard::to_json() const {
  json j = {{"name", name},
            {"file", file},
            {"model_type", model_type},
            {"tags", tags},
            {"trigger_words", trigger_words},
            {"base_model", base_model}};
  if (url) j["url"] = *url;
  return j;
}

ModelCard ModelCard::from_json(const json& j) {
  ModelCard c;
  try {
    c.name = j.at("name").get<std::string>();
    c.file = j.value("file", c.name);
    if (j.contains("url") && !j["url"].is_null()) c.url = j["url"].get<std::string>();
    c.model_type = j.value("model_type", std::string());
    c.tags = j.value("tags", std::vector<std::string>{});
    c.trigger_words = j.value("trigger_words", std::vector<std::string>{});
    c.base_model = j.value("base_model", std::string());
  } catch (const json::exception& e) {
    fail(ErrorKind::Parse, std::string("model card: ") + e.what());
  }
  return c;
}

namespace {

StyleNode parse_node(const json& j, int level) {
  StyleNode n;
  n.level = level;
  try {
    n.name = j.at("name").get<std::string>();
    if (j.contains("children"))
      for (const auto& c : j["children"]) n.children.push_back(parse_node(c, level + 1));
    if (j.contains("models"))
      for (const auto& c : j["models"]) n.cards.push_back(ModelCard::from_json(c));
  } catch (const json::exception& e) {
    fail(ErrorKind::Parse, std::string("style tree node: ") + e.what());
  }
  return n;
}

json node_json(const StyleNode& n) {
  json j = {{"name", n.name}};
  if (!n.cards.empty() || n.level == 2) {
    json models = json::array();
    for (const auto& c : n.cards) models.push_back(c.to_json());
    j["models"] = std::move(models);
  }
  if (!n.children.empty() || n.level < 2) {
    json children = json::array();
    for (const auto& c : n.children) children.push_back(node_json(c));
    j["children"] = std::move(children);
  }
  return j;
}

template <class T, class NameOf>
void check_unique(const std::vector<T>& items, NameOf name_of, const std::string& where,
                  std::vector<std::string>& out) {
  std::set<std::string> seen;
  for (const auto& item : items)
    if (!seen.insert(to_lower(name_of(item))).second)
      out.push_back("duplicate sibling name '" + name_of(item) + "' under " + where);
}

const StyleNode* child_named(const StyleNode& node, const std::string& name) {
  for (const auto& c : node.children)
    if (c.name == name) return &c;
  for (const auto& c : node.children)
    if (to_lower(c.name) == to_lower(name)) return &c;
  return nullptr;
}

}  // namespace

StyleTree StyleTree::parse_unchecked(const json& doc) {
  StyleTree t;
  if (!doc.is_object()) fail(ErrorKind::Parse, "style tree must be a JSON object");
  t.version_ = doc.value("version", std::string("1.0"));
  t.root_ = parse_node(doc, 0);
  return t;
}

StyleTree StyleTree::from_json(const json& doc, bool strict) {
  StyleTree t = parse_unchecked(doc);
  auto v = t.violations(strict);
  if (!v.empty()) {
    std::string msg = "invalid style tree:";
    for (const auto& s : v) msg += "\n  - " + s;
    fail(ErrorKind::Invalid, msg);
  }
  return t;
}

StyleTree StyleTree::load(const fs::path& path, bool strict) {
  try {
    return from_json(read_json_file(path), strict);
  } catch (const Error& e) {
    fail(e.kind(), path.string() + ": " + e.what());
  }
}

json StyleTree::to_json() const {
  json j = node_json(root_);
  j["version"] = version_;
  return j;
}

void StyleTree::save(const fs::path& path) const { write_json_file(path, to_json()); }

std::vector<std::string> StyleTree::violations(bool strict) const {
  std::vector<std::string> out;
  if (root_.name != "styles") out.push_back("root must be named 'styles', found '" + root_.name + "'");
  if (!root_.cards.empty()) out.push_back("wrong depth: root holds model cards");
  if (root_.children.empty()) out.push_back("tree has no classes");
  check_unique(root_.children, [](const StyleNode& n) { return n.name; }, "root", out);
  std::set<std::string> files;
  int total_cards = 0;
  for (const auto& cls : root_.children) {
    if (std::find(kStyleClasses.begin(), kStyleClasses.end(), cls.name) == kStyleClasses.end())
      out.push_back("unknown class '" + cls.name + "' (expected Artistic or Realistic)");
    if (!cls.cards.empty()) out.push_back("wrong depth: class '" + cls.name + "' holds model cards");
    if (cls.children.empty()) out.push_back("wrong depth: class '" + cls.name + "' has no styles");
    check_unique(cls.children, [](const StyleNode& n) { return n.name; }, cls.name, out);
    for (const auto& style : cls.children) {
      const std::string where = cls.name + "/" + style.name;
      if (style.name.empty()) out.push_back("empty style name under " + cls.name);
      if (!style.children.empty()) out.push_back("wrong depth: style '" + where + "' has child nodes");
      if (style.cards.empty()) out.push_back("leafless style '" + where + "'");
      check_unique(style.cards, [](const ModelCard& c) { return c.name; }, where, out);
      for (const auto& card : style.cards) {
        ++total_cards;
        if (card.file.empty()) out.push_back("card '" + card.name + "' in " + where + " has no file");
        else if (!files.insert(card.file).second)
          out.push_back("duplicate model file '" + card.file + "'");
        if (card.tags.empty()) out.push_back("card '" + card.name + "' has no tags");
        if (strict && (!card.url || card.url->rfind(kPlaceholderUrlPrefix, 0) == 0))
          out.push_back("card '" + card.name + "' has a placeholder URL (strict mode)");
      }
    }
  }
  if (total_cards == 0 && !root_.children.empty()) out.push_back("tree has no model cards");
  return out;
}

TreeStats StyleTree::stats() const {
  TreeStats s;
  s.classes = static_cast<int>(root_.children.size());
  for (const auto& cls : root_.children) {
    s.styles += static_cast<int>(cls.children.size());
    for (const auto& style : cls.children) s.cards += static_cast<int>(style.cards.size());
  }
  s.depth = s.cards > 0 ? 3 : (s.styles > 0 ? 2 : (s.classes > 0 ? 1 : 0));
  return s;
}

std::vector<std::string> StyleTree::children_of(const std::vector<std::string>& path) const {
  const StyleNode* node = &root_;
  std::string walked;
  for (const auto& name : path) {
    walked += "/" + name;
    node = child_named(*node, name);
    if (!node) fail(ErrorKind::Invalid, "no style tree node at " + walked);
  }
  std::vector<std::string> out;
  if (!node->children.empty()) {
    for (const auto& c : node->children) out.push_back(c.name);
  } else if (!node->cards.empty()) {
    for (const auto& c : node->cards) out.push_back(c.name);
  } else {
    fail(ErrorKind::Invalid, "style tree node " + (walked.empty() ? "/" : walked) + " has no children");
  }
  return out;
}

const ModelCard& StyleTree::card_at(const std::vector<std::string>& path) const {
  if (path.size() != 3) fail(ErrorKind::Invalid, "card path must be class/style/card");
  const StyleNode* cls = child_named(root_, path[0]);
  const StyleNode* style = cls ? child_named(*cls, path[1]) : nullptr;
  if (style)
    for (const auto& c : style->cards)
      if (to_lower(c.name) == to_lower(path[2])) return c;
  fail(ErrorKind::Invalid, "no model card at " + path[0] + "/" + path[1] + "/" + path[2]);
}

std::vector<const ModelCard*> StyleTree::all_cards() const {
  std::vector<const ModelCard*> out;
  for (const auto& cls : root_.children)
    for (const auto& style : cls.children)
      for (const auto& c : style.cards) out.push_back(&c);
  return out;
}

std::vector<std::array<std::string, 3>> StyleTree::card_paths() const {
  std::vector<std::array<std::string, 3>> out;
  for (const auto& cls : root_.children)
    for (const auto& style : cls.children)
      for (const auto& c : style.cards) out.push_back({cls.name, style.name, c.name});
  return out;
}

StyleTree StyleTree::insert_model(const std::string& cls, const std::string& style,
                                  const ModelCard& card) const {
  if (std::find(kStyleClasses.begin(), kStyleClasses.end(), cls) == kStyleClasses.end())
    fail(ErrorKind::Invalid, "unknown class '" + cls + "'");
  for (const auto* c : all_cards())
    if (c->file == card.file) fail(ErrorKind::Invalid, "duplicate model file '" + card.file + "'");
  StyleTree next = *this;
  auto cls_it = std::find_if(next.root_.children.begin(), next.root_.children.end(),
                             [&](const StyleNode& n) { return n.name == cls; });
  if (cls_it == next.root_.children.end()) {
    next.root_.children.push_back({cls, 1, {}, {}});
    cls_it = std::prev(next.root_.children.end());
  }
  auto style_it = std::find_if(cls_it->children.begin(), cls_it->children.end(),
                               [&](const StyleNode& n) { return to_lower(n.name) == to_lower(style); });
  if (style_it == cls_it->children.end()) {
    cls_it->children.push_back({style, 2, {}, {}});
    style_it = std::prev(cls_it->children.end());
  }
  style_it->cards.push_back(card);
  auto v = next.violations();
  if (!v.empty()) fail(ErrorKind::Invalid, "insert_model breaks the tree: " + v.front());
  return next;
}

StyleTree build_tree_from_metadata(const std::vector<ModelCard>& cards,
                                   backends::BackendClient& text, const PromptTemplates& templates,
                                   const backends::SamplingParams& sampling) {
  using namespace backends;
  if (cards.empty()) fail(ErrorKind::Invalid, "build_tree_from_metadata: no cards");
  const std::string classes = "Artistic, Realistic";
  StyleTree tree;
  // Classes keep canonical order regardless of which card arrives first.
  std::vector<std::pair<std::string, std::pair<std::string, ModelCard>>> placed;
  for (const auto& card : cards) {
    std::optional<json> answer;
    const std::string card_text = card.to_json().dump();
    for (int attempt = 0; attempt < 3 && !answer; ++attempt) {
      ChatRequest req;
      req.sampling = sampling;
      req.task = "tree_assign";
      req.context = {{"card", card.to_json()}, {"attempt", attempt}};
      if (!templates.tree_builder.system.empty())
        req.messages.push_back({Role::System, {ContentPart::text(templates.tree_builder.system)}});
      const std::string& tmpl = attempt == 0 ? templates.tree_builder.user : templates.tree_builder.retry;
      req.messages.push_back(
          {Role::User, {ContentPart::text(fill_template(tmpl, {{"card", card_text}, {"classes", classes}}))}});
      auto parsed = first_json_object(text.text_generate(req));
      if (parsed && parsed->contains("class") && parsed->contains("style") &&
          (*parsed)["class"].is_string() && (*parsed)["style"].is_string() &&
          !trim((*parsed)["style"].get<std::string>()).empty())
        answer = parsed;
    }
    if (!answer)
      fail(ErrorKind::Parse, "no parseable class/style assignment for card '" + card.name + "' after 2 retries");
    const std::string cls = trim((*answer)["class"].get<std::string>());
    if (std::find(kStyleClasses.begin(), kStyleClasses.end(), cls) == kStyleClasses.end())
      fail(ErrorKind::Invalid, "card '" + card.name + "' assigned to unknown class '" + cls + "'");
    placed.push_back({cls, {trim((*answer)["style"].get<std::string>()), card}});
  }
  for (auto cls : kStyleClasses)
    for (const auto& [c, rest] : placed)
      if (c == cls) tree = tree.insert_model(c, rest.first, rest.second);
  return tree;
}

}  // namespace vstylist
