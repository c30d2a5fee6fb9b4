#include <doctest.h>

#include <regex>
#include <set>

#include "support.hpp"
#include "vstylist/error.hpp"
#include "vstylist/style_tree.hpp"

using namespace vstylist;
using testing::default_tree;
using testing::MockRig;

namespace {

ModelCard card(const std::string& file, const std::vector<std::string>& tags = {"artistic"}) {
  ModelCard c;
  c.name = c.file = file;
  c.model_type = "lora";
  c.tags = tags;
  c.base_model = "SD 1.5";
  return c;
}

json minimal_doc() {
  return json::parse(R"({"name": "styles", "version": "1.0", "children": [
    {"name": "Artistic", "children": [
      {"name": "pixel art style", "models": [
        {"name": "p.safetensors", "file": "p.safetensors", "model_type": "lora",
         "tags": ["pixel"], "trigger_words": ["pixel"], "base_model": "SD 1.5"}]}]}]})");
}

std::string regex_escape(const std::string& s) {
  static const std::regex special(R"([.^$|()\[\]{}*+?\\])");
  return std::regex_replace(s, special, R"(\$&)");
}

}  // namespace

TEST_CASE("shipped tree has the documented shape") {
  const auto& t = default_tree();
  auto s = t.stats();
  CHECK(s.classes == 2);
  CHECK(s.styles == 17);
  CHECK(s.cards == 25);
  CHECK(s.depth == 3);
  CHECK(t.violations().empty());
  CHECK(!t.violations(true).empty());
  CHECK(t.children_of({}) == std::vector<std::string>{"Artistic", "Realistic"});
  auto pixel = t.children_of({"Artistic", "pixel art style"});
  REQUIRE(!pixel.empty());
  CHECK(pixel.front() == "pixel_f2.safetensors");
  CHECK(t.card_at({"Realistic", "asian realistic style", "majicmixRealistic_v6.safetensors"}).base_model == "SD 1.5");
  CHECK_THROWS_AS(t.children_of({"Nope"}), Error);
  CHECK_THROWS_AS(t.card_at({"Artistic", "pixel art style"}), Error);
}

TEST_CASE("core styles are present") {
  std::set<std::string> styles;
  for (const auto& cls : default_tree().root().children)
    for (const auto& s : cls.children) styles.insert(to_lower(s.name));
  for (const char* name : {"pixel art style", "oil painting style", "expressionism style", "flat anime style",
                           "western anime style", "japanese anime style", "ukiyo-e style", "abstract art style",
                           "asian realistic style", "western realistic style", "photolistic style",
                           "claymation style", "minecraft style"})
    CHECK(styles.count(name) == 1);
}

TEST_CASE("minimal tree is valid and invariant violations are reported") {
  CHECK_NOTHROW(StyleTree::from_json(minimal_doc()));

  auto leafless = minimal_doc();
  leafless["children"][0]["children"][0]["models"] = json::array();
  CHECK_THROWS_AS(StyleTree::from_json(leafless), Error);

  auto dup = minimal_doc();
  auto style = dup["children"][0]["children"][0];
  style["name"] = "PIXEL ART STYLE";
  dup["children"][0]["children"].push_back(style);
  auto v = StyleTree::parse_unchecked(dup).violations();
  CHECK(v.size() >= 2);

  auto bad_class = minimal_doc();
  bad_class["children"][0]["name"] = "Abstract";
  CHECK_THROWS_AS(StyleTree::from_json(bad_class), Error);

  auto too_deep = minimal_doc();
  too_deep["children"][0]["children"][0]["children"] = json::array({minimal_doc()["children"][0]});
  CHECK_THROWS_AS(StyleTree::from_json(too_deep), Error);

  auto no_tags = minimal_doc();
  no_tags["children"][0]["children"][0]["models"][0]["tags"] = json::array();
  CHECK_THROWS_AS(StyleTree::from_json(no_tags), Error);

  CHECK_THROWS_AS(StyleTree::from_json(json::array()), Error);
}

TEST_CASE("insert_model") {
  const auto& t = default_tree();
  auto more = t.insert_model("Artistic", "pixel art style", card("pixel_new.safetensors"));
  CHECK(more.stats().cards == 26);
  CHECK(more.stats().styles == 17);
  CHECK(t.stats().cards == 25);
  CHECK_THROWS_AS(t.insert_model("Artistic", "pixel art style", card("pixel_f2.safetensors")), Error);
  CHECK_THROWS_AS(t.insert_model("Abstract", "x", card("x.safetensors")), Error);
  auto water = t.insert_model("Artistic", "watercolor", card("watercolor_v1.safetensors"));
  CHECK(water.stats().styles == 18);
  CHECK(water.children_of({"Artistic", "watercolor"}) == std::vector<std::string>{"watercolor_v1.safetensors"});
}

TEST_CASE("save and load round-trip after inserts") {
  testing::TempDir dir;
  std::mt19937_64 rng(5);
  StyleTree t = default_tree();
  for (int i = 0; i < 10; ++i) {
    const std::string cls(kStyleClasses[rng() % 2]);
    const std::string style = "style " + std::to_string(rng() % 4);
    t = t.insert_model(cls, style, card("extra_" + std::to_string(i) + ".safetensors"));
    t.save(dir / "tree.json");
    CHECK(StyleTree::load(dir / "tree.json") == t);
  }
}

TEST_CASE("traversal visits every card once and children are unique") {
  const auto& t = default_tree();
  auto paths = t.card_paths();
  CHECK(paths.size() == 25);
  std::set<std::string> files;
  for (const auto& p : paths) files.insert(t.card_at({p[0], p[1], p[2]}).file);
  CHECK(files.size() == 25);
  auto check_unique = [&](const std::vector<std::string>& path) {
    auto kids = t.children_of(path);
    std::set<std::string> lowered;
    for (const auto& k : kids) lowered.insert(to_lower(k));
    CHECK(lowered.size() == kids.size());
  };
  check_unique({});
  for (const auto& cls : t.children_of({})) {
    check_unique({cls});
    for (const auto& style : t.children_of({cls})) check_unique({cls, style});
  }
}

TEST_CASE("build_tree_from_metadata places scripted cards") {
  MockRig rig(json{{"rules",
                    {{{"task", "tree_assign"}, {"match", "\"file\":\"a\\.safetensors\""},
                      {"reply", {{"class", "Artistic"}, {"style", "pixel art style"}}}},
                     {{"task", "tree_assign"}, {"match", "\"file\":\"b\\.safetensors\""},
                      {"reply", {{"class", "Realistic"}, {"style", "asian realistic style"}}}}}}});
  auto t = build_tree_from_metadata({card("b.safetensors"), card("a.safetensors")}, *rig,
                                    testing::default_templates(), {});
  CHECK(t.stats().depth == 3);
  CHECK(t.stats().styles == 2);
  CHECK(t.children_of({}) == std::vector<std::string>{"Artistic", "Realistic"});
  CHECK_THROWS_AS(build_tree_from_metadata({}, *rig, testing::default_templates(), {}), Error);
}

TEST_CASE("build_tree_from_metadata rejects unknown classes and unparseable replies") {
  MockRig unknown(json{{"rules", {{{"task", "tree_assign"}, {"reply", {{"class", "Surreal"}, {"style", "x"}}}}}}});
  CHECK_THROWS_AS(build_tree_from_metadata({card("a.safetensors")}, *unknown, testing::default_templates(), {}),
                  Error);
  MockRig garbage(json{{"rules", {{{"task", "tree_assign"}, {"reply", "I am not sure"}}}}});
  CHECK_THROWS_AS(build_tree_from_metadata({card("a.safetensors")}, *garbage, testing::default_templates(), {}),
                  Error);
  CHECK(garbage->log().count(backends::Service::Text) == 3);
}

TEST_CASE("rebuilding the shipped cards with scripted answers reproduces the taxonomy") {
  const auto& shipped = default_tree();
  json rules = json::array();
  std::vector<ModelCard> cards;
  for (const auto& p : shipped.card_paths()) {
    const auto& c = shipped.card_at({p[0], p[1], p[2]});
    cards.push_back(c);
    rules.push_back({{"task", "tree_assign"},
                     {"match", "\"file\":\"" + regex_escape(c.file) + "\""},
                     {"reply", {{"class", p[0]}, {"style", p[1]}}}});
  }
  MockRig rig(json{{"rules", rules}});
  auto rebuilt = build_tree_from_metadata(cards, *rig, testing::default_templates(), {});
  CHECK(rebuilt.to_json() == shipped.to_json());
}
