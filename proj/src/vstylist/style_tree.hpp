#pragma once

#include <optional>
#include <string>
#include <vector>

#include "vstylist/backends/client.hpp"
#include "vstylist/templates.hpp"
#include "vstylist/util.hpp"

namespace vstylist {

/// Marks URLs the shipped tree does not know; strict validation rejects them.
inline constexpr std::string_view kPlaceholderUrlPrefix = "placeholder:";
inline constexpr std::array<std::string_view, 2> kStyleClasses = {"Artistic", "Realistic"};

struct ModelCard {
  std::string name;
  std::string file;
  std::optional<std::string> url;
  std::string model_type;
  std::vector<std::string> tags;
  std::vector<std::string> trigger_words;
  std::string base_model;

  json to_json() const;
  static ModelCard from_json(const json& j);
  bool operator==(const ModelCard&) const = default;
};

/// Internal nodes (root, classes) hold `children`; style nodes hold `cards`.
struct StyleNode {
  std::string name;
  int level = 0;
  std::vector<StyleNode> children;
  std::vector<ModelCard> cards;

  bool operator==(const StyleNode&) const = default;
};

struct TreeStats {
  int classes = 0;
  int styles = 0;
  int cards = 0;
  int depth = 0;
};

class StyleTree {
 public:
  StyleTree() = default;

  /// Parses and validates; throws Error(Invalid) listing every violation.
  static StyleTree from_json(const json& doc, bool strict = false);
  static StyleTree load(const fs::path& path, bool strict = false);
  /// Parses without validating, for tools that report violations themselves.
  static StyleTree parse_unchecked(const json& doc);

  json to_json() const;
  void save(const fs::path& path) const;

  /// Empty means valid.
  std::vector<std::string> violations(bool strict = false) const;
  TreeStats stats() const;

  /// Child names of the node at `path` (card names at the style level).
  std::vector<std::string> children_of(const std::vector<std::string>& path) const;
  const ModelCard& card_at(const std::vector<std::string>& path) const;
  std::vector<const ModelCard*> all_cards() const;
  /// (class, style, card) for every card in traversal order.
  std::vector<std::array<std::string, 3>> card_paths() const;

  /// Returns a new tree with `card` appended under class/style, creating the
  /// style node if needed.
  StyleTree insert_model(const std::string& cls, const std::string& style, const ModelCard& card) const;

  const StyleNode& root() const { return root_; }
  const std::string& version() const { return version_; }

  bool operator==(const StyleTree&) const = default;

 private:
  StyleNode root_{"styles", 0, {}, {}};
  std::string version_ = "1.0";
};

/// Asks the text backend to place each card into a class/style and assembles
/// the resulting tree. Offline utility.
StyleTree build_tree_from_metadata(const std::vector<ModelCard>& cards,
                                   backends::BackendClient& text, const PromptTemplates& templates,
                                   const backends::SamplingParams& sampling);

}  // namespace vstylist
