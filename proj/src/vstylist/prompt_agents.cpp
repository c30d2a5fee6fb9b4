#include "vstylist/prompt_agents.hpp"

#include <set>

#include "vstylist/error.hpp"

namespace vstylist {

using namespace backends;

json prompts_to_json(std::span<const PromptRecord> records) {
  json arr = json::array();
  for (const auto& r : records)
    arr.push_back({{"shot_index", r.shot_index}, {"caption", r.caption}, {"prompt", r.prompt}});
  return arr;
}

std::vector<PromptRecord> prompts_from_json(const json& doc) {
  if (!doc.is_array()) fail(ErrorKind::Parse, "prompts document must be an array");
  std::vector<PromptRecord> out;
  try {
    for (const auto& r : doc)
      out.push_back({r.at("shot_index").get<int>(), r.value("caption", std::string()),
                     r.at("prompt").get<std::string>()});
  } catch (const json::exception& e) {
    fail(ErrorKind::Parse, std::string("prompts document: ") + e.what());
  }
  return out;
}

ShotCaption caption_shot(int shot_index, std::span<const Frame> keyframes, BackendClient& vision,
                         const PromptTemplates& templates, const SamplingParams& sampling) {
  if (keyframes.empty() || keyframes.size() > 3)
    fail(ErrorKind::Invalid, "caption_shot needs 1 to 3 keyframes");
  ChatRequest req;
  req.sampling = sampling;
  req.task = "caption";
  req.context = {{"shot_index", shot_index}};
  if (!templates.captioner.system.empty())
    req.messages.push_back({Role::System, {ContentPart::text(templates.captioner.system)}});
  ChatMessage user{Role::User, {}};
  for (const auto& f : keyframes) user.parts.push_back(ContentPart::image(f));
  user.parts.push_back(ContentPart::text(
      fill_template(templates.captioner.user, {{"count", std::to_string(keyframes.size())}})));
  req.messages.push_back(std::move(user));

  for (int attempt = 0; attempt < 2; ++attempt) {
    std::string caption = trim(vision.vision_generate(req));
    if (!caption.empty()) return {shot_index, caption};
  }
  fail(ErrorKind::Protocol, "captioner returned an empty caption for shot " + std::to_string(shot_index));
}

std::string clean_prompt(std::string_view raw) {
  std::string s;
  s.reserve(raw.size());
  for (char c : raw) {
    if (c == '\r') continue;
    if (c == '\n') {
      if (!s.empty() && s.back() != ' ' && s.back() != ',') s += ", ";
      else if (!s.empty() && s.back() == ',') s += ' ';
      continue;
    }
    s.push_back(c);
  }
  s = trim(s);
  if (s.size() > kMaxPromptChars) {
    std::size_t cut = s.rfind(',', kMaxPromptChars);
    s = cut == std::string::npos || cut == 0 ? s.substr(0, kMaxPromptChars) : s.substr(0, cut);
    s = trim(s);
  }
  while (!s.empty() && s.back() == ',') s = trim(s.substr(0, s.size() - 1));
  return s;
}

ShotPrompt translate_caption(const ShotCaption& caption, BackendClient& text,
                             const PromptTemplates& templates, const SamplingParams& sampling) {
  if (trim(caption.caption).empty()) fail(ErrorKind::Invalid, "empty caption");
  ChatRequest req;
  req.sampling = sampling;
  req.task = "translate";
  req.context = {{"shot_index", caption.shot_index}, {"caption", caption.caption}};
  if (!templates.translator.system.empty())
    req.messages.push_back({Role::System, {ContentPart::text(templates.translator.system)}});
  req.messages.push_back(
      {Role::User, {ContentPart::text(fill_template(templates.translator.user, {{"caption", caption.caption}}))}});
  for (int attempt = 0; attempt < 2; ++attempt) {
    std::string prompt = clean_prompt(text.text_generate(req));
    if (!prompt.empty()) return {caption.shot_index, prompt};
  }
  fail(ErrorKind::Protocol, "translator returned an empty prompt for shot " +
                                std::to_string(caption.shot_index));
}

std::string compose_render_prompt(const ShotPrompt& shot_prompt, const ModelCard* card,
                                  const std::string& style) {
  std::vector<std::string> pieces;
  if (card)
    for (const auto& t : card->trigger_words) pieces.push_back(t);
  pieces.push_back(style);
  // Split the shot prompt into its comma-separated tags.
  std::string tag;
  for (char c : shot_prompt.prompt + ",") {
    if (c == ',') {
      pieces.push_back(tag);
      tag.clear();
    } else {
      tag.push_back(c);
    }
  }
  std::set<std::string> seen;
  std::string out;
  for (const auto& p : pieces) {
    std::string t = trim(p);
    if (t.empty() || !seen.insert(to_lower(t)).second) continue;
    if (!out.empty()) out += ", ";
    out += t;
  }
  return out;
}

}  // namespace vstylist
