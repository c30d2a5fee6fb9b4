#include "vstylist/style_search.hpp"

#include <algorithm>
#include <future>

#include "vstylist/error.hpp"

namespace vstylist {

using namespace backends;

namespace {

const std::vector<std::string> kQueryKinds = {"prompt", "inspiration", "instruction", "hypothesis"};

std::string join(const std::vector<std::string>& items, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += sep;
    out += items[i];
  }
  return out;
}

ChatRequest single_turn(const std::string& system, const std::string& user, const SamplingParams& sampling,
                        std::string task, json context) {
  ChatRequest req;
  req.sampling = sampling;
  req.task = std::move(task);
  req.context = std::move(context);
  if (!system.empty()) req.messages.push_back({Role::System, {ContentPart::text(system)}});
  req.messages.push_back({Role::User, {ContentPart::text(user)}});
  return req;
}

json level_json(const LevelDecision& d) {
  json votes = json::array();
  for (const auto& v : d.votes)
    votes.push_back({{"reply", v.reply}, {"valid", v.match.has_value()}, {"match", v.match ? json(*v.match) : json()}});
  return {{"level", d.level},
          {"candidates", d.candidates},
          {"expert_votes", votes},
          {"chairman_pick", d.chairman_pick ? json(*d.chairman_pick) : json()},
          {"chairman_replies", d.chairman_replies},
          {"retries_used", d.retries_used},
          {"decided_by", d.decided_by}};
}

LevelDecision level_from(const json& j) {
  LevelDecision d;
  d.level = j.at("level").get<int>();
  d.candidates = j.at("candidates").get<std::vector<std::string>>();
  for (const auto& v : j.at("expert_votes")) {
    ExpertVote e{v.at("reply").get<std::string>(), std::nullopt};
    if (!v.at("match").is_null()) e.match = v["match"].get<std::string>();
    d.votes.push_back(e);
  }
  if (!j.at("chairman_pick").is_null()) d.chairman_pick = j["chairman_pick"].get<std::string>();
  d.chairman_replies = j.at("chairman_replies").get<std::vector<std::string>>();
  d.retries_used = j.at("retries_used").get<int>();
  d.decided_by = j.at("decided_by").get<std::string>();
  return d;
}

}  // namespace

json StyleDecision::to_json() const {
  json trace_json = json::array();
  for (const auto& d : trace) trace_json.push_back(level_json(d));
  return {{"resolution", {{"style", resolution.style}, {"query_kind", resolution.query_kind}}},
          {"path", path},
          {"card", card ? card->to_json() : json()},
          {"base_model_fallback", base_model_fallback},
          {"base_model", base_model},
          {"trace", trace_json},
          {"failed_level", failed_level ? level_json(*failed_level) : json()}};
}

StyleDecision StyleDecision::from_json(const json& j) {
  StyleDecision d;
  try {
    d.resolution.style = j.at("resolution").at("style").get<std::string>();
    d.resolution.query_kind = j.at("resolution").at("query_kind").get<std::string>();
    d.path = j.at("path").get<std::vector<std::string>>();
    if (!j.at("card").is_null()) d.card = ModelCard::from_json(j["card"]);
    d.base_model_fallback = j.at("base_model_fallback").get<bool>();
    d.base_model = j.at("base_model").get<std::string>();
    for (const auto& l : j.at("trace")) d.trace.push_back(level_from(l));
    if (!j.at("failed_level").is_null()) d.failed_level = level_from(j["failed_level"]);
  } catch (const json::exception& e) {
    fail(ErrorKind::Parse, std::string("style decision: ") + e.what());
  }
  return d;
}

std::optional<std::string> match_candidate(const std::string& reply,
                                           const std::vector<std::string>& candidates) {
  std::string r = trim(reply);
  // Strip wrapping quotes, trailing punctuation and markdown emphasis.
  auto strip = [](std::string s) {
    const std::string junk = "\"'`*.!:; ";
    while (!s.empty() && junk.find(s.front()) != std::string::npos) s.erase(s.begin());
    while (!s.empty() && junk.find(s.back()) != std::string::npos) s.pop_back();
    return s;
  };
  const std::string lowered = to_lower(r);
  const std::string stripped = to_lower(strip(r));
  for (const auto& c : candidates) {
    const std::string lc = to_lower(c);
    if (lowered == lc || stripped == lc) return c;
  }
  return std::nullopt;
}

StyleResolution identify_style(const std::string& query, BackendClient& text,
                               const PromptTemplates& templates, const SamplingParams& sampling) {
  if (trim(query).empty()) fail(ErrorKind::Invalid, "empty style query");
  for (int attempt = 0; attempt < 2; ++attempt) {
    const std::string& tmpl = attempt == 0 ? templates.identifier.user : templates.identifier.retry;
    auto req = single_turn(templates.identifier.system, fill_template(tmpl, {{"query", query}}), sampling,
                           "identify_style", {{"query", query}, {"attempt", attempt}});
    auto parsed = first_json_object(text.text_generate(req));
    if (!parsed || !parsed->contains("style") || !(*parsed)["style"].is_string()) continue;
    std::string style = trim((*parsed)["style"].get<std::string>());
    if (style.empty() || style.size() > kMaxStyleChars) continue;
    std::string kind = to_lower(trim(parsed->value("kind", std::string("prompt"))));
    if (std::find(kQueryKinds.begin(), kQueryKinds.end(), kind) == kQueryKinds.end()) kind = "prompt";
    return {style, kind};
  }
  fail(ErrorKind::Parse, "style identifier reply unparseable after retry");
}

ExpertVote expert_vote(const std::string& style, const std::vector<std::string>& candidates, int level,
                       int expert_id, BackendClient& text, const PromptTemplates& templates,
                       const SamplingParams& sampling) {
  if (candidates.empty()) fail(ErrorKind::Invalid, "expert_vote needs candidates");
  if (expert_id < 1 || expert_id > kExpertCount) fail(ErrorKind::Invalid, "expert id must be 1..5");
  SamplingParams s = sampling;
  s.seed = sampling.seed.value_or(0) + expert_id;
  const std::string user = fill_template(
      templates.expert, {{"persona", templates.personas[static_cast<std::size_t>(expert_id - 1)]},
                         {"style", style},
                         {"level", std::to_string(level)},
                         {"candidates", join(candidates, ", ")}});
  auto req = single_turn("", user, s, "expert_vote",
                         {{"style", style}, {"candidates", candidates}, {"level", level}, {"expert", expert_id}});
  std::string reply = trim(text.text_generate(req));
  return {reply, match_candidate(reply, candidates)};
}

LevelDecision chairman_decide(const std::string& style, int level, const std::vector<std::string>& candidates,
                              std::vector<ExpertVote> votes, BackendClient& text,
                              const PromptTemplates& templates, const SamplingParams& sampling) {
  if (votes.size() != kExpertCount) fail(ErrorKind::Invalid, "chairman needs exactly 5 recorded votes");
  LevelDecision d;
  d.level = level;
  d.candidates = candidates;
  d.votes = std::move(votes);
  std::vector<std::string> valid;
  for (const auto& v : d.votes)
    if (v.match) valid.push_back(*v.match);

  const std::string base = fill_template(templates.chairman, {{"style", style},
                                                              {"level", std::to_string(level)},
                                                              {"candidates", join(candidates, ", ")},
                                                              {"votes", json(valid).dump()}});
  for (int attempt = 0; attempt < 2; ++attempt) {
    std::string user = base;
    if (attempt > 0) user += "\n" + fill_template(templates.chairman_retry, {{"candidates", join(candidates, ", ")}});
    auto req = single_turn("", user, sampling, "chairman",
                           {{"style", style}, {"candidates", candidates}, {"votes", valid},
                            {"level", level}, {"attempt", attempt}});
    std::string reply = trim(text.text_generate(req));
    d.chairman_replies.push_back(reply);
    d.retries_used = attempt;
    if (auto pick = match_candidate(reply, candidates)) {
      d.chairman_pick = pick;
      d.decided_by = "chairman";
      return d;
    }
  }
  long best = 0;
  for (const auto& c : candidates) {
    long n = std::count(valid.begin(), valid.end(), c);
    if (n > best) {
      best = n;
      d.chairman_pick = c;
    }
  }
  d.decided_by = d.chairman_pick ? "majority" : "none";
  return d;
}

StyleDecision search_tree(const StyleResolution& resolution, const StyleTree& tree, BackendClient& text,
                          const PromptTemplates& templates, const SamplingParams& sampling,
                          const SearchOptions& options) {
  if (auto v = tree.violations(); !v.empty()) fail(ErrorKind::Invalid, "search_tree: invalid tree: " + v.front());
  StyleDecision decision;
  decision.resolution = resolution;
  decision.base_model = options.base_model;
  std::vector<std::string> path;
  for (int level = 1; level <= 3; ++level) {
    const auto candidates = tree.children_of(path);
    std::vector<ExpertVote> votes(kExpertCount);
    if (options.parallel_experts) {
      std::vector<std::future<ExpertVote>> pending;
      for (int e = 1; e <= kExpertCount; ++e)
        pending.push_back(std::async(std::launch::async, [&, e] {
          return expert_vote(resolution.style, candidates, level, e, text, templates, sampling);
        }));
      for (int e = 0; e < kExpertCount; ++e) votes[static_cast<std::size_t>(e)] = pending[static_cast<std::size_t>(e)].get();
    } else {
      for (int e = 1; e <= kExpertCount; ++e)
        votes[static_cast<std::size_t>(e - 1)] =
            expert_vote(resolution.style, candidates, level, e, text, templates, sampling);
    }
    LevelDecision d = chairman_decide(resolution.style, level, candidates, std::move(votes), text, templates, sampling);
    if (!d.chairman_pick) {
      decision.failed_level = std::move(d);
      decision.base_model_fallback = true;
      decision.path = path;
      return decision;
    }
    path.push_back(*d.chairman_pick);
    decision.trace.push_back(std::move(d));
  }
  decision.card = tree.card_at(path);
  path.pop_back();
  decision.path = path;
  return decision;
}

}  // namespace vstylist
