#include "ida/prompts.hpp"

#include <algorithm>
#include <cctype>

#include "ida/http.hpp"

namespace ida::prompts {

std::string_view strategy_name(Strategy s) {
  switch (s) {
    case Strategy::kMinimal: return "M";
    case Strategy::kHandcrafted: return "H";
    case Strategy::kLeConservative: return "LE_C";
    case Strategy::kLeModerate: return "LE_M";
  }
  return "M";
}

Strategy parse_strategy(std::string_view s) {
  const std::string u = to_lower(s);
  if (u == "m" || u == "minimal") return Strategy::kMinimal;
  if (u == "h" || u == "handcrafted") return Strategy::kHandcrafted;
  if (u == "le_c" || u == "lec") return Strategy::kLeConservative;
  if (u == "le_m" || u == "lem") return Strategy::kLeModerate;
  throw Error(ErrorKind::kUsage, "unknown prompting strategy: " + std::string(s));
}

std::size_t count_placeholders(std::string_view text) {
  std::size_t n = 0;
  for (auto pos = text.find(kClassPlaceholder); pos != std::string_view::npos;
       pos = text.find(kClassPlaceholder, pos + kClassPlaceholder.size()))
    ++n;
  return n;
}

std::optional<std::string> check_template(std::string_view text, bool attribute_only) {
  if (trim(text).empty()) return "template is empty";
  const std::size_t n = count_placeholders(text);
  if (n > 1) return "template has " + std::to_string(n) + " {CLASS} placeholders";
  if (n == 0 && !attribute_only) return "template has no {CLASS} placeholder";
  return std::nullopt;
}

std::string indefinite_article(std::string_view word) {
  static const std::set<std::string> kAn = {"hour", "hours", "honest", "honor", "honour", "heir", "herb"};
  static const std::set<std::string> kA = {"university", "unicorn", "unit", "uniform", "user", "useful",
                                           "european", "one", "once", "ukulele", "unicycle", "utensil"};
  const auto words = split_words(word);
  if (words.empty()) return "a";
  const std::string& w = words.front();
  if (kAn.count(w)) return "an";
  if (kA.count(w)) return "a";
  return std::string("aeiou").find(w.front()) != std::string::npos ? "an" : "a";
}

namespace {

std::string collapse_spaces(std::string_view s) {
  std::string out;
  bool space = false;
  for (char c : trim(s)) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      space = true;
      continue;
    }
    if (space && !out.empty()) out.push_back(' ');
    space = false;
    out.push_back(c);
  }
  return out;
}

bool follows_of(std::string_view before) {
  const std::string t = trim(before);
  return t.size() >= 2 && t.compare(t.size() - 2, 2, "of") == 0 &&
         (t.size() == 2 || std::isspace(static_cast<unsigned char>(t[t.size() - 3])));
}

std::string normalise_domain(std::string_view d) {
  std::string out = to_lower(trim(d));
  std::replace(out.begin(), out.end(), '_', ' ');
  return out;
}

}  // namespace

std::string render_template(std::string_view text, std::string_view class_label, bool article) {
  const auto pos = text.find(kClassPlaceholder);
  if (pos == std::string_view::npos) return collapse_spaces(text);
  std::string cls(class_label);
  std::replace(cls.begin(), cls.end(), '_', ' ');
  const std::string_view before = text.substr(0, pos);
  if (article && follows_of(before)) cls = indefinite_article(cls) + " " + cls;
  std::string out(before);
  out += cls;
  out += text.substr(pos + kClassPlaceholder.size());
  return collapse_spaces(out);
}

// ---- catalogs ------------------------------------------------------------------

PromptCatalog PromptCatalog::from_json(const json& j) {
  PromptCatalog c;
  try {
    c.name = j.at("name").get<std::string>();
    c.dataset = j.value("dataset", c.name);
    c.revision = j.value("revision", "1");
    c.article = j.value("article", false);
    c.strategies = j.at("strategies").get<decltype(c.strategies)>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kParse, std::string("catalog: ") + e.what());
  }
  for (const auto& [key, _] : c.strategies) {
    const auto s = parse_strategy(key);
    if (s != Strategy::kMinimal && s != Strategy::kHandcrafted)
      throw Error(ErrorKind::kParse, "catalog " + c.name + ": only M and H strategies hold templates");
  }
  c.validate();
  return c;
}

json PromptCatalog::to_json() const {
  return json{{"name", name}, {"dataset", dataset}, {"revision", revision}, {"article", article},
              {"strategies", strategies}};
}

PromptCatalog PromptCatalog::load(const std::filesystem::path& path) { return from_json(read_json(path)); }

void PromptCatalog::validate() const {
  std::string problems;
  for (const auto& [strategy, domains] : strategies) {
    for (const auto& [domain, templates] : domains) {
      if (trim(domain).empty()) problems += strategy + ": empty domain label; ";
      if (templates.empty()) problems += strategy + "/" + domain + ": no templates; ";
      // A domain whose templates carry no placeholder at all is an
      // attribute-only pool (texture, demographic); mixing is an error.
      const bool attribute_only = std::all_of(templates.begin(), templates.end(),
                                              [](const auto& t) { return count_placeholders(t) == 0; });
      for (const auto& t : templates)
        if (auto err = check_template(t, attribute_only))
          problems += strategy + "/" + domain + ": '" + t + "': " + *err + "; ";
    }
  }
  if (!problems.empty()) throw Error(ErrorKind::kParse, "catalog " + name + ": " + problems);
}

const std::vector<std::string>* PromptCatalog::templates(Strategy strategy, std::string_view domain) const {
  auto s = strategies.find(std::string(strategy_name(strategy)));
  if (s == strategies.end()) return nullptr;
  if (auto it = s->second.find(std::string(domain)); it != s->second.end()) return &it->second;
  const std::string want = normalise_domain(domain);
  for (const auto& [d, templates] : s->second)
    if (normalise_domain(d) == want) return &templates;
  return nullptr;
}

std::vector<std::string> PromptCatalog::domains(Strategy strategy) const {
  std::vector<std::string> out;
  auto s = strategies.find(std::string(strategy_name(strategy)));
  if (s == strategies.end()) return out;
  for (const auto& [d, _] : s->second) out.push_back(d);
  return out;
}

std::map<std::string, PromptCatalog> load_catalogs(const std::filesystem::path& dir) {
  std::map<std::string, PromptCatalog> out;
  if (!std::filesystem::is_directory(dir)) throw Error(ErrorKind::kIo, "no catalog directory " + dir.string());
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.path().extension() != ".json") continue;
    auto cat = PromptCatalog::load(entry.path());
    out.emplace(cat.name, std::move(cat));
  }
  return out;
}

// ---- prompts -------------------------------------------------------------------

json InterventionalPrompt::to_json() const {
  return json{{"id", id}, {"text", text}, {"target_domain", target_domain}, {"class_label", class_label},
              {"strategy", strategy_name(strategy)}};
}

InterventionalPrompt InterventionalPrompt::from_json(const json& j) {
  return InterventionalPrompt{j.at("id").get<std::string>(), j.at("text").get<std::string>(),
                              j.at("target_domain").get<std::string>(), j.at("class_label").get<std::string>(),
                              parse_strategy(j.at("strategy").get<std::string>())};
}

std::string prompt_id(std::string_view text, std::string_view target_domain) {
  return sha256_joined({text, target_domain}).substr(0, 16);
}

InterventionalPrompt make_prompt(std::string text, std::string target_domain, std::string class_label,
                                 Strategy strategy) {
  if (trim(text).empty()) throw Error(ErrorKind::kInvalidRequest, "empty prompt text");
  InterventionalPrompt p;
  p.id = prompt_id(text, target_domain);
  p.text = std::move(text);
  p.target_domain = std::move(target_domain);
  p.class_label = std::move(class_label);
  p.strategy = strategy;
  return p;
}

InterventionalPrompt render_minimal(std::string_view domain_label, std::string_view class_label,
                                    const PromptCatalog& catalog) {
  const auto* templates = catalog.templates(Strategy::kMinimal, domain_label);
  if (!templates || templates->empty())
    throw Error(ErrorKind::kMissingTemplate,
                "catalog " + catalog.name + " has no minimal template for '" + std::string(domain_label) + "'");
  return make_prompt(render_template(templates->front(), class_label, catalog.article), std::string(domain_label),
                     std::string(class_label), Strategy::kMinimal);
}

std::vector<InterventionalPrompt> expand_handcrafted(std::string_view domain_label, std::string_view class_label,
                                                     const PromptCatalog& catalog, std::size_t n) {
  const auto* templates = catalog.templates(Strategy::kHandcrafted, domain_label);
  if (!templates || templates->empty())
    throw Error(ErrorKind::kMissingTemplate,
                "catalog " + catalog.name + " has no hand-crafted templates for '" + std::string(domain_label) + "'");
  std::vector<InterventionalPrompt> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t round = i / templates->size();
    auto p = make_prompt(render_template((*templates)[i % templates->size()], class_label, catalog.article),
                         std::string(domain_label), std::string(class_label), Strategy::kHandcrafted);
    if (round > 0) p.id += "-c" + std::to_string(round);
    out.push_back(std::move(p));
  }
  return out;
}

// ---- language enhancement -------------------------------------------------------

json TextGenRequest::to_json() const {
  json j{{"input", input}, {"mode", mode}, {"n", n}};
  if (beam_width) j["beam_width"] = *beam_width;
  if (top_k) j["top_k"] = *top_k;
  if (top_p) j["top_p"] = *top_p;
  if (seed) j["seed"] = *seed;
  return j;
}

TextGenRequest TextGenRequest::from_json(const json& j) {
  TextGenRequest r;
  r.input = j.at("input").get<std::string>();
  r.mode = j.at("mode").get<std::string>();
  r.n = j.at("n").get<std::size_t>();
  if (j.contains("beam_width")) r.beam_width = j["beam_width"].get<std::size_t>();
  if (j.contains("top_k")) r.top_k = j["top_k"].get<int>();
  if (j.contains("top_p")) r.top_p = j["top_p"].get<double>();
  if (j.contains("seed")) r.seed = j["seed"].get<std::uint64_t>();
  return r;
}

std::vector<std::string> StubTextGen::generate_text(const TextGenRequest& request) {
  ++calls_;
  const auto words = split_words(request.input);
  if (words.empty()) throw Error(ErrorKind::kInvalidRequest, "empty text-generation input");
  // Last word is the class; the rest name the domain.
  const std::string cls = words.back();
  std::string domain;
  for (std::size_t i = 0; i + 1 < words.size(); ++i) domain += (domain.empty() ? "" : " ") + words[i];
  if (domain.empty()) domain = "picture";
  const std::string a_cls = indefinite_article(cls) + " " + cls;
  const std::vector<std::string> ranked = {
      indefinite_article(domain) + " " + domain + " of " + a_cls,
      a_cls + " in " + domain + " style",
      indefinite_article(domain) + " " + domain + " depicting " + a_cls,
      "a detailed " + domain + " of " + a_cls,
      a_cls + " drawn as " + indefinite_article(domain) + " " + domain,
      "a simple " + domain + " showing " + a_cls,
      "the " + cls + " rendered in " + domain,
      "an old " + domain + " of " + a_cls,
      a_cls + " seen in " + indefinite_article(domain) + " " + domain,
      "a colourful " + domain + " with " + a_cls,
      "a small " + cls + " in a " + domain,
      "a " + domain + " scene with " + a_cls,
  };
  std::vector<std::string> out;
  if (request.mode == "beam") {
    const std::size_t width = request.beam_width.value_or(request.n);
    const std::size_t take = std::min({request.n, width, ranked.size()});
    out.assign(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(take));
  } else if (request.mode == "sample") {
    Rng rng(mix_seed(request.seed.value_or(0), request.input));
    const std::size_t support =
        std::min<std::size_t>(ranked.size(), static_cast<std::size_t>(request.top_k.value_or(kLeTopK)));
    for (std::size_t i = 0; i < request.n; ++i) out.push_back(ranked[rng.uniform_index(support)]);
  } else {
    throw Error(ErrorKind::kInvalidRequest, "unknown text-generation mode: " + request.mode);
  }
  return out;
}

HttpTextGen::HttpTextGen(std::string base_url, double timeout_s)
    : base_url_(std::move(base_url)), timeout_s_(timeout_s) {}

std::vector<std::string> HttpTextGen::generate_text(const TextGenRequest& request) {
  json res = http_post_json(base_url_, "/generate-text", request.to_json(), timeout_s_);
  try {
    return res.at("texts").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kParse, std::string("/generate-text: ") + e.what());
  }
}

PartialResult::PartialResult(std::vector<InterventionalPrompt> obtained, std::size_t requested)
    : Error(ErrorKind::kPartialResult, "obtained " + std::to_string(obtained.size()) + " of " +
                                           std::to_string(requested) + " unique prompts"),
      obtained_(std::move(obtained)) {}

TextGenRequest le_request(std::string_view domain_label, std::string_view class_label, std::size_t n,
                          Strategy mode, std::uint64_t seed) {
  TextGenRequest r;
  r.input = std::string(domain_label) + " " + std::string(class_label);
  r.n = n;
  if (mode == Strategy::kLeConservative) {
    r.mode = "beam";
    r.beam_width = 4 * n;
  } else if (mode == Strategy::kLeModerate) {
    r.mode = "sample";
    r.top_k = kLeTopK;
    r.top_p = kLeTopP;
    r.seed = seed;
  } else {
    throw Error(ErrorKind::kUsage, "language enhancement needs LE_C or LE_M");
  }
  return r;
}

std::vector<InterventionalPrompt> generate_language_enhanced(std::string_view domain_label,
                                                             std::string_view class_label, std::size_t n,
                                                             Strategy mode, TextGenBackend& textgen,
                                                             std::uint64_t seed) {
  std::vector<InterventionalPrompt> out;
  std::set<std::string> seen;
  if (n == 0) return out;
  auto absorb = [&](const std::vector<std::string>& texts) {
    for (const auto& t : texts) {
      const std::string text = trim(t);
      if (text.empty() || out.size() >= n || !seen.insert(text).second) continue;
      out.push_back(make_prompt(text, std::string(domain_label), std::string(class_label), mode));
    }
  };
  absorb(textgen.generate_text(le_request(domain_label, class_label, n, mode, seed)));
  for (int attempt = 1; attempt <= kLeRetryCap && out.size() < n; ++attempt) {
    // Beam search is deterministic, so re-requests widen it; sampling
    // re-requests move to a derived seed.
    const std::size_t want = mode == Strategy::kLeConservative ? n + (n - out.size()) * attempt : n - out.size();
    absorb(textgen.generate_text(
        le_request(domain_label, class_label, want, mode, mix_seed(seed, static_cast<std::uint64_t>(attempt)))));
  }
  if (out.size() < n) throw PartialResult(std::move(out), n);
  return out;
}

// ---- plans ---------------------------------------------------------------------

std::string_view plan_mode_name(PlanMode m) {
  switch (m) {
    case PlanMode::kSdgOnePerTarget: return "sdg_one_per_target";
    case PlanMode::kSdgLeaveOneOut: return "sdg_leave_one_out";
    case PlanMode::kRrsfRandom: return "rrsf_random";
  }
  return "sdg_one_per_target";
}

PlanMode parse_plan_mode(std::string_view s) {
  for (auto m : {PlanMode::kSdgOnePerTarget, PlanMode::kSdgLeaveOneOut, PlanMode::kRrsfRandom})
    if (plan_mode_name(m) == s) return m;
  throw Error(ErrorKind::kUsage, "unknown plan mode: " + std::string(s));
}

std::size_t PromptPlan::total_pairs() const {
  std::size_t n = 0;
  for (const auto& [_, prompts] : assignments) n += prompts.size();
  return n;
}

std::string PromptPlan::serialize() const {
  json j{{"mode", plan_mode_name(mode)},
         {"strategy", strategy_name(strategy)},
         {"k", k},
         {"source_domain", source_domain},
         {"excluded_domains", excluded_domains},
         {"rng_seed", rng_seed}};
  json assigned = json::array();
  for (const auto& [source, prompts] : assignments) {
    json list = json::array();
    for (const auto& pp : prompts) list.push_back(json{{"prompt", pp.prompt.to_json()}, {"seed", pp.seed}});
    assigned.push_back(json{{"source_id", source}, {"prompts", list}});
  }
  j["assignments"] = assigned;
  return j.dump(1) + "\n";
}

PromptPlan PromptPlan::parse(std::string_view text) {
  PromptPlan plan;
  try {
    json j = json::parse(text);
    plan.mode = parse_plan_mode(j.at("mode").get<std::string>());
    plan.strategy = parse_strategy(j.at("strategy").get<std::string>());
    plan.k = j.at("k").get<std::size_t>();
    plan.source_domain = j.at("source_domain").get<std::string>();
    plan.excluded_domains = j.at("excluded_domains").get<std::set<std::string>>();
    plan.rng_seed = j.at("rng_seed").get<std::uint64_t>();
    for (const auto& a : j.at("assignments")) {
      auto& list = plan.assignments[a.at("source_id").get<std::string>()];
      for (const auto& pp : a.at("prompts"))
        list.push_back({InterventionalPrompt::from_json(pp.at("prompt")), pp.at("seed").get<std::uint64_t>()});
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kParse, std::string("plan: ") + e.what());
  }
  return plan;
}

PromptSource::PromptSource(PromptCatalog catalog, TextGenBackend* textgen, std::size_t le_pool)
    : catalog_(std::move(catalog)), textgen_(textgen), le_pool_(le_pool) {}

std::vector<InterventionalPrompt> PromptSource::candidates(std::string_view domain, std::string_view class_label,
                                                           Strategy strategy) {
  switch (strategy) {
    case Strategy::kMinimal:
      return {render_minimal(domain, class_label, catalog_)};
    case Strategy::kHandcrafted: {
      const auto* templates = catalog_.templates(Strategy::kHandcrafted, domain);
      return expand_handcrafted(domain, class_label, catalog_, templates ? templates->size() : 0);
    }
    case Strategy::kLeConservative:
    case Strategy::kLeModerate: {
      if (!textgen_) throw Error(ErrorKind::kBackendUnavailable, "no text generator configured");
      const std::string key = std::string(strategy_name(strategy)) + "|" + std::string(domain) + "|" +
                              std::string(class_label);
      auto it = le_cache_.find(key);
      if (it != le_cache_.end()) return it->second;
      std::vector<InterventionalPrompt> got;
      try {
        got = generate_language_enhanced(domain, class_label, le_pool_, strategy, *textgen_, fnv1a64(key));
      } catch (const PartialResult& partial) {
        if (partial.obtained().empty()) throw;
        got = partial.obtained();
      }
      return le_cache_.emplace(key, std::move(got)).first->second;
    }
  }
  return {};
}

std::vector<InterventionalPrompt> PromptSource::attribute_pool(std::string_view class_label, Strategy strategy) {
  std::vector<InterventionalPrompt> out;
  auto add = [&](const std::string& key, const std::vector<std::string>& templates) {
    for (const auto& t : templates)
      out.push_back(make_prompt(render_template(t, class_label, catalog_.article), key, std::string(class_label),
                                strategy));
  };
  if (const auto* by_class = catalog_.templates(strategy, class_label)) {
    add(std::string(class_label), *by_class);
    return out;
  }
  auto s = catalog_.strategies.find(std::string(strategy_name(strategy)));
  if (s == catalog_.strategies.end())
    throw Error(ErrorKind::kMissingTemplate,
                "catalog " + catalog_.name + " has no " + std::string(strategy_name(strategy)) + " templates");
  for (const auto& [key, templates] : s->second) add(key, templates);
  return out;
}

std::vector<std::string> eligible_targets(const corpus::DatasetIndex& index, const PlanOptions& options) {
  std::set<std::string> targets(index.domains.begin(), index.domains.end());
  targets.insert(options.extra_target_domains.begin(), options.extra_target_domains.end());
  targets.erase(options.source_domain);
  for (const auto& d : options.excluded_domains) targets.erase(d);
  return {targets.begin(), targets.end()};
}

PromptPlan build_plan(const corpus::DatasetIndex& index, const PlanOptions& options, PromptSource& source) {
  PromptPlan plan;
  plan.mode = options.mode;
  plan.strategy = options.strategy;
  plan.k = options.k;
  plan.source_domain = options.source_domain;
  plan.excluded_domains = options.excluded_domains;
  plan.rng_seed = options.rng_seed;
  if (options.k == 0) return plan;

  const auto samples = index.select(options.source_domain.empty()
                                        ? std::nullopt
                                        : std::optional<std::string_view>(options.source_domain),
                                    options.split);
  const bool sdg = options.mode != PlanMode::kRrsfRandom;
  const auto targets = sdg ? eligible_targets(index, options) : std::vector<std::string>{};
  if (sdg && options.k > targets.size())
    throw Error(ErrorKind::kPlanInfeasible, "k=" + std::to_string(options.k) + " exceeds " +
                                                std::to_string(targets.size()) + " eligible target domains");

  for (const auto* sample : samples) {
    // Per-sample stream: the plan for one sample does not depend on which
    // other samples are present.
    Rng rng(mix_seed(options.rng_seed, sample->id));
    auto& list = plan.assignments[sample->id];
    if (sdg) {
      std::vector<std::string> chosen = targets;
      if (options.k < chosen.size()) {
        rng.shuffle(chosen);
        chosen.resize(options.k);
        std::sort(chosen.begin(), chosen.end());
      }
      for (const auto& target : chosen) {
        auto pool = source.candidates(target, sample->class_label, options.strategy);
        if (pool.empty()) throw Error(ErrorKind::kMissingTemplate, "no prompts for " + target);
        list.push_back({pool[rng.uniform_index(pool.size())], rng.next_u64()});
      }
    } else {
      auto pool = source.attribute_pool(sample->class_label, options.strategy);
      if (pool.empty()) throw Error(ErrorKind::kMissingTemplate, "empty attribute pool");
      if (pool.size() >= options.k) {
        rng.shuffle(pool);
        for (std::size_t i = 0; i < options.k; ++i) list.push_back({pool[i], rng.next_u64()});
      } else {
        for (std::size_t i = 0; i < options.k; ++i)
          list.push_back({pool[rng.uniform_index(pool.size())], rng.next_u64()});
      }
    }
  }
  return plan;
}

}  // namespace ida::prompts
