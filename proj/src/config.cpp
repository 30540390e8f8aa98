#include "ida/config.hpp"

namespace ida::config {

json default_config() {
  return json{
      {"data_dir", IDA_DATA_DIR},
      {"index", "work/index.jsonl"},
      {"store", "work/store"},
      {"out_dir", "work/runs/default"},
      {"ingest", {{"root", ""}, {"layout", "domain_class"}, {"name", ""}, {"single_domain", ""}}},
      {"synth",
       {{"kind", "sdg"},
        {"root", "work/synth"},
        {"classes", json::array()},
        {"domains", json::array({"photo", "sketch"})},
        {"train_per_domain", 200},
        {"test_per_domain", 100},
        {"correlation", 0.95},
        {"seed", 7},
        {"side", 32}}},
      {"plan",
       {{"catalog", "pacs"},
        {"strategy", "M"},
        {"k", 1},
        {"mode", "sdg_one_per_target"},
        {"source_domain", ""},
        {"excluded_domains", json::array()},
        {"extra_target_domains", json::array()},
        {"split", "train"},
        {"seed", 0},
        {"le_pool", 8}}},
      {"generator",
       {{"backend", "stub"},
        {"url", ""},
        {"mode", "sdedit"},
        {"strength", genbackend::kDefaultStrength},
        {"guidance_scale", genbackend::kDefaultGuidanceScale},
        {"steps", genbackend::kDefaultSteps},
        {"timeout_s", 60.0},
        {"max_attempts", 3},
        {"max_concurrency", 4},
        {"workers", 1},
        {"side", 32}}},
      {"textgen", {{"backend", "stub"}, {"url", ""}, {"timeout_s", 30.0}}},
      {"embedder", {{"backend", "stub"}, {"url", ""}, {"dim", 256}, {"timeout_s", 30.0}}},
      {"filter", {{"fraction", 0.25}}},
      {"train",
       {{"epochs", 50},
        {"batch_size", 64},
        {"learning_rate", 0.1},
        {"seed", 0},
        {"image_side", 16},
        {"use_augmentations", true},
        {"filter_fraction", nullptr}}},
      {"rrsf", {{"kind", "background"}, {"k", 4}}},
      {"fid", {{"reference_domain", ""}, {"candidate_domain", ""}}},
      {"dedup", {{"threshold", 0.9}, {"test_split", "test"}}},
      {"seeds", json::array({0})},
      {"serve", {{"host", "127.0.0.1"}, {"port", 8080}, {"workspace", "work/workspace"}}},
  };
}

void merge(json& base, const json& patch, const std::string& where) {
  if (!patch.is_object()) throw Error(ErrorKind::kUsage, "config" + where + " must be an object");
  for (const auto& [key, value] : patch.items()) {
    const std::string path = where.empty() ? key : where + "." + key;
    if (!base.contains(key)) throw Error(ErrorKind::kUsage, "unknown config key: " + path);
    if (base[key].is_object() && value.is_object()) {
      merge(base[key], value, path);
    } else {
      base[key] = value;
    }
  }
}

void apply_override(json& cfg, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0)
    throw Error(ErrorKind::kUsage, "override must look like a.b=value: " + std::string(assignment));
  const std::string path(assignment.substr(0, eq));
  const std::string raw(assignment.substr(eq + 1));
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::exception&) {
    value = raw;
  }
  json* node = &cfg;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!node->is_object() || !node->contains(key)) throw Error(ErrorKind::kUsage, "unknown config key: " + path);
    if (dot == std::string::npos) {
      json& slot = (*node)[key];
      // Keep strings as strings even when they look like numbers.
      if (slot.is_string() && !value.is_string() && !value.is_null()) value = raw;
      slot = value;
      return;
    }
    node = &(*node)[key];
    start = dot + 1;
  }
}

json load(const std::optional<std::filesystem::path>& path, const std::vector<std::string>& overrides) {
  json cfg = default_config();
  if (path) merge(cfg, read_json(*path));
  for (const auto& o : overrides) apply_override(cfg, o);
  return cfg;
}

trainer::TrainConfig train_config(const json& cfg) {
  try {
    return trainer::TrainConfig::from_json(cfg.at("train"));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kUsage, std::string("train config: ") + e.what());
  }
}

pipeline::PregenerateOptions pregenerate_options(const json& cfg) {
  const json& g = cfg.at("generator");
  pipeline::PregenerateOptions o;
  try {
    o.mode = genbackend::parse_backend_mode(g.at("mode").get<std::string>());
    o.strength = g.at("strength").get<double>();
    o.guidance_scale = g.at("guidance_scale").get<double>();
    o.steps = g.at("steps").get<int>();
    o.workers = g.at("workers").get<int>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kUsage, std::string("generator config: ") + e.what());
  }
  return o;
}

prompts::PlanOptions plan_options(const json& cfg) {
  const json& p = cfg.at("plan");
  prompts::PlanOptions o;
  try {
    o.source_domain = p.at("source_domain").get<std::string>();
    o.strategy = prompts::parse_strategy(p.at("strategy").get<std::string>());
    o.k = p.at("k").get<std::size_t>();
    o.mode = prompts::parse_plan_mode(p.at("mode").get<std::string>());
    for (const auto& d : p.at("excluded_domains")) o.excluded_domains.insert(d.get<std::string>());
    for (const auto& d : p.at("extra_target_domains")) o.extra_target_domains.insert(d.get<std::string>());
    o.rng_seed = p.at("seed").get<std::uint64_t>();
    const std::string split = p.at("split").get<std::string>();
    if (split == "all") {
      o.split = std::nullopt;
    } else {
      o.split = corpus::parse_split(split);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kUsage, std::string("plan config: ") + e.what());
  }
  return o;
}

std::unique_ptr<genbackend::GeneratorBackend> make_generator(const json& cfg) {
  const json& g = cfg.at("generator");
  const std::string backend = g.at("backend").get<std::string>();
  if (backend == "stub") return std::make_unique<genbackend::StubGenerator>(g.at("side").get<int>());
  if (backend == "http") {
    genbackend::HttpGeneratorOptions o;
    o.base_url = g.at("url").get<std::string>();
    if (o.base_url.empty()) throw Error(ErrorKind::kUsage, "generator.url is required for the http backend");
    o.timeout_s = g.at("timeout_s").get<double>();
    o.max_attempts = g.at("max_attempts").get<int>();
    o.max_concurrency = g.at("max_concurrency").get<int>();
    return std::make_unique<genbackend::HttpGenerator>(o);
  }
  throw Error(ErrorKind::kUsage, "unknown generator backend: " + backend);
}

std::unique_ptr<prompts::TextGenBackend> make_textgen(const json& cfg) {
  const json& t = cfg.at("textgen");
  const std::string backend = t.at("backend").get<std::string>();
  if (backend == "stub") return std::make_unique<prompts::StubTextGen>();
  if (backend == "http") {
    if (t.at("url").get<std::string>().empty()) throw Error(ErrorKind::kUsage, "textgen.url is required");
    return std::make_unique<prompts::HttpTextGen>(t.at("url").get<std::string>(), t.at("timeout_s").get<double>());
  }
  throw Error(ErrorKind::kUsage, "unknown textgen backend: " + backend);
}

std::unique_ptr<filter::MultimodalEmbedder> make_embedder(const json& cfg) {
  const json& e = cfg.at("embedder");
  const std::string backend = e.at("backend").get<std::string>();
  if (backend == "stub") return std::make_unique<filter::StubEmbedder>();
  if (backend == "http") {
    if (e.at("url").get<std::string>().empty()) throw Error(ErrorKind::kUsage, "embedder.url is required");
    return std::make_unique<filter::HttpEmbedder>(e.at("url").get<std::string>(), e.at("dim").get<int>(),
                                                  e.at("timeout_s").get<double>());
  }
  throw Error(ErrorKind::kUsage, "unknown embedder backend: " + backend);
}

prompts::PromptCatalog load_catalog(const json& cfg) {
  const std::string name = cfg.at("plan").at("catalog").get<std::string>();
  std::filesystem::path p(name);
  if (p.extension() != ".json") p = std::filesystem::path(cfg.at("data_dir").get<std::string>()) / "prompts" / (name + ".json");
  auto catalog = prompts::PromptCatalog::load(p);
  catalog.validate();
  return catalog;
}

}  // namespace ida::config
