#include "ida/cli.hpp"

#include <csignal>
#include <iomanip>
#include <sstream>

#include "CLI11.hpp"
#include "ida/config.hpp"
#include "ida/corpus.hpp"
#include "ida/filter.hpp"
#include "ida/metrics.hpp"
#include "ida/pipeline.hpp"
#include "ida/prompts.hpp"
#include "ida/service.hpp"
#include "ida/synth.hpp"
#include "ida/trainer.hpp"

namespace ida::cli {

namespace fs = std::filesystem;

namespace {

// Flag values become dotted-path overrides applied after --set.
struct Overrides {
  std::vector<std::string> items;
  void add(const std::string& path, const json& value) { items.push_back(path + "=" + value.dump()); }
};

template <typename T>
void bind(CLI::App* app, const std::string& flag, const std::string& path, Overrides& ov, const std::string& help) {
  app->add_option_function<T>(flag, [&ov, path](const T& v) { ov.add(path, json(v)); }, help);
}

struct Context {
  json cfg;
  std::ostream& out;
  std::ostream& err;

  fs::path out_dir() const {
    fs::path d = cfg.at("out_dir").get<std::string>();
    fs::create_directories(d);
    return d;
  }
  corpus::DatasetIndex index() const { return corpus::DatasetIndex::load(cfg.at("index").get<std::string>()); }
  corpus::AugmentationStore store() const { return corpus::AugmentationStore::open(cfg.at("store").get<std::string>()); }
  void print(const json& j) const { out << j.dump(2) << "\n"; }
  void snapshot(const std::string& stage) const { write_json(out_dir() / (stage + "-config.json"), cfg); }
};

void cmd_ingest(Context& c) {
  const json& in = c.cfg.at("ingest");
  const std::string root = in.at("root").get<std::string>();
  if (root.empty()) throw Error(ErrorKind::kUsage, "ingest needs --root");
  corpus::IngestOptions o;
  o.layout = corpus::parse_layout(in.at("layout").get<std::string>());
  o.name = in.at("name").get<std::string>();
  o.single_domain = in.at("single_domain").get<std::string>();
  const auto result = corpus::ingest_directory(root, o);
  const fs::path index_path = c.cfg.at("index").get<std::string>();
  result.index.save(index_path);
  std::string rejects;
  for (const auto& r : result.rejects) {
    rejects += to_line({{"path", r.path}, {"reason", r.reason}}) + "\n";
    c.err << "rejected " << r.path << ": " << r.reason << "\n";
  }
  write_text_atomic(fs::path(index_path).replace_filename("ingest-rejects.jsonl"), rejects);
  c.print({{"index", index_path.string()},
           {"name", result.index.name},
           {"samples", result.index.samples.size()},
           {"domains", result.index.domains},
           {"classes", result.index.classes},
           {"rejected", result.rejects.size()}});
}

void cmd_synth(Context& c) {
  const json& s = c.cfg.at("synth");
  synth::DatasetSpec spec;
  spec.kind = synth::parse_kind(s.at("kind").get<std::string>());
  auto classes = s.at("classes").get<std::vector<std::string>>();
  if (classes.empty() && spec.kind == synth::Kind::kDemographic) classes = {"blonde", "non-blonde"};
  if (!classes.empty()) spec.classes = classes;
  spec.domains = s.at("domains").get<std::vector<std::string>>();
  spec.train_per_domain = s.at("train_per_domain").get<int>();
  spec.test_per_domain = s.at("test_per_domain").get<int>();
  spec.correlation = s.at("correlation").get<double>();
  spec.seed = s.at("seed").get<std::uint64_t>();
  spec.side = s.at("side").get<int>();
  const auto written = synth::write_dataset(s.at("root").get<std::string>(), spec);
  c.print({{"root", written.root.string()}, {"images", written.images}, {"kind", synth::kind_name(spec.kind)}});
}

struct PromptArgs {
  std::string domain, cls, mode = "LE_C";
  std::size_t n = 1;
  std::uint64_t seed = 0;
};

void cmd_prompts(Context& c, const std::string& action, const PromptArgs& a) {
  if (a.domain.empty() || a.cls.empty()) throw Error(ErrorKind::kUsage, "prompts needs --domain and --class");
  const auto catalog = config::load_catalog(c.cfg);
  std::vector<prompts::InterventionalPrompt> out;
  if (action == "render") {
    out.push_back(prompts::render_minimal(a.domain, a.cls, catalog));
  } else if (action == "expand") {
    out = prompts::expand_handcrafted(a.domain, a.cls, catalog, a.n);
  } else {
    auto textgen = config::make_textgen(c.cfg);
    const auto mode = prompts::parse_strategy(a.mode);
    if (mode != prompts::Strategy::kLeConservative && mode != prompts::Strategy::kLeModerate)
      throw Error(ErrorKind::kUsage, "--mode must be LE_C or LE_M");
    try {
      out = prompts::generate_language_enhanced(a.domain, a.cls, a.n, mode, *textgen, a.seed);
    } catch (const prompts::PartialResult& e) {
      for (const auto& p : e.obtained()) c.out << to_line(p.to_json()) << "\n";
      throw;
    }
  }
  for (const auto& p : out) c.out << to_line(p.to_json()) << "\n";
}

void cmd_pregenerate(Context& c) {
  const auto index = c.index();
  auto catalog = config::load_catalog(c.cfg);
  auto textgen = config::make_textgen(c.cfg);
  prompts::PromptSource source(catalog, textgen.get(), c.cfg.at("plan").at("le_pool").get<std::size_t>());
  const auto po = config::plan_options(c.cfg);
  const auto plan = prompts::build_plan(index, po, source);
  const fs::path out = c.out_dir();
  write_text_atomic(out / "plan.json", plan.serialize());
  auto store = c.store();
  if (store.dataset_name().empty()) store.set_meta(index.name, static_cast<int>(po.k));
  auto generator = config::make_generator(c.cfg);
  const auto report = pipeline::pregenerate(index, plan, *generator, store, config::pregenerate_options(c.cfg));
  pipeline::write_report(report, out);
  c.snapshot("pregenerate");
  for (const auto& f : report.failures) c.err << "failed " << f.record_id << ": " << f.message << "\n";
  c.print(report.to_json());
}

void cmd_filter(Context& c) {
  const auto index = c.index();
  const auto store = c.store();
  auto embedder = config::make_embedder(c.cfg);
  auto report = filter::score_records(index, store, *embedder);
  for (const auto& e : report.errors) c.err << "warning: " << e.record_id << " not scored: " << e.message << "\n";
  filter::apply_filter(report, c.cfg.at("filter").at("fraction").get<double>());
  const fs::path out = c.out_dir();
  report.save(out / "filter-report.jsonl");
  c.snapshot("filter");
  c.print({{"n", report.records.size()},
           {"retained", report.retained_count()},
           {"dropped", report.records.size() - report.retained_count()},
           {"errors", report.errors.size()},
           {"fraction_dropped", report.fraction_dropped},
           {"report", (out / "filter-report.jsonl").string()}});
}

std::optional<std::set<corpus::AugmentationRecord::Key>> filtered_keys(Context& c, const corpus::DatasetIndex& index,
                                                                       const corpus::AugmentationStore& store,
                                                                       const trainer::TrainConfig& tc) {
  if (!tc.filter_fraction || *tc.filter_fraction == 0) return std::nullopt;
  auto embedder = config::make_embedder(c.cfg);
  auto report = filter::score_records(index, store, *embedder);
  return filter::apply_filter(report, *tc.filter_fraction);
}

void cmd_train(Context& c) {
  const auto index = c.index();
  const auto tc = config::train_config(c.cfg);
  std::string source = c.cfg.at("plan").at("source_domain").get<std::string>();
  if (source.empty()) {
    if (index.domains.size() != 1) throw Error(ErrorKind::kUsage, "train needs --source-domain");
    source = *index.domains.begin();
  }
  const auto train_samples = index.select(source, corpus::Split::kTrain);
  std::optional<corpus::AugmentationStore> store;
  std::optional<std::set<corpus::AugmentationRecord::Key>> allowed;
  if (tc.use_augmentations) {
    store.emplace(c.store());
    allowed = filtered_keys(c, index, *store, tc);
  }
  trainer::FeatureCache cache(index, tc.image_side);
  auto result = trainer::train(index, train_samples, store ? &*store : nullptr, tc, cache, trainer::default_backend,
                               allowed ? &*allowed : nullptr);
  const fs::path out = c.out_dir();
  result.log.save(out / "train-log.jsonl");
  trainer::save_model(out / "model.bin", *result.model, {{"image_side", tc.image_side}, {"classes", index.classes}});
  write_json(out / "standardizer.json", result.standardizer.to_json());

  json acc = json::object();
  for (const auto& d : index.domains) {
    auto eval = d == source ? index.select(d, corpus::Split::kTest) : index.select(d);
    if (eval.empty()) continue;
    trainer::check_disjoint(train_samples, eval);
    acc[d] = trainer::evaluate(result, index, cache, eval);
  }
  c.snapshot("train");
  c.print({{"source_domain", source},
           {"final_loss", result.log.epochs.back().mean_loss},
           {"accuracy", acc},
           {"unit", metrics::kPercentUnit},
           {"model", (out / "model.bin").string()}});
}

trainer::AugmentationSetup augmentation_setup(Context& c, filter::MultimodalEmbedder* embedder) {
  trainer::AugmentationSetup s;
  const auto po = config::plan_options(c.cfg);
  s.strategy = po.strategy;
  s.k = po.k;
  s.mode = po.mode;
  s.excluded_domains = po.excluded_domains;
  s.extra_target_domains = po.extra_target_domains;
  s.plan_seed = po.rng_seed;
  s.generation = config::pregenerate_options(c.cfg);
  s.embedder = embedder;
  return s;
}

std::vector<std::uint64_t> seeds(const json& cfg) {
  auto v = cfg.at("seeds").get<std::vector<std::uint64_t>>();
  if (v.empty()) throw Error(ErrorKind::kUsage, "seeds must not be empty");
  return v;
}

void cmd_sdg(Context& c) {
  const auto index = c.index();
  auto catalog = config::load_catalog(c.cfg);
  auto textgen = config::make_textgen(c.cfg);
  prompts::PromptSource source(catalog, textgen.get(), c.cfg.at("plan").at("le_pool").get<std::size_t>());
  auto generator = config::make_generator(c.cfg);
  auto embedder = config::make_embedder(c.cfg);
  auto setup = augmentation_setup(c, embedder.get());
  // SDG plans size k to the eligible targets unless leave-one-out narrows it.
  if (setup.mode == prompts::PlanMode::kSdgOnePerTarget) setup.k = 0;
  const fs::path out = c.out_dir();
  setup.store_root = out / "stores";

  json runs = json::array();
  std::map<std::string, std::vector<double>> averages;
  for (const auto seed : seeds(c.cfg)) {
    auto tc = config::train_config(c.cfg);
    tc.seed = seed;
    const auto result = trainer::run_sdg_protocol(index, source, *generator, setup, tc);
    json sources = json::array();
    for (const auto& r : result) {
      json j = r.report.to_json();
      j["generation"] = r.generation.to_json();
      sources.push_back(j);
      averages[r.report.source_domain].push_back(r.report.average);
      r.log.save(out / ("train-log-" + r.report.source_domain + "-seed" + std::to_string(seed) + ".jsonl"));
    }
    runs.push_back({{"seed", seed}, {"sources", sources}});
  }
  json mean = json::object();
  for (const auto& [d, v] : averages) mean[d] = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  const json report{{"strategy", c.cfg.at("plan").at("strategy")},
                    {"use_augmentations", c.cfg.at("train").at("use_augmentations")},
                    {"runs", runs},
                    {"mean_average_by_source", mean},
                    {"unit", metrics::kPercentUnit}};
  write_json(out / "sdg-report.json", report);
  c.snapshot("sdg");
  c.print({{"mean_average_by_source", mean}, {"report", (out / "sdg-report.json").string()}});
}

void cmd_rrsf(Context& c) {
  const auto index = c.index();
  const auto kind = trainer::parse_bias_kind(c.cfg.at("rrsf").at("kind").get<std::string>());
  auto catalog = config::load_catalog(c.cfg);
  auto textgen = config::make_textgen(c.cfg);
  prompts::PromptSource source(catalog, textgen.get(), c.cfg.at("plan").at("le_pool").get<std::size_t>());
  auto generator = config::make_generator(c.cfg);
  auto embedder = config::make_embedder(c.cfg);
  auto setup = augmentation_setup(c, embedder.get());
  setup.mode = prompts::PlanMode::kRrsfRandom;
  setup.k = c.cfg.at("rrsf").at("k").get<std::size_t>();
  const fs::path out = c.out_dir();
  setup.store_root = out / "stores";

  json runs = json::array();
  for (const auto seed : seeds(c.cfg)) {
    auto tc = config::train_config(c.cfg);
    tc.seed = seed;
    const auto r = trainer::run_rrsf_protocol(index, kind, source, *generator, setup, tc);
    r.log.save(out / ("train-log-" + std::string(trainer::bias_kind_name(kind)) + "-seed" + std::to_string(seed) + ".jsonl"));
    runs.push_back({{"seed", seed}, {"report", r.report.to_json()}, {"accuracies", r.accuracies},
                    {"generation", r.generation.to_json()}});
  }
  const json report{{"kind", trainer::bias_kind_name(kind)},
                    {"strategy", c.cfg.at("plan").at("strategy")},
                    {"catalog", catalog.name},
                    {"catalog_revision", catalog.revision},
                    {"runs", runs}};
  write_json(out / "bias-report.json", report);
  c.snapshot("rrsf");
  json summary = json::array();
  for (const auto& r : runs) summary.push_back(r.at("report"));
  c.print({{"reports", summary}, {"report", (out / "bias-report.json").string()}});
}

metrics::Matrix embed_rows(filter::MultimodalEmbedder& embedder, const std::vector<Bytes>& images) {
  metrics::Matrix m(static_cast<Eigen::Index>(images.size()), embedder.dim());
  for (std::size_t i = 0; i < images.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = embedder.embed_image(images[i]);
  return m;
}

std::vector<Bytes> domain_images(const corpus::DatasetIndex& index, const std::string& domain,
                                 std::optional<corpus::Split> split = std::nullopt) {
  std::vector<Bytes> out;
  for (const auto* s : index.select(domain, split)) out.push_back(read_file(index.root / s->path));
  return out;
}

void cmd_fid(Context& c) {
  const auto index = c.index();
  auto embedder = config::make_embedder(c.cfg);
  const std::string ref = c.cfg.at("fid").at("reference_domain").get<std::string>();
  const std::string cand = c.cfg.at("fid").at("candidate_domain").get<std::string>();
  if (ref.empty()) throw Error(ErrorKind::kUsage, "fid needs --reference-domain");
  const auto ref_images = domain_images(index, ref);
  std::vector<Bytes> cand_images;
  std::string cand_label = cand;
  if (cand.empty()) {
    const auto store = c.store();
    for (const auto& rec : store.all())
      if (rec.status == corpus::RecordStatus::kOk) cand_images.push_back(store.read_image(rec));
    cand_label = "store:" + c.cfg.at("store").get<std::string>();
  } else {
    cand_images = domain_images(index, cand);
  }
  const auto a = metrics::compute_statistics(embed_rows(*embedder, ref_images));
  const auto b = metrics::compute_statistics(embed_rows(*embedder, cand_images));
  const double fid = metrics::frechet_distance(a, b);
  const json report{{"reference", ref},  {"candidate", cand_label},         {"n_reference", a.n},
                    {"n_candidate", b.n}, {"embedder", c.cfg.at("embedder")}, {"fid", fid}};
  write_json(c.out_dir() / "fid-report.json", report);
  c.snapshot("fid");
  c.print(report);
}

void cmd_dedup(Context& c) {
  const auto index = c.index();
  const auto store = c.store();
  auto embedder = config::make_embedder(c.cfg);
  const auto split = corpus::parse_split(c.cfg.at("dedup").at("test_split").get<std::string>());
  std::vector<corpus::AugmentationRecord> recs;
  std::vector<Bytes> cand;
  for (const auto& rec : store.all())
    if (rec.status == corpus::RecordStatus::kOk) {
      recs.push_back(rec);
      cand.push_back(store.read_image(rec));
    }
  const auto tests = index.select(std::nullopt, split);
  std::vector<Bytes> test_images;
  for (const auto* s : tests) test_images.push_back(read_file(index.root / s->path));
  const auto report = metrics::duplication_report(embed_rows(*embedder, cand), embed_rows(*embedder, test_images),
                                                  c.cfg.at("dedup").at("threshold").get<double>());
  json j = report.to_json();
  for (auto& p : j["top_pairs"]) {
    p["candidate_record"] = recs[p["candidate"].get<std::size_t>()].record_id();
    p["test_sample"] = tests[p["test"].get<std::size_t>()]->path;
  }
  write_json(c.out_dir() / "dedup-report.json", j);
  c.snapshot("dedup");
  c.print({{"fraction_flagged", report.fraction_flagged},
           {"n_flagged", report.n_flagged},
           {"n_candidates", report.n_candidates}});
}

void cmd_report(Context& c) {
  const fs::path dir = c.cfg.at("out_dir").get<std::string>();
  if (!fs::is_directory(dir)) throw Error(ErrorKind::kNotFound, "no run directory " + dir.string());
  std::ostringstream text;
  text << std::fixed << std::setprecision(2);
  bool any = false;
  if (fs::exists(dir / "sdg-report.json")) {
    any = true;
    const json r = read_json(dir / "sdg-report.json");
    text << "SDG (" << r.at("strategy").get<std::string>() << ", accuracy %)\n";
    for (const auto& [src, v] : r.at("mean_average_by_source").items())
      text << "  source " << src << ": " << v.get<double>() << "\n";
  }
  if (fs::exists(dir / "bias-report.json")) {
    any = true;
    const json r = read_json(dir / "bias-report.json");
    text << "RRSF " << r.at("kind").get<std::string>() << " (catalog " << r.at("catalog").get<std::string>()
         << " rev " << r.at("catalog_revision").get<std::string>() << ")\n";
    for (const auto& run : r.at("runs")) {
      text << "  seed " << run.at("seed").get<std::uint64_t>() << ":";
      for (const char* key : {"gap", "texture_bias", "flip_gap", "rand_gap"}) {
        const auto& rep = run.at("report");
        if (!rep.contains(key)) continue;
        text << " " << key << "=";
        if (rep[key].is_null()) {
          text << "n/a";
        } else {
          text << rep[key].get<double>();
        }
      }
      text << "\n";
    }
  }
  if (fs::exists(dir / "pregenerate-report.json")) {
    any = true;
    const json r = read_json(dir / "pregenerate-report.json");
    text << "pregenerate: requested " << r.at("requested") << ", ok " << r.at("ok") << ", failed " << r.at("failed")
         << ", skipped " << r.at("skipped") << "\n";
  }
  if (fs::exists(dir / "filter-report.jsonl")) {
    any = true;
    const auto r = filter::FilterReport::load(dir / "filter-report.jsonl");
    text << "filter: " << r.retained_count() << "/" << r.records.size() << " retained at fraction "
         << r.fraction_dropped << "\n";
  }
  if (fs::exists(dir / "fid-report.json")) {
    any = true;
    const json r = read_json(dir / "fid-report.json");
    text << "fid " << r.at("reference").get<std::string>() << " vs " << r.at("candidate").get<std::string>() << ": "
         << r.at("fid").get<double>() << "\n";
  }
  if (fs::exists(dir / "dedup-report.json")) {
    any = true;
    const json r = read_json(dir / "dedup-report.json");
    text << "dedup: " << r.at("n_flagged") << "/" << r.at("n_candidates") << " flagged at "
         << r.at("threshold").get<double>() << "\n";
  }
  if (!any) throw Error(ErrorKind::kNotFound, "no reports in " + dir.string());
  c.out << text.str();
}

std::atomic<bool> g_stop{false};

void cmd_serve(Context& c) {
  const json& s = c.cfg.at("serve");
  ServiceOptions o;
  o.workspace = s.at("workspace").get<std::string>();
  o.seed_catalog_dir = fs::path(c.cfg.at("data_dir").get<std::string>()) / "prompts";
  const json cfg = c.cfg;
  o.make_generator = [cfg] { return config::make_generator(cfg); };
  o.make_textgen = [cfg] { return config::make_textgen(cfg); };
  StudioService service(o);
  const int port = service.start(s.at("host").get<std::string>(), s.at("port").get<int>());
  c.err << "serving " << o.workspace.string() << " on " << s.at("host").get<std::string>() << ":" << port << "\n";
  std::signal(SIGINT, [](int) { g_stop = true; });
  std::signal(SIGTERM, [](int) { g_stop = true; });
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(200));
  service.stop();
}

void cmd_serve_backend(Context& c) {
  const json& s = c.cfg.at("serve");
  auto generator = std::make_unique<genbackend::StubGenerator>(c.cfg.at("generator").at("side").get<int>());
  prompts::StubTextGen textgen;
  filter::StubEmbedder embedder;
  BackendServer server(generator.get(), &textgen, &embedder);
  const int port = server.start(s.at("host").get<std::string>(), s.at("port").get<int>());
  c.err << "stub backends on " << s.at("host").get<std::string>() << ":" << port << "\n";
  std::signal(SIGINT, [](int) { g_stop = true; });
  std::signal(SIGTERM, [](int) { g_stop = true; });
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(200));
  server.stop();
}

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Interventional data augmentation toolkit", "ida"};
  app.require_subcommand(1);
  std::optional<std::string> config_path;
  std::vector<std::string> sets;
  Overrides ov;
  app.add_option("-c,--config", config_path, "JSON config file");
  app.add_option("--set", sets, "Override a config field, e.g. --set train.epochs=10");
  auto common = [&](CLI::App* sub) {
    bind<std::string>(sub, "--index", "index", ov, "Dataset index path");
    bind<std::string>(sub, "--store", "store", ov, "Augmentation store directory");
    bind<std::string>(sub, "--out", "out_dir", ov, "Output directory for reports");
  };

  auto* ingest = app.add_subcommand("ingest", "Index a directory of images");
  bind<std::string>(ingest, "--root", "ingest.root", ov, "Dataset root");
  bind<std::string>(ingest, "--layout", "ingest.layout", ov, "domain_class or class_only");
  bind<std::string>(ingest, "--name", "ingest.name", ov, "Dataset name");
  bind<std::string>(ingest, "--domain", "ingest.single_domain", ov, "Domain label for class_only layouts");
  bind<std::string>(ingest, "--index", "index", ov, "Where to write index.jsonl");

  auto* synth_cmd = app.add_subcommand("synth", "Write a procedural desk-scale dataset");
  bind<std::string>(synth_cmd, "--kind", "synth.kind", ov, "sdg, background, texture or demographic");
  bind<std::string>(synth_cmd, "--root", "synth.root", ov, "Output directory");
  bind<std::uint64_t>(synth_cmd, "--seed", "synth.seed", ov, "Generator seed");
  bind<int>(synth_cmd, "--train", "synth.train_per_domain", ov, "Train images per domain");
  bind<int>(synth_cmd, "--test", "synth.test_per_domain", ov, "Test images per domain");
  bind<double>(synth_cmd, "--correlation", "synth.correlation", ov, "Spurious correlation strength");
  bind<std::vector<std::string>>(synth_cmd, "--classes", "synth.classes", ov, "Class names");
  bind<std::vector<std::string>>(synth_cmd, "--domains", "synth.domains", ov, "Domains (sdg kind)");

  auto* prompts_cmd = app.add_subcommand("prompts", "Render interventional prompts");
  prompts_cmd->require_subcommand(1);
  PromptArgs pa;
  std::string prompt_action;
  for (const char* action : {"render", "expand", "le"}) {
    auto* sub = prompts_cmd->add_subcommand(action, std::string(action) + " prompts");
    sub->add_option("--domain", pa.domain, "Target domain")->required();
    sub->add_option("--class", pa.cls, "Class label")->required();
    bind<std::string>(sub, "--catalog", "plan.catalog", ov, "Catalog name or path");
    if (std::string(action) != "render") sub->add_option("--n", pa.n, "Number of prompts");
    if (std::string(action) == "le") {
      sub->add_option("--mode", pa.mode, "LE_C or LE_M");
      sub->add_option("--seed", pa.seed, "Sampling seed");
    }
    sub->callback([&prompt_action, action] { prompt_action = action; });
  }

  auto plan_flags = [&](CLI::App* sub) {
    bind<std::size_t>(sub, "--k", "plan.k", ov, "Prompts per sample");
    bind<std::string>(sub, "--strategy", "plan.strategy", ov, "M, H, LE_C or LE_M");
    bind<std::string>(sub, "--plan-mode", "plan.mode", ov, "sdg_one_per_target, sdg_leave_one_out or rrsf_random");
    bind<std::string>(sub, "--catalog", "plan.catalog", ov, "Catalog name or path");
    bind<std::string>(sub, "--source-domain", "plan.source_domain", ov, "Source domain");
    bind<std::vector<std::string>>(sub, "--exclude", "plan.excluded_domains", ov, "Excluded target domains");
    bind<std::uint64_t>(sub, "--plan-seed", "plan.seed", ov, "Plan seed");
    bind<std::string>(sub, "--backend", "generator.backend", ov, "stub or http");
    bind<std::string>(sub, "--backend-url", "generator.url", ov, "Generation server URL");
    bind<std::string>(sub, "--mode", "generator.mode", ov, "Generation mode");
  };
  auto train_flags = [&](CLI::App* sub) {
    bind<int>(sub, "--epochs", "train.epochs", ov, "Training epochs");
    bind<std::uint64_t>(sub, "--seed", "train.seed", ov, "Training seed");
    bind<double>(sub, "--filter-fraction", "train.filter_fraction", ov, "Drop this fraction of variants");
    sub->add_flag_function("--no-augment", [&ov](std::int64_t) { ov.add("train.use_augmentations", false); },
                           "Plain ERM on the originals");
  };

  auto* pregen = app.add_subcommand("pregenerate", "Generate the augmentation store");
  common(pregen);
  plan_flags(pregen);

  auto* filter_cmd = app.add_subcommand("filter", "Score and filter generated images");
  common(filter_cmd);
  bind<double>(filter_cmd, "--fraction", "filter.fraction", ov, "Fraction to drop");

  auto* train_cmd = app.add_subcommand("train", "Train the reference classifier");
  common(train_cmd);
  train_flags(train_cmd);
  bind<std::string>(train_cmd, "--source-domain", "plan.source_domain", ov, "Source domain");

  auto* sdg = app.add_subcommand("sdg", "Single-domain generalisation protocol");
  common(sdg);
  plan_flags(sdg);
  train_flags(sdg);
  bind<std::vector<std::uint64_t>>(sdg, "--seeds", "seeds", ov, "Training seeds");

  auto* rrsf = app.add_subcommand("rrsf", "Spurious-feature reliance protocol");
  common(rrsf);
  plan_flags(rrsf);
  train_flags(rrsf);
  bind<std::string>(rrsf, "--kind", "rrsf.kind", ov, "background, texture or demographic");
  bind<std::size_t>(rrsf, "--rrsf-k", "rrsf.k", ov, "Prompts per image");
  bind<std::vector<std::uint64_t>>(rrsf, "--seeds", "seeds", ov, "Training seeds");

  auto* fid = app.add_subcommand("fid", "Frechet distance between embedded image sets");
  common(fid);
  bind<std::string>(fid, "--reference-domain", "fid.reference_domain", ov, "Reference domain");
  bind<std::string>(fid, "--candidate-domain", "fid.candidate_domain", ov, "Candidate domain (default: the store)");

  auto* dedup = app.add_subcommand("dedup", "Flag generated images that duplicate test images");
  common(dedup);
  bind<double>(dedup, "--threshold", "dedup.threshold", ov, "Cosine threshold");

  auto* report = app.add_subcommand("report", "Summarise the reports in a run directory");
  bind<std::string>(report, "--run", "out_dir", ov, "Run directory");

  auto* serve = app.add_subcommand("serve", "Serve the studio API over a workspace");
  bind<std::string>(serve, "--host", "serve.host", ov, "Bind address");
  bind<int>(serve, "--port", "serve.port", ov, "Port");
  bind<std::string>(serve, "--workspace", "serve.workspace", ov, "Workspace directory");

  auto* serve_backend = app.add_subcommand("serve-backend", "Serve the stub model backends over HTTP");
  bind<std::string>(serve_backend, "--host", "serve.host", ov, "Bind address");
  bind<int>(serve_backend, "--port", "serve.port", ov, "Port");

  std::vector<std::string> argv(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
  try {
    app.parse(argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kExitUsage;
  }

  try {
    std::vector<std::string> all = sets;
    all.insert(all.end(), ov.items.begin(), ov.items.end());
    Context c{config::load(config_path ? std::optional<fs::path>(*config_path) : std::nullopt, all), out, err};
    const std::string name = app.get_subcommands().front()->get_name();
    if (name == "ingest") cmd_ingest(c);
    else if (name == "synth") cmd_synth(c);
    else if (name == "prompts") cmd_prompts(c, prompt_action, pa);
    else if (name == "pregenerate") cmd_pregenerate(c);
    else if (name == "filter") cmd_filter(c);
    else if (name == "train") cmd_train(c);
    else if (name == "sdg") cmd_sdg(c);
    else if (name == "rrsf") cmd_rrsf(c);
    else if (name == "fid") cmd_fid(c);
    else if (name == "dedup") cmd_dedup(c);
    else if (name == "report") cmd_report(c);
    else if (name == "serve") cmd_serve(c);
    else if (name == "serve-backend") cmd_serve_backend(c);
  } catch (const Error& e) {
    err << "error [" << error_kind_name(e.kind()) << "]: " << e.what() << "\n";
    return e.kind() == ErrorKind::kUsage ? kExitUsage : kExitDomainError;
  } catch (const json::exception& e) {
    err << "error [Config]: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitOk;
}

}  // namespace ida::cli
