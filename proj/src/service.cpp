#include "ida/service.hpp"

#include <chrono>
#include <regex>

#include "httplib.h"
#include "ida/corpus.hpp"
#include "ida/pipeline.hpp"

namespace ida {

namespace fs = std::filesystem;

namespace {

double now_s() {
  return std::chrono::duration<double>(std::chrono::system_clock::now().time_since_epoch()).count();
}

json error_body(std::string_view kind, std::string_view message) {
  return {{"error", {{"kind", kind}, {"message", message}}}};
}

void reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

int status_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidRequest:
    case ErrorKind::kParse:
    case ErrorKind::kUsage:
    case ErrorKind::kMissingTemplate:
    case ErrorKind::kPlanInfeasible:
    case ErrorKind::kEmptyInput:
      return 400;
    case ErrorKind::kNotFound:
      return 404;
    case ErrorKind::kKeyConflict:
      return 409;
    case ErrorKind::kBackendTimeout:
      return 504;
    case ErrorKind::kBackendUnavailable:
      return 503;
    default:
      return 500;
  }
}

json parse_body(const httplib::Request& req) {
  try {
    json j = json::parse(req.body);
    if (!j.is_object()) throw Error(ErrorKind::kInvalidRequest, "request body must be a JSON object");
    return j;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kInvalidRequest, std::string("malformed JSON body: ") + e.what());
  }
}

// Runs handler, mapping ida::Error and json errors to JSON error replies.
template <typename F>
httplib::Server::Handler guarded(F handler) {
  return [handler](const httplib::Request& req, httplib::Response& res) {
    try {
      handler(req, res);
    } catch (const Error& e) {
      reply(res, status_for(e.kind()), error_body(error_kind_name(e.kind()), e.what()));
    } catch (const json::exception& e) {
      reply(res, 400, error_body("InvalidRequest", e.what()));
    } catch (const std::exception& e) {
      reply(res, 500, error_body("Internal", e.what()));
    }
  };
}

int bind_server(httplib::Server& server, const std::string& host, int port) {
  if (port == 0) {
    const int bound = server.bind_to_any_port(host);
    if (bound <= 0) throw Error(ErrorKind::kIo, "cannot bind " + host);
    return bound;
  }
  if (!server.bind_to_port(host, port))
    throw Error(ErrorKind::kIo, "cannot bind " + host + ":" + std::to_string(port) + " (port busy?)");
  return port;
}

}  // namespace

// ---- backend server ------------------------------------------------------------------

BackendServer::BackendServer(genbackend::GeneratorBackend* generator, prompts::TextGenBackend* textgen,
                             filter::MultimodalEmbedder* embedder)
    : generator_(generator), textgen_(textgen), embedder_(embedder), server_(std::make_unique<httplib::Server>()) {
  install();
}

BackendServer::~BackendServer() { stop(); }

void BackendServer::install() {
  auto pre = [this] {
    ++requests_;
    if (int d = delay_ms_.load(); d > 0) std::this_thread::sleep_for(std::chrono::milliseconds(d));
  };
  auto unavailable = [](httplib::Response& res, const char* what) {
    reply(res, 503, error_body("BackendUnavailable", std::string(what) + " backend not configured"));
  };

  server_->Post("/generate", guarded([this, pre, unavailable](const httplib::Request& req, httplib::Response& res) {
    pre();
    if (!generator_) return unavailable(res, "generation");
    auto request = genbackend::request_from_wire(parse_body(req));
    if (request.mode == genbackend::Mode::kRetrieval)
      throw Error(ErrorKind::kInvalidRequest, "retrieval requests go to /retrieve");
    std::lock_guard lock(mu_);
    auto result = genbackend::generate(*generator_, request);
    reply(res, 200,
          {{"image_b64", base64_encode(result.images.front())},
           {"model_id", result.provenance.model_id},
           {"seed", request.seed}});
  }));

  server_->Post("/retrieve", guarded([this, pre, unavailable](const httplib::Request& req, httplib::Response& res) {
    pre();
    if (!generator_) return unavailable(res, "retrieval");
    const json body = parse_body(req);
    const std::string query = body.at("query").get<std::string>();
    const int n = body.value("n", 1);
    std::lock_guard lock(mu_);
    auto result = genbackend::retrieve(*generator_, query, n);
    json hits = json::array();
    for (std::size_t i = 0; i < result.images.size(); ++i)
      hits.push_back({{"image_b64", base64_encode(result.images[i])}, {"score", result.scores[i]}});
    reply(res, 200, {{"hits", hits}, {"truncated", result.truncated}, {"model_id", result.provenance.model_id}});
  }));

  server_->Post("/generate-text", guarded([this, pre, unavailable](const httplib::Request& req, httplib::Response& res) {
    pre();
    if (!textgen_) return unavailable(res, "text generation");
    const auto request = prompts::TextGenRequest::from_json(parse_body(req));
    std::lock_guard lock(mu_);
    reply(res, 200, {{"texts", textgen_->generate_text(request)}});
  }));

  server_->Post("/embed", guarded([this, pre, unavailable](const httplib::Request& req, httplib::Response& res) {
    pre();
    if (!embedder_) return unavailable(res, "embedding");
    const json body = parse_body(req);
    const std::string kind = body.at("kind").get<std::string>();
    const std::string payload = body.at("payload").get<std::string>();
    filter::Vector v;
    std::lock_guard lock(mu_);
    if (kind == "image") {
      const Bytes bytes = base64_decode(payload);
      try {
        v = embedder_->embed_image(bytes);
      } catch (const Error& e) {
        if (e.kind() == ErrorKind::kParse) throw Error(ErrorKind::kInvalidRequest, e.what());
        throw;
      }
    } else if (kind == "text") {
      v = embedder_->embed_text(payload);
    } else {
      throw Error(ErrorKind::kInvalidRequest, "kind must be image or text");
    }
    reply(res, 200, {{"vector", std::vector<double>(v.data(), v.data() + v.size())}});
  }));
}

int BackendServer::start(const std::string& host, int port) {
  const int bound = bind_server(*server_, host, port);
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return bound;
}

void BackendServer::listen(const std::string& host, int port) {
  bind_server(*server_, host, port);
  server_->listen_after_bind();
}

void BackendServer::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

// ---- jobs -------------------------------------------------------------------------------

std::string_view job_state_name(JobState s) {
  switch (s) {
    case JobState::kQueued: return "queued";
    case JobState::kRunning: return "running";
    case JobState::kSucceeded: return "succeeded";
    case JobState::kFailed: return "failed";
    case JobState::kInterrupted: return "interrupted";
  }
  return "?";
}

JobState parse_job_state(std::string_view s) {
  for (auto st : {JobState::kQueued, JobState::kRunning, JobState::kSucceeded, JobState::kFailed, JobState::kInterrupted})
    if (job_state_name(st) == s) return st;
  throw Error(ErrorKind::kParse, "unknown job state: " + std::string(s));
}

json Job::to_json() const {
  return {{"id", id},         {"dataset", dataset},       {"state", job_state_name(state)},
          {"request", request}, {"result", result},       {"error", error},
          {"created_s", created_s}, {"updated_s", updated_s}};
}

Job Job::from_json(const json& j) {
  Job job;
  job.id = j.at("id").get<std::string>();
  job.dataset = j.at("dataset").get<std::string>();
  job.state = parse_job_state(j.at("state").get<std::string>());
  job.request = j.value("request", json::object());
  job.result = j.value("result", json(nullptr));
  job.error = j.value("error", "");
  job.created_s = j.value("created_s", 0.0);
  job.updated_s = j.value("updated_s", 0.0);
  return job;
}

namespace {

bool terminal(JobState s) { return s == JobState::kSucceeded || s == JobState::kFailed || s == JobState::kInterrupted; }

fs::path dataset_dir(const fs::path& ws, const std::string& name) {
  if (name.empty() || name.find('/') != std::string::npos || name.find("..") != std::string::npos)
    throw Error(ErrorKind::kInvalidRequest, "bad dataset name: " + name);
  const fs::path dir = ws / "datasets" / name;
  if (!fs::exists(dir / "index.jsonl")) throw Error(ErrorKind::kNotFound, "unknown dataset: " + name);
  return dir;
}

json dataset_settings(const fs::path& dir) {
  return fs::exists(dir / "dataset.json") ? read_json(dir / "dataset.json") : json::object();
}

fs::path catalog_path(const fs::path& ws, const std::string& name) {
  if (name.empty() || name.find('/') != std::string::npos || name.find("..") != std::string::npos)
    throw Error(ErrorKind::kInvalidRequest, "bad catalog name: " + name);
  return ws / "prompts" / (name + ".json");
}

std::string single_param(const httplib::Request& req, const std::string& key) {
  return req.has_param(key) ? req.get_param_value(key) : std::string();
}

// Relative path with no parent references.
bool safe_relpath(const std::string& rel) {
  if (rel.empty() || rel.front() == '/') return false;
  for (const auto& part : fs::path(rel))
    if (part == "..") return false;
  return true;
}

}  // namespace

// ---- studio service ---------------------------------------------------------------------

StudioService::StudioService(ServiceOptions options)
    : options_(std::move(options)), server_(std::make_unique<httplib::Server>()) {
  fs::create_directories(options_.workspace / "datasets");
  fs::create_directories(options_.workspace / "prompts");
  fs::create_directories(options_.workspace / "runs");
  if (!options_.seed_catalog_dir.empty() && fs::exists(options_.seed_catalog_dir)) {
    for (const auto& entry : fs::directory_iterator(options_.seed_catalog_dir)) {
      if (entry.path().extension() != ".json") continue;
      const fs::path dst = options_.workspace / "prompts" / entry.path().filename();
      if (!fs::exists(dst)) fs::copy_file(entry.path(), dst);
    }
  }
  if (!options_.make_generator)
    options_.make_generator = [] { return std::make_unique<genbackend::StubGenerator>(); };
  if (!options_.make_textgen) options_.make_textgen = [] { return std::make_unique<prompts::StubTextGen>(); };
  load_jobs();
  install();
}

StudioService::~StudioService() {
  stop();
  for (auto& w : workers_)
    if (w.joinable()) w.join();
}

void StudioService::load_jobs() {
  const fs::path journal = options_.workspace / "jobs.jsonl";
  if (!fs::exists(journal)) return;
  for (const auto& line : read_jsonl(journal)) {
    Job job = Job::from_json(line);
    jobs_[job.id] = job;
  }
  // Work that was in flight when the previous process stopped is lost.
  for (auto& [id, job] : jobs_) {
    if (terminal(job.state)) continue;
    job.state = JobState::kInterrupted;
    job.error = "service restarted before the job finished";
    job.updated_s = now_s();
    append_line(journal, to_line(job.to_json()));
  }
}

void StudioService::record_job(const Job& job) {
  {
    std::lock_guard lock(jobs_mu_);
    jobs_[job.id] = job;
    append_line(options_.workspace / "jobs.jsonl", to_line(job.to_json()));
  }
  jobs_cv_.notify_all();
}

std::optional<Job> StudioService::job(const std::string& id) const {
  std::lock_guard lock(jobs_mu_);
  auto it = jobs_.find(id);
  if (it == jobs_.end()) return std::nullopt;
  return it->second;
}

std::optional<Job> StudioService::wait_job(const std::string& id, double timeout_s) {
  std::unique_lock lock(jobs_mu_);
  jobs_cv_.wait_for(lock, std::chrono::duration<double>(timeout_s), [&] {
    auto it = jobs_.find(id);
    return it != jobs_.end() && terminal(it->second.state);
  });
  auto it = jobs_.find(id);
  if (it == jobs_.end()) return std::nullopt;
  return it->second;
}

std::mutex& StudioService::dataset_lock(const std::string& dataset) {
  std::lock_guard lock(locks_mu_);
  auto& slot = dataset_locks_[dataset];
  if (!slot) slot = std::make_unique<std::mutex>();
  return *slot;
}

std::string StudioService::submit_regeneration(const json& request) {
  const std::string dataset = request.at("dataset").get<std::string>();
  const fs::path dir = dataset_dir(options_.workspace, dataset);
  const auto strategy = prompts::parse_strategy(request.at("strategy").get<std::string>());
  (void)strategy;
  if (!request.at("k").is_number_unsigned()) throw Error(ErrorKind::kInvalidRequest, "k must be a non-negative integer");
  if (request.contains("scope") && !request["scope"].is_object() && !request["scope"].is_null())
    throw Error(ErrorKind::kInvalidRequest, "scope must be an object");
  std::string catalog = request.value("catalog", dataset_settings(dir).value("catalog", ""));
  if (catalog.empty()) throw Error(ErrorKind::kInvalidRequest, "no catalog given and dataset.json names none");
  if (!fs::exists(catalog_path(options_.workspace, catalog)))
    throw Error(ErrorKind::kNotFound, "unknown catalog: " + catalog);

  Job job;
  const std::uint64_t n = job_counter_++;
  job.id = "job-" + sha256_hex(std::to_string(now_s()) + "/" + std::to_string(n)).substr(0, 12);
  job.dataset = dataset;
  job.request = request;
  job.request["catalog"] = catalog;
  job.created_s = job.updated_s = now_s();
  record_job(job);
  workers_.emplace_back([this, id = job.id] { run_regeneration(id); });
  return job.id;
}

void StudioService::run_regeneration(std::string job_id) {
  Job job = *this->job(job_id);
  std::lock_guard dataset_guard(dataset_lock(job.dataset));
  job.state = JobState::kRunning;
  job.updated_s = now_s();
  record_job(job);
  try {
    const fs::path dir = dataset_dir(options_.workspace, job.dataset);
    const json settings = dataset_settings(dir);
    const json& rq = job.request;
    const json scope = rq.contains("scope") && rq["scope"].is_object() ? rq["scope"] : json::object();

    auto index = corpus::DatasetIndex::load(dir / "index.jsonl");
    const std::string split = scope.value("split", "train");
    std::set<std::string> ids;
    if (scope.contains("source_ids"))
      for (const auto& s : scope["source_ids"]) ids.insert(s.get<std::string>());
    std::vector<corpus::SampleRecord> kept;
    for (const auto& s : index.samples) {
      if (scope.contains("domain") && s.domain_label != scope["domain"].get<std::string>()) continue;
      if (scope.contains("class") && s.class_label != scope["class"].get<std::string>()) continue;
      if (split != "all" && s.split != corpus::parse_split(split)) continue;
      if (!ids.empty() && !ids.count(s.id)) continue;
      kept.push_back(s);
    }
    corpus::DatasetIndex scoped = index;
    scoped.samples = std::move(kept);

    prompts::PromptCatalog catalog;
    {
      std::lock_guard lock(prompts_mu_);
      catalog = prompts::PromptCatalog::load(catalog_path(options_.workspace, rq.at("catalog").get<std::string>()));
    }
    auto textgen = options_.make_textgen();
    prompts::PromptSource source(catalog, textgen.get());
    prompts::PlanOptions po;
    po.source_domain = scope.value("domain", settings.value("source_domain", ""));
    po.strategy = prompts::parse_strategy(rq.at("strategy").get<std::string>());
    po.k = rq.at("k").get<std::size_t>();
    po.mode = prompts::parse_plan_mode(settings.value("plan_mode", "rrsf_random"));
    po.rng_seed = settings.value("seed", std::uint64_t{0});
    po.split = std::nullopt;
    const auto plan = prompts::build_plan(scoped, po, source);

    auto store = corpus::AugmentationStore::open(dir / "store");
    if (store.dataset_name().empty()) store.set_meta(index.name, static_cast<int>(po.k));
    pipeline::PregenerateOptions gen;
    if (settings.contains("generator")) {
      const json& g = settings["generator"];
      gen.mode = genbackend::parse_backend_mode(g.value("mode", "sdedit"));
      gen.strength = g.value("strength", gen.strength);
      gen.guidance_scale = g.value("guidance_scale", gen.guidance_scale);
      gen.steps = g.value("steps", gen.steps);
    }
    auto generator = options_.make_generator();
    const auto report = pipeline::pregenerate(index, plan, *generator, store, gen);
    json prompt_ids = json::array();
    std::set<std::string> seen;
    for (const auto& [_, planned] : plan.assignments)
      for (const auto& p : planned)
        if (seen.insert(p.prompt.id).second) prompt_ids.push_back(p.prompt.id);
    job.result = report.to_json();
    job.result["catalog_revision"] = catalog.revision;
    job.result["prompt_ids"] = prompt_ids;
    job.state = JobState::kSucceeded;
  } catch (const std::exception& e) {
    job.state = JobState::kFailed;
    job.error = e.what();
  }
  job.updated_s = now_s();
  record_job(job);
}

void StudioService::install() {
  const fs::path ws = options_.workspace;
  auto& s = *server_;

  s.Get("/api/datasets", guarded([ws](const httplib::Request&, httplib::Response& res) {
    json out = json::array();
    if (fs::exists(ws / "datasets")) {
      std::vector<fs::path> dirs;
      for (const auto& e : fs::directory_iterator(ws / "datasets"))
        if (fs::exists(e.path() / "index.jsonl")) dirs.push_back(e.path());
      std::sort(dirs.begin(), dirs.end());
      for (const auto& d : dirs) {
        const auto index = corpus::DatasetIndex::load(d / "index.jsonl");
        json entry{{"name", d.filename().string()},
                   {"index_name", index.name},
                   {"domains", index.domains},
                   {"classes", index.classes},
                   {"n_samples", index.samples.size()},
                   {"n_augmentations", 0},
                   {"n_ok", 0},
                   {"k", 0}};
        if (fs::exists(d / "store")) {
          const auto store = corpus::AugmentationStore::open(d / "store");
          entry["n_augmentations"] = store.size();
          entry["n_ok"] = store.count_ok();
          entry["k"] = store.k();
        }
        entry["settings"] = dataset_settings(d);
        out.push_back(entry);
      }
    }
    reply(res, 200, {{"datasets", out}});
  }));

  // Resolves ?dataset=, defaulting to the only dataset in the workspace.
  auto pick_dataset = [ws](const httplib::Request& req) {
    std::string name = single_param(req, "dataset");
    if (name.empty()) {
      std::vector<std::string> names;
      if (fs::exists(ws / "datasets"))
        for (const auto& e : fs::directory_iterator(ws / "datasets"))
          if (fs::exists(e.path() / "index.jsonl")) names.push_back(e.path().filename().string());
      if (names.size() != 1) throw Error(ErrorKind::kInvalidRequest, "dataset parameter required");
      name = names.front();
    }
    return std::make_pair(name, dataset_dir(ws, name));
  };

  s.Get("/api/samples", guarded([pick_dataset](const httplib::Request& req, httplib::Response& res) {
    const auto [name, dir] = pick_dataset(req);
    const auto index = corpus::DatasetIndex::load(dir / "index.jsonl");
    auto parse_int = [&](const std::string& key, long long fallback, long long lo, long long hi) {
      const std::string v = single_param(req, key);
      if (v.empty()) return fallback;
      std::size_t used = 0;
      long long x = 0;
      try {
        x = std::stoll(v, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != v.size() || x < lo || x > hi) throw Error(ErrorKind::kInvalidRequest, "bad " + key + ": " + v);
      return x;
    };
    const long long page = parse_int("page", 0, 0, 1LL << 40);
    const long long page_size = parse_int("page_size", 50, 1, 1000);
    const std::string domain = single_param(req, "domain");
    const std::string cls = single_param(req, "class");
    std::vector<const corpus::SampleRecord*> match;
    for (const auto& smp : index.samples)
      if ((domain.empty() || smp.domain_label == domain) && (cls.empty() || smp.class_label == cls))
        match.push_back(&smp);
    json items = json::array();
    const auto begin = static_cast<std::size_t>(page * page_size);
    for (std::size_t i = begin; i < match.size() && i < begin + static_cast<std::size_t>(page_size); ++i) {
      json j = match[i]->to_json();
      j["media_url"] = "/media/" + name + "/" + match[i]->path;
      items.push_back(j);
    }
    reply(res, 200,
          {{"dataset", name}, {"page", page}, {"page_size", page_size}, {"total", match.size()}, {"samples", items}});
  }));

  s.Get("/api/augmentations", guarded([pick_dataset](const httplib::Request& req, httplib::Response& res) {
    const auto [name, dir] = pick_dataset(req);
    const std::string source_id = single_param(req, "source_id");
    const std::string prompt_id = single_param(req, "prompt_id");
    if (source_id.empty() == prompt_id.empty())
      throw Error(ErrorKind::kInvalidRequest, "give exactly one of source_id or prompt_id");
    json out = json::array();
    if (fs::exists(dir / "store")) {
      const auto store = corpus::AugmentationStore::open(dir / "store");
      for (const auto& rec : store.all()) {
        if (!source_id.empty() && rec.source_id != source_id) continue;
        if (!prompt_id.empty() && rec.prompt_id != prompt_id) continue;
        json j = rec.to_json();
        j["record_id"] = rec.record_id();
        j["media_url"] = "/media/" + name + "/" + rec.image_path;
        out.push_back(j);
      }
    }
    reply(res, 200, {{"dataset", name}, {"records", out}});
  }));

  s.Get("/api/prompts", guarded([this, ws](const httplib::Request&, httplib::Response& res) {
    std::lock_guard lock(prompts_mu_);
    json catalogs = json::object();
    for (const auto& e : fs::directory_iterator(ws / "prompts"))
      if (e.path().extension() == ".json") catalogs[e.path().stem().string()] = read_json(e.path());
    reply(res, 200, {{"catalogs", catalogs}});
  }));

  s.Put(R"(/api/prompts/([^/]+))", guarded([this, ws](const httplib::Request& req, httplib::Response& res) {
    const std::string strategy = req.matches[1];
    if (strategy != "M" && strategy != "H")
      throw Error(ErrorKind::kInvalidRequest, "only M and H catalogs are editable, got " + strategy);
    const json body = parse_body(req);
    const std::string name = body.at("catalog").get<std::string>();
    const std::string base = body.at("base_revision").get<std::string>();
    const json& templates = body.at("templates");
    if (!templates.is_object()) throw Error(ErrorKind::kInvalidRequest, "templates must map domain -> list");

    std::lock_guard lock(prompts_mu_);
    const fs::path path = catalog_path(ws, name);
    if (!fs::exists(path)) throw Error(ErrorKind::kNotFound, "unknown catalog: " + name);
    json doc = read_json(path);
    const std::string current = doc.value("revision", "");
    if (current != base) {
      reply(res, 409,
            {{"error", {{"kind", "RevisionConflict"}, {"message", "catalog changed since base_revision"}}},
             {"current_revision", current}});
      return;
    }
    doc["strategies"][strategy] = templates;
    doc["revision"] = "";
    doc["revision"] = sha256_hex(doc.dump()).substr(0, 12);
    try {
      prompts::PromptCatalog::from_json(doc).validate();
    } catch (const Error& e) {
      throw Error(ErrorKind::kInvalidRequest, e.what());
    }
    write_json(path, doc);
    append_line(ws / "prompts" / "revisions.jsonl",
                to_line({{"catalog", name},
                         {"strategy", strategy},
                         {"base_revision", base},
                         {"revision", doc["revision"]},
                         {"time_s", now_s()}}));
    reply(res, 200, {{"catalog", doc}, {"revision", doc["revision"]}});
  }));

  s.Post("/api/regenerate", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const std::string id = submit_regeneration(parse_body(req));
    reply(res, 202, {{"job_id", id}, {"status_url", "/api/jobs/" + id}});
  }));

  s.Get(R"(/api/jobs/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
    auto j = job(req.matches[1]);
    if (!j) throw Error(ErrorKind::kNotFound, "unknown job: " + std::string(req.matches[1]));
    reply(res, 200, j->to_json());
  }));

  auto run_dir = [ws](const std::string& id) {
    if (id.empty() || !safe_relpath(id) || id.find('/') != std::string::npos)
      throw Error(ErrorKind::kInvalidRequest, "bad run id: " + id);
    const fs::path d = ws / "runs" / id;
    if (!fs::is_directory(d)) throw Error(ErrorKind::kNotFound, "unknown run: " + id);
    return d;
  };

  s.Get("/api/filter/report", guarded([run_dir](const httplib::Request& req, httplib::Response& res) {
    const std::string run = single_param(req, "run");
    if (run.empty()) throw Error(ErrorKind::kInvalidRequest, "run parameter required");
    const fs::path file = run_dir(run) / "filter-report.jsonl";
    if (!fs::exists(file)) throw Error(ErrorKind::kNotFound, "run " + run + " has no filter report");
    const auto report = filter::FilterReport::load(file);
    json records = json::array();
    for (const auto& r : report.records) records.push_back(r.to_json());
    json errors = json::array();
    for (const auto& e : report.errors) errors.push_back({{"record_id", e.record_id}, {"message", e.message}});
    reply(res, 200,
          {{"run", run},
           {"fraction_dropped", report.fraction_dropped},
           {"n", report.records.size()},
           {"retained", report.retained_count()},
           {"errors", errors},
           {"records", records}});
  }));

  auto list_reports = [](const fs::path& dir) {
    std::vector<std::string> names;
    for (const auto& e : fs::directory_iterator(dir)) {
      const auto ext = e.path().extension();
      if (e.is_regular_file() && (ext == ".json" || ext == ".jsonl")) names.push_back(e.path().filename().string());
    }
    std::sort(names.begin(), names.end());
    return names;
  };

  s.Get("/api/metrics/runs", guarded([ws, list_reports](const httplib::Request&, httplib::Response& res) {
    json runs = json::array();
    std::vector<fs::path> dirs;
    for (const auto& e : fs::directory_iterator(ws / "runs"))
      if (e.is_directory()) dirs.push_back(e.path());
    std::sort(dirs.begin(), dirs.end());
    for (const auto& d : dirs) runs.push_back({{"id", d.filename().string()}, {"reports", list_reports(d)}});
    reply(res, 200, {{"runs", runs}});
  }));

  s.Get(R"(/api/metrics/runs/([^/]+))", guarded([run_dir, list_reports](const httplib::Request& req, httplib::Response& res) {
    const fs::path dir = run_dir(req.matches[1]);
    json reports = json::object();
    for (const auto& name : list_reports(dir)) {
      if (name.ends_with(".jsonl")) {
        json lines = json::array();
        for (auto& l : read_jsonl(dir / name)) lines.push_back(std::move(l));
        reports[name] = lines;
      } else {
        reports[name] = read_json(dir / name);
      }
    }
    reply(res, 200, {{"id", dir.filename().string()}, {"reports", reports}});
  }));

  s.Get(R"(/media/([^/]+)/(.+))", guarded([ws](const httplib::Request& req, httplib::Response& res) {
    const std::string name = req.matches[1];
    const std::string rel = req.matches[2];
    if (!safe_relpath(rel)) throw Error(ErrorKind::kInvalidRequest, "bad media path");
    const fs::path dir = dataset_dir(ws, name);
    fs::path file;
    if (rel.starts_with("aug/")) {
      file = dir / "store" / rel;
    } else {
      file = corpus::DatasetIndex::load(dir / "index.jsonl").root / rel;
    }
    if (!fs::is_regular_file(file)) throw Error(ErrorKind::kNotFound, "no such media: " + rel);
    const Bytes data = read_file(file);
    const bool jpeg = data.size() > 2 && data[0] == 0xFF && data[1] == 0xD8;
    res.status = 200;
    res.set_content(std::string(data.begin(), data.end()), jpeg ? "image/jpeg" : "image/png");
  }));

  s.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (res.body.empty()) reply(res, res.status, error_body("NotFound", "no such route"));
  });
}

int StudioService::start(const std::string& host, int port) {
  const int bound = bind_server(*server_, host, port);
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return bound;
}

void StudioService::listen(const std::string& host, int port) {
  bind_server(*server_, host, port);
  server_->listen_after_bind();
}

void StudioService::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace ida
