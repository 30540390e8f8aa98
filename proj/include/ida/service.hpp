#pragma once

// HTTP surfaces: the model-backend server (generation, retrieval, text
// generation, embeddings) and the studio service over a workspace.
//
// Workspace layout:
//   datasets/<name>/index.jsonl     dataset index
//   datasets/<name>/store/          augmentation store
//   datasets/<name>/dataset.json    optional {catalog, plan_mode, source_domain, seed, generator}
//   prompts/<catalog>.json          active prompt catalogs
//   prompts/revisions.jsonl         journal of catalog edits
//   runs/<id>/*.json[l]             reports produced by CLI runs
//   jobs.jsonl                      regeneration job journal

#include <atomic>
#include <condition_variable>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "ida/common.hpp"
#include "ida/filter.hpp"
#include "ida/genbackend.hpp"
#include "ida/prompts.hpp"

namespace httplib {
class Server;
}

namespace ida {

// Hosts POST /generate, /retrieve, /generate-text and /embed over local
// backends. Any backend may be null, in which case its route answers 503.
class BackendServer {
 public:
  BackendServer(genbackend::GeneratorBackend* generator, prompts::TextGenBackend* textgen,
                filter::MultimodalEmbedder* embedder);
  ~BackendServer();

  // Binds and serves on a background thread. port 0 picks a free port.
  // Returns the bound port.
  int start(const std::string& host = "127.0.0.1", int port = 0);
  // Serves on the calling thread until stop().
  void listen(const std::string& host, int port);
  void stop();
  // Every request sleeps this long first (timeout testing).
  void set_delay_ms(int ms) { delay_ms_ = ms; }
  std::size_t requests() const { return requests_; }

 private:
  void install();
  genbackend::GeneratorBackend* generator_;
  prompts::TextGenBackend* textgen_;
  filter::MultimodalEmbedder* embedder_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  std::mutex mu_;  // local backends are not assumed thread-safe
  std::atomic<int> delay_ms_{0};
  std::atomic<std::size_t> requests_{0};
};

enum class JobState { kQueued, kRunning, kSucceeded, kFailed, kInterrupted };
std::string_view job_state_name(JobState s);
JobState parse_job_state(std::string_view s);

struct Job {
  std::string id;
  std::string dataset;
  JobState state = JobState::kQueued;
  json request = json::object();
  json result = nullptr;
  std::string error;
  double created_s = 0.0;
  double updated_s = 0.0;

  json to_json() const;
  static Job from_json(const json& j);
};

struct ServiceOptions {
  std::filesystem::path workspace;
  // Built per regeneration job; defaults to the stub generator.
  std::function<std::unique_ptr<genbackend::GeneratorBackend>()> make_generator;
  std::function<std::unique_ptr<prompts::TextGenBackend>()> make_textgen;
  // Catalogs copied into an empty workspace prompts/ directory.
  std::filesystem::path seed_catalog_dir;
};

class StudioService {
 public:
  explicit StudioService(ServiceOptions options);
  ~StudioService();

  int start(const std::string& host = "127.0.0.1", int port = 0);
  void listen(const std::string& host, int port);
  void stop();

  // Blocks until the job reaches a terminal state or the timeout passes.
  std::optional<Job> wait_job(const std::string& id, double timeout_s);
  std::optional<Job> job(const std::string& id) const;

 private:
  void install();
  void load_jobs();
  void record_job(const Job& job);
  std::string submit_regeneration(const json& request);
  void run_regeneration(std::string job_id);
  std::mutex& dataset_lock(const std::string& dataset);

  ServiceOptions options_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  mutable std::mutex jobs_mu_;
  std::condition_variable jobs_cv_;
  std::map<std::string, Job> jobs_;
  std::vector<std::thread> workers_;
  std::mutex prompts_mu_;
  std::mutex locks_mu_;
  std::map<std::string, std::unique_ptr<std::mutex>> dataset_locks_;
  std::atomic<std::uint64_t> job_counter_{0};
};

}  // namespace ida
