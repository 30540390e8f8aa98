#pragma once

// Client abstraction over text-to-image generation, image editing and
// retrieval services, plus the deterministic stub used for desk-scale runs.

#include <chrono>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>
#include <vector>

#include "ida/common.hpp"
#include "ida/corpus.hpp"
#include "ida/image.hpp"

namespace ida::genbackend {

using Mode = corpus::BackendMode;
using corpus::backend_mode_name;
using corpus::parse_backend_mode;

inline constexpr double kDefaultStrength = 0.75;
inline constexpr double kDefaultGuidanceScale = 7.5;
inline constexpr int kDefaultSteps = 30;

struct GenerationRequest {
  Mode mode = Mode::kText2Image;
  std::string prompt;
  std::optional<Bytes> source_image;  // PNG/JPEG bytes
  std::optional<Bytes> mask;          // PNG; nonzero pixels mark the area to preserve
  double strength = kDefaultStrength;
  double guidance_scale = kDefaultGuidanceScale;
  int steps = kDefaultSteps;
  std::uint64_t seed = 0;
  int n_results = 1;  // retrieval only

  // Request without image payloads, as echoed in provenance.
  json echo() const;
};

// Throws Error(kInvalidRequest) when payloads do not match the mode or a
// knob is out of range. Every mode has an explicit rule.
void validate(const GenerationRequest& request);

struct Provenance {
  std::string backend_id;
  std::string model_id;
  double latency_ms = 0.0;
  json request_echo;
};

struct GenerationResult {
  std::vector<Bytes> images;
  std::vector<double> scores;  // retrieval only, descending
  bool truncated = false;      // retrieval returned fewer than requested
  Provenance provenance;
};

class GeneratorBackend {
 public:
  virtual ~GeneratorBackend() = default;
  virtual std::string backend_id() const = 0;
  // Called only with validated requests whose mode is not retrieval.
  virtual GenerationResult do_generate(const GenerationRequest& request) = 0;
  virtual GenerationResult do_retrieve(const std::string& query, int n) = 0;
};

// Validates, dispatches (retrieval requests route to retrieve) and stamps
// provenance.
GenerationResult generate(GeneratorBackend& backend, const GenerationRequest& request);
GenerationResult retrieve(GeneratorBackend& backend, const std::string& query, int n);

// ---- stub -----------------------------------------------------------------------

struct RetrievalEntry {
  std::string caption;
  Bytes image;
};

// Pure function of (request, seed, embedded scene parameters). Images that
// carry scene parameters are re-rendered under the style named in the prompt
// with class-determining geometry untouched; other images get a pixel-level
// style filter. Retrieval scores entries by word overlap with the query.
class StubGenerator : public GeneratorBackend {
 public:
  explicit StubGenerator(int side = 32, std::vector<RetrievalEntry> retrieval_index = {});
  std::string backend_id() const override { return "stub"; }
  GenerationResult do_generate(const GenerationRequest& request) override;
  GenerationResult do_retrieve(const std::string& query, int n) override;

 private:
  int side_;
  std::vector<RetrievalEntry> index_;
};

// What the stub reads from a prompt.
struct PromptIntervention {
  std::optional<std::string> style;
  std::optional<int> attribute;
  std::optional<int> shape;  // text2image only
};
PromptIntervention parse_intervention(std::string_view prompt);

// ---- remote ----------------------------------------------------------------------

struct HttpGeneratorOptions {
  std::string base_url;
  double timeout_s = 60.0;
  int max_attempts = 3;        // retries happen only on timeout
  double backoff_initial_s = 0.5;
  int max_concurrency = 4;
  std::string model_id_hint;   // reported when the server omits model_id
};

// Client for POST /generate and POST /retrieve.
class HttpGenerator : public GeneratorBackend {
 public:
  explicit HttpGenerator(HttpGeneratorOptions options);
  std::string backend_id() const override { return "http:" + options_.base_url; }
  GenerationResult do_generate(const GenerationRequest& request) override;
  GenerationResult do_retrieve(const std::string& query, int n) override;

 private:
  json call(const std::string& path, const json& body);
  HttpGeneratorOptions options_;
  std::counting_semaphore<1024> slots_;
};

// Wire encoding shared by the client and ida::BackendServer.
json request_to_wire(const GenerationRequest& request);
GenerationRequest request_from_wire(const json& j);

}  // namespace ida::genbackend
