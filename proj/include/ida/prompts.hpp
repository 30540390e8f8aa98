#pragma once

// Interventional prompts: catalogs of templates, the minimal / hand-crafted /
// language-enhanced strategies, and per-sample k-prompt plans.

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ida/common.hpp"
#include "ida/corpus.hpp"

namespace ida::prompts {

inline constexpr std::string_view kClassPlaceholder = "{CLASS}";

enum class Strategy { kMinimal, kHandcrafted, kLeConservative, kLeModerate };
std::string_view strategy_name(Strategy s);  // "M", "H", "LE_C", "LE_M"
Strategy parse_strategy(std::string_view s);

struct PromptTemplate {
  std::string domain_label;
  std::string text;
  Strategy strategy = Strategy::kMinimal;
};

std::size_t count_placeholders(std::string_view text);

// Placeholder rule: exactly one {CLASS}, or zero when attribute_only.
// Returns an error message, or nullopt when valid.
std::optional<std::string> check_template(std::string_view text, bool attribute_only);

// "a"/"an" by initial letter, with a small exceptions list.
std::string indefinite_article(std::string_view word);

// Substitutes the class into a template. With article=true the class word
// gets an indefinite article when it directly follows "of".
std::string render_template(std::string_view text, std::string_view class_label, bool article);

// Versioned catalog mirroring one benchmark's template tables.
struct PromptCatalog {
  std::string name;
  std::string dataset;
  std::string revision;
  bool article = false;
  // strategy ("M"/"H") -> domain -> templates in catalog order
  std::map<std::string, std::map<std::string, std::vector<std::string>>> strategies;

  static PromptCatalog from_json(const json& j);
  json to_json() const;
  static PromptCatalog load(const std::filesystem::path& path);

  // Throws Error(kParse) listing every invalid template.
  void validate() const;

  // Matches case-insensitively with '_' and ' ' treated alike.
  const std::vector<std::string>* templates(Strategy strategy, std::string_view domain) const;
  std::vector<std::string> domains(Strategy strategy) const;
};

// Loads every *.json under dir keyed by catalog name.
std::map<std::string, PromptCatalog> load_catalogs(const std::filesystem::path& dir);

struct InterventionalPrompt {
  std::string id;  // hash of text + target domain
  std::string text;
  std::string target_domain;
  std::string class_label;
  Strategy strategy = Strategy::kMinimal;

  json to_json() const;
  static InterventionalPrompt from_json(const json& j);
  friend bool operator==(const InterventionalPrompt&, const InterventionalPrompt&) = default;
};

std::string prompt_id(std::string_view text, std::string_view target_domain);
InterventionalPrompt make_prompt(std::string text, std::string target_domain, std::string class_label,
                                 Strategy strategy);

InterventionalPrompt render_minimal(std::string_view domain_label, std::string_view class_label,
                                    const PromptCatalog& catalog);

// Returns n prompts in catalog order. When n exceeds the pool the list
// cycles, and repeats carry a "-c<round>" suffix on their id.
std::vector<InterventionalPrompt> expand_handcrafted(std::string_view domain_label, std::string_view class_label,
                                                     const PromptCatalog& catalog, std::size_t n);

// ---- language enhancement -----------------------------------------------------

struct TextGenRequest {
  std::string input;
  std::string mode;  // "beam" or "sample"
  std::size_t n = 1;
  std::optional<std::size_t> beam_width;
  std::optional<int> top_k;
  std::optional<double> top_p;
  std::optional<std::uint64_t> seed;

  json to_json() const;
  static TextGenRequest from_json(const json& j);
};

class TextGenBackend {
 public:
  virtual ~TextGenBackend() = default;
  virtual std::vector<std::string> generate_text(const TextGenRequest& request) = 0;
};

// Deterministic phrase generator standing in for a seq2seq model: beam mode
// returns a fixed ranking, sample mode draws with replacement by seed.
class StubTextGen : public TextGenBackend {
 public:
  std::vector<std::string> generate_text(const TextGenRequest& request) override;
  std::size_t calls() const { return calls_; }

 private:
  std::size_t calls_ = 0;
};

// Client for POST /generate-text.
class HttpTextGen : public TextGenBackend {
 public:
  explicit HttpTextGen(std::string base_url, double timeout_s = 30.0);
  std::vector<std::string> generate_text(const TextGenRequest& request) override;

 private:
  std::string base_url_;
  double timeout_s_;
};

inline constexpr int kLeRetryCap = 5;
inline constexpr int kLeTopK = 50;
inline constexpr double kLeTopP = 0.95;

// Thrown when fewer than n unique prompts survive the retry cap.
class PartialResult : public Error {
 public:
  PartialResult(std::vector<InterventionalPrompt> obtained, std::size_t requested);
  const std::vector<InterventionalPrompt>& obtained() const { return obtained_; }

 private:
  std::vector<InterventionalPrompt> obtained_;
};

TextGenRequest le_request(std::string_view domain_label, std::string_view class_label, std::size_t n,
                          Strategy mode, std::uint64_t seed);

std::vector<InterventionalPrompt> generate_language_enhanced(std::string_view domain_label,
                                                             std::string_view class_label, std::size_t n,
                                                             Strategy mode, TextGenBackend& textgen,
                                                             std::uint64_t seed = 0);

// ---- plans ---------------------------------------------------------------------

enum class PlanMode { kSdgOnePerTarget, kSdgLeaveOneOut, kRrsfRandom };
std::string_view plan_mode_name(PlanMode m);
PlanMode parse_plan_mode(std::string_view s);

struct PlannedPrompt {
  InterventionalPrompt prompt;
  std::uint64_t seed = 0;  // generation seed for this (source, prompt) pair
};

struct PromptPlan {
  PlanMode mode = PlanMode::kSdgOnePerTarget;
  Strategy strategy = Strategy::kMinimal;
  std::size_t k = 0;
  std::string source_domain;
  std::set<std::string> excluded_domains;
  std::uint64_t rng_seed = 0;
  std::map<std::string, std::vector<PlannedPrompt>> assignments;  // source_id -> k prompts

  std::size_t total_pairs() const;
  std::string serialize() const;
  static PromptPlan parse(std::string_view text);
};

// Candidate prompts for (target domain, class) under a strategy. Catalog
// strategies expand the whole template pool; LE strategies call the text
// generator once per (domain, class) and cache the result.
class PromptSource {
 public:
  PromptSource(PromptCatalog catalog, TextGenBackend* textgen = nullptr, std::size_t le_pool = 8);
  std::vector<InterventionalPrompt> candidates(std::string_view domain, std::string_view class_label,
                                               Strategy strategy);
  // RRSF pool: templates keyed by the class label when the catalog has such a
  // key, otherwise every template under the strategy.
  std::vector<InterventionalPrompt> attribute_pool(std::string_view class_label, Strategy strategy);
  const PromptCatalog& catalog() const { return catalog_; }

 private:
  PromptCatalog catalog_;
  TextGenBackend* textgen_;
  std::size_t le_pool_;
  std::map<std::string, std::vector<InterventionalPrompt>> le_cache_;
};

struct PlanOptions {
  std::string source_domain;
  Strategy strategy = Strategy::kMinimal;
  std::size_t k = 0;
  PlanMode mode = PlanMode::kSdgOnePerTarget;
  std::set<std::string> excluded_domains;
  // Extra target domains beyond the index (e.g. catalog-only styles).
  std::set<std::string> extra_target_domains;
  std::uint64_t rng_seed = 0;
  // Only samples of this split are planned; nullopt plans every split.
  std::optional<corpus::Split> split = corpus::Split::kTrain;
};

std::vector<std::string> eligible_targets(const corpus::DatasetIndex& index, const PlanOptions& options);

PromptPlan build_plan(const corpus::DatasetIndex& index, const PlanOptions& options, PromptSource& source);

}  // namespace ida::prompts
