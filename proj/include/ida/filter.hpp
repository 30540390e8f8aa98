#pragma once

// Dual-prompt percentile-rank filtering of generated images.

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ida/common.hpp"
#include "ida/corpus.hpp"

namespace ida::filter {

using Vector = Eigen::VectorXd;

// Both methods return unit-norm vectors of dim().
class MultimodalEmbedder {
 public:
  virtual ~MultimodalEmbedder() = default;
  virtual int dim() const = 0;
  virtual Vector embed_image(std::span<const std::uint8_t> image) = 0;
  virtual Vector embed_text(std::string_view text) = 0;
};

// Deterministic embedder for desk-scale runs. The vector has a semantic block
// (hashed word vectors; for images the words come from embedded scene
// parameters) and a pixel block (8x8 thumbnail, centred). Text lives only in
// the semantic block.
class StubEmbedder : public MultimodalEmbedder {
 public:
  static constexpr int kSemanticDim = 64;
  static constexpr int kThumb = 8;
  static constexpr double kSemanticWeight = 0.4;  // squared-norm share of the semantic block

  int dim() const override { return kSemanticDim + kThumb * kThumb * 3; }
  Vector embed_image(std::span<const std::uint8_t> image) override;
  Vector embed_text(std::string_view text) override;

  // Semantic block alone, unnormalized (zero when no known words).
  static Vector semantic(const std::vector<std::string>& words);
};

// Client for POST /embed.
class HttpEmbedder : public MultimodalEmbedder {
 public:
  HttpEmbedder(std::string base_url, int dim, double timeout_s = 30.0);
  int dim() const override { return dim_; }
  Vector embed_image(std::span<const std::uint8_t> image) override;
  Vector embed_text(std::string_view text) override;

 private:
  Vector call(const json& body);
  std::string base_url_;
  int dim_;
  double timeout_s_;
};

std::string class_prompt(std::string_view class_label);

struct ScoredRecord {
  corpus::AugmentationRecord record;
  std::string class_label;
  double class_score = 0.0;
  double domain_score = 0.0;
  double class_pct = 0.0;
  double domain_pct = 0.0;
  double avg_pct = 0.0;
  bool retained = true;

  json to_json() const;
  static ScoredRecord from_json(const json& j);
};

struct ScoreError {
  std::string record_id;
  std::string message;
};

struct FilterReport {
  std::vector<ScoredRecord> records;
  std::vector<ScoreError> errors;  // excluded from ranking
  double fraction_dropped = 0.0;

  std::size_t retained_count() const;
  std::set<corpus::AugmentationRecord::Key> retained_keys() const;

  // filter-report.jsonl: a header line then one line per record.
  std::string serialize() const;
  static FilterReport parse(std::string_view text);
  void save(const std::filesystem::path& path) const;
  static FilterReport load(const std::filesystem::path& path);
};

// Cosine scores against "An image of a <class>" and "<domain>".
ScoredRecord score_pair(const corpus::AugmentationRecord& record, std::span<const std::uint8_t> image,
                        std::string_view class_label, MultimodalEmbedder& embedder);

// Scores every ok record in the store, ranks the whole pool and fills the
// percentile fields. Records whose source is missing or whose embedding fails
// land in errors.
FilterReport score_records(const corpus::DatasetIndex& index, const corpus::AugmentationStore& store,
                           MultimodalEmbedder& embedder);

// 0-based ascending rank / (n-1) * 100, ties get their mean rank, n=1 -> 100.
std::vector<double> percentile_ranks(const std::vector<double>& scores);

// Recomputes percentiles over report.records.
void rank_report(FilterReport& report);

// Marks the floor(fraction * n) records with the lowest avg_pct as dropped,
// breaking ties by ascending record id. Returns the retained keys.
std::set<corpus::AugmentationRecord::Key> apply_filter(FilterReport& report, double fraction_dropped);

}  // namespace ida::filter
