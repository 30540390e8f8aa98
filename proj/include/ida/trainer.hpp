#pragma once

// Classifier training over original + augmented batches, evaluation, and the
// SDG / RRSF protocol drivers.

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ida/common.hpp"
#include "ida/corpus.hpp"
#include "ida/filter.hpp"
#include "ida/genbackend.hpp"
#include "ida/metrics.hpp"
#include "ida/pipeline.hpp"
#include "ida/prompts.hpp"

namespace ida::trainer {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct TrainConfig {
  int epochs = 50;
  int batch_size = 64;
  double learning_rate = 0.1;
  std::uint64_t seed = 0;
  int image_side = 16;
  bool use_augmentations = true;
  std::optional<double> filter_fraction;

  void validate() const;
  json to_json() const;
  static TrainConfig from_json(const json& j);
};

class ClassifierBackend {
 public:
  virtual ~ClassifierBackend() = default;
  virtual void init(int n_classes, int feature_dim, std::uint64_t seed) = 0;
  // features B x D, onehot B x K; returns the mean batch loss before the update.
  virtual double train_step(const Matrix& features, const Matrix& onehot) = 0;
  virtual std::vector<int> predict(const Matrix& features) const = 0;
  virtual Vector parameters() const = 0;
  virtual void set_parameters(const Vector& params) = 0;
  virtual int n_classes() const = 0;
  virtual int feature_dim() const = 0;
  virtual std::uint64_t seed() const = 0;
};

struct LossGradient {
  double loss = 0.0;
  Matrix dW;  // K x D
  Vector db;  // K
};

// Row-wise softmax with max subtraction.
Matrix softmax_rows(const Matrix& logits);

// Multinomial logistic regression trained by plain mini-batch gradient
// descent. Parameters are W (K x D, row-major when flattened) then b.
class SoftmaxRegression : public ClassifierBackend {
 public:
  explicit SoftmaxRegression(double learning_rate = 0.1) : lr_(learning_rate) {}
  void init(int n_classes, int feature_dim, std::uint64_t seed) override;
  double train_step(const Matrix& features, const Matrix& onehot) override;
  std::vector<int> predict(const Matrix& features) const override;
  Vector parameters() const override;
  void set_parameters(const Vector& params) override;
  int n_classes() const override { return static_cast<int>(W_.rows()); }
  int feature_dim() const override { return static_cast<int>(W_.cols()); }
  std::uint64_t seed() const override { return seed_; }

  Matrix probabilities(const Matrix& features) const;
  // Mean cross-entropy over the batch and its analytic gradient.
  LossGradient loss_and_gradient(const Matrix& features, const Matrix& onehot) const;
  double loss(const Matrix& features, const Matrix& onehot) const;

  Matrix& weights() { return W_; }
  Vector& bias() { return b_; }

 private:
  double lr_;
  std::uint64_t seed_ = 0;
  Matrix W_;
  Vector b_;
};

using BackendFactory = std::function<std::unique_ptr<ClassifierBackend>(const TrainConfig&)>;
std::unique_ptr<ClassifierBackend> default_backend(const TrainConfig& config);

// Model file: one JSON header line {n_classes, feature_dim, seed, ...}, then
// the parameters as little-endian float64.
void save_model(const std::filesystem::path& path, const ClassifierBackend& backend, const json& extra = {});
struct LoadedModel {
  json header;
  Vector parameters;
};
LoadedModel load_model(const std::filesystem::path& path);

// Downsampled RGB in [0,1], image_side^2 * 3 values.
Vector image_features(std::span<const std::uint8_t> image, int image_side);

struct Standardizer {
  Vector mean;
  Vector scale;  // 1 / max(std, kMinFeatureStd)

  // Near-constant training pixels would otherwise blow up unseen inputs.
  static constexpr double kMinFeatureStd = 0.5;

  static Standardizer fit(const Matrix& features);
  Matrix apply(const Matrix& features) const;
  json to_json() const;
  static Standardizer from_json(const json& j);
};

// Decodes and caches features for originals and generated variants.
class FeatureCache {
 public:
  FeatureCache(const corpus::DatasetIndex& index, int image_side) : index_(index), side_(image_side) {}
  const Vector& original(const corpus::SampleRecord& sample);
  const Vector& variant(const corpus::AugmentationStore& store, const corpus::AugmentationRecord& rec);
  Matrix originals(const std::vector<const corpus::SampleRecord*>& samples);
  int dim() const { return side_ * side_ * 3; }

 private:
  const corpus::DatasetIndex& index_;
  int side_;
  std::map<std::string, Vector> cache_;
};

struct EpochLog {
  int epoch = 0;
  double mean_loss = 0.0;
  double wall_time_s = 0.0;
  std::size_t examples = 0;
  std::size_t missing_variants = 0;
};

struct TrainingLog {
  std::vector<EpochLog> epochs;
  std::string serialize(bool include_wall_time = true) const;
  void save(const std::filesystem::path& path) const;
};

struct TrainResult {
  std::unique_ptr<ClassifierBackend> model;
  Standardizer standardizer;
  TrainingLog log;
};

// Trains on the given source samples. When config.use_augmentations, each
// batch is the originals followed by one sampled variant per original
// (restricted to allowed_variants when given).
TrainResult train(const corpus::DatasetIndex& index, const std::vector<const corpus::SampleRecord*>& train_samples,
                  const corpus::AugmentationStore* store, const TrainConfig& config, FeatureCache& cache,
                  const BackendFactory& factory = default_backend,
                  const std::set<corpus::AugmentationRecord::Key>* allowed_variants = nullptr);

std::vector<int> predict(const TrainResult& model, FeatureCache& cache,
                         const std::vector<const corpus::SampleRecord*>& samples);

// correct / total * 100.
double accuracy_percent(const std::vector<int>& predicted, const std::vector<int>& truth);

double evaluate(const TrainResult& model, const corpus::DatasetIndex& index, FeatureCache& cache,
                const std::vector<const corpus::SampleRecord*>& samples);

// Throws when any evaluation sample id is among the training ids.
void check_disjoint(const std::vector<const corpus::SampleRecord*>& train,
                    const std::vector<const corpus::SampleRecord*>& eval);

// ---- protocols ---------------------------------------------------------------------

struct AugmentationSetup {
  prompts::Strategy strategy = prompts::Strategy::kMinimal;
  std::size_t k = 0;  // SDG: 0 means one prompt per eligible target
  prompts::PlanMode mode = prompts::PlanMode::kSdgOnePerTarget;
  std::set<std::string> excluded_domains;
  std::set<std::string> extra_target_domains;
  std::uint64_t plan_seed = 0;
  pipeline::PregenerateOptions generation;
  // Persistent stores go under store_root/<source domain>; empty keeps them in memory.
  std::filesystem::path store_root;
  // Used when TrainConfig::filter_fraction is set.
  filter::MultimodalEmbedder* embedder = nullptr;
};

struct SdgSourceRun {
  metrics::SdgReport report;
  TrainingLog log;
  pipeline::RunReport generation;
  std::vector<corpus::AugmentationRecord> records;
};

std::vector<SdgSourceRun> run_sdg_protocol(const corpus::DatasetIndex& index, prompts::PromptSource& prompt_source,
                                           genbackend::GeneratorBackend& generator, const AugmentationSetup& setup,
                                           const TrainConfig& config, const BackendFactory& factory = default_backend);

enum class BiasKind { kBackground, kTexture, kDemographic };
BiasKind parse_bias_kind(std::string_view s);
std::string_view bias_kind_name(BiasKind k);

// Domain names each bias kind needs in the index.
struct BiasSplits {
  std::string train_domain;
  std::vector<std::string> eval_domains;
};
BiasSplits bias_splits(BiasKind kind);

struct RrsfRun {
  metrics::BiasReport report;
  TrainingLog log;
  pipeline::RunReport generation;
  std::map<std::string, double> accuracies;
};

// Accuracies per evaluation domain turned into the bias indices. Separated
// from training so fixtures can feed predictions directly.
metrics::BiasReport bias_report_from_predictions(
    BiasKind kind, const corpus::DatasetIndex& index,
    const std::map<std::string, std::pair<std::vector<const corpus::SampleRecord*>, std::vector<int>>>& predictions);

RrsfRun run_rrsf_protocol(const corpus::DatasetIndex& index, BiasKind kind, prompts::PromptSource& prompt_source,
                          genbackend::GeneratorBackend& generator, const AugmentationSetup& setup,
                          const TrainConfig& config, const BackendFactory& factory = default_backend);

}  // namespace ida::trainer
