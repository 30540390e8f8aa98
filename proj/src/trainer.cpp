#include "ida/trainer.hpp"

#include <bit>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "ida/image.hpp"

namespace ida::trainer {

void TrainConfig::validate() const {
  if (epochs <= 0) throw Error(ErrorKind::kUsage, "train.epochs must be positive");
  if (batch_size <= 0) throw Error(ErrorKind::kUsage, "train.batch_size must be positive");
  if (!(learning_rate > 0)) throw Error(ErrorKind::kUsage, "train.learning_rate must be positive");
  if (image_side <= 0) throw Error(ErrorKind::kUsage, "train.image_side must be positive");
  if (filter_fraction && !(*filter_fraction >= 0 && *filter_fraction < 1))
    throw Error(ErrorKind::kUsage, "train.filter_fraction must lie in [0,1)");
}

json TrainConfig::to_json() const {
  json j{{"epochs", epochs},         {"batch_size", batch_size}, {"learning_rate", learning_rate},
         {"seed", seed},             {"image_side", image_side}, {"use_augmentations", use_augmentations},
         {"filter_fraction", nullptr}};
  if (filter_fraction) j["filter_fraction"] = *filter_fraction;
  return j;
}

TrainConfig TrainConfig::from_json(const json& j) {
  TrainConfig c;
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.seed = j.value("seed", c.seed);
  c.image_side = j.value("image_side", c.image_side);
  c.use_augmentations = j.value("use_augmentations", c.use_augmentations);
  if (j.contains("filter_fraction") && !j["filter_fraction"].is_null())
    c.filter_fraction = j["filter_fraction"].get<double>();
  c.validate();
  return c;
}

// ---- reference backend ------------------------------------------------------------

Matrix softmax_rows(const Matrix& logits) {
  Matrix p = logits.colwise() - logits.rowwise().maxCoeff();
  p = p.array().exp().matrix();
  p.array().colwise() /= p.rowwise().sum().array();
  return p;
}

void SoftmaxRegression::init(int n_classes, int feature_dim, std::uint64_t seed) {
  if (n_classes < 2 || feature_dim < 1) throw Error(ErrorKind::kUsage, "classifier needs >= 2 classes and >= 1 feature");
  seed_ = seed;
  Rng rng(mix_seed(seed, "softmax-init"));
  W_.resize(n_classes, feature_dim);
  for (Eigen::Index r = 0; r < W_.rows(); ++r)
    for (Eigen::Index c = 0; c < W_.cols(); ++c) W_(r, c) = 0.01 * rng.normal();
  b_ = Vector::Zero(n_classes);
}

Matrix SoftmaxRegression::probabilities(const Matrix& features) const {
  Matrix logits = features * W_.transpose();
  logits.rowwise() += b_.transpose();
  return softmax_rows(logits);
}

double SoftmaxRegression::loss(const Matrix& features, const Matrix& onehot) const {
  Matrix logits = features * W_.transpose();
  logits.rowwise() += b_.transpose();
  const Vector mx = logits.rowwise().maxCoeff();
  const Vector lse = ((logits.colwise() - mx).array().exp().rowwise().sum().log()).matrix() + mx;
  const Vector picked = (logits.array() * onehot.array()).rowwise().sum();
  return (lse - picked).mean();
}

LossGradient SoftmaxRegression::loss_and_gradient(const Matrix& features, const Matrix& onehot) const {
  if (features.rows() != onehot.rows() || onehot.cols() != W_.rows() || features.cols() != W_.cols())
    throw Error(ErrorKind::kDimensionMismatch, "loss_and_gradient: shape mismatch");
  const double n = static_cast<double>(features.rows());
  LossGradient g;
  g.loss = loss(features, onehot);
  const Matrix delta = probabilities(features) - onehot;
  g.dW = delta.transpose() * features / n;
  g.db = delta.colwise().sum().transpose() / n;
  return g;
}

double SoftmaxRegression::train_step(const Matrix& features, const Matrix& onehot) {
  const LossGradient g = loss_and_gradient(features, onehot);
  if (!std::isfinite(g.loss)) throw Error(ErrorKind::kDivergence, "training loss is not finite");
  W_ -= lr_ * g.dW;
  b_ -= lr_ * g.db;
  return g.loss;
}

std::vector<int> SoftmaxRegression::predict(const Matrix& features) const {
  Matrix logits = features * W_.transpose();
  logits.rowwise() += b_.transpose();
  std::vector<int> out(static_cast<std::size_t>(logits.rows()));
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    Eigen::Index arg = 0;
    logits.row(i).maxCoeff(&arg);
    out[static_cast<std::size_t>(i)] = static_cast<int>(arg);
  }
  return out;
}

Vector SoftmaxRegression::parameters() const {
  Vector p(W_.size() + b_.size());
  Eigen::Index k = 0;
  for (Eigen::Index r = 0; r < W_.rows(); ++r)
    for (Eigen::Index c = 0; c < W_.cols(); ++c) p[k++] = W_(r, c);
  p.tail(b_.size()) = b_;
  return p;
}

void SoftmaxRegression::set_parameters(const Vector& params) {
  if (params.size() != W_.size() + b_.size())
    throw Error(ErrorKind::kDimensionMismatch, "set_parameters: expected " + std::to_string(W_.size() + b_.size()));
  Eigen::Index k = 0;
  for (Eigen::Index r = 0; r < W_.rows(); ++r)
    for (Eigen::Index c = 0; c < W_.cols(); ++c) W_(r, c) = params[k++];
  b_ = params.tail(b_.size());
}

std::unique_ptr<ClassifierBackend> default_backend(const TrainConfig& config) {
  return std::make_unique<SoftmaxRegression>(config.learning_rate);
}

void save_model(const std::filesystem::path& path, const ClassifierBackend& backend, const json& extra) {
  json header = extra.is_object() ? extra : json::object();
  header["n_classes"] = backend.n_classes();
  header["feature_dim"] = backend.feature_dim();
  header["seed"] = backend.seed();
  const Vector p = backend.parameters();
  header["n_params"] = p.size();
  std::string out = to_line(header) + "\n";
  const std::size_t off = out.size();
  out.resize(off + static_cast<std::size_t>(p.size()) * 8);
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(p[i]);
    for (int b = 0; b < 8; ++b) out[off + static_cast<std::size_t>(i) * 8 + b] = static_cast<char>((bits >> (8 * b)) & 0xff);
  }
  write_text_atomic(path, out);
}

LoadedModel load_model(const std::filesystem::path& path) {
  const Bytes data = read_file(path);
  auto nl = std::find(data.begin(), data.end(), static_cast<std::uint8_t>('\n'));
  if (nl == data.end()) throw Error(ErrorKind::kParse, path.string() + ": missing model header");
  LoadedModel m;
  try {
    m.header = json::parse(std::string(data.begin(), nl));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kParse, path.string() + ": " + e.what());
  }
  const std::size_t off = static_cast<std::size_t>(nl - data.begin()) + 1;
  const std::size_t n = (data.size() - off) / 8;
  if ((data.size() - off) % 8 != 0 || (m.header.contains("n_params") && m.header["n_params"].get<std::size_t>() != n))
    throw Error(ErrorKind::kParse, path.string() + ": truncated parameter block");
  m.parameters.resize(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(data[off + i * 8 + b]) << (8 * b);
    m.parameters[static_cast<Eigen::Index>(i)] = std::bit_cast<double>(bits);
  }
  return m;
}

// ---- features ---------------------------------------------------------------------

Vector image_features(std::span<const std::uint8_t> image, int image_side) {
  const Image small = resize_square(decode_image(image).image, image_side);
  Vector v(static_cast<Eigen::Index>(small.rgb.size()));
  for (std::size_t i = 0; i < small.rgb.size(); ++i) v[static_cast<Eigen::Index>(i)] = small.rgb[i] / 255.0;
  return v;
}

Standardizer Standardizer::fit(const Matrix& features) {
  if (features.rows() == 0) throw Error(ErrorKind::kEmptyInput, "standardizer: no training features");
  Standardizer s;
  s.mean = features.colwise().mean().transpose();
  const Matrix centered = features.rowwise() - s.mean.transpose();
  const Vector var = centered.array().square().colwise().mean().transpose();
  s.scale = var.unaryExpr([](double v) { return 1.0 / std::max(std::sqrt(v), kMinFeatureStd); });
  return s;
}

Matrix Standardizer::apply(const Matrix& features) const {
  return (features.rowwise() - mean.transpose()).array().rowwise() * scale.transpose().array();
}

json Standardizer::to_json() const {
  return {{"mean", std::vector<double>(mean.data(), mean.data() + mean.size())},
          {"scale", std::vector<double>(scale.data(), scale.data() + scale.size())}};
}

Standardizer Standardizer::from_json(const json& j) {
  auto m = j.at("mean").get<std::vector<double>>();
  auto s = j.at("scale").get<std::vector<double>>();
  if (m.size() != s.size()) throw Error(ErrorKind::kParse, "standardizer: mean/scale length mismatch");
  Standardizer out;
  out.mean = Eigen::Map<Vector>(m.data(), static_cast<Eigen::Index>(m.size()));
  out.scale = Eigen::Map<Vector>(s.data(), static_cast<Eigen::Index>(s.size()));
  return out;
}

const Vector& FeatureCache::original(const corpus::SampleRecord& sample) {
  auto it = cache_.find("o:" + sample.id);
  if (it != cache_.end()) return it->second;
  return cache_.emplace("o:" + sample.id, image_features(read_file(index_.root / sample.path), side_)).first->second;
}

const Vector& FeatureCache::variant(const corpus::AugmentationStore& store, const corpus::AugmentationRecord& rec) {
  const std::string key = "v:" + rec.record_id();
  auto it = cache_.find(key);
  if (it != cache_.end()) return it->second;
  return cache_.emplace(key, image_features(store.read_image(rec), side_)).first->second;
}

Matrix FeatureCache::originals(const std::vector<const corpus::SampleRecord*>& samples) {
  Matrix x(static_cast<Eigen::Index>(samples.size()), dim());
  for (std::size_t i = 0; i < samples.size(); ++i) x.row(static_cast<Eigen::Index>(i)) = original(*samples[i]);
  return x;
}

// ---- training -----------------------------------------------------------------------

std::string TrainingLog::serialize(bool include_wall_time) const {
  std::string out;
  for (const auto& e : epochs) {
    json j{{"epoch", e.epoch}, {"mean_loss", e.mean_loss}, {"examples", e.examples}};
    if (include_wall_time) j["wall_time_s"] = e.wall_time_s;
    out += to_line(j) + "\n";
  }
  return out;
}

void TrainingLog::save(const std::filesystem::path& path) const { write_text_atomic(path, serialize()); }

TrainResult train(const corpus::DatasetIndex& index, const std::vector<const corpus::SampleRecord*>& train_samples,
                  const corpus::AugmentationStore* store, const TrainConfig& config, FeatureCache& cache,
                  const BackendFactory& factory, const std::set<corpus::AugmentationRecord::Key>* allowed_variants) {
  config.validate();
  if (train_samples.empty()) throw Error(ErrorKind::kEmptyInput, "train: no training samples");
  if (config.use_augmentations && !store) throw Error(ErrorKind::kUsage, "train: augmentations requested without a store");
  const auto t0 = std::chrono::steady_clock::now();
  const int n_classes = static_cast<int>(index.classes.size());

  TrainResult result;
  const Matrix x_orig = cache.originals(train_samples);
  result.standardizer = Standardizer::fit(x_orig);
  const Matrix z_orig = result.standardizer.apply(x_orig);
  std::vector<int> labels(train_samples.size());
  for (std::size_t i = 0; i < train_samples.size(); ++i) labels[i] = index.class_index(train_samples[i]->class_label);

  result.model = factory(config);
  result.model->init(n_classes, cache.dim(), config.seed);

  Rng rng(mix_seed(config.seed, "train"));
  std::vector<std::size_t> order(train_samples.size());
  std::iota(order.begin(), order.end(), 0);
  const auto bs = static_cast<std::size_t>(config.batch_size);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t n_batches = 0;
    EpochLog log;
    log.epoch = epoch;
    for (std::size_t start = 0; start < order.size(); start += bs) {
      const std::size_t end = std::min(order.size(), start + bs);
      std::vector<const corpus::SampleRecord*> batch;
      for (std::size_t i = start; i < end; ++i) batch.push_back(train_samples[order[i]]);

      std::vector<Vector> variant_rows;
      std::vector<int> variant_labels;
      if (config.use_augmentations) {
        const auto paired = pipeline::sample_training_pairs(batch, *store, rng, allowed_variants);
        log.missing_variants += paired.missing;
        for (std::size_t i = 0; i < paired.pairs.size(); ++i) {
          if (!paired.pairs[i].variant) continue;
          variant_rows.push_back(cache.variant(*store, *paired.pairs[i].variant));
          variant_labels.push_back(labels[order[start + i]]);
        }
      }

      const auto b = static_cast<Eigen::Index>(batch.size() + variant_rows.size());
      Matrix x(b, cache.dim());
      Matrix y = Matrix::Zero(b, n_classes);
      Eigen::Index r = 0;
      for (std::size_t i = start; i < end; ++i, ++r) {
        x.row(r) = z_orig.row(static_cast<Eigen::Index>(order[i]));
        y(r, labels[order[i]]) = 1.0;
      }
      if (!variant_rows.empty()) {
        Matrix raw(static_cast<Eigen::Index>(variant_rows.size()), cache.dim());
        for (std::size_t i = 0; i < variant_rows.size(); ++i) raw.row(static_cast<Eigen::Index>(i)) = variant_rows[i];
        x.bottomRows(raw.rows()) = result.standardizer.apply(raw);
        for (std::size_t i = 0; i < variant_labels.size(); ++i, ++r) y(r, variant_labels[i]) = 1.0;
      }
      const double loss = result.model->train_step(x, y);
      if (!std::isfinite(loss))
        throw Error(ErrorKind::kDivergence, "loss diverged at epoch " + std::to_string(epoch) + ", batch " +
                                                std::to_string(n_batches) + " (lr=" + std::to_string(config.learning_rate) + ")");
      loss_sum += loss;
      log.examples += static_cast<std::size_t>(b);
      ++n_batches;
    }
    log.mean_loss = loss_sum / static_cast<double>(n_batches);
    log.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.log.epochs.push_back(log);
  }
  return result;
}

std::vector<int> predict(const TrainResult& model, FeatureCache& cache,
                         const std::vector<const corpus::SampleRecord*>& samples) {
  if (samples.empty()) return {};
  return model.model->predict(model.standardizer.apply(cache.originals(samples)));
}

double accuracy_percent(const std::vector<int>& predicted, const std::vector<int>& truth) {
  if (predicted.size() != truth.size()) throw Error(ErrorKind::kDimensionMismatch, "accuracy: length mismatch");
  if (truth.empty()) throw Error(ErrorKind::kEmptyInput, "accuracy: no samples");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) correct += predicted[i] == truth[i];
  return 100.0 * static_cast<double>(correct) / static_cast<double>(truth.size());
}

double evaluate(const TrainResult& model, const corpus::DatasetIndex& index, FeatureCache& cache,
                const std::vector<const corpus::SampleRecord*>& samples) {
  if (samples.empty()) throw Error(ErrorKind::kEmptyInput, "evaluate: no samples");
  std::vector<int> truth;
  for (const auto* s : samples) truth.push_back(index.class_index(s->class_label));
  return accuracy_percent(predict(model, cache, samples), truth);
}

void check_disjoint(const std::vector<const corpus::SampleRecord*>& train,
                    const std::vector<const corpus::SampleRecord*>& eval) {
  std::set<std::string> ids;
  for (const auto* s : train) ids.insert(s->id);
  for (const auto* s : eval)
    if (ids.count(s->id)) throw Error(ErrorKind::kInvalidRequest, "evaluation sample " + s->id + " is in the training set");
}

// ---- protocols ------------------------------------------------------------------------

namespace {

corpus::AugmentationStore open_store(const AugmentationSetup& setup, const corpus::DatasetIndex& index,
                                     const std::string& name, int k) {
  if (setup.store_root.empty()) return corpus::AugmentationStore::in_memory(index.name, k);
  auto store = corpus::AugmentationStore::open(setup.store_root / name);
  store.set_meta(index.name, k);
  return store;
}

struct Augmented {
  pipeline::RunReport generation;
  std::optional<std::set<corpus::AugmentationRecord::Key>> allowed;
};

Augmented augment(const corpus::DatasetIndex& index, const prompts::PromptPlan& plan,
                  genbackend::GeneratorBackend& generator, corpus::AugmentationStore& store,
                  const AugmentationSetup& setup, const TrainConfig& config) {
  Augmented out;
  out.generation = pipeline::pregenerate(index, plan, generator, store, setup.generation);
  if (config.filter_fraction && *config.filter_fraction > 0) {
    if (!setup.embedder) throw Error(ErrorKind::kUsage, "filter_fraction set but no embedder configured");
    auto report = filter::score_records(index, store, *setup.embedder);
    out.allowed = filter::apply_filter(report, *config.filter_fraction);
  }
  return out;
}

}  // namespace

std::vector<SdgSourceRun> run_sdg_protocol(const corpus::DatasetIndex& index, prompts::PromptSource& prompt_source,
                                           genbackend::GeneratorBackend& generator, const AugmentationSetup& setup,
                                           const TrainConfig& config, const BackendFactory& factory) {
  if (index.domains.size() < 2) throw Error(ErrorKind::kMissingSplit, "SDG needs at least two domains");
  std::vector<SdgSourceRun> runs;
  FeatureCache cache(index, config.image_side);
  for (const auto& source : index.domains) {
    SdgSourceRun run;
    const auto train_samples = index.select(source, corpus::Split::kTrain);
    if (train_samples.empty()) throw Error(ErrorKind::kMissingSplit, "domain " + source + " has no train split");

    prompts::PlanOptions po;
    po.source_domain = source;
    po.strategy = setup.strategy;
    po.mode = setup.mode;
    po.excluded_domains = setup.excluded_domains;
    po.extra_target_domains = setup.extra_target_domains;
    po.rng_seed = mix_seed(setup.plan_seed, source);
    po.k = config.use_augmentations ? (setup.k ? setup.k : prompts::eligible_targets(index, po).size()) : 0;
    const auto plan = prompts::build_plan(index, po, prompt_source);

    auto store = open_store(setup, index, source, static_cast<int>(po.k));
    const auto aug = augment(index, plan, generator, store, setup, config);
    run.generation = aug.generation;
    run.records = store.all();

    auto trained = train(index, train_samples, &store, config, cache, factory, aug.allowed ? &*aug.allowed : nullptr);
    run.log = trained.log;

    std::map<std::string, double> per_target;
    for (const auto& target : index.domains) {
      if (target == source) continue;
      const auto eval = index.select(target);
      check_disjoint(train_samples, eval);
      per_target[target] = evaluate(trained, index, cache, eval);
    }
    run.report = metrics::SdgReport::make(source, std::move(per_target));
    runs.push_back(std::move(run));
  }
  return runs;
}

BiasKind parse_bias_kind(std::string_view s) {
  if (s == "background") return BiasKind::kBackground;
  if (s == "texture") return BiasKind::kTexture;
  if (s == "demographic") return BiasKind::kDemographic;
  throw Error(ErrorKind::kUsage, "unknown bias kind: " + std::string(s));
}

std::string_view bias_kind_name(BiasKind k) {
  switch (k) {
    case BiasKind::kBackground: return "background";
    case BiasKind::kTexture: return "texture";
    case BiasKind::kDemographic: return "demographic";
  }
  return "?";
}

BiasSplits bias_splits(BiasKind kind) {
  switch (kind) {
    case BiasKind::kBackground: return {"original", {"original", "mixed_same", "mixed_rand"}};
    case BiasKind::kTexture: return {"original", {"original", "cue_conflict"}};
    case BiasKind::kDemographic: return {"iid", {"iid", "flip", "rand"}};
  }
  return {};
}

metrics::BiasReport bias_report_from_predictions(
    BiasKind kind, const corpus::DatasetIndex& index,
    const std::map<std::string, std::pair<std::vector<const corpus::SampleRecord*>, std::vector<int>>>& predictions) {
  auto acc = [&](const std::string& domain) {
    auto it = predictions.find(domain);
    if (it == predictions.end()) throw Error(ErrorKind::kMissingSplit, "no predictions for " + domain);
    std::vector<int> truth;
    for (const auto* s : it->second.first) truth.push_back(index.class_index(s->class_label));
    return accuracy_percent(it->second.second, truth);
  };
  switch (kind) {
    case BiasKind::kBackground:
      return metrics::BiasReport::background(acc("original"), acc("mixed_same"), acc("mixed_rand"));
    case BiasKind::kDemographic:
      return metrics::BiasReport::demographic(acc("iid"), acc("flip"), acc("rand"));
    case BiasKind::kTexture: {
      auto it = predictions.find("cue_conflict");
      if (it == predictions.end()) throw Error(ErrorKind::kMissingSplit, "no predictions for cue_conflict");
      long long tp_texture = 0, tp_shape = 0;
      const auto& [samples, pred] = it->second;
      for (std::size_t i = 0; i < samples.size(); ++i) {
        auto tex = samples[i]->attributes.find("texture_label");
        if (tex == samples[i]->attributes.end())
          throw Error(ErrorKind::kMissingSplit, "cue_conflict sample " + samples[i]->path + " lacks texture_label");
        if (pred[i] == index.class_index(samples[i]->class_label)) ++tp_shape;
        else if (pred[i] == index.class_index(tex->second)) ++tp_texture;
      }
      return metrics::BiasReport::texture(tp_texture, tp_shape, acc("original"));
    }
  }
  throw Error(ErrorKind::kUsage, "unknown bias kind");
}

RrsfRun run_rrsf_protocol(const corpus::DatasetIndex& index, BiasKind kind, prompts::PromptSource& prompt_source,
                          genbackend::GeneratorBackend& generator, const AugmentationSetup& setup,
                          const TrainConfig& config, const BackendFactory& factory) {
  const BiasSplits splits = bias_splits(kind);
  for (const auto& d : splits.eval_domains)
    if (!index.domains.count(d)) throw Error(ErrorKind::kMissingSplit, "index lacks domain " + d);
  const auto train_samples = index.select(splits.train_domain, corpus::Split::kTrain);
  if (train_samples.empty()) throw Error(ErrorKind::kMissingSplit, splits.train_domain + " has no train split");

  RrsfRun run;
  prompts::PlanOptions po;
  po.source_domain = splits.train_domain;
  po.strategy = setup.strategy;
  po.mode = prompts::PlanMode::kRrsfRandom;
  po.rng_seed = mix_seed(setup.plan_seed, bias_kind_name(kind));
  po.k = config.use_augmentations ? setup.k : 0;
  const auto plan = prompts::build_plan(index, po, prompt_source);

  auto store = open_store(setup, index, std::string(bias_kind_name(kind)), static_cast<int>(po.k));
  const auto aug = augment(index, plan, generator, store, setup, config);
  run.generation = aug.generation;

  FeatureCache cache(index, config.image_side);
  auto trained = train(index, train_samples, &store, config, cache, factory, aug.allowed ? &*aug.allowed : nullptr);
  run.log = trained.log;

  std::map<std::string, std::pair<std::vector<const corpus::SampleRecord*>, std::vector<int>>> predictions;
  for (const auto& d : splits.eval_domains) {
    auto eval = d == splits.train_domain ? index.select(d, corpus::Split::kTest) : index.select(d);
    if (eval.empty()) throw Error(ErrorKind::kMissingSplit, "no evaluation samples in " + d);
    check_disjoint(train_samples, eval);
    auto pred = predict(trained, cache, eval);
    std::vector<int> truth;
    for (const auto* s : eval) truth.push_back(index.class_index(s->class_label));
    run.accuracies[d] = accuracy_percent(pred, truth);
    predictions[d] = {std::move(eval), std::move(pred)};
  }
  run.report = bias_report_from_predictions(kind, index, predictions);
  return run;
}

}  // namespace ida::trainer
