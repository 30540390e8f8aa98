#include "fixtures.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <unistd.h>

namespace fs = std::filesystem;

namespace ida::testkit {

TempDir::TempDir(const std::string& tag) {
  static std::atomic<int> counter{0};
  path_ = fs::temp_directory_path() /
          ("ida-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  fs::remove_all(path_);
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

fs::path data_dir() { return IDA_DATA_DIR; }

prompts::PromptCatalog catalog(const std::string& name) {
  return prompts::PromptCatalog::load(data_dir() / "prompts" / (name + ".json"));
}

namespace {

corpus::DatasetIndex write_and_ingest(const fs::path& dir, const synth::DatasetSpec& spec) {
  const fs::path root = dir / "images";
  synth::write_dataset(root, spec);
  auto result = corpus::ingest_directory(root, {});
  if (!result.rejects.empty()) throw Error(ErrorKind::kIo, "fixture images rejected");
  return result.index;
}

}  // namespace

corpus::DatasetIndex sdg_index(const fs::path& dir, const std::vector<std::string>& domains, int train_per_domain,
                               int test_per_domain, std::uint64_t seed) {
  synth::DatasetSpec spec;
  spec.kind = synth::Kind::kSdg;
  spec.domains = domains;
  spec.train_per_domain = train_per_domain;
  spec.test_per_domain = test_per_domain;
  spec.seed = seed;
  return write_and_ingest(dir, spec);
}

corpus::DatasetIndex bias_index(const fs::path& dir, synth::Kind kind, int train, int test, std::uint64_t seed) {
  synth::DatasetSpec spec;
  spec.kind = kind;
  if (kind == synth::Kind::kDemographic) spec.classes = {"blonde", "non-blonde"};
  spec.train_per_domain = train;
  spec.test_per_domain = test;
  spec.seed = seed;
  return write_and_ingest(dir, spec);
}

corpus::DatasetIndex pacs_fixture(const fs::path& dir) {
  return sdg_index(dir, {"photo", "sketch", "cartoon", "art_painting"}, 20, 0);
}

double max_gradient_relative_error(const trainer::SoftmaxRegression& model, const trainer::Matrix& x,
                                   const trainer::Matrix& onehot, double h) {
  const auto g = model.loss_and_gradient(x, onehot);
  trainer::SoftmaxRegression probe = model;
  double worst = 0.0;
  auto compare = [&](double analytic, double numeric) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-7});
    worst = std::max(worst, std::abs(analytic - numeric) / denom);
  };
  for (Eigen::Index r = 0; r < g.dW.rows(); ++r)
    for (Eigen::Index c = 0; c < g.dW.cols(); ++c) {
      const double w = probe.weights()(r, c);
      probe.weights()(r, c) = w + h;
      const double up = probe.loss(x, onehot);
      probe.weights()(r, c) = w - h;
      const double down = probe.loss(x, onehot);
      probe.weights()(r, c) = w;
      compare(g.dW(r, c), (up - down) / (2 * h));
    }
  for (Eigen::Index r = 0; r < g.db.size(); ++r) {
    const double b = probe.bias()[r];
    probe.bias()[r] = b + h;
    const double up = probe.loss(x, onehot);
    probe.bias()[r] = b - h;
    const double down = probe.loss(x, onehot);
    probe.bias()[r] = b;
    compare(g.db[r], (up - down) / (2 * h));
  }
  return worst;
}

GradInstance random_grad_instance(Rng& gen, int k, int d, int b) {
  GradInstance inst;
  inst.model.init(k, d, gen.next_u64());
  for (Eigen::Index r = 0; r < k; ++r) {
    for (Eigen::Index c = 0; c < d; ++c) inst.model.weights()(r, c) = 0.5 * gen.normal();
    inst.model.bias()[r] = 0.5 * gen.normal();
  }
  inst.x.resize(b, d);
  for (Eigen::Index r = 0; r < b; ++r)
    for (Eigen::Index c = 0; c < d; ++c) inst.x(r, c) = gen.normal();
  inst.onehot = trainer::Matrix::Zero(b, k);
  for (Eigen::Index r = 0; r < b; ++r) inst.onehot(r, static_cast<Eigen::Index>(gen.uniform_index(k))) = 1.0;
  return inst;
}

}  // namespace ida::testkit
