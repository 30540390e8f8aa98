#pragma once

// Shared test fixtures: scratch directories and small synthetic datasets.

#include <filesystem>
#include <string>
#include <vector>

#include "ida/corpus.hpp"
#include "ida/prompts.hpp"
#include "ida/synth.hpp"
#include "ida/trainer.hpp"

namespace ida::testkit {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

std::filesystem::path data_dir();
prompts::PromptCatalog catalog(const std::string& name);

// Writes a procedural SDG dataset under dir/images and returns its index.
corpus::DatasetIndex sdg_index(const std::filesystem::path& dir, const std::vector<std::string>& domains,
                               int train_per_domain, int test_per_domain, std::uint64_t seed = 7);

// Writes one of the spurious-feature datasets under dir/images.
corpus::DatasetIndex bias_index(const std::filesystem::path& dir, synth::Kind kind, int train, int test,
                                std::uint64_t seed = 7);

// The four PACS-style domains, 20 photo training samples (the pre-generation fixture).
corpus::DatasetIndex pacs_fixture(const std::filesystem::path& dir);

// Largest relative disagreement between the analytic gradient and central
// differences with step h, over every weight and bias entry. Components where
// both magnitudes are below 1e-7 are compared absolutely.
double max_gradient_relative_error(const trainer::SoftmaxRegression& model, const trainer::Matrix& x,
                                   const trainer::Matrix& onehot, double h);

// One random instance: K classes, D features, B rows, random labels.
struct GradInstance {
  trainer::SoftmaxRegression model;
  trainer::Matrix x;
  trainer::Matrix onehot;
};
GradInstance random_grad_instance(Rng& gen, int k, int d, int b);

}  // namespace ida::testkit
