#pragma once

// Evaluation numbers: SDG averages, bias indices, Frechet distance between
// embedded sets and near-duplicate detection. Accuracies are percents.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ida/common.hpp"

namespace ida::metrics {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr const char* kPercentUnit = "percent";

double sdg_average(const std::map<std::string, double>& per_target);

struct SdgReport {
  std::string source_domain;
  std::map<std::string, double> per_target_accuracy;  // percent
  double average = 0.0;

  static SdgReport make(std::string source_domain, std::map<std::string, double> per_target);
  json to_json() const;
};

double background_gap(double acc_mixed_same, double acc_mixed_rand);

// Throws Error(kUndefined) when both counts are zero.
double texture_bias(long long tp_texture, long long tp_shape);

struct DemographicGaps {
  double flip_gap = 0.0;
  double rand_gap = 0.0;
};
DemographicGaps demographic_gaps(double acc_iid, double acc_flip, double acc_rand);

// Optional fields are absent for benchmarks that do not define them.
struct BiasReport {
  std::string benchmark;
  json inputs = json::object();
  std::optional<double> gap;
  std::optional<double> texture_bias;  // nullopt with texture_bias_status "not_applicable"
  std::string texture_bias_status;
  std::optional<double> flip_gap;
  std::optional<double> rand_gap;

  static BiasReport background(double acc_original, double acc_mixed_same, double acc_mixed_rand);
  static BiasReport texture(long long tp_texture, long long tp_shape, double acc_original);
  static BiasReport demographic(double acc_iid, double acc_flip, double acc_rand);
  json to_json() const;
  // Recomputes every index from the echoed inputs.
  bool self_consistent(double tol = 1e-12) const;
};

struct SetStatistics {
  Vector mean;
  Matrix covariance;  // unbiased
  std::size_t n = 0;
};

// Rows of features are samples. Needs at least two rows.
SetStatistics compute_statistics(const Matrix& features);

double frechet_distance(const SetStatistics& a, const SetStatistics& b);

struct DuplicatePair {
  std::size_t candidate = 0;
  std::size_t test = 0;
  double similarity = 0.0;
};

struct DuplicationReport {
  double threshold = 0.9;
  std::size_t n_candidates = 0;
  std::size_t n_flagged = 0;
  double fraction_flagged = 0.0;
  std::vector<DuplicatePair> top_pairs;  // highest similarity first

  json to_json() const;
};

inline constexpr std::size_t kTopPairs = 20;

// Rows are unit-norm features.
DuplicationReport duplication_report(const Matrix& candidates, const Matrix& tests, double threshold = 0.9);

}  // namespace ida::metrics
