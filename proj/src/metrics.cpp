#include "ida/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

#include <Eigen/Eigenvalues>

namespace ida::metrics {

double sdg_average(const std::map<std::string, double>& per_target) {
  if (per_target.empty()) throw Error(ErrorKind::kEmptyInput, "sdg_average: no target domains");
  double sum = 0.0;
  for (const auto& [_, acc] : per_target) sum += acc;
  return sum / static_cast<double>(per_target.size());
}

SdgReport SdgReport::make(std::string source_domain, std::map<std::string, double> per_target) {
  SdgReport r;
  r.source_domain = std::move(source_domain);
  r.average = sdg_average(per_target);
  r.per_target_accuracy = std::move(per_target);
  return r;
}

json SdgReport::to_json() const {
  return {{"source_domain", source_domain},
          {"per_target_accuracy", per_target_accuracy},
          {"average", average},
          {"unit", kPercentUnit}};
}

double background_gap(double acc_mixed_same, double acc_mixed_rand) { return acc_mixed_same - acc_mixed_rand; }

double texture_bias(long long tp_texture, long long tp_shape) {
  if (tp_texture < 0 || tp_shape < 0) throw Error(ErrorKind::kInvalidRequest, "texture_bias: negative count");
  if (tp_texture + tp_shape == 0)
    throw Error(ErrorKind::kUndefined, "texture_bias: no texture or shape true positives");
  return static_cast<double>(tp_texture) / static_cast<double>(tp_texture + tp_shape);
}

DemographicGaps demographic_gaps(double acc_iid, double acc_flip, double acc_rand) {
  return {acc_iid - acc_flip, acc_iid - acc_rand};
}

BiasReport BiasReport::background(double acc_original, double acc_mixed_same, double acc_mixed_rand) {
  BiasReport r;
  r.benchmark = "background";
  r.inputs = {{"acc_original", acc_original}, {"acc_mixed_same", acc_mixed_same}, {"acc_mixed_rand", acc_mixed_rand}};
  r.gap = background_gap(acc_mixed_same, acc_mixed_rand);
  return r;
}

BiasReport BiasReport::texture(long long tp_texture, long long tp_shape, double acc_original) {
  BiasReport r;
  r.benchmark = "texture";
  r.inputs = {{"tp_texture", tp_texture}, {"tp_shape", tp_shape}, {"acc_original", acc_original}};
  try {
    r.texture_bias = metrics::texture_bias(tp_texture, tp_shape);
    r.texture_bias_status = "ok";
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::kUndefined) throw;
    r.texture_bias_status = "not_applicable";
  }
  return r;
}

BiasReport BiasReport::demographic(double acc_iid, double acc_flip, double acc_rand) {
  BiasReport r;
  r.benchmark = "demographic";
  r.inputs = {{"acc_iid", acc_iid}, {"acc_flip", acc_flip}, {"acc_rand", acc_rand}};
  const auto g = demographic_gaps(acc_iid, acc_flip, acc_rand);
  r.flip_gap = g.flip_gap;
  r.rand_gap = g.rand_gap;
  return r;
}

json BiasReport::to_json() const {
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json j{{"benchmark", benchmark}, {"inputs", inputs}, {"unit", kPercentUnit}};
  if (benchmark == "background") j["gap"] = opt(gap);
  if (benchmark == "texture") {
    j["texture_bias"] = opt(texture_bias);
    j["texture_bias_status"] = texture_bias_status;
    j["texture_bias_unit"] = "fraction";
  }
  if (benchmark == "demographic") {
    j["flip_gap"] = opt(flip_gap);
    j["rand_gap"] = opt(rand_gap);
  }
  return j;
}

bool BiasReport::self_consistent(double tol) const {
  auto close = [&](const std::optional<double>& v, double expect) { return v && std::abs(*v - expect) <= tol; };
  if (benchmark == "background")
    return close(gap, background_gap(inputs.at("acc_mixed_same"), inputs.at("acc_mixed_rand")));
  if (benchmark == "texture") {
    const long long t = inputs.at("tp_texture"), s = inputs.at("tp_shape");
    if (t + s == 0) return !texture_bias && texture_bias_status == "not_applicable";
    return close(texture_bias, metrics::texture_bias(t, s));
  }
  if (benchmark == "demographic") {
    const auto g = demographic_gaps(inputs.at("acc_iid"), inputs.at("acc_flip"), inputs.at("acc_rand"));
    return close(flip_gap, g.flip_gap) && close(rand_gap, g.rand_gap);
  }
  return false;
}

SetStatistics compute_statistics(const Matrix& features) {
  if (features.rows() < 2) throw Error(ErrorKind::kEmptyInput, "compute_statistics: need at least two samples");
  SetStatistics s;
  s.n = static_cast<std::size_t>(features.rows());
  s.mean = features.colwise().mean().transpose();
  const Matrix centered = features.rowwise() - s.mean.transpose();
  s.covariance = (centered.transpose() * centered) / static_cast<double>(features.rows() - 1);
  return s;
}

namespace {

constexpr double kNegTol = 1e-8;

Vector checked_eigenvalues(const Vector& values, const char* what) {
  Vector out = values;
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    if (out[i] < -kNegTol)
      throw Error(ErrorKind::kNotPsd, std::string(what) + " has eigenvalue " + std::to_string(out[i]));
    if (out[i] < 0) out[i] = 0;
  }
  return out;
}

void check_covariance(const Matrix& c, const char* what) {
  const double scale = std::max(1.0, c.cwiseAbs().maxCoeff());
  if ((c - c.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale)
    throw Error(ErrorKind::kNotPsd, std::string(what) + " is not symmetric");
}

}  // namespace

double frechet_distance(const SetStatistics& a, const SetStatistics& b) {
  const Eigen::Index e = a.mean.size();
  if (b.mean.size() != e || a.covariance.rows() != e || a.covariance.cols() != e || b.covariance.rows() != e ||
      b.covariance.cols() != e)
    throw Error(ErrorKind::kDimensionMismatch, "frechet_distance: dimension mismatch");
  check_covariance(a.covariance, "covariance a");
  check_covariance(b.covariance, "covariance b");

  const Matrix sa = 0.5 * (a.covariance + a.covariance.transpose());
  const Matrix sb = 0.5 * (b.covariance + b.covariance.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> ea(sa);
  checked_eigenvalues(Eigen::SelfAdjointEigenSolver<Matrix>(sb, Eigen::EigenvaluesOnly).eigenvalues(),
                      "covariance b");
  const Vector la = checked_eigenvalues(ea.eigenvalues(), "covariance a");
  const Matrix sqrt_a = ea.eigenvectors() * la.cwiseSqrt().asDiagonal() * ea.eigenvectors().transpose();
  // tr((Sa Sb)^1/2) = tr((Sa^1/2 Sb Sa^1/2)^1/2), and the inner product is symmetric.
  Matrix inner = sqrt_a * sb * sqrt_a;
  inner = 0.5 * (inner + inner.transpose());
  const Vector li =
      checked_eigenvalues(Eigen::SelfAdjointEigenSolver<Matrix>(inner, Eigen::EigenvaluesOnly).eigenvalues(),
                          "covariance product");
  const double tr_sqrt = li.cwiseSqrt().sum();
  const double d = (a.mean - b.mean).squaredNorm() + sa.trace() + sb.trace() - 2.0 * tr_sqrt;
  return std::max(0.0, d);
}

json DuplicationReport::to_json() const {
  json pairs = json::array();
  for (const auto& p : top_pairs)
    pairs.push_back({{"candidate", p.candidate}, {"test", p.test}, {"similarity", p.similarity}});
  return {{"threshold", threshold},     {"n_candidates", n_candidates}, {"n_flagged", n_flagged},
          {"fraction_flagged", fraction_flagged}, {"top_pairs", pairs}};
}

DuplicationReport duplication_report(const Matrix& candidates, const Matrix& tests, double threshold) {
  if (candidates.rows() == 0 || tests.rows() == 0)
    throw Error(ErrorKind::kEmptyInput, "duplication_report: empty candidate or test set");
  if (candidates.cols() != tests.cols()) throw Error(ErrorKind::kDimensionMismatch, "duplication_report: dims differ");
  if (!(threshold > 0.0 && threshold <= 1.0))
    throw Error(ErrorKind::kInvalidRequest, "duplication_report: threshold must lie in (0,1]");

  DuplicationReport r;
  r.threshold = threshold;
  r.n_candidates = static_cast<std::size_t>(candidates.rows());
  const Matrix sim = candidates * tests.transpose();

  auto better = [](const DuplicatePair& x, const DuplicatePair& y) {
    if (x.similarity != y.similarity) return x.similarity > y.similarity;
    return std::tie(x.candidate, x.test) < std::tie(y.candidate, y.test);
  };
  std::priority_queue<DuplicatePair, std::vector<DuplicatePair>, decltype(better)> heap(better);
  for (Eigen::Index i = 0; i < sim.rows(); ++i) {
    if (sim.row(i).maxCoeff() >= threshold) ++r.n_flagged;
    for (Eigen::Index j = 0; j < sim.cols(); ++j) {
      DuplicatePair p{static_cast<std::size_t>(i), static_cast<std::size_t>(j), sim(i, j)};
      if (heap.size() < kTopPairs) {
        heap.push(p);
      } else if (better(p, heap.top())) {
        heap.pop();
        heap.push(p);
      }
    }
  }
  while (!heap.empty()) {
    r.top_pairs.push_back(heap.top());
    heap.pop();
  }
  std::sort(r.top_pairs.begin(), r.top_pairs.end(), better);
  r.fraction_flagged = static_cast<double>(r.n_flagged) / static_cast<double>(r.n_candidates);
  return r;
}

}  // namespace ida::metrics
