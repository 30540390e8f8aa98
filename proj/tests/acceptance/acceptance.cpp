// Acceptance checks 1-8. One PASS/FAIL line per criterion; exit status 1 on
// any failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>

#include <Eigen/QR>

#include "fixtures.hpp"
#include "ida/filter.hpp"
#include "ida/metrics.hpp"
#include "ida/pipeline.hpp"
#include "ida/trainer.hpp"

using namespace ida;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances and budgets.
constexpr double kMetricTol = 0.005;
constexpr double kMetricBudgetS = 1.0;
constexpr double kPipelineBudgetS = 30.0;
constexpr double kFilterBudgetS = 30.0;
constexpr double kFidExactTol = 1e-8;
constexpr double kFidRotationTol = 1e-6;
constexpr double kGradTol = 1e-4;
constexpr double kGradStep = 1e-5;
constexpr double kSdgMarginPp = 5.0;
constexpr double kSdgBudgetS = 300.0;
constexpr double kDedupTol = 1e-12;

struct Check {
  bool ok = true;
  std::ostringstream detail;
  void expect(bool cond, const std::string& what) {
    if (!cond) {
      if (!ok) detail << "; ";
      detail << what;
      ok = false;
    }
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

int failures = 0;

void report(int n, const std::string& name, const std::function<void(Check&)>& body) {
  Check c;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    body(c);
  } catch (const std::exception& e) {
    c.ok = false;
    c.detail << "exception: " << e.what();
  }
  const double t = seconds_since(t0);
  std::printf("criterion %d %s: %s (%.2fs)%s%s\n", n, name.c_str(), c.ok ? "PASS" : "FAIL", t,
              c.ok ? "" : " -- ", c.ok ? "" : c.detail.str().c_str());
  std::fflush(stdout);
  failures += !c.ok;
}

prompts::PromptPlan fixture_plan(const corpus::DatasetIndex& idx, std::size_t k, prompts::PlanMode mode,
                                 std::set<std::string> excluded = {}) {
  prompts::PromptSource src(testkit::catalog("pacs"));
  prompts::PlanOptions o;
  o.source_domain = "photo";
  o.k = k;
  o.mode = mode;
  o.excluded_domains = std::move(excluded);
  return prompts::build_plan(idx, o, src);
}

void criterion_metrics(Check& c) {
  const auto t0 = std::chrono::steady_clock::now();
  auto near = [&](double got, double want, const std::string& what) {
    std::ostringstream s;
    s << what << " = " << got << " (want " << want << ")";
    c.expect(std::abs(got - want) <= kMetricTol, s.str());
  };
  near(metrics::background_gap(86.02, 73.54), 12.48, "gap(86.02, 73.54)");
  near(metrics::background_gap(91.96, 79.76), 12.20, "gap(91.96, 79.76)");
  near(metrics::demographic_gaps(99.44, 77.16, 0).flip_gap, 22.28, "flip(99.44, 77.16)");
  near(metrics::demographic_gaps(99.16, 79.4, 0).flip_gap, 19.76, "flip(99.16, 79.4)");
  near(metrics::sdg_average({{"a", 74.44}, {"b", 48.78}, {"c", 50.89}, {"d", 73.74}}), 61.96, "sdg average");
  c.expect(seconds_since(t0) < kMetricBudgetS, "over time budget");
}

void criterion_pipeline(Check& c) {
  const auto t0 = std::chrono::steady_clock::now();
  testkit::TempDir dir("accept-pipeline");
  const auto idx = testkit::pacs_fixture(dir.path());
  const auto plan = fixture_plan(idx, 3, prompts::PlanMode::kSdgOnePerTarget);
  auto store = corpus::AugmentationStore::open(dir / "store");
  genbackend::StubGenerator stub;
  const auto r = pipeline::pregenerate(idx, plan, stub, store);
  c.expect(r.ok == 60 && store.count_ok() == 60, "ok records " + std::to_string(store.count_ok()));
  c.expect(plan.assignments.size() == 20, "sources " + std::to_string(plan.assignments.size()));
  for (const auto& [source, _] : plan.assignments) {
    const auto v = store.get_variants(source);
    std::set<std::string> targets;
    for (const auto& rec : v) targets.insert(rec.target_domain);
    c.expect(v.size() == 3 && targets == std::set<std::string>{"art_painting", "cartoon", "sketch"},
             "source " + source + " has " + std::to_string(v.size()) + " variants");
  }
  const auto before = store.dump();
  const auto again = pipeline::pregenerate(idx, plan, stub, store);
  c.expect(again.ok == 0 && again.skipped == 60 && store.dump() == before, "rerun changed the store");
  c.expect(seconds_since(t0) < kPipelineBudgetS, "over time budget");
}

// O(n^2) oracle with doubled integer ranks.
std::set<std::string> filter_oracle(const std::vector<double>& cs, const std::vector<double>& ds,
                                    const std::vector<std::string>& ids, double fraction) {
  const std::size_t n = cs.size();
  std::vector<std::pair<long, std::string>> keyed;
  for (std::size_t i = 0; i < n; ++i) {
    long key = 0;
    for (const auto* s : {&cs, &ds}) {
      long less = 0, eq = 0;
      for (std::size_t j = 0; j < n; ++j) {
        less += (*s)[j] < (*s)[i];
        eq += (*s)[j] == (*s)[i];
      }
      key += 2 * less + eq - 1;
    }
    keyed.push_back({key, ids[i]});
  }
  std::sort(keyed.begin(), keyed.end());
  std::set<std::string> kept;
  for (std::size_t i = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n))); i < n; ++i)
    kept.insert(keyed[i].second);
  return kept;
}

std::set<std::string> retained(const filter::FilterReport& r) {
  std::set<std::string> out;
  for (const auto& x : r.records)
    if (x.retained) out.insert(x.record.record_id());
  return out;
}

void criterion_filter(Check& c) {
  const auto t0 = std::chrono::steady_clock::now();
  Rng gen(2024);
  const std::vector<std::function<double(double)>> transforms = {
      [](double x) { return 2 * x - 5; }, [](double x) { return std::exp(3 * x); },
      [](double x) { return x * x * x + x; }, [](double x) { return std::atan(4 * x); },
      [](double x) { return std::log(x + 3); }};
  int mismatches = 0, transform_failures = 0;
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 1 + gen.uniform_index(100);
    const bool coarse = gen.uniform_index(2);
    std::vector<double> cs(n), ds(n);
    std::vector<std::string> ids;
    filter::FilterReport rep;
    for (std::size_t i = 0; i < n; ++i) {
      cs[i] = coarse ? gen.uniform_index(5) / 4.0 : (static_cast<double>(gen.uniform_index(2001)) - 1000) / 1000;
      ds[i] = coarse ? gen.uniform_index(5) / 4.0 : (static_cast<double>(gen.uniform_index(2001)) - 1000) / 1000;
      filter::ScoredRecord r;
      r.record.source_id = "s" + std::to_string(1000 + gen.uniform_index(9000)) + "-" + std::to_string(i);
      r.record.prompt_id = "p";
      r.class_score = cs[i];
      r.domain_score = ds[i];
      rep.records.push_back(r);
      ids.push_back(r.record.record_id());
    }
    const double fraction = gen.uniform() * 0.9;
    filter::rank_report(rep);
    filter::apply_filter(rep, fraction);
    const auto kept = retained(rep);
    mismatches += kept != filter_oracle(cs, ds, ids, fraction);
    if (t < 50) {
      auto moved = rep;
      const auto& f = transforms[t % transforms.size()];
      for (auto& r : moved.records) {
        r.class_score = f(r.class_score);
        r.domain_score = f(r.domain_score);
      }
      filter::rank_report(moved);
      filter::apply_filter(moved, fraction);
      transform_failures += retained(moved) != kept;
    }
  }
  c.expect(mismatches == 0, std::to_string(mismatches) + " tables disagree with the oracle");
  c.expect(transform_failures == 0, std::to_string(transform_failures) + " transforms changed the retained set");
  c.expect(seconds_since(t0) < kFilterBudgetS, "over time budget");
}

void criterion_fid(Check& c) {
  Rng gen(88);
  auto random_features = [&](Eigen::Index n, Eigen::Index e, double shift) {
    metrics::Matrix m(n, e);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < e; ++j) m(i, j) = gen.normal() + (j == 0 ? shift : 0.0);
    return m;
  };
  const auto a = metrics::compute_statistics(random_features(50, 8, 0));
  const auto b = metrics::compute_statistics(random_features(50, 8, 1.5));
  const double same = metrics::frechet_distance(a, a);
  c.expect(std::abs(same) <= kFidExactTol, "identical statistics give " + std::to_string(same));
  c.expect(std::abs(metrics::frechet_distance(a, b) - metrics::frechet_distance(b, a)) <= kFidExactTol, "asymmetric");
  metrics::SetStatistics u{metrics::Vector::Zero(1), metrics::Matrix::Identity(1, 1), 2};
  metrics::SetStatistics v{metrics::Vector::Ones(1), metrics::Matrix::Identity(1, 1), 2};
  c.expect(std::abs(metrics::frechet_distance(u, v) - 1.0) <= kFidExactTol, "1-D unit shift is not 1");
  for (int t = 0; t < 10; ++t) {
    const auto x = metrics::compute_statistics(random_features(30, 8, 0));
    const auto y = metrics::compute_statistics(random_features(30, 8, 1));
    const metrics::Matrix q = Eigen::HouseholderQR<metrics::Matrix>(random_features(8, 8, 0)).householderQ();
    auto rot = [&](const metrics::SetStatistics& s) {
      return metrics::SetStatistics{q * s.mean, q * s.covariance * q.transpose(), s.n};
    };
    const double d = metrics::frechet_distance(x, y), dr = metrics::frechet_distance(rot(x), rot(y));
    c.expect(std::abs(d - dr) <= kFidRotationTol, "rotation changed FID by " + std::to_string(std::abs(d - dr)));
  }
}

void criterion_gradient(Check& c) {
  Rng gen(5);
  double worst = 0.0;
  for (int t = 0; t < 20; ++t) {
    const int k = 2 + static_cast<int>(gen.uniform_index(4));
    const int d = 1 + static_cast<int>(gen.uniform_index(64));
    auto inst = testkit::random_grad_instance(gen, k, d, 8);
    worst = std::max(worst, testkit::max_gradient_relative_error(inst.model, inst.x, inst.onehot, kGradStep));
  }
  c.expect(worst <= kGradTol, "max relative error " + std::to_string(worst));
  std::printf("  gradient: max relative error %.3g\n", worst);
}

void criterion_sdg(Check& c) {
  const auto t0 = std::chrono::steady_clock::now();
  testkit::TempDir dir("accept-sdg");
  const auto idx = testkit::sdg_index(dir.path(), {"photo", "sketch"}, 200, 100);
  prompts::PromptSource src(testkit::catalog("pacs"));
  genbackend::StubGenerator stub;
  trainer::AugmentationSetup setup;
  double ida_sum = 0, erm_sum = 0;
  std::ostringstream per_seed;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    trainer::TrainConfig cfg;
    cfg.seed = seed;
    auto mean_of = [&](const std::vector<trainer::SdgSourceRun>& runs) {
      double s = 0;
      for (const auto& r : runs) s += r.report.average;
      return s / static_cast<double>(runs.size());
    };
    const double with = mean_of(trainer::run_sdg_protocol(idx, src, stub, setup, cfg));
    cfg.use_augmentations = false;
    const double without = mean_of(trainer::run_sdg_protocol(idx, src, stub, setup, cfg));
    ida_sum += with;
    erm_sum += without;
    per_seed << " seed" << seed << "=" << with << "/" << without;
  }
  const double margin = (ida_sum - erm_sum) / 5.0;
  c.expect(margin >= kSdgMarginPp, "IDA-ERM margin " + std::to_string(margin) + " pp;" + per_seed.str());
  c.expect(seconds_since(t0) < kSdgBudgetS, "over time budget");
  std::printf("  sdg: IDA %.2f%%, ERM %.2f%%, margin %.2f pp\n", ida_sum / 5, erm_sum / 5, margin);
}

void criterion_leave_one_out(Check& c) {
  testkit::TempDir dir("accept-loo");
  const auto idx = testkit::pacs_fixture(dir.path());
  genbackend::StubGenerator stub;
  for (const std::string excluded : {"sketch", "cartoon", "art_painting"}) {
    const auto plan = fixture_plan(idx, 2, prompts::PlanMode::kSdgLeaveOneOut, {excluded});
    auto store = corpus::AugmentationStore::in_memory(idx.name, 2);
    pipeline::pregenerate(idx, plan, stub, store);
    std::size_t bad = 0;
    for (const auto& r : store.all()) bad += r.target_domain == excluded;
    c.expect(bad == 0 && store.count_ok() == 40, std::to_string(bad) + " records target " + excluded);
  }
}

void criterion_dedup(Check& c) {
  testkit::TempDir dir("accept-dedup");
  const auto idx = testkit::sdg_index(dir.path(), {"photo", "sketch"}, 4, 6);
  filter::StubEmbedder e;
  std::vector<const corpus::SampleRecord*> tests = idx.select(std::nullopt, corpus::Split::kTest);
  metrics::Matrix test_rows(static_cast<Eigen::Index>(tests.size()), e.dim());
  for (std::size_t i = 0; i < tests.size(); ++i)
    test_rows.row(static_cast<Eigen::Index>(i)) = e.embed_image(read_file(idx.root / tests[i]->path));
  // One byte-identical copy of a test image and two generated images.
  genbackend::StubGenerator stub;
  const auto train = idx.select(std::nullopt, corpus::Split::kTrain);
  std::vector<Bytes> cands = {read_file(idx.root / tests[3]->path)};
  for (int i = 0; i < 2; ++i) {
    genbackend::GenerationRequest req;
    req.mode = genbackend::Mode::kSdedit;
    req.prompt = i ? "a sketch of a circle" : "a cartoon of a square";
    req.source_image = read_file(idx.root / train[static_cast<std::size_t>(i)]->path);
    req.seed = 11 + static_cast<std::uint64_t>(i);
    cands.push_back(genbackend::generate(stub, req).images.at(0));
  }
  metrics::Matrix cand_rows(3, e.dim());
  for (int i = 0; i < 3; ++i) cand_rows.row(i) = e.embed_image(cands[static_cast<std::size_t>(i)]);
  const auto r = metrics::duplication_report(cand_rows, test_rows, 0.9);
  c.expect(std::abs(r.fraction_flagged - 1.0 / 3.0) <= kDedupTol,
           "fraction_flagged " + std::to_string(r.fraction_flagged));
}

}  // namespace

int main() {
  report(1, "metric oracles", criterion_metrics);
  report(2, "pre-generation fixture", criterion_pipeline);
  report(3, "filter ranking", criterion_filter);
  report(4, "frechet distance", criterion_fid);
  report(5, "gradient check", criterion_gradient);
  report(6, "desk-scale SDG", criterion_sdg);
  report(7, "leave-one-out purity", criterion_leave_one_out);
  report(8, "dedup fraction", criterion_dedup);
  std::printf("%s: %d of 8 criteria failed\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
