#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <set>

#include "fixtures.hpp"
#include "ida/filter.hpp"
#include "ida/pipeline.hpp"
#include "ida/service.hpp"

using namespace ida;
using namespace ida::filter;

namespace {

ScoredRecord scored(int i, double c, double d) {
  ScoredRecord r;
  char buf[16];
  std::snprintf(buf, sizeof buf, "s%04d", i);
  r.record.source_id = buf;
  r.record.prompt_id = "p";
  r.record.prompt_text = "prompt";
  r.record.target_domain = "sketch";
  r.record.image_path = corpus::default_image_path(r.record.source_id, "p", 0);
  r.class_label = "circle";
  r.class_score = c;
  r.domain_score = d;
  return r;
}

// Independent O(n^2) oracle. Ranks are doubled so every quantity is an
// integer: 2*rank = 2*less + equal - 1.
std::set<std::string> oracle_retained(const std::vector<double>& cs, const std::vector<double>& ds,
                                      const std::vector<std::string>& ids, double fraction) {
  const std::size_t n = cs.size();
  std::vector<std::pair<long, std::string>> keyed;
  for (std::size_t i = 0; i < n; ++i) {
    long key = 0;
    for (const auto* s : {&cs, &ds}) {
      long less = 0, equal = 0;
      for (std::size_t j = 0; j < n; ++j) {
        less += (*s)[j] < (*s)[i];
        equal += (*s)[j] == (*s)[i];
      }
      key += 2 * less + equal - 1;
    }
    keyed.push_back({key, ids[i]});
  }
  std::sort(keyed.begin(), keyed.end());
  const auto drop = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n)));
  std::set<std::string> kept;
  for (std::size_t i = drop; i < n; ++i) kept.insert(keyed[i].second);
  return kept;
}

std::set<std::string> retained_ids(const FilterReport& r) {
  std::set<std::string> out;
  for (const auto& x : r.records)
    if (x.retained) out.insert(x.record.record_id());
  return out;
}

// Maps image bytes to e_{bytes[0]} and every text to e_0.
class AxisEmbedder : public MultimodalEmbedder {
 public:
  int dim() const override { return 4; }
  Vector embed_image(std::span<const std::uint8_t> image) override { return Vector::Unit(4, image[0]); }
  Vector embed_text(std::string_view) override { return Vector::Unit(4, 0); }
};

}  // namespace

TEST(PercentileRanks, Examples) {
  EXPECT_EQ(percentile_ranks({0.2, 0.8}), (std::vector<double>{0, 100}));
  EXPECT_EQ(percentile_ranks({0.5, 0.5, 0.5}), (std::vector<double>{50, 50, 50}));
  const auto r = percentile_ranks({0.9, 0.1, 0.5, 0.7});
  EXPECT_DOUBLE_EQ(r[0], 100);
  EXPECT_DOUBLE_EQ(r[1], 0);
  EXPECT_DOUBLE_EQ(r[2], 100.0 / 3);
  EXPECT_DOUBLE_EQ(r[3], 200.0 / 3);
  EXPECT_EQ(percentile_ranks({0.3}), std::vector<double>{100});
}

TEST(PercentileRanks, AgreeWithBruteForce) {
  Rng gen(8);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + gen.uniform_index(40);
    std::vector<double> s(n);
    for (auto& x : s) x = static_cast<double>(gen.uniform_index(6));
    const auto got = percentile_ranks(s);
    for (std::size_t i = 0; i < n; ++i) {
      double less = 0, equal = 0;
      for (double y : s) {
        less += y < s[i];
        equal += y == s[i];
      }
      EXPECT_NEAR(got[i], (less + (equal - 1) / 2) / double(n - 1) * 100, 1e-9);
    }
  }
}

TEST(ApplyFilter, RoundingAndTies) {
  FilterReport rep;
  for (int i = 0; i < 10; ++i) rep.records.push_back(scored(i, i * 0.1, 1 - i * 0.05));
  rank_report(rep);
  EXPECT_EQ(apply_filter(rep, 0.0).size(), 10u);
  EXPECT_EQ(apply_filter(rep, 0.25).size(), 8u);
  EXPECT_EQ(rep.retained_count(), 8u);
  EXPECT_THROW(apply_filter(rep, 1.0), Error);
  EXPECT_THROW(apply_filter(rep, -0.1), Error);

  FilterReport flat;
  for (int i = 9; i >= 0; --i) flat.records.push_back(scored(i, 0.5, 0.5));
  rank_report(flat);
  apply_filter(flat, 0.5);
  for (const auto& r : flat.records) EXPECT_EQ(r.retained, r.record.source_id >= "s0005") << r.record.source_id;
}

TEST(ApplyFilter, AvgIsMeanOfPercentiles) {
  Rng gen(3);
  FilterReport rep;
  for (int i = 0; i < 50; ++i) rep.records.push_back(scored(i, gen.uniform(), gen.uniform()));
  rank_report(rep);
  for (const auto& r : rep.records) {
    EXPECT_NEAR(r.avg_pct, (r.class_pct + r.domain_pct) / 2, 1e-12);
    EXPECT_GE(r.class_pct, 0);
    EXPECT_LE(r.class_pct, 100);
  }
}

TEST(FilterProperties, MatchesOracleInvariantUnderTransformsAndPermutation) {
  Rng gen(99);
  const std::vector<std::function<double(double)>> transforms = {
      [](double x) { return 3 * x + 1; },      [](double x) { return std::exp(2 * x); },
      [](double x) { return x * x * x + x; },  [](double x) { return std::atan(5 * x); },
      [](double x) { return std::log(x + 2); }};
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + gen.uniform_index(100);
    const bool coarse = gen.uniform_index(2);
    std::vector<double> cs(n), ds(n);
    std::vector<std::string> ids;
    FilterReport rep;
    for (std::size_t i = 0; i < n; ++i) {
      cs[i] = coarse ? gen.uniform_index(4) / 4.0 : (static_cast<double>(gen.uniform_index(2001)) - 1000) / 1000;
      ds[i] = coarse ? gen.uniform_index(3) / 3.0 : (static_cast<double>(gen.uniform_index(2001)) - 1000) / 1000;
      rep.records.push_back(scored(static_cast<int>(i), cs[i], ds[i]));
      ids.push_back(rep.records.back().record.record_id());
    }
    const double fraction = std::vector<double>{0.1, 0.25, 0.5, gen.uniform() * 0.99}[gen.uniform_index(4)];
    rank_report(rep);
    apply_filter(rep, fraction);
    const auto kept = retained_ids(rep);
    ASSERT_EQ(kept, oracle_retained(cs, ds, ids, fraction)) << "trial " << trial;
    EXPECT_EQ(kept.size(), n - static_cast<std::size_t>(std::floor(fraction * n)));

    auto shuffled = rep;
    gen.shuffle(shuffled.records);
    rank_report(shuffled);
    apply_filter(shuffled, fraction);
    EXPECT_EQ(retained_ids(shuffled), kept);

    if (trial < 50) {
      auto moved = rep;
      const auto& f = transforms[gen.uniform_index(transforms.size())];
      const int which = static_cast<int>(gen.uniform_index(3));  // class, domain or both
      for (auto& r : moved.records) {
        if (which != 1) r.class_score = f(r.class_score);
        if (which != 0) r.domain_score = f(r.domain_score);
      }
      rank_report(moved);
      apply_filter(moved, fraction);
      EXPECT_EQ(retained_ids(moved), kept);
      for (std::size_t i = 0; i < n; ++i) {
        EXPECT_EQ(moved.records[i].class_pct, rep.records[i].class_pct);
        EXPECT_EQ(moved.records[i].avg_pct, rep.records[i].avg_pct);
      }
    }
  }
}

TEST(ScorePair, CosineOnAxes) {
  AxisEmbedder e;
  corpus::AugmentationRecord rec;
  for (std::uint8_t i = 0; i < 3; ++i) {
    const Bytes img = {i};
    const auto s = score_pair(rec, img, "circle", e);
    EXPECT_DOUBLE_EQ(s.class_score, i == 0 ? 1.0 : 0.0);
    EXPECT_DOUBLE_EQ(s.domain_score, i == 0 ? 1.0 : 0.0);
  }
  EXPECT_EQ(class_prompt("guitar_case"), "An image of a guitar case");
}

TEST(StubEmbedder, UnitNormAndDeterministic) {
  StubEmbedder e;
  EXPECT_EQ(e.dim(), 256);
  testkit::TempDir dir("embed");
  const auto idx = testkit::sdg_index(dir.path(), {"photo", "sketch"}, 8, 0);
  for (const auto& s : idx.samples) {
    const auto bytes = read_file(idx.root / s.path);
    const auto v = e.embed_image(bytes);
    EXPECT_EQ(v.size(), 256);
    EXPECT_NEAR(v.norm(), 1.0, 1e-6);
    EXPECT_EQ(v, e.embed_image(bytes));
  }
  for (const char* t : {"sketch", "An image of a circle", "the of a", "zzz qqq"})
    EXPECT_NEAR(e.embed_text(t).norm(), 1.0, 1e-6) << t;
}

TEST(StubEmbedder, SemanticAgreement) {
  StubEmbedder e;
  testkit::TempDir dir("sem");
  const auto idx = testkit::sdg_index(dir.path(), {"photo", "sketch"}, 8, 0);
  int class_hits = 0, domain_hits = 0, total = 0;
  for (const auto& s : idx.samples) {
    const auto v = e.embed_image(read_file(idx.root / s.path));
    const std::string other_class = s.class_label == "circle" ? "square" : "circle";
    const std::string other_domain = s.domain_label == "photo" ? "sketch" : "photo";
    class_hits += v.dot(e.embed_text(class_prompt(s.class_label))) > v.dot(e.embed_text(class_prompt(other_class)));
    domain_hits += v.dot(e.embed_text(s.domain_label)) > v.dot(e.embed_text(other_domain));
    ++total;
  }
  EXPECT_EQ(class_hits, total);
  EXPECT_EQ(domain_hits, total);
}

TEST(HttpEmbedder, MatchesServedStub) {
  StubEmbedder local, served;
  BackendServer server(nullptr, nullptr, &served);
  const std::string url = "http://127.0.0.1:" + std::to_string(server.start());
  HttpEmbedder remote(url, local.dim());
  EXPECT_LT((remote.embed_text("a sketch") - local.embed_text("a sketch")).norm(), 1e-9);
  testkit::TempDir dir("http-embed");
  const auto idx = testkit::sdg_index(dir.path(), {"photo"}, 2, 0);
  const auto bytes = read_file(idx.root / idx.samples[0].path);
  EXPECT_LT((remote.embed_image(bytes) - local.embed_image(bytes)).norm(), 1e-9);
  HttpEmbedder wrong_dim(url, 7);
  EXPECT_THROW(wrong_dim.embed_text("x"), Error);
}

TEST(ScoreRecords, StoreRoundTripAndErrors) {
  testkit::TempDir dir("score");
  const auto idx = testkit::pacs_fixture(dir.path());
  prompts::PromptSource src(testkit::catalog("pacs"));
  prompts::PlanOptions o;
  o.source_domain = "photo";
  o.k = 1;
  const auto plan = prompts::build_plan(idx, o, src);
  auto store = corpus::AugmentationStore::in_memory("fixture", 1);
  genbackend::StubGenerator stub;
  pipeline::pregenerate(idx, plan, stub, store);
  corpus::AugmentationRecord orphan = store.all().front();
  orphan.source_id = "missing";
  orphan.image_path = corpus::default_image_path("missing", orphan.prompt_id, orphan.seed);
  store.write_image(orphan, store.read_image(store.all().front()));
  store.put(orphan);

  StubEmbedder e;
  auto report = score_records(idx, store, e);
  EXPECT_EQ(report.records.size(), 20u);
  ASSERT_EQ(report.errors.size(), 1u);
  apply_filter(report, 0.25);
  EXPECT_EQ(report.retained_count(), 15u);

  const auto path = dir / "filter-report.jsonl";
  report.save(path);
  const auto lines = read_jsonl(path);
  EXPECT_EQ(lines.front()["kind"], "filter_report");
  const auto back = FilterReport::load(path);
  EXPECT_EQ(back.serialize(), report.serialize());
  EXPECT_EQ(back.retained_keys(), report.retained_keys());
}
