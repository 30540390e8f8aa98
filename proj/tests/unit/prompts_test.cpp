#include <gtest/gtest.h>

#include <map>
#include <set>

#include "fixtures.hpp"
#include "ida/prompts.hpp"

using namespace ida;
using namespace ida::prompts;

namespace {

std::string replace_class(std::string t, const std::string& with) {
  t.replace(t.find("{CLASS}"), 7, with);
  return t;
}

// In-memory index with the given domains, `per` training samples each.
corpus::DatasetIndex fake_index(const std::vector<std::string>& domains, int per, int n_classes = 2) {
  corpus::DatasetIndex idx;
  idx.name = "fake";
  for (int c = 0; c < n_classes; ++c) idx.classes.insert("class" + std::to_string(c));
  for (const auto& d : domains) {
    idx.domains.insert(d);
    for (int i = 0; i < per; ++i) {
      corpus::SampleRecord s;
      s.id = sha256_joined({d, std::to_string(i)});
      s.path = d + "/" + std::to_string(i) + ".png";
      s.domain_label = d;
      s.class_label = "class" + std::to_string(i % n_classes);
      idx.samples.push_back(s);
    }
  }
  std::sort(idx.samples.begin(), idx.samples.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  return idx;
}

PromptCatalog fake_catalog(const std::vector<std::string>& domains, int h_per_domain) {
  PromptCatalog c;
  c.name = "fake";
  c.article = true;
  for (const auto& d : domains) {
    c.strategies["M"][d] = {"a " + d + " of {CLASS}"};
    for (int i = 0; i < h_per_domain; ++i)
      c.strategies["H"][d].push_back("style" + std::to_string(i) + " " + d + " of {CLASS}");
  }
  return c;
}

// Text generator that always answers with the same few strings.
class EchoTextGen : public TextGenBackend {
 public:
  explicit EchoTextGen(std::vector<std::string> texts) : texts_(std::move(texts)) {}
  std::vector<std::string> generate_text(const TextGenRequest& r) override {
    requests.push_back(r);
    return texts_;
  }
  std::vector<TextGenRequest> requests;

 private:
  std::vector<std::string> texts_;
};

}  // namespace

TEST(Minimal, PacsSketchElephant) {
  const auto pacs = testkit::catalog("pacs");
  EXPECT_EQ(render_minimal("sketch", "elephant", pacs).text, "a sketch of an elephant");
  EXPECT_EQ(render_minimal("photo", "dog", pacs).text, "a photo of a dog");
  EXPECT_EQ(render_minimal("art_painting", "horse", pacs).text, "an art painting of a horse");
}

TEST(Minimal, NicoKeywordTemplate) {
  const auto nico = testkit::catalog("nico");
  EXPECT_EQ(render_minimal("autumn", "cat", nico).text, "autumn cat");
}

TEST(Minimal, UnknownDomainIsMissingTemplate) {
  try {
    render_minimal("infrared", "dog", testkit::catalog("pacs"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kMissingTemplate);
  }
}

TEST(Minimal, IdDependsOnTextAndDomain) {
  const auto pacs = testkit::catalog("pacs");
  const auto a = render_minimal("sketch", "dog", pacs);
  EXPECT_EQ(a.id, render_minimal("sketch", "dog", pacs).id);
  EXPECT_EQ(a.id, prompt_id(a.text, "sketch"));
  EXPECT_NE(a.id, prompt_id(a.text, "photo"));
}

TEST(Handcrafted, PacsSketchDogFirstTwo) {
  const auto got = expand_handcrafted("sketch", "dog", testkit::catalog("pacs"), 2);
  ASSERT_EQ(got.size(), 2u);
  EXPECT_EQ(got[0].text, "an ink pen sketch of a dog");
  EXPECT_EQ(got[1].text, "a charcoal sketch of a dog");
}

TEST(Handcrafted, FullPoolInCatalogOrderThenCycles) {
  const auto pacs = testkit::catalog("pacs");
  const auto& pool = *pacs.templates(Strategy::kHandcrafted, "cartoon");
  const auto got = expand_handcrafted("cartoon", "ox", pacs, pool.size());
  ASSERT_EQ(got.size(), pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) EXPECT_EQ(got[i].text, replace_class(pool[i], "an ox"));

  const auto more = expand_handcrafted("cartoon", "ox", pacs, pool.size() + 2);
  ASSERT_EQ(more.size(), pool.size() + 2);
  EXPECT_EQ(more[pool.size()].text, more[0].text);
  EXPECT_EQ(more[pool.size()].id, more[0].id + "-c1");
  std::set<std::string> ids;
  for (const auto& p : more) ids.insert(p.id);
  EXPECT_EQ(ids.size(), more.size());
}

TEST(Handcrafted, TextureFinalHasMoreTemplates) {
  const auto orig = testkit::catalog("texture_original");
  const auto fin = testkit::catalog("texture_final");
  EXPECT_GT(fin.templates(Strategy::kHandcrafted, "texture")->size(),
            orig.templates(Strategy::kHandcrafted, "texture")->size());
}

TEST(Templates, FidelityAcrossShippedCatalogs) {
  // Every rendered M/H prompt equals its template with the class substituted,
  // with "a"/"an" inserted only in article catalogs after "of".
  for (const auto& [name, cat] : load_catalogs(testkit::data_dir() / "prompts")) {
    for (const auto& [strategy, domains] : cat.strategies) {
      for (const auto& [domain, templates] : domains) {
        for (const auto& t : templates) {
          if (count_placeholders(t) == 0) continue;
          const bool after_of = t.find("of {CLASS}") != std::string::npos;
          const std::string expected = replace_class(t, cat.article && after_of ? "a dog" : "dog");
          EXPECT_EQ(render_template(t, "dog", cat.article), expected) << name << "/" << domain;
        }
      }
    }
  }
}

TEST(Templates, ImagenetBackgroundSuffix) {
  const auto in9 = testkit::catalog("imagenet9");
  EXPECT_EQ(render_template(in9.templates(Strategy::kHandcrafted, "background")->front(), "dog", in9.article),
            "dog in a parking lot");
}

TEST(Templates, PlaceholderRules) {
  EXPECT_FALSE(check_template("a photo of {CLASS}", false));
  EXPECT_TRUE(check_template("{CLASS} and {CLASS}", false));
  EXPECT_TRUE(check_template("a photo", false));
  EXPECT_FALSE(check_template("male", true));
  EXPECT_TRUE(check_template("   ", true));
  PromptCatalog bad = fake_catalog({"photo"}, 1);
  bad.strategies["H"]["photo"].push_back("{CLASS} {CLASS}");
  try {
    bad.validate();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kParse);
  }
}

TEST(Templates, Articles) {
  EXPECT_EQ(indefinite_article("elephant"), "an");
  EXPECT_EQ(indefinite_article("dog"), "a");
  EXPECT_EQ(indefinite_article("hour"), "an");
  EXPECT_EQ(indefinite_article("university"), "a");
  EXPECT_EQ(render_template("a painting of {CLASS}", "guitar_case", true), "a painting of a guitar case");
}

TEST(Catalog, CelebaCounterStereotypeMap) {
  const auto celeba = testkit::catalog("celeba_sub");
  EXPECT_EQ(*celeba.templates(Strategy::kHandcrafted, "blonde"), std::vector<std::string>{"male"});
  EXPECT_EQ(*celeba.templates(Strategy::kHandcrafted, "non-blonde"), std::vector<std::string>{"female"});
}

TEST(Catalog, JsonRoundTripAndDomainMatching) {
  const auto pacs = testkit::catalog("pacs");
  const auto back = PromptCatalog::from_json(pacs.to_json());
  EXPECT_EQ(back.to_json(), pacs.to_json());
  EXPECT_NE(pacs.templates(Strategy::kMinimal, "Art_Painting"), nullptr);
}

TEST(LanguageEnhanced, RequestAssembly) {
  const auto c = le_request("sketch", "elephant", 3, Strategy::kLeConservative, 0);
  EXPECT_EQ(c.input, "sketch elephant");
  EXPECT_EQ(c.mode, "beam");
  EXPECT_EQ(c.beam_width, 12u);
  const auto m = le_request("sketch", "elephant", 3, Strategy::kLeModerate, 9);
  EXPECT_EQ(m.mode, "sample");
  EXPECT_EQ(m.top_k, 50);
  EXPECT_DOUBLE_EQ(*m.top_p, 0.95);
  EXPECT_EQ(m.seed, 9u);
}

TEST(LanguageEnhanced, ConservativeIsDeterministic) {
  StubTextGen tg;
  const auto a = generate_language_enhanced("sketch", "elephant", 4, Strategy::kLeConservative, tg);
  const auto b = generate_language_enhanced("sketch", "elephant", 4, Strategy::kLeConservative, tg);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.size(), 4u);
  for (const auto& p : a) EXPECT_EQ(p.target_domain, "sketch");
}

TEST(LanguageEnhanced, ModerateSeededAndUnique) {
  StubTextGen tg;
  const auto a = generate_language_enhanced("sketch", "elephant", 5, Strategy::kLeModerate, tg, 1);
  const auto b = generate_language_enhanced("sketch", "elephant", 5, Strategy::kLeModerate, tg, 1);
  EXPECT_EQ(a, b);
  std::set<std::string> texts;
  for (const auto& p : a) texts.insert(p.text);
  EXPECT_EQ(texts.size(), 5u);
  bool any_differs = false;
  for (std::uint64_t s = 2; s < 12 && !any_differs; ++s)
    any_differs = generate_language_enhanced("sketch", "elephant", 5, Strategy::kLeModerate, tg, s) != a;
  EXPECT_TRUE(any_differs);
}

TEST(LanguageEnhanced, PartialResultAfterRetryCap) {
  EchoTextGen tg({"same prompt", "same prompt", "other prompt"});
  try {
    generate_language_enhanced("sketch", "dog", 3, Strategy::kLeModerate, tg, 0);
    FAIL();
  } catch (const PartialResult& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kPartialResult);
    ASSERT_EQ(e.obtained().size(), 2u);
    EXPECT_EQ(e.obtained()[0].text, "same prompt");
    EXPECT_EQ(e.obtained()[1].text, "other prompt");
  }
  EXPECT_EQ(tg.requests.size(), 1u + kLeRetryCap);
}

TEST(LanguageEnhanced, UnreachableBackend) {
  HttpTextGen tg("http://127.0.0.1:1", 1.0);
  try {
    generate_language_enhanced("sketch", "dog", 2, Strategy::kLeConservative, tg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kBackendUnavailable);
  }
}

TEST(Plan, PacsOnePerTarget) {
  const auto idx = fake_index({"photo", "sketch", "cartoon", "art_painting"}, 10);
  PromptSource src(testkit::catalog("pacs"));
  PlanOptions o;
  o.source_domain = "photo";
  o.k = 3;
  const auto plan = build_plan(idx, o, src);
  EXPECT_EQ(plan.assignments.size(), 10u);
  for (const auto& [id, list] : plan.assignments) {
    std::multiset<std::string> targets;
    for (const auto& pp : list) targets.insert(pp.prompt.target_domain);
    EXPECT_EQ(targets, (std::multiset<std::string>{"art_painting", "cartoon", "sketch"}));
  }
}

TEST(Plan, PacsLeaveOneOut) {
  const auto idx = fake_index({"photo", "sketch", "cartoon", "art_painting"}, 10);
  PromptSource src(testkit::catalog("pacs"));
  PlanOptions o;
  o.source_domain = "photo";
  o.k = 2;
  o.mode = PlanMode::kSdgLeaveOneOut;
  o.excluded_domains = {"sketch"};
  const auto plan = build_plan(idx, o, src);
  for (const auto& [id, list] : plan.assignments) {
    std::set<std::string> targets;
    for (const auto& pp : list) targets.insert(pp.prompt.target_domain);
    EXPECT_EQ(targets, (std::set<std::string>{"art_painting", "cartoon"}));
  }
}

TEST(Plan, ZeroKIsEmptyAndTooLargeKInfeasible) {
  const auto idx = fake_index({"photo", "sketch"}, 4);
  PromptSource src(testkit::catalog("pacs"));
  PlanOptions o;
  o.source_domain = "photo";
  o.k = 0;
  EXPECT_EQ(build_plan(idx, o, src).total_pairs(), 0u);
  o.k = 2;
  try {
    build_plan(idx, o, src);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kPlanInfeasible);
  }
}

TEST(Plan, SerializeRoundTrip) {
  const auto idx = fake_index({"photo", "sketch", "cartoon"}, 5);
  PromptSource src(testkit::catalog("pacs"));
  PlanOptions o;
  o.source_domain = "sketch";
  o.k = 2;
  o.strategy = Strategy::kHandcrafted;
  const auto plan = build_plan(idx, o, src);
  EXPECT_EQ(PromptPlan::parse(plan.serialize()).serialize(), plan.serialize());
}

TEST(Plan, RrsfReplacementPolicy) {
  const auto idx = fake_index({"original"}, 12);
  PromptCatalog cat;
  cat.name = "tex";
  cat.strategies["H"]["texture"] = {"striped", "dotted", "woven", "marbled", "scaly", "furry"};
  PromptSource src(cat);
  PlanOptions o;
  o.mode = PlanMode::kRrsfRandom;
  o.strategy = Strategy::kHandcrafted;
  o.k = 4;
  for (const auto& [id, list] : build_plan(idx, o, src).assignments) {
    std::set<std::string> ids;
    for (const auto& pp : list) ids.insert(pp.prompt.id);
    EXPECT_EQ(ids.size(), 4u);  // pool of 6 >= k: no repeats
  }
  o.k = 9;
  for (const auto& [id, list] : build_plan(idx, o, src).assignments) EXPECT_EQ(list.size(), 9u);
}

TEST(Plan, RrsfClassKeyedPool) {
  const auto celeba = testkit::catalog("celeba_sub");
  PromptSource src(celeba);
  const auto pool = src.attribute_pool("blonde", Strategy::kHandcrafted);
  ASSERT_EQ(pool.size(), 1u);
  EXPECT_EQ(pool[0].text, "male");
  EXPECT_EQ(pool[0].target_domain, "blonde");
}

// Random instances: domains, k, exclusions, strategy and seed.
TEST(PlanProperties, CoverageExclusionAndDeterminism) {
  Rng gen(2024);
  for (int trial = 0; trial < 150; ++trial) {
    const int n_domains = 2 + static_cast<int>(gen.uniform_index(5));
    std::vector<std::string> domains;
    for (int d = 0; d < n_domains; ++d) domains.push_back("dom" + std::to_string(d));
    const auto idx = fake_index(domains, 1 + static_cast<int>(gen.uniform_index(6)), 3);
    PromptSource src(fake_catalog(domains, 1 + static_cast<int>(gen.uniform_index(4))));

    PlanOptions o;
    o.source_domain = domains[gen.uniform_index(domains.size())];
    o.rng_seed = gen.next_u64();
    o.strategy = gen.uniform_index(2) ? Strategy::kHandcrafted : Strategy::kMinimal;
    const bool loo = gen.uniform_index(2);
    std::set<std::string> eligible(domains.begin(), domains.end());
    eligible.erase(o.source_domain);
    if (loo) {
      o.mode = PlanMode::kSdgLeaveOneOut;
      for (const auto& d : domains)
        if (d != o.source_domain && gen.uniform_index(3) == 0) o.excluded_domains.insert(d);
      for (const auto& d : o.excluded_domains) eligible.erase(d);
    }
    const bool full = !loo && gen.uniform_index(2);
    o.k = full ? eligible.size() : gen.uniform_index(eligible.size() + 1);

    const auto plan = build_plan(idx, o, src);
    EXPECT_EQ(plan.serialize(), build_plan(idx, o, src).serialize());
    const auto sources = idx.select(o.source_domain, corpus::Split::kTrain);
    if (o.k > 0) EXPECT_EQ(plan.assignments.size(), sources.size());
    for (const auto& [id, list] : plan.assignments) {
      EXPECT_EQ(list.size(), o.k);
      std::multiset<std::string> targets;
      for (const auto& pp : list) {
        targets.insert(pp.prompt.target_domain);
        EXPECT_NE(pp.prompt.target_domain, o.source_domain);
        EXPECT_EQ(o.excluded_domains.count(pp.prompt.target_domain), 0u);
      }
      std::set<std::string> distinct(targets.begin(), targets.end());
      EXPECT_EQ(distinct.size(), targets.size());
      if (full) EXPECT_EQ(distinct, eligible);
    }
  }
}

TEST(PlanProperties, PerSampleAssignmentIndependentOfOtherSamples) {
  const auto full = fake_index({"a", "b", "c"}, 8);
  auto partial = full;
  partial.samples.erase(partial.samples.begin(), partial.samples.begin() + 5);
  PromptSource src(fake_catalog({"a", "b", "c"}, 3));
  PlanOptions o;
  o.source_domain = "a";
  o.k = 1;
  o.strategy = Strategy::kHandcrafted;
  o.rng_seed = 5;
  const auto pf = build_plan(full, o, src);
  const auto pp = build_plan(partial, o, src);
  for (const auto& [id, list] : pp.assignments) {
    ASSERT_TRUE(pf.assignments.count(id));
    EXPECT_EQ(pf.assignments.at(id)[0].prompt, list[0].prompt);
    EXPECT_EQ(pf.assignments.at(id)[0].seed, list[0].seed);
  }
}
