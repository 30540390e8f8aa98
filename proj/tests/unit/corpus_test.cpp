#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "ida/corpus.hpp"
#include "ida/image.hpp"

using namespace ida;
using namespace ida::corpus;
namespace fs = std::filesystem;

namespace {

Bytes tiny_png(std::uint8_t value) {
  Image img(4, 4);
  std::fill(img.rgb.begin(), img.rgb.end(), value);
  return encode_png(img);
}

void put_file(const fs::path& p, const Bytes& bytes) {
  fs::create_directories(p.parent_path());
  write_file_atomic(p, bytes);
}

AugmentationRecord record(const std::string& source, const std::string& prompt, std::uint64_t seed,
                          RecordStatus status = RecordStatus::kOk) {
  AugmentationRecord r;
  r.source_id = source;
  r.prompt_id = prompt;
  r.prompt_text = "a sketch of " + prompt;
  r.target_domain = "sketch";
  r.seed = seed;
  r.image_path = default_image_path(source, prompt, seed);
  r.status = status;
  return r;
}

}  // namespace

TEST(Ingest, TwoDomainsTwoClasses) {
  testkit::TempDir dir("ingest");
  const auto root = dir / "ds";
  put_file(root / "photo/cat/1.png", tiny_png(1));
  put_file(root / "photo/dog/1.png", tiny_png(2));
  put_file(root / "sketch/cat/1.png", tiny_png(3));
  put_file(root / "sketch/dog/1.png", tiny_png(4));
  const auto result = ingest_directory(root, {});
  EXPECT_EQ(result.index.samples.size(), 4u);
  EXPECT_EQ(result.index.domains, (std::set<std::string>{"photo", "sketch"}));
  EXPECT_EQ(result.index.classes, (std::set<std::string>{"cat", "dog"}));
  EXPECT_TRUE(std::is_sorted(result.index.samples.begin(), result.index.samples.end(),
                             [](const auto& a, const auto& b) { return a.id < b.id; }));
  EXPECT_EQ(result.index.name, "ds");
}

TEST(Ingest, EmptyRootIsEmptyDataset) {
  testkit::TempDir dir("empty");
  try {
    ingest_directory(dir.path(), {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kEmptyDataset);
  }
}

TEST(Ingest, IdenticalBytesDifferentClassesGetDistinctIds) {
  testkit::TempDir dir("dup");
  const auto root = dir / "ds";
  const Bytes bytes = tiny_png(9);
  put_file(root / "photo/cat/a.png", bytes);
  put_file(root / "photo/dog/a.png", bytes);
  const auto idx = ingest_directory(root, {}).index;
  ASSERT_EQ(idx.samples.size(), 2u);
  EXPECT_NE(idx.samples[0].id, idx.samples[1].id);
  // Independent oracle: hash of bytes, a NUL byte, then the relative path.
  for (const auto& s : idx.samples) {
    Bytes joined = bytes;
    joined.push_back(0);
    joined.insert(joined.end(), s.path.begin(), s.path.end());
    EXPECT_EQ(s.id, sha256_hex(joined));
    EXPECT_EQ(s.id.size(), 64u);
  }
}

TEST(Ingest, UndecodableFilesAreRejectedNotFatal) {
  testkit::TempDir dir("rej");
  const auto root = dir / "ds";
  put_file(root / "photo/cat/ok.png", tiny_png(1));
  put_file(root / "photo/cat/bad.png", Bytes{1, 2, 3});
  const auto result = ingest_directory(root, {});
  EXPECT_EQ(result.index.samples.size(), 1u);
  ASSERT_EQ(result.rejects.size(), 1u);
  EXPECT_EQ(result.rejects[0].path, "photo/cat/bad.png");

  const auto all_bad = dir / "bad";
  put_file(all_bad / "photo/cat/bad.png", Bytes{1, 2, 3});
  EXPECT_THROW(ingest_directory(all_bad, {}), Error);
}

TEST(Ingest, ClassOnlyLayoutUsesSingleDomain) {
  testkit::TempDir dir("classonly");
  const auto root = dir / "textures";
  put_file(root / "cat/1.png", tiny_png(1));
  put_file(root / "dog/1.png", tiny_png(2));
  IngestOptions o;
  o.layout = Layout::kClassOnly;
  auto idx = ingest_directory(root, o).index;
  EXPECT_EQ(idx.domains, std::set<std::string>{"textures"});
  o.single_domain = "original";
  idx = ingest_directory(root, o).index;
  EXPECT_EQ(idx.domains, std::set<std::string>{"original"});
}

TEST(Ingest, RebuildIsByteIdentical) {
  testkit::TempDir dir("rebuild");
  const auto a = testkit::sdg_index(dir.path(), {"photo", "sketch"}, 6, 2);
  const auto b = ingest_directory(dir / "images", {}).index;
  EXPECT_EQ(a.serialize(), b.serialize());
  const auto parsed = DatasetIndex::parse(a.serialize());
  EXPECT_EQ(parsed.serialize(), a.serialize());
  EXPECT_EQ(parsed.root, a.root);
}

TEST(Ingest, ManifestSuppliesSplitsAndAttributes) {
  testkit::TempDir dir("manifest");
  const auto idx = testkit::bias_index(dir.path(), synth::Kind::kTexture, 8, 4);
  std::size_t tests = 0, labelled = 0;
  for (const auto& s : idx.samples) {
    tests += s.split == Split::kTest;
    labelled += s.attributes.count("texture_label");
  }
  EXPECT_EQ(tests, 8u);  // original test + cue_conflict test
  EXPECT_EQ(labelled, 4u);
}

TEST(SampleId, ChangesIffBytesOrPathChange) {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    Bytes bytes(1 + rng.uniform_index(64));
    for (auto& b : bytes) b = static_cast<std::uint8_t>(rng.uniform_index(256));
    const std::string path = "d/c/" + std::to_string(rng.uniform_index(1000)) + ".png";
    const auto id = sample_id(bytes, path);
    EXPECT_EQ(id, sample_id(bytes, path));
    Bytes flipped = bytes;
    flipped[rng.uniform_index(flipped.size())] ^= 0x01;
    EXPECT_NE(id, sample_id(flipped, path));
    EXPECT_NE(id, sample_id(bytes, path + "x"));
  }
}

TEST(DatasetIndex, ValidateRejectsDuplicatesAndUnknownLabels) {
  DatasetIndex idx;
  idx.name = "x";
  idx.domains = {"photo"};
  idx.classes = {"cat"};
  SampleRecord s{"aa", "photo/cat/1.png", "cat", "photo", Split::kTrain, {}};
  idx.samples = {s, s};
  EXPECT_THROW(idx.validate(), Error);
  idx.samples = {s};
  idx.samples[0].class_label = "dog";
  EXPECT_THROW(idx.validate(), Error);
  idx.samples[0].class_label = "cat";
  EXPECT_NO_THROW(idx.validate());
  EXPECT_EQ(idx.class_index("cat"), 0);
}

TEST(Store, PutIsIdempotent) {
  auto store = AugmentationStore::in_memory("ds", 3);
  const auto r = record("s1", "p1", 0);
  EXPECT_TRUE(store.put(r));
  EXPECT_FALSE(store.put(r));
  EXPECT_EQ(store.size(), 1u);
}

TEST(Store, ConflictingPayloadIsKeyConflict) {
  auto store = AugmentationStore::in_memory("ds", 3);
  store.put(record("s1", "p1", 0));
  auto other = record("s1", "p1", 0);
  other.prompt_text = "something else";
  try {
    store.put(other);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kKeyConflict);
  }
  other = record("s1", "p1", 0);
  other.image_path = "aug/elsewhere.png";
  EXPECT_THROW(store.put(other), Error);
}

TEST(Store, FailedUpgradesToOkButOkNeverDowngrades) {
  auto store = AugmentationStore::in_memory("ds", 1);
  store.put(record("s1", "p1", 0, RecordStatus::kFailed));
  EXPECT_TRUE(get_variants(store, "s1").empty());
  EXPECT_TRUE(store.put(record("s1", "p1", 0)));
  EXPECT_EQ(get_variants(store, "s1").size(), 1u);
  EXPECT_FALSE(store.put(record("s1", "p1", 0, RecordStatus::kFailed)));
  EXPECT_EQ(store.get({"s1", "p1", 0})->status, RecordStatus::kOk);
}

TEST(Store, GetVariantsFiltersSortsAndIsStable) {
  auto store = AugmentationStore::in_memory("ds", 3);
  store.put(record("s1", "pc", 0));
  store.put(record("s1", "pa", 0));
  store.put(record("s1", "pb", 0));
  store.put(record("s1", "pd", 0, RecordStatus::kFailed));
  const auto v = get_variants(store, "s1");
  ASSERT_EQ(v.size(), 3u);
  EXPECT_EQ(v[0].prompt_id, "pa");
  EXPECT_EQ(v[2].prompt_id, "pc");
  EXPECT_EQ(v, get_variants(store, "s1"));
  EXPECT_TRUE(get_variants(store, "unknown").empty());
}

TEST(Store, PersistsAndReplays) {
  testkit::TempDir dir("store");
  {
    auto store = AugmentationStore::open(dir / "s");
    store.set_meta("ds", 2);
    store.put(record("s1", "p1", 0));
    store.put(record("s1", "p2", 0, RecordStatus::kFailed));
  }
  auto reopened = AugmentationStore::open(dir / "s");
  EXPECT_EQ(reopened.dataset_name(), "ds");
  EXPECT_EQ(reopened.k(), 2);
  EXPECT_EQ(reopened.size(), 2u);
  EXPECT_EQ(reopened.count_ok(), 1u);
}

TEST(Store, SequentialWritersSameKeyYieldOneRecord) {
  testkit::TempDir dir("writers");
  auto a = AugmentationStore::open(dir / "s");
  auto b = AugmentationStore::open(dir / "s");
  a.put(record("s1", "p1", 0));
  b.put(record("s1", "p1", 0));
  auto fresh = AugmentationStore::open(dir / "s");
  EXPECT_EQ(fresh.size(), 1u);
  a.refresh();
  EXPECT_EQ(a.dump(), fresh.dump());
}

TEST(Store, RefreshSeesOtherAppenders) {
  testkit::TempDir dir("refresh");
  auto a = AugmentationStore::open(dir / "s");
  auto b = AugmentationStore::open(dir / "s");
  b.put(record("s2", "p1", 3));
  EXPECT_EQ(a.size(), 0u);
  a.refresh();
  EXPECT_EQ(a.size(), 1u);
}

TEST(Store, ImagesRoundTrip) {
  testkit::TempDir dir("images");
  auto disk = AugmentationStore::open(dir / "s");
  auto mem = AugmentationStore::in_memory("ds", 1);
  const auto r = record("s1", "p1", 4);
  const Bytes png = tiny_png(77);
  disk.write_image(r, png);
  mem.write_image(r, png);
  EXPECT_EQ(disk.read_image(r), png);
  EXPECT_EQ(mem.read_image(r), png);
  EXPECT_TRUE(fs::exists(disk.image_file(r)));
  EXPECT_EQ(r.image_path, "aug/s1/p1-4.png");
}

TEST(Record, JsonRoundTrip) {
  auto r = record("s1", "p1", 12345678901234ULL);
  r.backend_mode = BackendMode::kControlnetCanny;
  EXPECT_EQ(AugmentationRecord::from_json(r.to_json()), r);
  EXPECT_EQ(r.record_id(), "s1/p1-12345678901234");
  for (auto m : {BackendMode::kText2Image, BackendMode::kSdedit, BackendMode::kControlnetCanny,
                 BackendMode::kInstructPix2Pix, BackendMode::kInpaint, BackendMode::kRetrieval})
    EXPECT_EQ(parse_backend_mode(backend_mode_name(m)), m);
}
