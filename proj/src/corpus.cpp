#include "ida/corpus.hpp"

#include <algorithm>

#include "ida/image.hpp"

namespace ida::corpus {

namespace fs = std::filesystem;

std::string_view split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "train";
}

Split parse_split(std::string_view s) {
  if (s == "train") return Split::kTrain;
  if (s == "val") return Split::kVal;
  if (s == "test") return Split::kTest;
  throw Error(ErrorKind::kParse, "unknown split: " + std::string(s));
}

Layout parse_layout(std::string_view s) {
  if (s == "domain_class") return Layout::kDomainClass;
  if (s == "class_only") return Layout::kClassOnly;
  throw Error(ErrorKind::kUsage, "unknown layout: " + std::string(s));
}

std::string_view backend_mode_name(BackendMode m) {
  switch (m) {
    case BackendMode::kText2Image: return "text2image";
    case BackendMode::kSdedit: return "sdedit";
    case BackendMode::kControlnetCanny: return "controlnet_canny";
    case BackendMode::kInstructPix2Pix: return "instructpix2pix";
    case BackendMode::kInpaint: return "inpaint";
    case BackendMode::kRetrieval: return "retrieval";
  }
  return "sdedit";
}

BackendMode parse_backend_mode(std::string_view s) {
  for (auto m : {BackendMode::kText2Image, BackendMode::kSdedit, BackendMode::kControlnetCanny,
                 BackendMode::kInstructPix2Pix, BackendMode::kInpaint, BackendMode::kRetrieval})
    if (backend_mode_name(m) == s) return m;
  throw Error(ErrorKind::kParse, "unknown backend mode: " + std::string(s));
}

// ---- SampleRecord ------------------------------------------------------------

json SampleRecord::to_json() const {
  json j{{"id", id},
         {"path", path},
         {"class_label", class_label},
         {"domain_label", domain_label},
         {"split", split_name(split)}};
  if (!attributes.empty()) j["attributes"] = attributes;
  return j;
}

SampleRecord SampleRecord::from_json(const json& j) {
  SampleRecord r;
  r.id = j.at("id").get<std::string>();
  r.path = j.at("path").get<std::string>();
  r.class_label = j.at("class_label").get<std::string>();
  r.domain_label = j.at("domain_label").get<std::string>();
  r.split = parse_split(j.at("split").get<std::string>());
  if (j.contains("attributes")) r.attributes = j.at("attributes").get<std::map<std::string, std::string>>();
  return r;
}

std::string sample_id(std::span<const std::uint8_t> bytes, std::string_view relative_path) {
  return sha256_joined({std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()),
                        relative_path});
}

// ---- DatasetIndex ------------------------------------------------------------

void DatasetIndex::validate() const {
  std::set<std::string_view> seen;
  for (const auto& s : samples) {
    if (s.class_label.empty() || s.domain_label.empty())
      throw Error(ErrorKind::kParse, "sample " + s.path + " has an empty label");
    if (!classes.count(s.class_label) || !domains.count(s.domain_label))
      throw Error(ErrorKind::kParse, "sample " + s.path + " has an undeclared label");
    if (!seen.insert(s.id).second) throw Error(ErrorKind::kParse, "duplicate sample id " + s.id);
  }
}

const SampleRecord* DatasetIndex::find(std::string_view id) const {
  auto it = std::lower_bound(samples.begin(), samples.end(), id,
                             [](const SampleRecord& s, std::string_view v) { return s.id < v; });
  if (it == samples.end() || it->id != id) return nullptr;
  return &*it;
}

std::vector<const SampleRecord*> DatasetIndex::select(std::optional<std::string_view> domain,
                                                      std::optional<Split> split) const {
  std::vector<const SampleRecord*> out;
  for (const auto& s : samples) {
    if (domain && s.domain_label != *domain) continue;
    if (split && s.split != *split) continue;
    out.push_back(&s);
  }
  return out;
}

int DatasetIndex::class_index(std::string_view label) const {
  int i = 0;
  for (const auto& c : classes) {
    if (c == label) return i;
    ++i;
  }
  return -1;
}

std::string DatasetIndex::serialize() const {
  std::string out;
  json header{{"kind", "dataset"}, {"name", name}, {"root", root.generic_string()},
              {"domains", domains}, {"classes", classes}};
  out += to_line(header) + "\n";
  for (const auto& s : samples) out += to_line(s.to_json()) + "\n";
  return out;
}

DatasetIndex DatasetIndex::parse(std::string_view text) {
  DatasetIndex idx;
  bool have_header = false;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() : nl + 1;
    if (trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw Error(ErrorKind::kParse, std::string("index: ") + e.what());
    }
    if (!have_header) {
      if (j.value("kind", "") != "dataset") throw Error(ErrorKind::kParse, "index: missing header line");
      idx.name = j.at("name").get<std::string>();
      idx.root = j.at("root").get<std::string>();
      idx.domains = j.at("domains").get<std::set<std::string>>();
      idx.classes = j.at("classes").get<std::set<std::string>>();
      have_header = true;
      continue;
    }
    idx.samples.push_back(SampleRecord::from_json(j));
  }
  if (!have_header) throw Error(ErrorKind::kParse, "index: empty");
  std::sort(idx.samples.begin(), idx.samples.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  idx.validate();
  return idx;
}

void DatasetIndex::save(const fs::path& path) const { write_text_atomic(path, serialize()); }

DatasetIndex DatasetIndex::load(const fs::path& path) { return parse(read_text(path)); }

namespace {

struct ManifestEntry {
  Split split = Split::kTrain;
  std::map<std::string, std::string> attributes;
};

std::map<std::string, ManifestEntry> read_manifest(const fs::path& root) {
  std::map<std::string, ManifestEntry> out;
  for (const auto& j : read_jsonl(root / "manifest.jsonl")) {
    ManifestEntry e;
    if (j.contains("split")) e.split = parse_split(j.at("split").get<std::string>());
    if (j.contains("attributes")) e.attributes = j.at("attributes").get<std::map<std::string, std::string>>();
    out[j.at("path").get<std::string>()] = std::move(e);
  }
  return out;
}

bool is_hidden(const fs::path& p) {
  auto name = p.filename().string();
  return !name.empty() && name[0] == '.';
}

}  // namespace

IngestResult ingest_directory(const fs::path& root_in, const IngestOptions& options) {
  if (!fs::is_directory(root_in)) throw Error(ErrorKind::kIo, "not a directory: " + root_in.string());
  const fs::path root = fs::canonical(root_in);
  IngestResult result;
  DatasetIndex& idx = result.index;
  idx.root = root;
  idx.name = options.name.empty() ? root.filename().string() : options.name;
  const auto manifest = read_manifest(root);

  std::vector<fs::path> files;
  for (auto it = fs::recursive_directory_iterator(root); it != fs::recursive_directory_iterator(); ++it) {
    if (is_hidden(it->path())) {
      if (it->is_directory()) it.disable_recursion_pending();
      continue;
    }
    if (it->is_regular_file()) files.push_back(it->path());
  }
  std::sort(files.begin(), files.end());

  const std::string single_domain = options.single_domain.empty() ? root.filename().string() : options.single_domain;
  std::size_t candidates = 0;
  for (const auto& file : files) {
    const fs::path rel = fs::relative(file, root);
    const std::string rel_str = rel.generic_string();
    std::vector<std::string> parts;
    for (const auto& part : rel) parts.push_back(part.string());
    const std::size_t expected = options.layout == Layout::kDomainClass ? 3 : 2;
    if (parts.size() != expected) continue;  // manifest.jsonl and stray files
    ++candidates;
    Bytes bytes;
    try {
      bytes = read_file(file);
      decode_image(bytes);
    } catch (const Error& e) {
      result.rejects.push_back({rel_str, e.what()});
      continue;
    }
    SampleRecord rec;
    rec.id = sample_id(bytes, rel_str);
    rec.path = rel_str;
    rec.domain_label = options.layout == Layout::kDomainClass ? parts[0] : single_domain;
    rec.class_label = parts[parts.size() - 2];
    if (auto m = manifest.find(rel_str); m != manifest.end()) {
      rec.split = m->second.split;
      rec.attributes = m->second.attributes;
    }
    idx.domains.insert(rec.domain_label);
    idx.classes.insert(rec.class_label);
    idx.samples.push_back(std::move(rec));
  }
  if (candidates == 0) throw Error(ErrorKind::kEmptyDataset, "no images under " + root.string());
  if (idx.samples.empty())
    throw Error(ErrorKind::kEmptyDataset, "all " + std::to_string(candidates) + " images rejected");
  std::sort(idx.samples.begin(), idx.samples.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  idx.validate();
  return result;
}

// ---- AugmentationRecord ------------------------------------------------------

namespace {

std::string_view status_name(RecordStatus s) { return s == RecordStatus::kOk ? "ok" : "failed"; }

RecordStatus parse_status(std::string_view s) {
  if (s == "ok") return RecordStatus::kOk;
  if (s == "failed") return RecordStatus::kFailed;
  throw Error(ErrorKind::kParse, "unknown record status: " + std::string(s));
}

}  // namespace

std::string AugmentationRecord::record_id() const {
  return source_id + "/" + prompt_id + "-" + std::to_string(seed);
}

json AugmentationRecord::to_json() const {
  return json{{"source_id", source_id},
              {"prompt_id", prompt_id},
              {"prompt_text", prompt_text},
              {"target_domain", target_domain},
              {"backend_mode", backend_mode_name(backend_mode)},
              {"seed", seed},
              {"image_path", image_path},
              {"status", status_name(status)}};
}

AugmentationRecord AugmentationRecord::from_json(const json& j) {
  AugmentationRecord r;
  r.source_id = j.at("source_id").get<std::string>();
  r.prompt_id = j.at("prompt_id").get<std::string>();
  r.prompt_text = j.at("prompt_text").get<std::string>();
  r.target_domain = j.at("target_domain").get<std::string>();
  r.backend_mode = parse_backend_mode(j.at("backend_mode").get<std::string>());
  r.seed = j.at("seed").get<std::uint64_t>();
  r.image_path = j.at("image_path").get<std::string>();
  r.status = parse_status(j.at("status").get<std::string>());
  return r;
}

std::string default_image_path(std::string_view source_id, std::string_view prompt_id, std::uint64_t seed) {
  return "aug/" + std::string(source_id) + "/" + std::string(prompt_id) + "-" + std::to_string(seed) + ".png";
}

// ---- AugmentationStore -------------------------------------------------------

namespace {
constexpr const char* kStoreFile = "augmentations.jsonl";
constexpr const char* kMetaFile = "store.json";
}  // namespace

AugmentationStore AugmentationStore::open(const fs::path& dir) {
  AugmentationStore store;
  fs::create_directories(dir);
  store.dir_ = dir;
  if (fs::exists(dir / kMetaFile)) {
    json meta = read_json(dir / kMetaFile);
    store.dataset_name_ = meta.value("dataset_name", "");
    store.k_ = meta.value("k", 0);
  }
  store.refresh();
  return store;
}

AugmentationStore AugmentationStore::in_memory(std::string dataset_name, int k) {
  AugmentationStore store;
  store.dataset_name_ = std::move(dataset_name);
  store.k_ = k;
  return store;
}

AugmentationStore::AugmentationStore(AugmentationStore&& other) noexcept {
  std::lock_guard lock(other.mu_);
  dir_ = std::move(other.dir_);
  dataset_name_ = std::move(other.dataset_name_);
  k_ = other.k_;
  records_ = std::move(other.records_);
  memory_images_ = std::move(other.memory_images_);
}

void AugmentationStore::set_meta(std::string dataset_name, int k) {
  std::lock_guard lock(mu_);
  dataset_name_ = std::move(dataset_name);
  k_ = k;
  if (persistent()) write_json(dir_ / kMetaFile, json{{"dataset_name", dataset_name_}, {"k", k_}});
}

bool AugmentationStore::apply(const AugmentationRecord& rec) {
  auto [it, inserted] = records_.try_emplace(rec.key(), rec);
  if (inserted) return true;
  AugmentationRecord& existing = it->second;
  if (existing.image_path != rec.image_path || existing.prompt_text != rec.prompt_text)
    throw Error(ErrorKind::kKeyConflict, "conflicting payload for " + rec.record_id());
  if (existing == rec) return false;
  if (existing.status == RecordStatus::kFailed && rec.status == RecordStatus::kOk) {
    existing = rec;
    return true;
  }
  return false;
}

bool AugmentationStore::put(const AugmentationRecord& rec) {
  if (rec.source_id.empty() || rec.prompt_id.empty() || rec.image_path.empty())
    throw Error(ErrorKind::kInvalidRequest, "malformed augmentation record");
  std::lock_guard lock(mu_);
  if (!apply(rec)) return false;
  if (persistent()) append_line(dir_ / kStoreFile, to_line(rec.to_json()));
  return true;
}

std::vector<AugmentationRecord> AugmentationStore::get_variants(std::string_view source_id) const {
  std::lock_guard lock(mu_);
  std::vector<AugmentationRecord> out;
  auto it = records_.lower_bound({std::string(source_id), std::string(), 0});
  for (; it != records_.end() && std::get<0>(it->first) == source_id; ++it)
    if (it->second.status == RecordStatus::kOk) out.push_back(it->second);
  return out;  // map order is (prompt_id, seed) within a source
}

std::optional<AugmentationRecord> AugmentationStore::get(const AugmentationRecord::Key& key) const {
  std::lock_guard lock(mu_);
  auto it = records_.find(key);
  if (it == records_.end()) return std::nullopt;
  return it->second;
}

std::vector<AugmentationRecord> AugmentationStore::all() const {
  std::lock_guard lock(mu_);
  std::vector<AugmentationRecord> out;
  out.reserve(records_.size());
  for (const auto& [_, rec] : records_) out.push_back(rec);
  return out;
}

std::size_t AugmentationStore::size() const {
  std::lock_guard lock(mu_);
  return records_.size();
}

std::size_t AugmentationStore::count_ok() const {
  std::lock_guard lock(mu_);
  return static_cast<std::size_t>(std::count_if(records_.begin(), records_.end(), [](const auto& kv) {
    return kv.second.status == RecordStatus::kOk;
  }));
}

void AugmentationStore::refresh() {
  if (!persistent()) return;
  auto lines = read_jsonl(dir_ / kStoreFile);
  std::lock_guard lock(mu_);
  for (const auto& j : lines) apply(AugmentationRecord::from_json(j));
}

std::string AugmentationStore::dump() const {
  std::lock_guard lock(mu_);
  std::string out;
  for (const auto& [_, rec] : records_) out += to_line(rec.to_json()) + "\n";
  return out;
}

void AugmentationStore::write_image(const AugmentationRecord& rec, std::span<const std::uint8_t> png) {
  if (persistent()) {
    write_file_atomic(image_file(rec), png);
    return;
  }
  std::lock_guard lock(mu_);
  memory_images_[rec.image_path] = Bytes(png.begin(), png.end());
}

Bytes AugmentationStore::read_image(const AugmentationRecord& rec) const {
  if (persistent()) return read_file(image_file(rec));
  std::lock_guard lock(mu_);
  auto it = memory_images_.find(rec.image_path);
  if (it == memory_images_.end()) throw Error(ErrorKind::kNotFound, "no image for " + rec.record_id());
  return it->second;
}

}  // namespace ida::corpus
