#pragma once

// Dataset indices and the augmentation store.
//
// On-disk formats are JSON Lines with sorted keys:
//   index.jsonl           first line {"kind":"dataset",...}, then one sample per line
//   augmentations.jsonl   one AugmentationRecord per line, append-only
// Generated images live under <store>/aug/<source_id>/<prompt_id>-<seed>.png.

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "ida/common.hpp"

namespace ida::corpus {

enum class Split { kTrain, kVal, kTest };
std::string_view split_name(Split s);
Split parse_split(std::string_view s);

enum class Layout { kDomainClass, kClassOnly };
Layout parse_layout(std::string_view s);

// Mirrors genbackend::Mode; kept here so the store has no backend dependency.
enum class BackendMode { kText2Image, kSdedit, kControlnetCanny, kInstructPix2Pix, kInpaint, kRetrieval };
std::string_view backend_mode_name(BackendMode m);
BackendMode parse_backend_mode(std::string_view s);

struct SampleRecord {
  std::string id;  // sha256(bytes || 0x00 || relative path)
  std::string path;
  std::string class_label;
  std::string domain_label;
  Split split = Split::kTrain;
  // Free-form per-sample metadata from manifest.jsonl (e.g. texture_label).
  std::map<std::string, std::string> attributes;

  json to_json() const;
  static SampleRecord from_json(const json& j);
};

std::string sample_id(std::span<const std::uint8_t> bytes, std::string_view relative_path);

class DatasetIndex {
 public:
  std::string name;
  std::filesystem::path root;
  std::set<std::string> domains;
  std::set<std::string> classes;
  std::vector<SampleRecord> samples;  // sorted by id

  // Throws on duplicate ids or labels outside the declared sets.
  void validate() const;

  const SampleRecord* find(std::string_view id) const;
  std::vector<const SampleRecord*> select(std::optional<std::string_view> domain,
                                          std::optional<Split> split = std::nullopt) const;
  int class_index(std::string_view label) const;

  std::string serialize() const;
  static DatasetIndex parse(std::string_view text);
  void save(const std::filesystem::path& path) const;
  static DatasetIndex load(const std::filesystem::path& path);
};

struct IngestOptions {
  Layout layout = Layout::kDomainClass;
  std::string name;          // defaults to the root directory name
  std::string single_domain;  // class_only layout; defaults to the root directory name
};

struct Reject {
  std::string path;
  std::string reason;
};

struct IngestResult {
  DatasetIndex index;
  std::vector<Reject> rejects;
};

// Walks root, decodes every file to validate it, and hashes bytes+path.
// root/manifest.jsonl, when present, supplies split and attributes per path.
IngestResult ingest_directory(const std::filesystem::path& root, const IngestOptions& options);

// ---- augmentation store ------------------------------------------------------

enum class RecordStatus { kOk, kFailed };

struct AugmentationRecord {
  std::string source_id;
  std::string prompt_id;
  std::string prompt_text;
  std::string target_domain;
  BackendMode backend_mode = BackendMode::kSdedit;
  std::uint64_t seed = 0;
  std::string image_path;  // relative to the store root
  RecordStatus status = RecordStatus::kOk;

  using Key = std::tuple<std::string, std::string, std::uint64_t>;
  Key key() const { return {source_id, prompt_id, seed}; }
  // "<source_id>/<prompt_id>-<seed>", used for deterministic tie-breaks.
  std::string record_id() const;

  json to_json() const;
  static AugmentationRecord from_json(const json& j);
  friend bool operator==(const AugmentationRecord&, const AugmentationRecord&) = default;
};

std::string default_image_path(std::string_view source_id, std::string_view prompt_id, std::uint64_t seed);

// In-memory view of an append-only JSON Lines store. Safe to share between
// threads; separate processes may append to the same file concurrently.
class AugmentationStore {
 public:
  // Opens (or creates) a store rooted at dir, replaying augmentations.jsonl.
  static AugmentationStore open(const std::filesystem::path& dir);
  // Purely in-memory store, nothing persisted.
  static AugmentationStore in_memory(std::string dataset_name, int k);

  AugmentationStore(AugmentationStore&& other) noexcept;
  AugmentationStore& operator=(AugmentationStore&&) = delete;

  const std::string& dataset_name() const { return dataset_name_; }
  int k() const { return k_; }
  void set_meta(std::string dataset_name, int k);
  const std::filesystem::path& dir() const { return dir_; }
  bool persistent() const { return !dir_.empty(); }

  // Idempotent on key. Identical payload: no-op. A failed record may be
  // superseded by an ok record for the same key; an ok record is never
  // downgraded. Differing image_path or prompt_text: KeyConflict.
  // Returns true when the store changed.
  bool put(const AugmentationRecord& rec);

  // ok records only, sorted by (prompt_id, seed).
  std::vector<AugmentationRecord> get_variants(std::string_view source_id) const;
  std::optional<AugmentationRecord> get(const AugmentationRecord::Key& key) const;
  std::vector<AugmentationRecord> all() const;
  std::size_t size() const;
  std::size_t count_ok() const;

  // Re-reads the backing file to pick up lines appended by other processes.
  void refresh();
  // Canonical dump: one record per line, sorted by key.
  std::string dump() const;

  std::filesystem::path image_file(const AugmentationRecord& rec) const { return dir_ / rec.image_path; }
  // Persistent stores write under dir(); in-memory stores keep the bytes.
  void write_image(const AugmentationRecord& rec, std::span<const std::uint8_t> png);
  Bytes read_image(const AugmentationRecord& rec) const;

 private:
  AugmentationStore() = default;
  bool apply(const AugmentationRecord& rec);

  std::filesystem::path dir_;
  std::string dataset_name_;
  int k_ = 0;
  mutable std::mutex mu_;
  std::map<AugmentationRecord::Key, AugmentationRecord> records_;
  std::map<std::string, Bytes> memory_images_;
};

// Convenience free functions matching the operation names used by callers.
inline bool put_record(AugmentationStore& store, const AugmentationRecord& rec) { return store.put(rec); }
inline std::vector<AugmentationRecord> get_variants(const AugmentationStore& store, std::string_view source_id) {
  return store.get_variants(source_id);
}

}  // namespace ida::corpus
