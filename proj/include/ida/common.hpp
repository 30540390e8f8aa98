#pragma once

// Shared error types, hashing, deterministic RNG and JSON Lines helpers.

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace ida {

using json = nlohmann::json;
using Bytes = std::vector<std::uint8_t>;

enum class ErrorKind {
  kEmptyDataset,
  kKeyConflict,
  kMissingTemplate,
  kBackendUnavailable,
  kBackendTimeout,
  kPartialResult,
  kPlanInfeasible,
  kInvalidRequest,
  kEmptyInput,
  kUndefined,
  kDimensionMismatch,
  kNotPsd,
  kMissingSplit,
  kDivergence,
  kIo,
  kParse,
  kNotFound,
  kUsage,
};

std::string_view error_kind_name(ErrorKind kind);

// Every domain failure surfaces as an ida::Error carrying a machine-readable
// kind; the CLI maps these to exit code 1 and the service to JSON bodies.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Lowercase hex SHA-256.
std::string sha256_hex(std::span<const std::uint8_t> data);
std::string sha256_hex(std::string_view data);

// SHA-256 over the concatenation of parts, each separated by a single 0x00.
std::string sha256_joined(std::initializer_list<std::string_view> parts);

std::uint64_t fnv1a64(std::string_view data);

// splitmix64 finaliser; used to derive independent seeds from (seed, salt).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);
std::uint64_t mix_seed(std::uint64_t seed, std::string_view salt);

// splitmix64 stream with portable bounded draws. std::uniform_*_distribution
// is implementation-defined, so everything that must be reproducible across
// toolchains goes through here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64();
  // Uniform integer in [0, n). n must be > 0.
  std::uint64_t uniform_index(std::uint64_t n);
  // Uniform real in [0, 1) with 53 bits of mantissa.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_index(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// ---- files -----------------------------------------------------------------

Bytes read_file(const std::filesystem::path& path);
std::string read_text(const std::filesystem::path& path);
// Writes via a temporary sibling and rename so readers never see partial files.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> data);
void write_text_atomic(const std::filesystem::path& path, std::string_view text);

// Appends one line with a single write(2) on an O_APPEND descriptor, so
// concurrent appenders interleave whole lines.
void append_line(const std::filesystem::path& path, std::string_view line);

// Reads a JSON Lines file to EOF. A trailing line without newline (a writer
// still in flight) is skipped. Missing file yields an empty list.
std::vector<json> read_jsonl(const std::filesystem::path& path);

// Compact single-line JSON; nlohmann::json objects are key-sorted already.
std::string to_line(const json& j);

json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const json& j);

std::string base64_encode(std::span<const std::uint8_t> data);
Bytes base64_decode(std::string_view text);

std::string to_lower(std::string_view s);
std::string trim(std::string_view s);
std::vector<std::string> split_words(std::string_view s);

}  // namespace ida
