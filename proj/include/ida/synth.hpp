#pragma once

// Procedural desk-scale datasets. Every image is rendered from a small set of
// scene parameters that are embedded in the PNG (tEXt "ida:scene"), so a
// generator can re-render the same object under a different style and tests
// can check what changed.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ida/image.hpp"

namespace ida::synth {

inline constexpr const char* kSceneChunk = "ida:scene";
inline constexpr int kNumBackgrounds = 8;
inline constexpr int kNumTextures = 6;

// Class-determining fields: shape, cx, cy, scale, angle, class_name.
// Everything else is nuisance ("style") and may be intervened on.
struct SceneParams {
  int shape = 0;
  std::string class_name;
  double cx = 0.5, cy = 0.5;  // fraction of side
  double scale = 0.32;        // radius as fraction of side
  double angle = 0.0;         // radians
  std::string style = "photo";
  double hue = 0.0;           // [0,1)
  int background = 0;         // [0, kNumBackgrounds)
  int texture = -1;           // -1 = plain fill, else [0, kNumTextures)
  int attribute = -1;         // -1 = no marker, 0/1 = marker side
  std::uint64_t noise_seed = 0;

  json to_json() const;
  static SceneParams from_json(const json& j);
  bool same_shape(const SceneParams& other) const;
};

const std::vector<std::string>& shape_names();
const std::vector<std::string>& style_names();

// Canonical style for a free-text token ("ink", "watercolor", ...), if any.
std::optional<std::string> style_for_word(std::string_view word);

Image render(const SceneParams& params, int side = 32);
Bytes render_png(const SceneParams& params, int side = 32);
std::optional<SceneParams> read_scene(const TextChunks& text);

enum class Kind { kSdg, kBackground, kTexture, kDemographic };
Kind parse_kind(std::string_view s);
std::string_view kind_name(Kind k);

struct DatasetSpec {
  Kind kind = Kind::kSdg;
  std::vector<std::string> classes = {"circle", "square", "triangle", "cross"};
  // kSdg only; other kinds use fixed split domains.
  std::vector<std::string> domains = {"photo", "sketch"};
  int train_per_domain = 200;
  int test_per_domain = 100;
  // Probability that the spurious attribute follows the class (RRSF kinds).
  double correlation = 0.95;
  std::uint64_t seed = 7;
  int side = 32;
};

struct WrittenDataset {
  std::filesystem::path root;
  std::size_t images = 0;
};

// Writes root/<domain>/<class>/<nnnn>.png plus root/manifest.jsonl with
// {path, split, attributes}.
WrittenDataset write_dataset(const std::filesystem::path& root, const DatasetSpec& spec);

}  // namespace ida::synth
