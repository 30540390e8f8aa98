#include "ida/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

namespace ida::synth {
namespace {

struct Rgb {
  double r, g, b;
};

Rgb hsv(double h, double s, double v) {
  h = h - std::floor(h);
  double i = std::floor(h * 6.0);
  double f = h * 6.0 - i;
  double p = v * (1 - s), q = v * (1 - f * s), t = v * (1 - (1 - f) * s);
  switch (static_cast<int>(i) % 6) {
    case 0: return {v, t, p};
    case 1: return {q, v, p};
    case 2: return {p, v, t};
    case 3: return {p, q, v};
    case 4: return {t, p, v};
    default: return {v, p, q};
  }
}

constexpr std::array<Rgb, kNumBackgrounds> kBackgrounds = {{
    {0.20, 0.45, 0.20},  // grass
    {0.25, 0.45, 0.75},  // sky
    {0.55, 0.40, 0.25},  // soil
    {0.70, 0.25, 0.20},  // brick
    {0.85, 0.80, 0.55},  // sand
    {0.35, 0.35, 0.40},  // asphalt
    {0.15, 0.30, 0.45},  // water
    {0.60, 0.20, 0.55},  // curtain
}};

// Inside test in the shape's local frame, radius-normalised.
bool inside_local(int shape, double u, double v) {
  switch (shape % 6) {
    case 0: return u * u + v * v <= 1.0;                        // circle
    case 1: return std::max(std::abs(u), std::abs(v)) <= 0.8;  // square
    case 2: {                                                   // triangle, apex up
      if (v > 0.75) return false;
      double half = 0.9 * (v + 1.0) / 1.75;
      return v >= -1.0 && std::abs(u) <= half;
    }
    case 3:  // cross
      return (std::abs(u) <= 0.3 && std::abs(v) <= 0.95) || (std::abs(v) <= 0.3 && std::abs(u) <= 0.95);
    case 4: return std::abs(u) + std::abs(v) <= 1.0;  // diamond
    default: {                                         // ring
      double r2 = u * u + v * v;
      return r2 <= 1.0 && r2 >= 0.3;
    }
  }
}

struct Geometry {
  double cx, cy, radius, c, s;
  int shape;
  bool inside(double x, double y) const {
    double dx = x - cx, dy = y - cy;
    double u = (c * dx + s * dy) / radius;
    double v = (-s * dx + c * dy) / radius;
    return inside_local(shape, u, v);
  }
  bool boundary(double x, double y, double width) const {
    if (!inside(x, y)) return false;
    for (int k = 0; k < 8; ++k) {
      double a = k * std::numbers::pi / 4.0;
      if (!inside(x + width * std::cos(a), y + width * std::sin(a))) return true;
    }
    return false;
  }
};

double pattern(int texture, int x, int y) {
  switch (texture % kNumTextures) {
    case 0: return (y / 2) % 2 ? 1.0 : -1.0;            // horizontal stripes
    case 1: return (x / 2) % 2 ? 1.0 : -1.0;            // vertical stripes
    case 2: return ((x / 3) + (y / 3)) % 2 ? 1.0 : -1.0;  // checker
    case 3: return (x % 4 < 2 && y % 4 < 2) ? 1.0 : -1.0;  // dots
    case 4: return ((x + y) / 2) % 2 ? 1.0 : -1.0;      // diagonal
    default: return ((x - y + 64) / 2) % 2 ? 1.0 : -1.0;  // anti-diagonal
  }
}

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v * 255.0), 0L, 255L));
}

void put(Image& img, int x, int y, Rgb c) {
  auto* p = img.at(x, y);
  p[0] = to_byte(c.r);
  p[1] = to_byte(c.g);
  p[2] = to_byte(c.b);
}

}  // namespace

const std::vector<std::string>& shape_names() {
  static const std::vector<std::string> names = {"circle", "square", "triangle", "cross", "diamond", "ring"};
  return names;
}

const std::vector<std::string>& style_names() {
  static const std::vector<std::string> names = {"photo", "sketch", "cartoon", "art_painting"};
  return names;
}

std::optional<std::string> style_for_word(std::string_view word) {
  static const std::vector<std::pair<std::string_view, std::string_view>> table = {
      {"photo", "photo"},        {"photograph", "photo"},   {"picture", "photo"},
      {"realistic", "photo"},    {"polaroid", "photo"},     {"real", "photo"},
      {"sketch", "sketch"},      {"drawing", "sketch"},     {"pencil", "sketch"},
      {"ink", "sketch"},         {"charcoal", "sketch"},    {"quickdraw", "sketch"},
      {"cartoon", "cartoon"},    {"anime", "cartoon"},      {"clipart", "cartoon"},
      {"painting", "art_painting"}, {"art_painting", "art_painting"}, {"fresco", "art_painting"},
      {"watercolor", "art_painting"}, {"oil", "art_painting"}, {"painted", "art_painting"},
  };
  for (const auto& [w, style] : table)
    if (w == word) return std::string(style);
  return std::nullopt;
}

json SceneParams::to_json() const {
  return json{{"shape", shape},       {"class_name", class_name}, {"cx", cx},
              {"cy", cy},             {"scale", scale},           {"angle", angle},
              {"style", style},       {"hue", hue},               {"background", background},
              {"texture", texture},   {"attribute", attribute},   {"noise_seed", noise_seed}};
}

SceneParams SceneParams::from_json(const json& j) {
  SceneParams p;
  p.shape = j.at("shape").get<int>();
  p.class_name = j.value("class_name", std::string());
  p.cx = j.at("cx").get<double>();
  p.cy = j.at("cy").get<double>();
  p.scale = j.at("scale").get<double>();
  p.angle = j.at("angle").get<double>();
  p.style = j.at("style").get<std::string>();
  p.hue = j.at("hue").get<double>();
  p.background = j.at("background").get<int>();
  p.texture = j.at("texture").get<int>();
  p.attribute = j.at("attribute").get<int>();
  p.noise_seed = j.at("noise_seed").get<std::uint64_t>();
  return p;
}

bool SceneParams::same_shape(const SceneParams& o) const {
  return shape == o.shape && class_name == o.class_name && cx == o.cx && cy == o.cy &&
         scale == o.scale && angle == o.angle;
}

Image render(const SceneParams& p, int side) {
  Image img(side, side);
  Rng noise(p.noise_seed);
  const Geometry geo{p.cx * side, p.cy * side, p.scale * side, std::cos(p.angle), std::sin(p.angle), p.shape};
  const Rgb fill = hsv(p.hue, 0.75, 0.95);
  const Rgb bg = kBackgrounds[static_cast<std::size_t>(std::clamp(p.background, 0, kNumBackgrounds - 1))];
  const double stroke = std::max(1.0, side / 24.0);

  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      const double px = x + 0.5, py = y + 0.5;
      const bool in = geo.inside(px, py);
      Rgb c{};
      if (p.style == "sketch") {
        double sheet = 0.95 + 0.03 * noise.uniform(-1, 1);
        c = {sheet, sheet, sheet};
        if (geo.boundary(px, py, stroke)) {
          double ink = 0.15 + 0.1 * noise.uniform();
          c = {ink, ink, ink};
        }
      } else if (p.style == "cartoon") {
        c = {0.5 + 0.5 * bg.r, 0.5 + 0.5 * bg.g, 0.5 + 0.5 * bg.b};
        if (in) c = hsv(p.hue, 1.0, 1.0);
        if (geo.boundary(px, py, 2 * stroke)) c = {0.02, 0.02, 0.02};
      } else if (p.style == "art_painting") {
        double blot = 0.15 * std::sin(0.35 * x + 3.0 * p.hue) * std::cos(0.3 * y + p.background);
        c = {bg.r + blot, bg.g + blot, bg.b - blot};
        if (in) {
          double t = p.texture >= 0 ? 0.12 * pattern(p.texture, x, y) : 0.0;
          c = {fill.r * 0.8 + t, fill.g * 0.8 + t, fill.b * 0.8 + t};
        }
        double brush = 0.12 * noise.uniform(-1, 1);
        c = {c.r + brush, c.g + brush * 0.5, c.b - brush * 0.5};
      } else {  // photo
        // Scenes are darker than the lit object.
        double grain = 0.06 * noise.uniform(-1, 1);
        c = {0.55 * bg.r + grain, 0.55 * bg.g + grain, 0.55 * bg.b + grain};
        if (in) {
          double shade = 0.15 * ((py - geo.cy) / geo.radius);
          double t = p.texture >= 0 ? 0.22 * pattern(p.texture, x, y) : 0.0;
          c = {fill.r - shade + t, fill.g - shade + t, fill.b - shade + t};
        }
      }
      put(img, x, y, c);
    }
  }

  // Spurious marker bar in the top rows: left for 0, right for 1.
  if (p.attribute >= 0) {
    const int h = std::max(2, side / 8);
    const int w = side / 3;
    const int x0 = p.attribute == 0 ? 0 : side - w;
    const Rgb marker = p.attribute == 0 ? Rgb{1.0, 0.1, 0.8} : Rgb{0.1, 0.9, 1.0};
    for (int y = 0; y < h; ++y)
      for (int x = x0; x < x0 + w; ++x) put(img, x, y, marker);
  }
  return img;
}

Bytes render_png(const SceneParams& params, int side) {
  return encode_png(render(params, side), {{kSceneChunk, to_line(params.to_json())}});
}

std::optional<SceneParams> read_scene(const TextChunks& text) {
  auto it = text.find(kSceneChunk);
  if (it == text.end()) return std::nullopt;
  try {
    return SceneParams::from_json(json::parse(it->second));
  } catch (const json::exception&) {
    return std::nullopt;
  }
}

Kind parse_kind(std::string_view s) {
  if (s == "sdg") return Kind::kSdg;
  if (s == "background") return Kind::kBackground;
  if (s == "texture") return Kind::kTexture;
  if (s == "demographic") return Kind::kDemographic;
  throw Error(ErrorKind::kUsage, "unknown synthetic dataset kind: " + std::string(s));
}

std::string_view kind_name(Kind k) {
  switch (k) {
    case Kind::kSdg: return "sdg";
    case Kind::kBackground: return "background";
    case Kind::kTexture: return "texture";
    case Kind::kDemographic: return "demographic";
  }
  return "?";
}

namespace {

SceneParams random_scene(Rng& rng, int class_index, const std::string& class_name, const std::string& style) {
  SceneParams p;
  p.shape = class_index;
  p.class_name = class_name;
  p.cx = 0.5 + rng.uniform(-0.06, 0.06);
  p.cy = 0.5 + rng.uniform(-0.06, 0.06);
  p.scale = rng.uniform(0.28, 0.36);
  p.angle = rng.uniform(-0.2, 0.2);
  p.style = style;
  p.hue = rng.uniform();
  p.background = static_cast<int>(rng.uniform_index(kNumBackgrounds));
  p.texture = -1;
  p.attribute = -1;
  p.noise_seed = rng.next_u64();
  return p;
}

struct Pending {
  std::string domain;
  std::string split;
  SceneParams params;
  json attributes = json::object();
};

}  // namespace

WrittenDataset write_dataset(const std::filesystem::path& root, const DatasetSpec& spec) {
  namespace fs = std::filesystem;
  if (spec.classes.empty()) throw Error(ErrorKind::kUsage, "synthetic dataset needs classes");
  if (spec.classes.size() > shape_names().size())
    throw Error(ErrorKind::kUsage, "at most " + std::to_string(shape_names().size()) + " classes");
  const int n_classes = static_cast<int>(spec.classes.size());
  Rng rng(mix_seed(spec.seed, kind_name(spec.kind)));
  std::vector<Pending> items;

  auto other_class = [&](int c) {
    int o = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(n_classes - 1)));
    return o >= c ? o + 1 : o;
  };
  auto emit = [&](const std::string& domain, const std::string& split, int count, auto&& tweak) {
    for (int i = 0; i < count; ++i) {
      int c = i % n_classes;
      Pending item{domain, split, random_scene(rng, c, spec.classes[static_cast<std::size_t>(c)], "photo")};
      tweak(item, c);
      items.push_back(std::move(item));
    }
  };
  auto correlated = [&](int c, int n_values) {
    if (rng.uniform() < spec.correlation) return c % n_values;
    return static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(n_values)));
  };

  switch (spec.kind) {
    case Kind::kSdg:
      for (const auto& domain : spec.domains) {
        auto style = style_for_word(to_lower(domain));
        auto set_style = [&](Pending& it, int) {
          it.params.style = style.value_or("photo");
          it.params.texture = static_cast<int>(rng.uniform_index(kNumTextures + 1)) - 1;
        };
        emit(domain, "train", spec.train_per_domain, set_style);
        emit(domain, "test", spec.test_per_domain, set_style);
      }
      break;
    case Kind::kBackground: {
      if (n_classes > kNumBackgrounds) throw Error(ErrorKind::kUsage, "too many classes for backgrounds");
      auto train_bg = [&](Pending& it, int c) { it.params.background = correlated(c, kNumBackgrounds); };
      emit("original", "train", spec.train_per_domain, train_bg);
      emit("original", "test", spec.test_per_domain, train_bg);
      emit("mixed_same", "test", spec.test_per_domain, [&](Pending& it, int c) { it.params.background = c; });
      emit("mixed_rand", "test", spec.test_per_domain, [&](Pending& it, int) {
        it.params.background = static_cast<int>(rng.uniform_index(kNumBackgrounds));
      });
      break;
    }
    case Kind::kTexture: {
      if (n_classes > kNumTextures) throw Error(ErrorKind::kUsage, "too many classes for textures");
      auto train_tex = [&](Pending& it, int c) { it.params.texture = correlated(c, kNumTextures); };
      emit("original", "train", spec.train_per_domain, train_tex);
      emit("original", "test", spec.test_per_domain, train_tex);
      emit("cue_conflict", "test", spec.test_per_domain, [&](Pending& it, int c) {
        int t = other_class(c);
        it.params.texture = t;
        it.attributes["texture_label"] = spec.classes[static_cast<std::size_t>(t)];
      });
      break;
    }
    case Kind::kDemographic: {
      if (n_classes != 2) throw Error(ErrorKind::kUsage, "demographic datasets have exactly 2 classes");
      auto iid = [&](Pending& it, int c) { it.params.attribute = correlated(c, 2); };
      emit("iid", "train", spec.train_per_domain, iid);
      emit("iid", "test", spec.test_per_domain, iid);
      emit("flip", "test", spec.test_per_domain, [&](Pending& it, int c) { it.params.attribute = 1 - c; });
      emit("rand", "test", spec.test_per_domain, [&](Pending& it, int) {
        it.params.attribute = static_cast<int>(rng.uniform_index(2));
      });
      break;
    }
  }

  fs::create_directories(root);
  std::string manifest;
  std::map<std::pair<std::string, std::string>, int> counters;
  for (auto& item : items) {
    int n = counters[{item.domain, item.params.class_name}]++;
    char name[32];
    std::snprintf(name, sizeof(name), "%04d.png", n);
    fs::path rel = fs::path(item.domain) / item.params.class_name / name;
    write_file_atomic(root / rel, render_png(item.params, spec.side));
    json line{{"path", rel.generic_string()}, {"split", item.split}};
    if (!item.attributes.empty()) line["attributes"] = item.attributes;
    manifest += to_line(line) + "\n";
  }
  write_text_atomic(root / "manifest.jsonl", manifest);
  return {root, items.size()};
}

}  // namespace ida::synth
