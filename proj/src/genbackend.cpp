#include "ida/genbackend.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <thread>

#include "ida/http.hpp"
#include "ida/synth.hpp"

namespace ida::genbackend {

json GenerationRequest::echo() const {
  json j{{"mode", backend_mode_name(mode)}, {"prompt", prompt},     {"strength", strength},
         {"guidance_scale", guidance_scale}, {"steps", steps},       {"seed", seed},
         {"has_source_image", source_image.has_value()}, {"has_mask", mask.has_value()}};
  if (mode == Mode::kRetrieval) j["n_results"] = n_results;
  return j;
}

void validate(const GenerationRequest& r) {
  auto fail = [&](const std::string& why) {
    throw Error(ErrorKind::kInvalidRequest, std::string(backend_mode_name(r.mode)) + ": " + why);
  };
  if (trim(r.prompt).empty()) fail("prompt is empty");
  if (!(r.strength >= 0.0 && r.strength <= 1.0)) fail("strength must lie in [0,1]");
  if (!(r.guidance_scale > 0.0)) fail("guidance_scale must be positive");
  if (r.steps <= 0) fail("steps must be positive");
  switch (r.mode) {
    case Mode::kText2Image:
      if (r.source_image) fail("text2image takes no source image");
      if (r.mask) fail("text2image takes no mask");
      break;
    case Mode::kRetrieval:
      if (r.source_image) fail("retrieval takes no source image");
      if (r.mask) fail("retrieval takes no mask");
      if (r.n_results <= 0) fail("n_results must be positive");
      break;
    case Mode::kSdedit:
    case Mode::kControlnetCanny:
    case Mode::kInstructPix2Pix:
      if (!r.source_image || r.source_image->empty()) fail("source image required");
      if (r.mask) fail("mask is only valid for inpaint");
      break;
    case Mode::kInpaint:
      if (!r.source_image || r.source_image->empty()) fail("source image required");
      if (!r.mask || r.mask->empty()) fail("mask required");
      break;
  }
}

GenerationResult generate(GeneratorBackend& backend, const GenerationRequest& request) {
  validate(request);
  if (request.mode == Mode::kRetrieval) return retrieve(backend, request.prompt, request.n_results);
  const auto t0 = std::chrono::steady_clock::now();
  GenerationResult result = backend.do_generate(request);
  if (result.images.size() != 1)
    throw Error(ErrorKind::kBackendUnavailable, backend.backend_id() + " returned " +
                                                    std::to_string(result.images.size()) + " images, expected 1");
  result.provenance.backend_id = backend.backend_id();
  result.provenance.latency_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  json echo = request.echo();
  // Remote servers may report the seed they actually used.
  if (result.provenance.request_echo.is_object() && result.provenance.request_echo.contains("seed"))
    echo["seed"] = result.provenance.request_echo["seed"];
  result.provenance.request_echo = std::move(echo);
  return result;
}

GenerationResult retrieve(GeneratorBackend& backend, const std::string& query, int n) {
  if (n < 1) throw Error(ErrorKind::kInvalidRequest, "retrieve: n must be >= 1");
  if (trim(query).empty()) throw Error(ErrorKind::kInvalidRequest, "retrieve: empty query");
  const auto t0 = std::chrono::steady_clock::now();
  GenerationResult result = backend.do_retrieve(query, n);
  if (result.images.size() != result.scores.size())
    throw Error(ErrorKind::kBackendUnavailable, "retrieve: images and scores differ in length");
  if (result.images.size() > static_cast<std::size_t>(n)) {
    result.images.resize(static_cast<std::size_t>(n));
    result.scores.resize(static_cast<std::size_t>(n));
  }
  if (result.images.size() < static_cast<std::size_t>(n)) result.truncated = true;
  result.provenance.backend_id = backend.backend_id();
  result.provenance.latency_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  result.provenance.request_echo = json{{"mode", "retrieval"}, {"query", query}, {"n_results", n}};
  return result;
}

// ---- stub -----------------------------------------------------------------------

PromptIntervention parse_intervention(std::string_view prompt) {
  PromptIntervention iv;
  const auto words = split_words(prompt);
  const auto& shapes = synth::shape_names();
  for (std::size_t i = 0; i < words.size(); ++i) {
    const auto& w = words[i];
    if (!iv.style) {
      if (w == "art" && i + 1 < words.size() && words[i + 1] == "painting") {
        iv.style = "art_painting";
      } else if (auto s = synth::style_for_word(w)) {
        iv.style = *s;
      }
    }
    if (!iv.attribute) {
      if (w == "male" || w == "man" || w == "men" || w == "boy") iv.attribute = 1;
      if (w == "female" || w == "woman" || w == "women" || w == "girl") iv.attribute = 0;
    }
    if (!iv.shape) {
      auto it = std::find(shapes.begin(), shapes.end(), w);
      if (it != shapes.end()) iv.shape = static_cast<int>(it - shapes.begin());
    }
  }
  return iv;
}

namespace {

constexpr const char* kStubModel = "stub-renderer-v1";

synth::SceneParams intervene(const synth::SceneParams& src, const PromptIntervention& iv,
                             std::string_view prompt, std::uint64_t seed) {
  synth::SceneParams p = src;
  Rng rng(mix_seed(seed, prompt));
  const std::uint64_t h = fnv1a64(prompt);
  if (iv.style) p.style = *iv.style;
  if (iv.attribute) p.attribute = *iv.attribute;
  // Prompts naming neither a style nor a demographic attribute describe a
  // context (background, texture); those map deterministically from the text.
  const bool contextual = !iv.style && !iv.attribute;
  p.background = static_cast<int>(contextual ? h % synth::kNumBackgrounds
                                             : rng.uniform_index(synth::kNumBackgrounds));
  p.texture = static_cast<int>(contextual ? (h >> 16) % synth::kNumTextures
                                          : rng.uniform_index(synth::kNumTextures + 1)) -
              (contextual ? 0 : 1);
  p.hue = rng.uniform();
  p.noise_seed = rng.next_u64();
  return p;
}

std::uint8_t clamp_byte(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

Image match_size(const Image& img, int side) {
  if (img.width == side && img.height == side) return img;
  return resize_square(img, side);
}

Image blend(const Image& top, const Image& bottom, double alpha) {
  Image out(top.width, top.height);
  for (std::size_t i = 0; i < out.rgb.size(); ++i)
    out.rgb[i] = clamp_byte(alpha * top.rgb[i] + (1.0 - alpha) * bottom.rgb[i]);
  return out;
}

// Style transfer for images without scene parameters.
Image pixel_style(const Image& src, const std::optional<std::string>& style, std::uint64_t seed) {
  Rng rng(seed);
  Image out = src;
  const std::string s = style.value_or("");
  if (s == "sketch") {
    Image edges = edge_map(src, 32);
    for (std::size_t i = 0; i < out.rgb.size(); ++i) out.rgb[i] = edges.rgb[i] ? 40 : 245;
  } else if (s == "cartoon") {
    Image edges = edge_map(src, 48);
    for (std::size_t i = 0; i < out.rgb.size(); ++i)
      out.rgb[i] = edges.rgb[i] ? 10 : static_cast<std::uint8_t>((src.rgb[i] / 64) * 64 + 32);
  } else if (s == "art_painting") {
    for (int y = 0; y < src.height; ++y)
      for (int x = 0; x < src.width; ++x) {
        double acc[3] = {0, 0, 0};
        int n = 0;
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            int xx = std::clamp(x + dx, 0, src.width - 1), yy = std::clamp(y + dy, 0, src.height - 1);
            for (int c = 0; c < 3; ++c) acc[c] += src.at(xx, yy)[c];
            ++n;
          }
        double mean = (acc[0] + acc[1] + acc[2]) / (3.0 * n);
        for (int c = 0; c < 3; ++c) out.at(x, y)[c] = clamp_byte(mean + 1.4 * (acc[c] / n - mean));
      }
  } else {
    const double gain = 1.0 + rng.uniform(-0.05, 0.05);
    for (auto& v : out.rgb) v = clamp_byte(v * gain);
  }
  return out;
}

}  // namespace

StubGenerator::StubGenerator(int side, std::vector<RetrievalEntry> retrieval_index)
    : side_(side), index_(std::move(retrieval_index)) {}

GenerationResult StubGenerator::do_generate(const GenerationRequest& request) {
  const PromptIntervention iv = parse_intervention(request.prompt);
  GenerationResult result;
  result.provenance.model_id = kStubModel;

  if (request.mode == Mode::kText2Image) {
    Rng rng(mix_seed(request.seed, request.prompt));
    synth::SceneParams p;
    p.shape = iv.shape.value_or(static_cast<int>(fnv1a64(request.prompt) % synth::shape_names().size()));
    p.class_name = synth::shape_names()[static_cast<std::size_t>(p.shape)];
    p.cx = 0.5 + rng.uniform(-0.06, 0.06);
    p.cy = 0.5 + rng.uniform(-0.06, 0.06);
    p.scale = rng.uniform(0.28, 0.36);
    p.angle = rng.uniform(-0.2, 0.2);
    p = intervene(p, iv, request.prompt, request.seed);
    if (!iv.style) p.style = "photo";
    result.images.push_back(synth::render_png(p, side_));
    return result;
  }

  const DecodedImage src = decode_image(*request.source_image);
  const auto scene = synth::read_scene(src.text);
  const int side = scene ? side_ : src.image.width;
  Image source = scene ? match_size(src.image, side_) : src.image;
  Image edited;
  TextChunks text;
  if (scene) {
    const auto params = intervene(*scene, iv, request.prompt, request.seed);
    edited = synth::render(params, side);
    text[synth::kSceneChunk] = to_line(params.to_json());
  } else {
    edited = pixel_style(source, iv.style, mix_seed(request.seed, request.prompt));
  }

  Image out;
  switch (request.mode) {
    case Mode::kSdedit:
      // Noise strength: 1 keeps nothing of the source, 0 returns it.
      out = blend(edited, source, request.strength);
      break;
    case Mode::kControlnetCanny: {
      out = edited;
      const Image edges = edge_map(source);
      for (std::size_t i = 0; i < out.rgb.size(); i += 3)
        if (edges.rgb[i]) out.rgb[i] = out.rgb[i + 1] = out.rgb[i + 2] = 25;
      break;
    }
    case Mode::kInstructPix2Pix:
      out = edited;
      break;
    case Mode::kInpaint: {
      const Image mask = match_size(decode_image(*request.mask).image, side);
      out = edited;
      for (std::size_t i = 0; i < out.rgb.size(); i += 3) {
        const bool keep = mask.rgb[i] | mask.rgb[i + 1] | mask.rgb[i + 2];
        if (keep)
          for (int c = 0; c < 3; ++c) out.rgb[i + c] = source.rgb[i + c];
      }
      break;
    }
    default:
      throw Error(ErrorKind::kInvalidRequest, "stub: unsupported mode");
  }
  result.images.push_back(encode_png(out, text));
  return result;
}

GenerationResult StubGenerator::do_retrieve(const std::string& query, int n) {
  const auto q = split_words(query);
  const std::set<std::string> qset(q.begin(), q.end());
  std::vector<std::pair<double, std::size_t>> hits;
  for (std::size_t i = 0; i < index_.size(); ++i) {
    const auto c = split_words(index_[i].caption);
    const std::set<std::string> cset(c.begin(), c.end());
    std::size_t inter = 0;
    for (const auto& w : qset) inter += cset.count(w);
    const std::size_t uni = qset.size() + cset.size() - inter;
    const double score = uni ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
    if (score > 0.0) hits.emplace_back(score, i);
  }
  std::stable_sort(hits.begin(), hits.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  GenerationResult result;
  result.provenance.model_id = "stub-retrieval-v1";
  for (std::size_t i = 0; i < hits.size() && i < static_cast<std::size_t>(n); ++i) {
    result.images.push_back(index_[hits[i].second].image);
    result.scores.push_back(hits[i].first);
  }
  return result;
}

// ---- remote ----------------------------------------------------------------------

json request_to_wire(const GenerationRequest& r) {
  json j{{"mode", backend_mode_name(r.mode)}, {"prompt", r.prompt},   {"strength", r.strength},
         {"guidance_scale", r.guidance_scale}, {"steps", r.steps},    {"seed", r.seed}};
  if (r.source_image) j["image_b64"] = base64_encode(*r.source_image);
  if (r.mask) j["mask_b64"] = base64_encode(*r.mask);
  return j;
}

GenerationRequest request_from_wire(const json& j) {
  GenerationRequest r;
  try {
    r.mode = parse_backend_mode(j.at("mode").get<std::string>());
    r.prompt = j.at("prompt").get<std::string>();
    r.strength = j.value("strength", kDefaultStrength);
    r.guidance_scale = j.value("guidance_scale", kDefaultGuidanceScale);
    r.steps = j.value("steps", kDefaultSteps);
    r.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("image_b64")) r.source_image = base64_decode(j["image_b64"].get<std::string>());
    if (j.contains("mask_b64")) r.mask = base64_decode(j["mask_b64"].get<std::string>());
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kInvalidRequest, std::string("malformed generation request: ") + e.what());
  } catch (const Error& e) {
    throw Error(ErrorKind::kInvalidRequest, e.what());
  }
  return r;
}

HttpGenerator::HttpGenerator(HttpGeneratorOptions options)
    : options_(std::move(options)), slots_(std::clamp(options_.max_concurrency, 1, 1024)) {}

json HttpGenerator::call(const std::string& path, const json& body) {
  slots_.acquire();
  struct Release {
    std::counting_semaphore<1024>& s;
    ~Release() { s.release(); }
  } release{slots_};
  double backoff = options_.backoff_initial_s;
  for (int attempt = 1;; ++attempt) {
    try {
      return http_post_json(options_.base_url, path, body, options_.timeout_s);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kBackendTimeout || attempt >= options_.max_attempts) throw;
    }
    std::this_thread::sleep_for(std::chrono::duration<double>(backoff));
    backoff *= 2.0;
  }
}

GenerationResult HttpGenerator::do_generate(const GenerationRequest& request) {
  json res = call("/generate", request_to_wire(request));
  GenerationResult result;
  try {
    result.images.push_back(base64_decode(res.at("image_b64").get<std::string>()));
    result.provenance.model_id = res.value("model_id", options_.model_id_hint);
    if (res.contains("seed")) result.provenance.request_echo = json{{"seed", res["seed"]}};
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kParse, std::string("/generate: ") + e.what());
  }
  return result;
}

GenerationResult HttpGenerator::do_retrieve(const std::string& query, int n) {
  json res = call("/retrieve", json{{"query", query}, {"n", n}});
  GenerationResult result;
  try {
    for (const auto& hit : res.at("hits")) {
      result.images.push_back(base64_decode(hit.at("image_b64").get<std::string>()));
      result.scores.push_back(hit.at("score").get<double>());
    }
    result.provenance.model_id = res.value("model_id", options_.model_id_hint);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kParse, std::string("/retrieve: ") + e.what());
  }
  if (!std::is_sorted(result.scores.begin(), result.scores.end(), std::greater<>()))
    throw Error(ErrorKind::kParse, "/retrieve: hits not in descending score order");
  return result;
}

}  // namespace ida::genbackend
