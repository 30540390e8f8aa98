#include "ida/filter.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ida/http.hpp"
#include "ida/image.hpp"
#include "ida/synth.hpp"

namespace ida::filter {

namespace {

const std::set<std::string>& stopwords() {
  static const std::set<std::string> words = {"a",  "an",   "the",   "of",    "in",  "on",    "at",  "with",
                                              "and", "to",  "for",   "by",    "is",  "image", "this", "that",
                                              "its", "from", "style", "looks", "like"};
  return words;
}

std::string canonical_word(const std::string& w) {
  if (auto s = synth::style_for_word(w)) return *s;
  return w;
}

Vector normalized(Vector v) {
  const double n = v.norm();
  if (n > 0) v /= n;
  return v;
}

}  // namespace

Vector StubEmbedder::semantic(const std::vector<std::string>& words) {
  Vector v = Vector::Zero(kSemanticDim);
  for (const auto& raw : words) {
    if (stopwords().count(raw)) continue;
    Rng rng(mix_seed(0x5e3a171cULL, canonical_word(raw)));
    for (int i = 0; i < kSemanticDim; ++i) v[i] += rng.normal();
  }
  return v;
}

Vector StubEmbedder::embed_image(std::span<const std::uint8_t> image) {
  const DecodedImage dec = decode_image(image);
  Vector out = Vector::Zero(dim());

  Vector sem = Vector::Zero(kSemanticDim);
  if (auto scene = synth::read_scene(dec.text)) {
    std::vector<std::string> words = split_words(scene->class_name);
    words.push_back(scene->style);
    sem = normalized(semantic(words));
  }

  const Image thumb = resize_square(dec.image, kThumb);
  Vector pix(kThumb * kThumb * 3);
  for (std::size_t i = 0; i < thumb.rgb.size(); ++i) pix[static_cast<Eigen::Index>(i)] = thumb.rgb[i] / 255.0;
  pix.array() -= pix.mean();
  pix = normalized(pix);

  const bool has_sem = sem.squaredNorm() > 0;
  const bool has_pix = pix.squaredNorm() > 0;
  const double a = has_sem ? (has_pix ? std::sqrt(kSemanticWeight) : 1.0) : 0.0;
  const double b = has_pix ? (has_sem ? std::sqrt(1.0 - kSemanticWeight) : 1.0) : 0.0;
  out.head(kSemanticDim) = a * sem;
  out.tail(pix.size()) = b * pix;
  if (out.squaredNorm() == 0) out[kSemanticDim] = 1.0;  // flat image without metadata
  return out;
}

Vector StubEmbedder::embed_text(std::string_view text) {
  Vector out = Vector::Zero(dim());
  Vector sem = semantic(split_words(text));
  if (sem.squaredNorm() == 0) sem = semantic({"<empty>"});
  out.head(kSemanticDim) = normalized(sem);
  return out;
}

HttpEmbedder::HttpEmbedder(std::string base_url, int dim, double timeout_s)
    : base_url_(std::move(base_url)), dim_(dim), timeout_s_(timeout_s) {}

Vector HttpEmbedder::call(const json& body) {
  const json res = http_post_json(base_url_, "/embed", body, timeout_s_);
  std::vector<double> values;
  try {
    values = res.at("vector").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kParse, std::string("/embed: ") + e.what());
  }
  if (static_cast<int>(values.size()) != dim_)
    throw Error(ErrorKind::kDimensionMismatch,
                "/embed returned " + std::to_string(values.size()) + " values, expected " + std::to_string(dim_));
  Vector v = Eigen::Map<Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
  const double n = v.norm();
  if (!(n > 0) || !std::isfinite(n)) throw Error(ErrorKind::kParse, "/embed returned a zero or non-finite vector");
  return v / n;
}

Vector HttpEmbedder::embed_image(std::span<const std::uint8_t> image) {
  return call({{"kind", "image"}, {"payload", base64_encode(image)}});
}

Vector HttpEmbedder::embed_text(std::string_view text) {
  return call({{"kind", "text"}, {"payload", std::string(text)}});
}

std::string class_prompt(std::string_view class_label) {
  std::string c(class_label);
  std::replace(c.begin(), c.end(), '_', ' ');
  return "An image of a " + c;
}

json ScoredRecord::to_json() const {
  return {{"record", record.to_json()},       {"record_id", record.record_id()},
          {"class_label", class_label},       {"class_score", class_score},
          {"domain_score", domain_score},     {"class_pct", class_pct},
          {"domain_pct", domain_pct},         {"avg_pct", avg_pct},
          {"retained", retained}};
}

ScoredRecord ScoredRecord::from_json(const json& j) {
  ScoredRecord s;
  s.record = corpus::AugmentationRecord::from_json(j.at("record"));
  s.class_label = j.at("class_label").get<std::string>();
  s.class_score = j.at("class_score").get<double>();
  s.domain_score = j.at("domain_score").get<double>();
  s.class_pct = j.at("class_pct").get<double>();
  s.domain_pct = j.at("domain_pct").get<double>();
  s.avg_pct = j.at("avg_pct").get<double>();
  s.retained = j.at("retained").get<bool>();
  return s;
}

std::size_t FilterReport::retained_count() const {
  return static_cast<std::size_t>(
      std::count_if(records.begin(), records.end(), [](const ScoredRecord& r) { return r.retained; }));
}

std::set<corpus::AugmentationRecord::Key> FilterReport::retained_keys() const {
  std::set<corpus::AugmentationRecord::Key> keys;
  for (const auto& r : records)
    if (r.retained) keys.insert(r.record.key());
  return keys;
}

std::string FilterReport::serialize() const {
  json errs = json::array();
  for (const auto& e : errors) errs.push_back({{"record_id", e.record_id}, {"message", e.message}});
  json header{{"kind", "filter_report"},
              {"fraction_dropped", fraction_dropped},
              {"n", records.size()},
              {"retained", retained_count()},
              {"errors", errs}};
  std::string out = to_line(header) + "\n";
  for (const auto& r : records) out += to_line(r.to_json()) + "\n";
  return out;
}

FilterReport FilterReport::parse(std::string_view text) {
  FilterReport report;
  bool header = true;
  std::size_t pos = 0;
  try {
    while (pos < text.size()) {
      std::size_t end = text.find('\n', pos);
      if (end == std::string_view::npos) end = text.size();
      const std::string_view line = text.substr(pos, end - pos);
      pos = end + 1;
      if (trim(line).empty()) continue;
      const json j = json::parse(line);
      if (header) {
        if (j.value("kind", "") != "filter_report") throw Error(ErrorKind::kParse, "missing filter report header");
        report.fraction_dropped = j.at("fraction_dropped").get<double>();
        for (const auto& e : j.value("errors", json::array()))
          report.errors.push_back({e.at("record_id").get<std::string>(), e.at("message").get<std::string>()});
        header = false;
        continue;
      }
      report.records.push_back(ScoredRecord::from_json(j));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kParse, std::string("filter report: ") + e.what());
  }
  if (header) throw Error(ErrorKind::kParse, "empty filter report");
  return report;
}

void FilterReport::save(const std::filesystem::path& path) const { write_text_atomic(path, serialize()); }

FilterReport FilterReport::load(const std::filesystem::path& path) { return parse(read_text(path)); }

ScoredRecord score_pair(const corpus::AugmentationRecord& record, std::span<const std::uint8_t> image,
                        std::string_view class_label, MultimodalEmbedder& embedder) {
  ScoredRecord s;
  s.record = record;
  s.class_label = std::string(class_label);
  const Vector img = embedder.embed_image(image);
  s.class_score = img.dot(embedder.embed_text(class_prompt(class_label)));
  s.domain_score = img.dot(embedder.embed_text(record.target_domain));
  return s;
}

FilterReport score_records(const corpus::DatasetIndex& index, const corpus::AugmentationStore& store,
                           MultimodalEmbedder& embedder) {
  FilterReport report;
  for (const auto& rec : store.all()) {
    if (rec.status != corpus::RecordStatus::kOk) continue;
    try {
      const corpus::SampleRecord* src = index.find(rec.source_id);
      if (!src) throw Error(ErrorKind::kNotFound, "source sample not in index");
      report.records.push_back(score_pair(rec, store.read_image(rec), src->class_label, embedder));
    } catch (const Error& e) {
      report.errors.push_back({rec.record_id(), e.what()});
    }
  }
  rank_report(report);
  return report;
}

namespace {

// 0-based ascending ranks, ties sharing their mean rank (a multiple of 0.5,
// so sums of ranks are exact).
std::vector<double> mean_ranks(const std::vector<double>& scores) {
  const std::size_t n = scores.size();
  std::vector<double> out(n, 0.0);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double mean_rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0;
    for (std::size_t t = i; t <= j; ++t) out[order[t]] = mean_rank;
    i = j + 1;
  }
  return out;
}

double to_percent(double rank, std::size_t n) { return n <= 1 ? 100.0 : rank / static_cast<double>(n - 1) * 100.0; }

}  // namespace

std::vector<double> percentile_ranks(const std::vector<double>& scores) {
  auto ranks = mean_ranks(scores);
  for (auto& r : ranks) r = to_percent(r, scores.size());
  return ranks;
}

void rank_report(FilterReport& report) {
  std::vector<double> cs, ds;
  for (const auto& r : report.records) {
    cs.push_back(r.class_score);
    ds.push_back(r.domain_score);
  }
  const std::size_t n = cs.size();
  const auto cr = mean_ranks(cs);
  const auto dr = mean_ranks(ds);
  for (std::size_t i = 0; i < n; ++i) {
    auto& r = report.records[i];
    r.class_pct = to_percent(cr[i], n);
    r.domain_pct = to_percent(dr[i], n);
    // Averaging the ranks before scaling keeps equal rank sums bit-identical,
    // so the record-id tie rule sees every true tie.
    r.avg_pct = to_percent((cr[i] + dr[i]) / 2.0, n);
  }
}

std::set<corpus::AugmentationRecord::Key> apply_filter(FilterReport& report, double fraction_dropped) {
  if (!(fraction_dropped >= 0.0 && fraction_dropped < 1.0))
    throw Error(ErrorKind::kInvalidRequest, "filter fraction must lie in [0,1)");
  report.fraction_dropped = fraction_dropped;
  const std::size_t n = report.records.size();
  const auto n_drop = static_cast<std::size_t>(std::floor(fraction_dropped * static_cast<double>(n)));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<std::string> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = report.records[i].record.record_id();
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double pa = report.records[a].avg_pct, pb = report.records[b].avg_pct;
    if (pa != pb) return pa < pb;
    return ids[a] < ids[b];
  });
  for (std::size_t i = 0; i < n; ++i) report.records[order[i]].retained = i >= n_drop;
  return report.retained_keys();
}

}  // namespace ida::filter
