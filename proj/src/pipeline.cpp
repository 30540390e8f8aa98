#include "ida/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <mutex>
#include <thread>

namespace ida::pipeline {

json RunReport::to_json() const {
  json f = json::array();
  for (const auto& x : failures)
    f.push_back({{"record_id", x.record_id}, {"error_kind", x.error_kind}, {"message", x.message}});
  return {{"requested", requested}, {"ok", ok},
          {"failed", failed},       {"skipped", skipped},
          {"wall_time_s", wall_time_s}, {"failures", f}};
}

void write_report(const RunReport& report, const std::filesystem::path& dir) {
  write_json(dir / "pregenerate-report.json", report.to_json());
}

namespace {

struct WorkItem {
  const corpus::SampleRecord* sample;
  const prompts::PlannedPrompt* planned;
};

}  // namespace

RunReport pregenerate(const corpus::DatasetIndex& index, const prompts::PromptPlan& plan,
                      genbackend::GeneratorBackend& backend, corpus::AugmentationStore& store,
                      const PregenerateOptions& options) {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<WorkItem> queue;
  for (const auto& [source_id, planned] : plan.assignments) {
    const corpus::SampleRecord* sample = index.find(source_id);
    if (!sample) throw Error(ErrorKind::kNotFound, "plan references unknown sample " + source_id);
    for (const auto& p : planned) queue.push_back({sample, &p});
  }
  std::sort(queue.begin(), queue.end(), [](const WorkItem& a, const WorkItem& b) {
    return std::tie(a.sample->id, a.planned->prompt.id, a.planned->seed) <
           std::tie(b.sample->id, b.planned->prompt.id, b.planned->seed);
  });

  RunReport report;
  report.requested = queue.size();
  std::mutex mu;
  std::atomic<std::size_t> next{0};

  auto run_one = [&](const WorkItem& item) {
    corpus::AugmentationRecord rec;
    rec.source_id = item.sample->id;
    rec.prompt_id = item.planned->prompt.id;
    rec.prompt_text = item.planned->prompt.text;
    rec.target_domain = item.planned->prompt.target_domain;
    rec.backend_mode = options.mode;
    rec.seed = item.planned->seed;
    rec.image_path = corpus::default_image_path(rec.source_id, rec.prompt_id, rec.seed);

    if (auto existing = store.get(rec.key()); existing && existing->status == corpus::RecordStatus::kOk) {
      std::lock_guard lock(mu);
      ++report.skipped;
      return;
    }

    Bytes image;
    std::optional<PairFailure> failure;
    try {
      genbackend::GenerationResult result;
      if (options.mode == genbackend::Mode::kRetrieval) {
        result = genbackend::retrieve(backend, rec.prompt_text, 1);
        if (result.images.empty()) throw Error(ErrorKind::kNotFound, "retrieval returned no hits");
      } else {
        genbackend::GenerationRequest req;
        req.mode = options.mode;
        req.prompt = rec.prompt_text;
        req.strength = options.strength;
        req.guidance_scale = options.guidance_scale;
        req.steps = options.steps;
        req.seed = rec.seed;
        if (options.mode != genbackend::Mode::kText2Image)
          req.source_image = read_file(index.root / item.sample->path);
        if (options.mode == genbackend::Mode::kInpaint) {
          // Preserve the object: the mask marks pixels that differ from the
          // corner colour of the source.
          const DecodedImage src = decode_image(*req.source_image);
          Image mask(src.image.width, src.image.height);
          const std::uint8_t* corner = src.image.at(0, 0);
          for (int y = 0; y < src.image.height; ++y)
            for (int x = 0; x < src.image.width; ++x) {
              const std::uint8_t* p = src.image.at(x, y);
              int d = std::abs(p[0] - corner[0]) + std::abs(p[1] - corner[1]) + std::abs(p[2] - corner[2]);
              if (d > 60) std::fill_n(mask.at(x, y), 3, 255);
            }
          req.mask = encode_png(mask);
        }
        result = genbackend::generate(backend, req);
      }
      image = std::move(result.images.front());
    } catch (const Error& e) {
      failure = PairFailure{rec.record_id(), std::string(error_kind_name(e.kind())), e.what()};
    } catch (const std::exception& e) {
      failure = PairFailure{rec.record_id(), "Internal", e.what()};
    }

    if (failure) {
      rec.status = corpus::RecordStatus::kFailed;
      store.put(rec);
      std::lock_guard lock(mu);
      ++report.failed;
      report.failures.push_back(std::move(*failure));
      return;
    }
    store.write_image(rec, image);
    store.put(rec);
    std::lock_guard lock(mu);
    ++report.ok;
  };

  auto worker = [&] {
    for (std::size_t i = next++; i < queue.size(); i = next++) run_one(queue[i]);
  };
  const int n_workers = std::max(1, std::min<int>(options.workers, static_cast<int>(queue.size())));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    std::exception_ptr first_error;
    for (int w = 0; w < n_workers; ++w)
      threads.emplace_back([&] {
        try {
          worker();
        } catch (...) {
          std::lock_guard lock(mu);
          if (!first_error) first_error = std::current_exception();
          next = queue.size();
        }
      });
    for (auto& t : threads) t.join();
    if (first_error) std::rethrow_exception(first_error);
  }
  std::sort(report.failures.begin(), report.failures.end(),
            [](const PairFailure& a, const PairFailure& b) { return a.record_id < b.record_id; });
  report.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

PairedBatch sample_training_pairs(const std::vector<const corpus::SampleRecord*>& batch,
                                  const corpus::AugmentationStore& store, Rng& rng,
                                  const std::set<corpus::AugmentationRecord::Key>* allowed) {
  PairedBatch out;
  out.pairs.reserve(batch.size());
  for (const auto* sample : batch) {
    TrainingPair pair{sample, std::nullopt};
    auto variants = store.get_variants(sample->id);
    if (allowed)
      std::erase_if(variants, [&](const corpus::AugmentationRecord& r) { return !allowed->count(r.key()); });
    if (variants.empty()) {
      ++out.missing;
    } else {
      pair.variant = std::move(variants[rng.uniform_index(variants.size())]);
    }
    out.pairs.push_back(std::move(pair));
  }
  return out;
}

}  // namespace ida::pipeline
