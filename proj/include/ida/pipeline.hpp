#pragma once

// Pre-generation of the augmentation store and the training-time variant
// sampler.

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ida/common.hpp"
#include "ida/corpus.hpp"
#include "ida/genbackend.hpp"
#include "ida/prompts.hpp"

namespace ida::pipeline {

struct PregenerateOptions {
  genbackend::Mode mode = genbackend::Mode::kSdedit;
  double strength = genbackend::kDefaultStrength;
  double guidance_scale = genbackend::kDefaultGuidanceScale;
  int steps = genbackend::kDefaultSteps;
  int workers = 1;
};

struct PairFailure {
  std::string record_id;
  std::string error_kind;
  std::string message;
};

struct RunReport {
  std::size_t requested = 0;
  std::size_t ok = 0;
  std::size_t failed = 0;
  std::size_t skipped = 0;  // pairs that already had an ok record
  double wall_time_s = 0.0;
  std::vector<PairFailure> failures;

  json to_json() const;
};

// Runs one generation per planned (sample, prompt) pair and records exactly
// one store entry per pair. Pairs already ok in the store are skipped, so the
// call resumes interrupted runs. Per-pair backend errors become failed
// records; store I/O errors propagate.
RunReport pregenerate(const corpus::DatasetIndex& index, const prompts::PromptPlan& plan,
                      genbackend::GeneratorBackend& backend, corpus::AugmentationStore& store,
                      const PregenerateOptions& options = {});

// Writes the report as pregenerate-report.json under dir.
void write_report(const RunReport& report, const std::filesystem::path& dir);

struct TrainingPair {
  const corpus::SampleRecord* original = nullptr;
  std::optional<corpus::AugmentationRecord> variant;  // nullopt when the sample has none
};

struct PairedBatch {
  std::vector<TrainingPair> pairs;  // batch order
  std::size_t missing = 0;          // samples passed through without a variant
};

// Picks one ok variant per sample uniformly at random, optionally only among
// the allowed keys (e.g. those retained by filtering).
PairedBatch sample_training_pairs(const std::vector<const corpus::SampleRecord*>& batch,
                                  const corpus::AugmentationStore& store, Rng& rng,
                                  const std::set<corpus::AugmentationRecord::Key>* allowed = nullptr);

}  // namespace ida::pipeline
