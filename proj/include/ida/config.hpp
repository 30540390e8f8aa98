#pragma once

// The single JSON configuration shared by every CLI stage and the service.
//
// Sections: data_dir, index, store, out_dir, ingest, synth, plan, generator,
// textgen, embedder, filter, train, rrsf, fid, dedup, seeds, serve. See
// default_config() for every field and its default. Flags override fields by
// dotted path ("train.epochs=10").

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "ida/common.hpp"
#include "ida/filter.hpp"
#include "ida/genbackend.hpp"
#include "ida/prompts.hpp"
#include "ida/trainer.hpp"

namespace ida::config {

json default_config();

// Defaults, then the file (when given), then overrides in order.
json load(const std::optional<std::filesystem::path>& path, const std::vector<std::string>& overrides = {});

// Recursively merges patch into base. Unknown keys are rejected with kUsage.
void merge(json& base, const json& patch, const std::string& where = "");

// "a.b.c=value". The value is parsed as JSON when it parses, else taken as a
// string.
void apply_override(json& cfg, std::string_view assignment);

// Typed views.
trainer::TrainConfig train_config(const json& cfg);
pipeline::PregenerateOptions pregenerate_options(const json& cfg);
prompts::PlanOptions plan_options(const json& cfg);
std::unique_ptr<genbackend::GeneratorBackend> make_generator(const json& cfg);
std::unique_ptr<prompts::TextGenBackend> make_textgen(const json& cfg);
std::unique_ptr<filter::MultimodalEmbedder> make_embedder(const json& cfg);
prompts::PromptCatalog load_catalog(const json& cfg);

}  // namespace ida::config
