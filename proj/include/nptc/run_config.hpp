#pragma once

#include <filesystem>
#include <string>

#include "nptc/model.hpp"
#include "nptc/pipeline.hpp"
#include "nptc/train.hpp"

namespace nptc {

/// Every tunable of a run. Parsed from JSON with unknown keys rejected;
/// absent keys keep the defaults below.
struct RunConfig {
  PipelineConfig pipeline;
  NetworkConfig network;
  TrainConfig train;
  std::string dataset_dir;
  std::string output_dir = "nptc_run";
  std::string cache_dir;  // empty: $NPTC_CACHE_DIR, else <output>/cache
  unsigned threads = 1;

  RunConfig();
};

/// "min:x|y|z", "index:<i>" or "face:<axis>:<low|high>".
SeedPolicy parse_seed_policy(const std::string& text);
std::string to_string(const SeedPolicy& policy);

/// Keys present in the document replace the corresponding fields of `base`.
RunConfig parse_run_config(const std::string& json_text,
                           const RunConfig& base = RunConfig());
RunConfig load_run_config(const std::filesystem::path& path,
                          const RunConfig& base = RunConfig());
/// Fully resolved config as pretty-printed JSON (round-trips through parse).
std::string dump_run_config(const RunConfig& config);

}  // namespace nptc
