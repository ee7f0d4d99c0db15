#pragma once

#include <memory>
#include <string>
#include <vector>

#include "rgmj/engine.hpp"

namespace rgmj {

enum class EstimatorChoice { Renormalized, Frequency, Both };

const char* estimator_name(EstimatorChoice e);
std::optional<EstimatorChoice> estimator_from_name(std::string_view name);

struct RunConfig {
  std::string data_path;
  std::string response;
  Family family = Family::Gaussian;
  std::string out_dir;

  int pop_size = 15;
  int max_model_size = 5;
  std::uint64_t iterations = 3000;
  double burn_in_fraction = 0.2;
  KernelKind kernel = KernelKind::Rgmjmcmc;
  EstimatorChoice estimator = EstimatorChoice::Both;
  int lanes = 1;  // T
  std::uint64_t seed = 1;

  OperatorConfig ops;
  LocalKernelConfig local;
  InferenceConfig inference;
  int baseline_pop_period = 250;
  bool fix_population = false;
  bool write_step_log = true;
  int top_models = 100000;

  void validate() const;  // throws ConfigError
  KernelConfig kernel_config() const;
};

struct LaneSummary {
  std::uint64_t seed = 0;
  bool failed = false;
  std::string error;
  std::uint64_t steps = 0;
  std::uint64_t backward_target_requests = 0;
  std::uint64_t infeasible_rejections = 0;
  std::string final_identity;
};

struct RunResult {
  std::unique_ptr<ModelArchive> archive;  // union over lanes
  FrequencyCounters counters;             // pooled over lanes
  PosteriorEstimate renormalized;
  PosteriorEstimate frequency;
  bool has_renormalized = false;
  bool has_frequency = false;
  std::vector<LaneSummary> lane_summaries;
  bool degraded = false;  // some lane failed
};

// Runs `lanes` independent chains with seeds derived from the master seed and
// merges their archives and counters. Lane i is bit-identical for a given
// (seed, i) regardless of the lane count. Step logs, when enabled, go to
// <out_dir>/steps_lane<i>.ndjson.
RunResult run_sampler(const RunConfig& cfg, const Dataset& data);

// models.csv, inclusions.csv and manifest.ini under cfg.out_dir.
void write_run_outputs(const RunResult& result, const RunConfig& cfg);

// Resolved configuration echo, loadable again through the CLI --config flag.
std::string manifest_text(const RunConfig& cfg);

void ensure_directory(const std::string& path);

}  // namespace rgmj
