#pragma once

#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "rgmj/kernel.hpp"

namespace rgmj {

enum class KernelKind { Rgmjmcmc, RgmjmcmcDelayed, GmjmcmcBaseline };

const char* kernel_kind_name(KernelKind k);
std::optional<KernelKind> kernel_kind_from_name(std::string_view name);

struct KernelConfig {
  KernelKind kind = KernelKind::Rgmjmcmc;
  int pop_size = 15;       // s, at most 64
  int max_model_size = 5;  // Q
  OperatorConfig ops;
  LocalKernelConfig local;
  InferenceConfig inference;
  int baseline_pop_period = 250;  // baseline evolves its population this often
  // Keep the population fixed (no population proposals). Used when the
  // feature set is small enough to study the chain on a closed model space.
  bool fix_population = false;

  void validate() const;  // throws ConfigError
};

// One line of the machine-readable step log.
struct StepRecord {
  std::uint64_t step = 0;
  KernelKind kind = KernelKind::Rgmjmcmc;
  double log_target_current = 0.0;
  double log_target_proposal = std::numeric_limits<double>::quiet_NaN();
  int d_bwd = -1, d_fwd = -1;           // Hamming distances to the local optima
  int bwd_center_ones = -1, fwd_center_ones = -1;
  int s = 0, max_model_size = 0;
  double swap_prob = 0.0;
  double log_accept_ratio = std::numeric_limits<double>::quiet_NaN();
  double log_stage1 = std::numeric_limits<double>::quiet_NaN();  // delayed only
  double log_stage2 = std::numeric_limits<double>::quiet_NaN();  // delayed only
  bool feasible = true;
  bool accepted = false;
  // "", "mh", "stage1", "stage2", "infeasible-reverse", "randomize-failed",
  // "population-failed", "population-evolved"
  std::string_view reason = "";
  int bwd_evals = 0;  // target requests made by the backward search
};

using StepSink = std::function<void(const StepRecord&)>;

struct FrequencyCounters {
  std::unordered_map<std::string, std::uint64_t> counts;  // identity -> W_m
  std::uint64_t total = 0;                                // W

  void add(const FrequencyCounters& other);
};

// One sampling lane: current population + model, archive handle, counters.
class Chain {
 public:
  Chain(const Dataset& data, const KernelConfig& cfg,
        std::vector<FeaturePtr> base_covariates, Population initial,
        Mask initial_mask, std::uint64_t seed, ModelArchive* archive);

  void set_step_sink(StepSink sink) { sink_ = std::move(sink); }
  // Frequency counters only accumulate while counting is on (post burn-in).
  void set_counting(bool on) { counting_ = on; }

  void step();

  const Population& population() const { return design_->population(); }
  Mask mask() const { return mask_; }
  std::string current_identity() const;
  std::vector<FeaturePtr> current_features() const;
  double current_log_target();

  std::uint64_t steps_taken() const { return steps_taken_; }
  const FrequencyCounters& counters() const { return counters_; }
  Evaluator& evaluator() { return eval_; }
  RandomSource& rng() { return rng_; }

  std::uint64_t backward_target_requests() const { return bwd_requests_; }
  std::uint64_t infeasible_rejections() const { return infeasible_; }
  std::uint64_t population_failures() const { return pop_failures_; }

 private:
  void mode_jump_step(bool delayed, bool propose_populations);
  void baseline_step();
  void evolve_population();
  std::optional<Population> propose_population_around(
      const std::vector<FeaturePtr>& model_feats);
  void finalize(StepRecord& rec, bool accepted);
  void adopt(std::unique_ptr<PopulationDesign> design, Mask m);

  const Dataset& data_;
  KernelConfig cfg_;
  std::vector<FeaturePtr> base_;
  std::unique_ptr<PopulationDesign> design_;
  Mask mask_ = 0;
  Mt19937Source rng_;
  ModelArchive* archive_;
  Evaluator eval_;
  FeatureValidator validator_;
  std::vector<double> log_norm_;  // size-cap normalizations by center size

  StepSink sink_;
  bool counting_ = false;
  FrequencyCounters counters_;
  std::uint64_t steps_taken_ = 0;
  std::uint64_t bwd_requests_ = 0;
  std::uint64_t infeasible_ = 0;
  std::uint64_t pop_failures_ = 0;

  // per-generation inclusion frequencies, drives baseline filtration
  std::vector<double> incl_counts_;
  std::uint64_t gen_steps_ = 0;

  mutable std::string identity_cache_;
  mutable bool identity_dirty_ = true;
};

// Builds a starting population: a seeded draw of base covariates, topped up
// with generated features when there are fewer covariates than slots.
Population make_initial_population(const std::vector<FeaturePtr>& base,
                                   int pop_size, const OperatorConfig& cfg,
                                   RandomSource& rng,
                                   const FeatureValidator& validator = {});

struct PosteriorEstimate {
  struct Entry {
    std::string identity;
    std::vector<std::string> keys;
    double prob = 0.0;
    double log_target = 0.0;
    double log_prior = 0.0;
    double log_evidence = 0.0;
    std::uint64_t count = 0;  // visit count (frequency estimator only)
  };
  std::vector<Entry> models;                         // prob desc, identity asc
  std::vector<std::pair<std::string, double>> inclusions;  // key -> probability
};

// Posterior mass renormalized over every archived model.
PosteriorEstimate estimate_renormalized(const ModelArchive& archive);

// Ergodic-frequency estimates W_m / W. Only valid for the reversible kernels;
// throws EstimatorError for the baseline.
PosteriorEstimate estimate_frequency(const FrequencyCounters& counters,
                                     const ModelArchive& archive,
                                     KernelKind kind);

void write_step_record(std::string& out, const StepRecord& rec);

}  // namespace rgmj
