#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "rgmj/dataset.hpp"

namespace rgmj {

// One thing the generator planted. Detecting any key of the set counts as at
// most one true positive.
struct TruthEntry {
  std::string label;
  std::vector<std::string> keys;
};

struct GroundTruth {
  std::vector<TruthEntry> entries;
  double detection_threshold = 0.5;  // marginal inclusion cutoff
};

struct GeneratedExperiment {
  Dataset data;
  GroundTruth truth;
};

// Planetary mass law: response proportional to R_p^3 * rho_p with relative
// Gaussian noise sigma, plus positive-range distractor covariates.
GeneratedExperiment gen_mass_data(int n, double sigma, std::uint64_t seed);

// Third Kepler law: semi-major axis from cbrt(P^2 M_h) with relative noise;
// the host mass, radius and temperature are mutually correlated, so any of
// the three cube-root features counts as a discovery.
GeneratedExperiment gen_kepler_data(int n, double sigma, std::uint64_t seed);

// Logic regression: 50 Bernoulli(1/2) covariates and a binomial response
// whose logit carries eight conjunction trees with equal effects.
GeneratedExperiment gen_logic_data(int n, std::uint64_t seed);

struct RunMetrics {
  std::vector<std::string> target_labels;
  std::vector<double> power_per_target;  // detection rate per truth entry
  double overall_power = 0.0;            // mean of the per-target powers
  double avg_fp = 0.0;                   // mean false positive count
  double fdr = 0.0;                      // mean of per-replicate FP/(TP+FP)
  int lanes = 0;
  int replicates = 0;
};

// Detection = inclusion probability >= threshold. Any-of truth sets count at
// most once per replicate; detections matching no truth entry are false
// positives.
RunMetrics compute_metrics(
    const std::vector<std::map<std::string, double>>& inclusion_per_replicate,
    const GroundTruth& truth, int lanes);

void write_metrics_csv(const RunMetrics& m, const std::string& path);
void write_truth_file(const GroundTruth& truth, const std::string& path);
GroundTruth load_truth_file(const std::string& path);

}  // namespace rgmj
