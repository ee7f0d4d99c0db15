#pragma once

#include <string>
#include <vector>

#include "rgmj/inference.hpp"

namespace rgmj {

struct EnumeratedPosterior {
  struct Row {
    std::string identity;
    std::vector<std::string> keys;
    int size = 0;
    double log_target = 0.0;
    double prob = 0.0;
  };
  std::vector<Row> rows;  // sorted by identity, null model first
  double log_norm = 0.0;
  int q = 0;
  int max_model_size = 0;
};

// Exact posterior over every model of size <= max_model_size built from the
// given feature list (null model included). Refuses spaces beyond the guard
// of 1e6 models, reporting the exact count. When an archive is supplied every
// evaluated model is recorded in it.
EnumeratedPosterior enumerate_posterior(const std::vector<FeaturePtr>& features,
                                        int max_model_size, const Dataset& data,
                                        const InferenceConfig& cfg,
                                        ModelArchive* archive = nullptr);

// Number of models of size <= max_model_size over q features, null included.
double model_space_size(int q, int max_model_size);

void write_enumerated_csv(const EnumeratedPosterior& post,
                          const std::string& path);

}  // namespace rgmj
