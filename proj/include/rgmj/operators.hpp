#pragma once

#include <functional>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "rgmj/feature.hpp"
#include "rgmj/random.hpp"

namespace rgmj {

enum class OpKind { Mutation, Crossover, Modification, Projection };

const char* op_kind_name(OpKind k);

struct OperatorConfig {
  double p_mutation = 0.2;
  double p_crossover = 0.4;
  double p_modification = 0.2;
  double p_projection = 0.2;
  // Nonlinearities available to modification/projection. May be empty
  // (products-only search, as in logic regression).
  std::vector<Nonlin> nonlinearities = {Nonlin::Cbrt,     Nonlin::Square,
                                        Nonlin::Cube,     Nonlin::Log1pAbs,
                                        Nonlin::SqrtAbs,  Nonlin::Sigmoid};
  double filtration_threshold = 0.05;  // minimum inclusion frequency to survive
  int max_depth = 5;
  int max_retries = 50;

  void validate() const;  // throws ConfigError
};

// An ordered set of distinct features defining one search space.
class Population {
 public:
  Population() = default;
  Population(std::vector<FeaturePtr> feats, int generation);

  int size() const { return static_cast<int>(feats_.size()); }
  int generation() const { return generation_; }
  const FeaturePtr& operator[](int i) const { return feats_[i]; }
  const std::vector<FeaturePtr>& features() const { return feats_; }
  bool contains(const std::string& key) const { return index_.count(key) > 0; }
  std::optional<int> index_of(const std::string& key) const;

 private:
  std::vector<FeaturePtr> feats_;
  std::unordered_map<std::string, int> index_;
  int generation_ = 0;
};

OpKind draw_operator_kind(const OperatorConfig& cfg, RandomSource& rng);

// One replacement feature of the requested kind, or nullopt when no valid
// feature (depth cap, empty nonlinearity set, pool too small) was produced
// within the retry budget.
//
//   mutation      uniform base covariate not already in the pool (any base
//                 covariate once the pool saturates them)
//   crossover     product of two distinct pool members
//   modification  uniform nonlinearity applied to one pool member
//   projection    nonlinearity of an affine combination of 2-3 pool members,
//                 weights uniform on {1, -1, 0.5, -0.5}
std::optional<FeaturePtr> generate_replacement(
    OpKind kind, const std::vector<FeaturePtr>& pool,
    const std::vector<FeaturePtr>& base_covariates, const OperatorConfig& cfg,
    RandomSource& rng);

struct FiltrationResult {
  std::vector<FeaturePtr> survivors;
  int n_removed = 0;
};

// Drop features whose inclusion frequency fell below pi_min. Features in
// `protected_keys` survive regardless. Every population member must have a
// frequency entry.
FiltrationResult filtration(
    const Population& pop,
    const std::unordered_map<std::string, double>& inclusion_freq,
    double pi_min, const std::unordered_set<std::string>& protected_keys = {});

using FeatureValidator = std::function<bool(const FeaturePtr&)>;

// Grow `seed` (kept verbatim at the front) to `target_size` distinct features
// using the operator mix; the pool the operators act on is the growing set
// itself. Returns nullopt when the retry budget is exhausted.
std::optional<std::vector<FeaturePtr>> fill_features(
    std::vector<FeaturePtr> seed, int target_size, const OperatorConfig& cfg,
    const std::vector<FeaturePtr>& base_covariates, RandomSource& rng,
    const FeatureValidator& validator = {});

// Population evolution: filtration followed by refill to size s. Protected
// features are always carried over. Returns nullopt when the refill fails;
// callers keep the old population in that case.
std::optional<Population> next_population(
    const Population& current, const std::vector<FeaturePtr>& protected_feats,
    const std::unordered_map<std::string, double>& inclusion_freq,
    const OperatorConfig& cfg, const std::vector<FeaturePtr>& base_covariates,
    RandomSource& rng, const FeatureValidator& validator = {});

}  // namespace rgmj
