#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "rgmj/dataset.hpp"
#include "rgmj/feature.hpp"

namespace rgmj {

struct EvidenceConfig {
  double g = 0.0;        // g-prior scale; 0 means "use n"
  double a0 = 1e-3;      // inverse-gamma shape on the noise variance
  double b0 = 1e-3;      // inverse-gamma rate; keeps the evidence finite even
                         // for degenerate responses
  double rank_tol = 1e-10;  // singular values below tol * max count as zero
  int irls_max_iter = 100;
  double irls_tol = 1e-8;
  double irls_ridge = 1e-6;
};

struct PriorConfig {
  double gamma = 0.0;  // complexity penalty per tree node; 0 means "use log n"
};

struct InferenceConfig {
  EvidenceConfig evidence;
  PriorConfig prior;
  double resolve_g(int n) const { return evidence.g > 0 ? evidence.g : n; }
  double resolve_gamma(int n) const {
    return prior.gamma > 0 ? prior.gamma : std::log(static_cast<double>(n));
  }
};

// Exact log marginal likelihood of a Gaussian linear model with an intercept,
// a g-prior on the coefficients and an inverse-gamma prior on the noise
// variance. `columns` excludes the intercept. Rank deficiency is handled by
// projecting onto the effective column space (pseudo-inverse least squares).
double gaussian_log_evidence(const Eigen::MatrixXd& columns,
                             const Eigen::VectorXd& y,
                             const EvidenceConfig& cfg, int n_rows_hint = -1,
                             int* effective_rank = nullptr);

// BIC-type Laplace surrogate for a Bernoulli-logit model: maximized
// log-likelihood minus ((k+1)/2) log n. The MLE comes from ridge-stabilized
// IRLS; throws EvidenceError when IRLS fails to converge.
double binomial_log_evidence(const Eigen::MatrixXd& columns,
                             const Eigen::VectorXd& y,
                             const EvidenceConfig& cfg);

// Complexity prior: -gamma * sum of tree node counts over included features.
double log_prior(const std::vector<FeaturePtr>& features, double gamma);

// Canonical model identity: sorted canonical keys joined by '|'. The empty
// (intercept-only) model has the empty identity.
std::string model_identity(std::vector<std::string> keys);

// A realized model: features sorted by canonical key.
struct Model {
  std::vector<FeaturePtr> features;
  std::string identity;

  static Model from_features(std::vector<FeaturePtr> feats);
  int size() const { return static_cast<int>(features.size()); }
};

struct ArchiveEntry {
  std::vector<std::string> keys;  // sorted
  double log_prior = 0.0;
  double log_evidence = 0.0;
  std::uint64_t visits = 0;  // lookup count
  std::uint64_t order = 0;   // insertion order
  double log_target() const { return log_prior + log_evidence; }
};

// Append-only store of evaluated models keyed by identity. Thread safe;
// identical identities always carry identical values because the evidence is
// deterministic, so insert races are benign.
class ModelArchive {
 public:
  std::optional<double> lookup(const std::string& identity);
  double insert(const std::string& identity, std::vector<std::string> keys,
                double log_prior, double log_evidence);
  bool contains(const std::string& identity) const;
  std::size_t size() const;
  std::vector<std::pair<std::string, ArchiveEntry>> snapshot() const;
  void merge_from(const ModelArchive& other);

 private:
  mutable std::mutex mu_;
  std::unordered_map<std::string, ArchiveEntry> map_;
  std::uint64_t next_order_ = 0;
};

// Computes archive-cached unnormalized log posteriors.
class Evaluator {
 public:
  Evaluator(const Dataset& data, const InferenceConfig& cfg,
            ModelArchive* archive);

  // `columns[i]` is the realized column of `features[i]`; any order. Feature
  // evaluation failures are the caller's concern, the columns must be finite.
  double log_target(const std::vector<FeaturePtr>& features,
                    const std::vector<const Eigen::VectorXd*>& columns);

  double log_target(const Model& m);  // evaluates feature columns on demand

  const Dataset& data() const { return data_; }
  ModelArchive& archive() { return *archive_; }
  double gamma() const { return gamma_; }
  std::uint64_t evidence_computations() const { return computations_; }
  std::uint64_t target_requests() const { return requests_; }

 private:
  double compute(const std::vector<FeaturePtr>& sorted_feats,
                 const std::vector<const Eigen::VectorXd*>& sorted_cols,
                 const std::string& identity);

  const Dataset& data_;
  InferenceConfig cfg_;
  ModelArchive* archive_;
  double gamma_;
  std::uint64_t computations_ = 0;
  std::uint64_t requests_ = 0;
};

}  // namespace rgmj
