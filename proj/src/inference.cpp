#include "rgmj/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "rgmj/errors.hpp"

namespace rgmj {

namespace {

constexpr double kLogPi = 1.14472988584940017414;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Drop the column scale before factorizing; the evidence is scale invariant
// and generated features can span hundreds of orders of magnitude.
Eigen::MatrixXd normalized_design(const Eigen::MatrixXd& columns,
                                  Eigen::Index n) {
  Eigen::MatrixXd Z(n, columns.cols() + 1);
  Z.col(0).setConstant(1.0 / std::sqrt(static_cast<double>(n)));
  for (Eigen::Index j = 0; j < columns.cols(); ++j) {
    const double norm = columns.col(j).norm();
    if (norm > 0)
      Z.col(j + 1) = columns.col(j) / norm;
    else
      Z.col(j + 1).setZero();
  }
  return Z;
}

double log1pexp(double x) {
  if (x > 35.0) return x;
  if (x < -35.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

double bernoulli_loglik(const Eigen::VectorXd& eta, const Eigen::VectorXd& y) {
  double ll = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i)
    ll += y[i] * eta[i] - log1pexp(eta[i]);
  return ll;
}

}  // namespace

double gaussian_log_evidence(const Eigen::MatrixXd& columns,
                             const Eigen::VectorXd& y,
                             const EvidenceConfig& cfg, int n_rows_hint,
                             int* effective_rank) {
  const Eigen::Index n = y.size();
  (void)n_rows_hint;
  Eigen::MatrixXd Z = normalized_design(columns, n);

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(Z, Eigen::ComputeThinU);
  const auto& sv = svd.singularValues();
  const double tol = cfg.rank_tol * sv[0];
  int rank = 0;
  double fit = 0.0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv[i] > tol) {
      const double c = svd.matrixU().col(i).dot(y);
      fit += c * c;
      ++rank;
    }
  }
  if (effective_rank) *effective_rank = rank;

  const double g = cfg.g > 0 ? cfg.g : static_cast<double>(n);
  const double yy = y.squaredNorm();
  const double s = std::max(0.0, yy - (g / (1.0 + g)) * fit);
  const double half_n = 0.5 * static_cast<double>(n);
  return std::lgamma(half_n + cfg.a0) - std::lgamma(cfg.a0) +
         cfg.a0 * std::log(cfg.b0) - half_n * (kLogPi + std::log(2.0)) -
         0.5 * rank * std::log1p(g) -
         (half_n + cfg.a0) * std::log(cfg.b0 + 0.5 * s);
}

double binomial_log_evidence(const Eigen::MatrixXd& columns,
                             const Eigen::VectorXd& y,
                             const EvidenceConfig& cfg) {
  const Eigen::Index n = y.size();
  Eigen::MatrixXd Z = normalized_design(columns, n);
  const Eigen::Index p = Z.cols();

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd eta = Eigen::VectorXd::Zero(n);
  const double lambda = cfg.irls_ridge;
  double obj = bernoulli_loglik(eta, y);  // beta = 0 has zero penalty

  bool converged = false;
  for (int iter = 0; iter < cfg.irls_max_iter; ++iter) {
    Eigen::VectorXd mu(n), w(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      mu[i] = 1.0 / (1.0 + std::exp(-eta[i]));
      w[i] = std::max(mu[i] * (1.0 - mu[i]), 1e-12);
    }
    Eigen::MatrixXd H = Z.transpose() * w.asDiagonal() * Z;
    H.diagonal().array() += lambda;
    Eigen::VectorXd grad = Z.transpose() * (y - mu) - lambda * beta;
    Eigen::VectorXd delta = H.ldlt().solve(grad);

    // Newton step with halving if the penalized objective drops.
    double step = 1.0;
    double new_obj = kNegInf;
    Eigen::VectorXd beta_new, eta_new;
    for (int h = 0; h < 30; ++h) {
      beta_new = beta + step * delta;
      eta_new = Z * beta_new;
      new_obj = bernoulli_loglik(eta_new, y) -
                0.5 * lambda * beta_new.squaredNorm();
      if (new_obj >= obj - 1e-14) break;
      step *= 0.5;
    }
    if (!(new_obj > kNegInf)) throw EvidenceError("IRLS step failed");
    beta = beta_new;
    eta = eta_new;
    const double improvement = new_obj - obj;
    obj = new_obj;
    if (std::abs(improvement) < cfg.irls_tol * (1.0 + std::abs(obj))) {
      converged = true;
      break;
    }
  }
  if (!converged)
    throw EvidenceError("IRLS did not converge within " +
                        std::to_string(cfg.irls_max_iter) + " iterations");

  const double ll = bernoulli_loglik(eta, y);
  const double k1 = static_cast<double>(columns.cols() + 1);
  return ll - 0.5 * k1 * std::log(static_cast<double>(n));
}

double log_prior(const std::vector<FeaturePtr>& features, double gamma) {
  double nodes = 0.0;
  for (const auto& f : features) nodes += f->node_count;
  return -gamma * nodes;
}

std::string model_identity(std::vector<std::string> keys) {
  std::sort(keys.begin(), keys.end());
  std::string id;
  for (std::size_t i = 0; i < keys.size(); ++i) {
    if (i) id += '|';
    id += keys[i];
  }
  return id;
}

Model Model::from_features(std::vector<FeaturePtr> feats) {
  std::sort(feats.begin(), feats.end(),
            [](const FeaturePtr& a, const FeaturePtr& b) {
              return a->key < b->key;
            });
  Model m;
  std::vector<std::string> keys;
  keys.reserve(feats.size());
  for (const auto& f : feats) keys.push_back(f->key);
  m.identity = model_identity(std::move(keys));
  m.features = std::move(feats);
  return m;
}

std::optional<double> ModelArchive::lookup(const std::string& identity) {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = map_.find(identity);
  if (it == map_.end()) return std::nullopt;
  ++it->second.visits;
  return it->second.log_target();
}

double ModelArchive::insert(const std::string& identity,
                            std::vector<std::string> keys, double lp,
                            double le) {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = map_.find(identity);
  if (it != map_.end()) {
    ++it->second.visits;
    return it->second.log_target();
  }
  ArchiveEntry e;
  e.keys = std::move(keys);
  e.log_prior = lp;
  e.log_evidence = le;
  e.visits = 1;
  e.order = next_order_++;
  map_.emplace(identity, std::move(e));
  return lp + le;
}

bool ModelArchive::contains(const std::string& identity) const {
  std::lock_guard<std::mutex> lock(mu_);
  return map_.count(identity) > 0;
}

std::size_t ModelArchive::size() const {
  std::lock_guard<std::mutex> lock(mu_);
  return map_.size();
}

std::vector<std::pair<std::string, ArchiveEntry>> ModelArchive::snapshot()
    const {
  std::lock_guard<std::mutex> lock(mu_);
  std::vector<std::pair<std::string, ArchiveEntry>> out(map_.begin(),
                                                        map_.end());
  return out;
}

void ModelArchive::merge_from(const ModelArchive& other) {
  auto entries = other.snapshot();
  std::sort(entries.begin(), entries.end(),
            [](const auto& a, const auto& b) {
              return a.second.order < b.second.order;
            });
  std::lock_guard<std::mutex> lock(mu_);
  for (auto& [id, e] : entries) {
    auto it = map_.find(id);
    if (it == map_.end()) {
      e.order = next_order_++;
      map_.emplace(std::move(id), std::move(e));
    } else {
      it->second.visits += e.visits;
    }
  }
}

Evaluator::Evaluator(const Dataset& data, const InferenceConfig& cfg,
                     ModelArchive* archive)
    : data_(data), cfg_(cfg), archive_(archive),
      gamma_(cfg.resolve_gamma(data.n())) {
  if (!archive_) throw std::invalid_argument("Evaluator needs an archive");
  if (cfg_.evidence.g <= 0) cfg_.evidence.g = static_cast<double>(data.n());
}

double Evaluator::log_target(const std::vector<FeaturePtr>& features,
                             const std::vector<const Eigen::VectorXd*>& cols) {
  ++requests_;
  std::vector<std::size_t> order(features.size());
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return features[a]->key < features[b]->key;
  });
  std::vector<std::string> keys;
  keys.reserve(order.size());
  std::string identity;
  for (std::size_t r = 0; r < order.size(); ++r) {
    keys.push_back(features[order[r]]->key);
    if (r) identity += '|';
    identity += keys.back();
  }
  if (auto hit = archive_->lookup(identity)) return *hit;

  std::vector<FeaturePtr> sorted_feats;
  std::vector<const Eigen::VectorXd*> sorted_cols;
  sorted_feats.reserve(order.size());
  sorted_cols.reserve(order.size());
  for (std::size_t r : order) {
    sorted_feats.push_back(features[r]);
    sorted_cols.push_back(cols[r]);
  }
  return compute(sorted_feats, sorted_cols, identity);
}

double Evaluator::log_target(const Model& m) {
  ++requests_;
  if (auto hit = archive_->lookup(m.identity)) return *hit;
  std::vector<Eigen::VectorXd> storage;
  storage.reserve(m.features.size());
  std::vector<const Eigen::VectorXd*> cols;
  for (const auto& f : m.features) {
    auto col = evaluate(*f, data_.X);
    if (!col) return kNegInf;  // non-finite feature, reject the model
    storage.push_back(std::move(*col));
    cols.push_back(&storage.back());
  }
  return compute(m.features, cols, m.identity);
}

double Evaluator::compute(const std::vector<FeaturePtr>& feats,
                          const std::vector<const Eigen::VectorXd*>& cols,
                          const std::string& identity) {
  ++computations_;
  Eigen::MatrixXd design(data_.n(), cols.size());
  for (std::size_t j = 0; j < cols.size(); ++j) design.col(j) = *cols[j];

  const double lp = log_prior(feats, gamma_);
  double le;
  try {
    le = data_.family == Family::Gaussian
             ? gaussian_log_evidence(design, data_.y, cfg_.evidence)
             : binomial_log_evidence(design, data_.y, cfg_.evidence);
  } catch (const EvidenceError&) {
    le = kNegInf;
  }
  std::vector<std::string> keys;
  keys.reserve(feats.size());
  for (const auto& f : feats) keys.push_back(f->key);
  return archive_->insert(identity, std::move(keys), lp, le);
}

}  // namespace rgmj
