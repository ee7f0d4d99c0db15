#include "rgmj/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "rgmj/errors.hpp"
#include "rgmj/feature.hpp"
#include "rgmj/random.hpp"

namespace rgmj {

namespace {

constexpr double kFourThirdsPi = 4.18879020478639098462;

// Shared covariate block for the two astronomy experiments: planet radius and
// density, orbital period, correlated host mass/radius/temperature, and
// assorted positive-range distractors.
struct AstroColumns {
  std::vector<std::string> names;
  Eigen::MatrixXd X;
};

AstroColumns gen_astro_covariates(int n, RandomSource& rng) {
  AstroColumns out;
  out.names = {"R_p", "rho_p", "P", "M_h", "R_h",
               "T_h", "T_eq",  "age", "dist", "ecc"};
  out.X.resize(n, 10);
  for (int i = 0; i < n; ++i) {
    const double r_p = rng.log_uniform(0.5, 20.0);
    const double rho_p = rng.log_uniform(0.3, 12.0);
    const double period = rng.log_uniform(1.0, 1000.0);
    const double m_h = std::exp(0.25 * rng.normal());
    const double r_h = std::pow(m_h, 0.9) * std::exp(0.08 * rng.normal());
    const double t_h = 5.8 * std::pow(m_h, 0.45) * std::exp(0.05 * rng.normal());
    out.X(i, 0) = r_p;
    out.X(i, 1) = rho_p;
    out.X(i, 2) = period;
    out.X(i, 3) = m_h;
    out.X(i, 4) = r_h;
    out.X(i, 5) = t_h;
    out.X(i, 6) = rng.log_uniform(100.0, 2500.0);
    out.X(i, 7) = rng.uniform_range(0.5, 13.0);
    out.X(i, 8) = rng.log_uniform(5.0, 2000.0);
    out.X(i, 9) = rng.uniform_range(0.01, 0.95);
  }
  return out;
}

}  // namespace

GeneratedExperiment gen_mass_data(int n, double sigma, std::uint64_t seed) {
  if (n < 50) throw ConfigError("mass experiment needs n >= 50");
  Mt19937Source rng(seed);
  auto cov = gen_astro_covariates(n, rng);

  GeneratedExperiment out;
  out.data.family = Family::Gaussian;
  out.data.names = cov.names;
  out.data.X = std::move(cov.X);
  out.data.y.resize(n);
  for (int i = 0; i < n; ++i) {
    const double r = out.data.X(i, 0), rho = out.data.X(i, 1);
    out.data.y[i] =
        kFourThirdsPi * r * r * r * rho * (1.0 + sigma * rng.normal());
  }
  out.data.validate();

  // The law can surface under any algebraically identical rendering of
  // R_p^3 * rho_p; all of them count as the same discovery.
  auto r_p = make_leaf(0, "R_p");
  auto rho_p = make_leaf(1, "rho_p");
  TruthEntry law;
  law.label = "R_p^3*rho_p";
  law.keys = {
      make_product({r_p, r_p, r_p, rho_p})->key,
      make_product({make_unary(Nonlin::Cube, r_p), rho_p})->key,
      make_product({make_unary(Nonlin::Square, r_p), r_p, rho_p})->key,
  };
  out.truth.entries.push_back(std::move(law));
  return out;
}

GeneratedExperiment gen_kepler_data(int n, double sigma, std::uint64_t seed) {
  if (n < 50) throw ConfigError("kepler experiment needs n >= 50");
  Mt19937Source rng(seed);
  auto cov = gen_astro_covariates(n, rng);

  GeneratedExperiment out;
  out.data.family = Family::Gaussian;
  out.data.names = cov.names;
  out.data.X = std::move(cov.X);
  out.data.y.resize(n);
  // a = (M P^2)^(1/3) with P in years; 365.25^(-2/3) folds the units in.
  const double units = std::pow(365.25, -2.0 / 3.0);
  for (int i = 0; i < n; ++i) {
    const double p = out.data.X(i, 2), m_h = out.data.X(i, 3);
    out.data.y[i] =
        units * std::cbrt(p * p * m_h) * (1.0 + sigma * rng.normal());
  }
  out.data.validate();

  auto p = make_leaf(2, "P");
  auto m_h = make_leaf(3, "M_h");
  auto r_h = make_leaf(4, "R_h");
  auto t_h = make_leaf(5, "T_h");
  TruthEntry law;
  law.label = "cbrt(P^2*host)";
  for (const auto& host : {m_h, r_h, t_h}) {
    law.keys.push_back(make_unary(Nonlin::Cbrt, make_product({p, p, host}))->key);
    law.keys.push_back(
        make_unary(Nonlin::Cbrt,
                   make_product({make_unary(Nonlin::Square, p), host}))
            ->key);
  }
  out.truth.entries.push_back(std::move(law));
  return out;
}

GeneratedExperiment gen_logic_data(int n, std::uint64_t seed) {
  if (n < 200) throw ConfigError("logic experiment needs n >= 200");
  Mt19937Source rng(seed);

  GeneratedExperiment out;
  out.data.family = Family::Binomial;
  const int q = 50;
  out.data.names.reserve(q);
  for (int j = 1; j <= q; ++j) out.data.names.push_back("X" + std::to_string(j));
  out.data.X.resize(n, q);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < q; ++j)
      out.data.X(i, j) = rng.bernoulli(0.5) ? 1.0 : 0.0;

  auto leaves = leaf_features(out.data.names);
  auto leaf1 = [&](int one_based) { return leaves[one_based - 1]; };
  const std::vector<std::vector<int>> tree_vars = {
      {7}, {8}, {2, 9}, {18, 21}, {1, 3, 27}, {12, 20, 37},
      {4, 10, 17, 30}, {11, 13, 19, 50}};

  std::vector<FeaturePtr> trees;
  for (std::size_t t = 0; t < tree_vars.size(); ++t) {
    if (tree_vars[t].size() == 1) {
      trees.push_back(leaf1(tree_vars[t][0]));
    } else {
      std::vector<FeaturePtr> parts;
      for (int v : tree_vars[t]) parts.push_back(leaf1(v));
      trees.push_back(make_product(std::move(parts)));
    }
    TruthEntry e;
    e.label = "L" + std::to_string(t + 1);
    e.keys = {trees.back()->key};
    out.truth.entries.push_back(std::move(e));
  }

  // Equal effects on all eight trees; the intercept centers the logit at the
  // expected total activation.
  const double beta = 2.0;
  const double intercept = -beta * 1.875;
  std::vector<Eigen::VectorXd> tree_cols;
  for (const auto& t : trees) tree_cols.push_back(*evaluate(*t, out.data.X));
  out.data.y.resize(n);
  for (int i = 0; i < n; ++i) {
    double logit = intercept;
    for (const auto& col : tree_cols) logit += beta * col[i];
    const double prob = 1.0 / (1.0 + std::exp(-logit));
    out.data.y[i] = rng.bernoulli(prob) ? 1.0 : 0.0;
  }
  out.data.validate();
  return out;
}

RunMetrics compute_metrics(
    const std::vector<std::map<std::string, double>>& inclusion_per_replicate,
    const GroundTruth& truth, int lanes) {
  if (inclusion_per_replicate.empty())
    throw ConfigError("metrics need at least one replicate");
  if (truth.entries.empty()) throw ConfigError("metrics need a ground truth");

  RunMetrics m;
  m.lanes = lanes;
  m.replicates = static_cast<int>(inclusion_per_replicate.size());
  m.power_per_target.assign(truth.entries.size(), 0.0);
  for (const auto& e : truth.entries) m.target_labels.push_back(e.label);

  std::set<std::string> truth_keys;
  for (const auto& e : truth.entries)
    truth_keys.insert(e.keys.begin(), e.keys.end());

  double fp_sum = 0.0, fdr_sum = 0.0;
  for (const auto& incl : inclusion_per_replicate) {
    std::set<std::string> detected;
    for (const auto& [key, p] : incl)
      if (p >= truth.detection_threshold) detected.insert(key);

    int tp = 0;
    for (std::size_t t = 0; t < truth.entries.size(); ++t) {
      const bool hit = std::any_of(
          truth.entries[t].keys.begin(), truth.entries[t].keys.end(),
          [&](const std::string& k) { return detected.count(k) > 0; });
      if (hit) {
        m.power_per_target[t] += 1.0;
        ++tp;
      }
    }
    int fp = 0;
    for (const auto& k : detected)
      if (!truth_keys.count(k)) ++fp;

    fp_sum += fp;
    fdr_sum += (tp + fp) > 0 ? static_cast<double>(fp) / (tp + fp) : 0.0;
  }

  for (auto& p : m.power_per_target) p /= m.replicates;
  m.overall_power = 0.0;
  for (double p : m.power_per_target) m.overall_power += p;
  m.overall_power /= static_cast<double>(m.power_per_target.size());
  m.avg_fp = fp_sum / m.replicates;
  m.fdr = fdr_sum / m.replicates;
  return m;
}

void write_metrics_csv(const RunMetrics& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw LoadError("cannot write '" + path + "'");
  out << "T,replicates";
  for (const auto& l : m.target_labels) out << ",power_" << l;
  out << ",overall_power,avg_fp,fdr\n";
  out << m.lanes << ',' << m.replicates;
  char buf[40];
  for (double p : m.power_per_target) {
    std::snprintf(buf, sizeof(buf), ",%.12g", p);
    out << buf;
  }
  std::snprintf(buf, sizeof(buf), ",%.12g", m.overall_power);
  out << buf;
  std::snprintf(buf, sizeof(buf), ",%.12g", m.avg_fp);
  out << buf;
  std::snprintf(buf, sizeof(buf), ",%.12g\n", m.fdr);
  out << buf;
}

void write_truth_file(const GroundTruth& truth, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw LoadError("cannot write '" + path + "'");
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", truth.detection_threshold);
  out << "threshold=" << buf << '\n';
  for (const auto& e : truth.entries) {
    out << e.label << ':';
    for (std::size_t i = 0; i < e.keys.size(); ++i) {
      if (i) out << '|';
      out << e.keys[i];
    }
    out << '\n';
  }
}

GroundTruth load_truth_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open truth file '" + path + "'");
  GroundTruth truth;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.rfind("threshold=", 0) == 0) {
      truth.detection_threshold = std::stod(line.substr(10));
      continue;
    }
    const auto colon = line.find(':');
    if (colon == std::string::npos)
      throw LoadError("malformed truth line: " + line);
    TruthEntry e;
    e.label = line.substr(0, colon);
    std::string rest = line.substr(colon + 1);
    std::size_t start = 0;
    while (start <= rest.size()) {
      const auto bar = rest.find('|', start);
      const auto end = bar == std::string::npos ? rest.size() : bar;
      if (end > start) e.keys.push_back(rest.substr(start, end - start));
      if (bar == std::string::npos) break;
      start = bar + 1;
    }
    if (e.keys.empty()) throw LoadError("truth entry without keys: " + line);
    truth.entries.push_back(std::move(e));
  }
  if (truth.entries.empty()) throw LoadError("truth file has no entries");
  return truth;
}

}  // namespace rgmj
