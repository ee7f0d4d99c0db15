#include "rgmj/kernel.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "rgmj/errors.hpp"

namespace rgmj {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_binom(int n, int k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}
}  // namespace

void LocalKernelConfig::validate() const {
  if (!(jump_prob >= 0.0 && jump_prob <= 1.0))
    throw ConfigError("jump probability must lie in [0,1]");
  if (local_steps < 0) throw ConfigError("local steps must be >= 0");
  if (!(swap_prob > 0.0 && swap_prob < 0.5))
    throw ConfigError("swap probability must lie in (0, 0.5)");
  if (randomize_retries < 1)
    throw ConfigError("randomize retry budget must be >= 1");
}

std::optional<LocalKernelConfig::Move> move_from_name(std::string_view name) {
  if (name == "greedy") return LocalKernelConfig::Move::Greedy;
  if (name == "metropolis") return LocalKernelConfig::Move::Metropolis;
  return std::nullopt;
}

const char* move_name(LocalKernelConfig::Move m) {
  return m == LocalKernelConfig::Move::Greedy ? "greedy" : "metropolis";
}

PopulationDesign::PopulationDesign(Population pop, const Dataset& data)
    : pop_(std::move(pop)) {
  cols_.reserve(pop_.size());
  for (int i = 0; i < pop_.size(); ++i) {
    auto col = evaluate(*pop_[i], data.X);
    if (!col)
      throw std::invalid_argument("feature " + pop_[i]->key +
                                  " is non-finite on this dataset");
    cols_.push_back(std::move(*col));
  }
}

double PopulationDesign::target(Mask m, Evaluator& ev) {
  auto it = memo_.find(m);
  if (it != memo_.end()) return it->second;

  std::vector<FeaturePtr> feats;
  std::vector<const Eigen::VectorXd*> cols;
  for (int i = 0; i < pop_.size(); ++i) {
    if (m & (Mask{1} << i)) {
      feats.push_back(pop_[i]);
      cols.push_back(&cols_[i]);
    }
  }
  const double lt = ev.log_target(feats, cols);
  memo_.emplace(m, lt);
  return lt;
}

Mask large_jump(Mask m, int s, int max_size, double jump_prob,
                RandomSource& rng) {
  Mask out = m;
  for (int i = 0; i < s; ++i)
    if (rng.bernoulli(jump_prob)) out ^= Mask{1} << i;
  // uniformly drop surplus inclusions
  while (mask_ones(out) > max_size) {
    int target = static_cast<int>(rng.uniform_int(mask_ones(out)));
    for (int i = 0; i < s; ++i) {
      if (out & (Mask{1} << i)) {
        if (target-- == 0) {
          out ^= Mask{1} << i;
          break;
        }
      }
    }
  }
  return out;
}

Mask local_optimize(Mask m0, PopulationDesign& design, Evaluator& ev,
                    const LocalKernelConfig& cfg, int max_size,
                    RandomSource& rng, int* eval_count) {
  const int s = design.population().size();
  int evals = 0;
  Mask cur = m0;
  double cur_lt = design.target(cur, ev);
  ++evals;

  if (cfg.move == LocalKernelConfig::Move::Greedy) {
    for (int step = 0; step < cfg.local_steps; ++step) {
      Mask best = cur;
      double best_lt = cur_lt;
      for (int i = 0; i < s; ++i) {
        const Mask cand = cur ^ (Mask{1} << i);
        if (mask_ones(cand) > max_size) continue;
        const double lt = design.target(cand, ev);
        ++evals;
        if (lt > best_lt) {
          best = cand;
          best_lt = lt;
        }
      }
      if (best == cur) break;  // local maximum
      cur = best;
      cur_lt = best_lt;
    }
  } else {
    for (int step = 0; step < cfg.local_steps; ++step) {
      const int i = static_cast<int>(rng.uniform_int(s));
      const Mask cand = cur ^ (Mask{1} << i);
      if (mask_ones(cand) > max_size) continue;
      const double lt = design.target(cand, ev);
      ++evals;
      if (std::log(rng.uniform()) < lt - cur_lt) {
        cur = cand;
        cur_lt = lt;
      }
    }
  }
  if (eval_count) *eval_count = evals;
  return cur;
}

std::optional<Mask> randomize(Mask mk, int s, int max_size, double swap_prob,
                              int retries, RandomSource& rng) {
  for (int r = 0; r < retries; ++r) {
    Mask out = mk;
    for (int i = 0; i < s; ++i)
      if (rng.bernoulli(swap_prob)) out ^= Mask{1} << i;
    if (mask_ones(out) <= max_size) return out;
  }
  return std::nullopt;
}

double log_randomize_norm(int s, int max_size, int center_ones, double rho) {
  if (max_size >= s) return 0.0;
  const int j = center_ones;
  const double log_rho = std::log(rho);
  const double log_keep = std::log1p(-rho);
  // Flips remove r of the j ones and add a of the s-j zeros; the result stays
  // inside the support when j - r + a <= max_size.
  double z = 0.0;
  for (int r = 0; r <= j; ++r) {
    for (int a = 0; a <= s - j; ++a) {
      if (j - r + a > max_size) continue;
      z += std::exp(log_binom(j, r) + log_binom(s - j, a) +
                    (r + a) * log_rho + (s - r - a) * log_keep);
    }
  }
  return std::log(z);
}

double log_qr_ratio(bool backward_feasible, int d_bwd, int d_fwd, int s,
                    int max_size, int bwd_center_ones, int fwd_center_ones,
                    double rho) {
  if (!backward_feasible) return kNegInf;
  const double log_odds = std::log(rho) - std::log1p(-rho);
  return (d_bwd - d_fwd) * log_odds +
         log_randomize_norm(s, max_size, fwd_center_ones, rho) -
         log_randomize_norm(s, max_size, bwd_center_ones, rho);
}

}  // namespace rgmj
