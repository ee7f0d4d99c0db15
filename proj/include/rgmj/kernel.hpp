#pragma once

#include <bit>
#include <cstdint>
#include <optional>
#include <vector>

#include "rgmj/inference.hpp"
#include "rgmj/operators.hpp"
#include "rgmj/random.hpp"

namespace rgmj {

// Inclusion mask over a population; bit i selects feature i. Populations are
// capped at 64 features.
using Mask = std::uint64_t;

inline int mask_ones(Mask m) { return std::popcount(m); }
inline int hamming(Mask a, Mask b) { return std::popcount(a ^ b); }

struct LocalKernelConfig {
  double jump_prob = 0.35;  // per-bit flip probability of the large jump
  int local_steps = 15;     // optimization steps after the jump
  enum class Move { Greedy, Metropolis } move = Move::Greedy;
  double swap_prob = 0.05;  // per-bit flip probability of the randomization
  int randomize_retries = 50;

  void validate() const;  // throws ConfigError
};

std::optional<LocalKernelConfig::Move> move_from_name(std::string_view name);
const char* move_name(LocalKernelConfig::Move m);

// A population with realized feature columns and a per-mask target memo.
class PopulationDesign {
 public:
  PopulationDesign(Population pop, const Dataset& data);

  const Population& population() const { return pop_; }
  const Eigen::VectorXd& column(int i) const { return cols_[i]; }

  // Memoized unnormalized log posterior of the masked model.
  double target(Mask m, Evaluator& ev);

 private:
  Population pop_;
  std::vector<Eigen::VectorXd> cols_;
  std::unordered_map<Mask, double> memo_;
};

// Flip every bit independently with probability jump_prob, then uniformly
// drop surplus inclusions until the size cap holds.
Mask large_jump(Mask m, int s, int max_size, double jump_prob,
                RandomSource& rng);

// Hill climb (greedy) or single-bit-flip Metropolis on the masked target,
// staying within the size cap. Every evaluated model enters the archive via
// the evaluator. eval_count, when given, receives the number of target
// requests made.
Mask local_optimize(Mask m0, PopulationDesign& design, Evaluator& ev,
                    const LocalKernelConfig& cfg, int max_size,
                    RandomSource& rng, int* eval_count = nullptr);

// Flip every bit independently with probability swap_prob; draws breaking the
// size cap are resampled, so the cap is part of the proposal support. Returns
// nullopt when the retry budget is exhausted.
std::optional<Mask> randomize(Mask mk, int s, int max_size, double swap_prob,
                              int retries, RandomSource& rng);

// Log normalizing constant of the size-capped randomization kernel: the
// probability that independent flips of a mask with center_ones ones (length
// s, flip probability rho) land within the <= max_size support.
double log_randomize_norm(int s, int max_size, int center_ones, double rho);

// Exact log ratio of the randomization densities,
//
//   log q_r(current | backward center) - log q_r(proposal | forward center)
//     = (d_bwd - d_fwd) * log(rho / (1 - rho))
//       + log Z(fwd center size) - log Z(bwd center size),
//
// where Z is the size-cap normalization above. -inf when the backward
// population cannot reproduce the current model at all.
double log_qr_ratio(bool backward_feasible, int d_bwd, int d_fwd, int s,
                    int max_size, int bwd_center_ones, int fwd_center_ones,
                    double rho);

}  // namespace rgmj
