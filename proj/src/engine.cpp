#include "rgmj/engine.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>

#include "rgmj/errors.hpp"

namespace rgmj {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

Mask low_bits(int k) {
  return k >= 64 ? ~Mask{0} : (Mask{1} << k) - 1;
}
}  // namespace

const char* kernel_kind_name(KernelKind k) {
  switch (k) {
    case KernelKind::Rgmjmcmc: return "rgmjmcmc";
    case KernelKind::RgmjmcmcDelayed: return "rgmjmcmc_delayed";
    case KernelKind::GmjmcmcBaseline: return "gmjmcmc_baseline";
  }
  return "?";
}

std::optional<KernelKind> kernel_kind_from_name(std::string_view name) {
  for (KernelKind k : {KernelKind::Rgmjmcmc, KernelKind::RgmjmcmcDelayed,
                       KernelKind::GmjmcmcBaseline})
    if (name == kernel_kind_name(k)) return k;
  return std::nullopt;
}

void KernelConfig::validate() const {
  if (pop_size < 1 || pop_size > 64)
    throw ConfigError("population size must lie in [1, 64]");
  if (max_model_size < 1 || max_model_size > pop_size)
    throw ConfigError("need population size >= max model size >= 1");
  if (baseline_pop_period < 1)
    throw ConfigError("baseline population period must be >= 1");
  ops.validate();
  local.validate();
  if (!(inference.evidence.a0 > 0.0) || !(inference.evidence.b0 > 0.0))
    throw ConfigError("evidence hyperparameters must be positive");
}

void FrequencyCounters::add(const FrequencyCounters& other) {
  for (const auto& [id, c] : other.counts) counts[id] += c;
  total += other.total;
}

Chain::Chain(const Dataset& data, const KernelConfig& cfg,
             std::vector<FeaturePtr> base_covariates, Population initial,
             Mask initial_mask, std::uint64_t seed, ModelArchive* archive)
    : data_(data),
      cfg_(cfg),
      base_(std::move(base_covariates)),
      rng_(seed),
      archive_(archive),
      eval_(data, cfg.inference, archive) {
  cfg_.validate();
  if (initial.size() != cfg_.pop_size)
    throw ConfigError("initial population size does not match pop_size");
  if (mask_ones(initial_mask) > cfg_.max_model_size)
    throw ConfigError("initial model exceeds the size cap");
  design_ = std::make_unique<PopulationDesign>(std::move(initial), data_);
  mask_ = initial_mask;
  validator_ = [this](const FeaturePtr& f) {
    return evaluate(*f, data_.X).has_value();
  };
  log_norm_.resize(cfg_.max_model_size + 1);
  for (int j = 0; j <= cfg_.max_model_size; ++j)
    log_norm_[j] = log_randomize_norm(cfg_.pop_size, cfg_.max_model_size, j,
                                      cfg_.local.swap_prob);
  incl_counts_.assign(cfg_.pop_size, 0.0);
}

std::string Chain::current_identity() const {
  if (identity_dirty_) {
    std::vector<std::string> keys;
    const auto& pop = design_->population();
    for (int i = 0; i < pop.size(); ++i)
      if (mask_ & (Mask{1} << i)) keys.push_back(pop[i]->key);
    identity_cache_ = model_identity(std::move(keys));
    identity_dirty_ = false;
  }
  return identity_cache_;
}

std::vector<FeaturePtr> Chain::current_features() const {
  std::vector<FeaturePtr> out;
  const auto& pop = design_->population();
  for (int i = 0; i < pop.size(); ++i)
    if (mask_ & (Mask{1} << i)) out.push_back(pop[i]);
  return out;
}

double Chain::current_log_target() { return design_->target(mask_, eval_); }

void Chain::step() {
  switch (cfg_.kind) {
    case KernelKind::Rgmjmcmc:
      mode_jump_step(false, !cfg_.fix_population);
      break;
    case KernelKind::RgmjmcmcDelayed:
      mode_jump_step(true, !cfg_.fix_population);
      break;
    case KernelKind::GmjmcmcBaseline:
      baseline_step();
      break;
  }
}

std::optional<Population> Chain::propose_population_around(
    const std::vector<FeaturePtr>& model_feats) {
  auto filled = fill_features(model_feats, cfg_.pop_size, cfg_.ops, base_,
                              rng_, validator_);
  if (!filled) return std::nullopt;
  return Population(std::move(*filled),
                    design_->population().generation() + 1);
}

void Chain::adopt(std::unique_ptr<PopulationDesign> design, Mask m) {
  design_ = std::move(design);
  mask_ = m;
  incl_counts_.assign(cfg_.pop_size, 0.0);
  gen_steps_ = 0;
  identity_dirty_ = true;
}

void Chain::finalize(StepRecord& rec, bool accepted) {
  rec.accepted = accepted;
  rec.step = ++steps_taken_;
  if (counting_) {
    ++counters_.total;
    ++counters_.counts[current_identity()];
  }
  for (int i = 0; i < design_->population().size(); ++i)
    if (mask_ & (Mask{1} << i)) incl_counts_[i] += 1.0;
  ++gen_steps_;
  if (sink_) sink_(rec);
}

// The reversible mode jump: build a forward search space around the current
// model, jump, locally optimize, randomize; then rebuild a backward space
// around the proposal and rerun jump + optimization from it to price the
// reverse randomization. The population and optimization proposals cancel in
// the acceptance ratio, only the randomization densities remain.
void Chain::mode_jump_step(bool delayed, bool propose_populations) {
  StepRecord rec;
  rec.kind = cfg_.kind;
  rec.s = cfg_.pop_size;
  rec.max_model_size = cfg_.max_model_size;
  rec.swap_prob = cfg_.local.swap_prob;

  const double lt_cur = design_->target(mask_, eval_);
  rec.log_target_current = lt_cur;

  auto reject = [&](std::string_view reason) {
    rec.reason = reason;
    finalize(rec, false);
  };

  // forward path
  PopulationDesign* fwd = design_.get();
  std::unique_ptr<PopulationDesign> fwd_store;
  Mask cur_in_fwd = mask_;
  if (propose_populations) {
    auto sp = propose_population_around(current_features());
    if (!sp) {
      ++pop_failures_;
      return reject("population-failed");
    }
    fwd_store = std::make_unique<PopulationDesign>(std::move(*sp), data_);
    fwd = fwd_store.get();
    cur_in_fwd = low_bits(mask_ones(mask_));  // model features seed the space
  }

  const Mask jumped = large_jump(cur_in_fwd, cfg_.pop_size,
                                 cfg_.max_model_size, cfg_.local.jump_prob,
                                 rng_);
  Mask fwd_center = local_optimize(jumped, *fwd, eval_, cfg_.local,
                                   cfg_.max_model_size, rng_);
  auto proposal = randomize(fwd_center, cfg_.pop_size, cfg_.max_model_size,
                            cfg_.local.swap_prob, cfg_.local.randomize_retries,
                            rng_);
  if (!proposal) return reject("randomize-failed");

  const double lt_prop = fwd->target(*proposal, eval_);
  rec.log_target_proposal = lt_prop;
  rec.d_fwd = hamming(*proposal, fwd_center);
  rec.fwd_center_ones = mask_ones(fwd_center);

  if (delayed) {
    rec.log_stage1 = lt_prop - lt_cur;
    if (rec.log_stage1 < 0.0 &&
        std::log(rng_.uniform()) >= rec.log_stage1)
      return reject("stage1");
  }

  // backward path
  PopulationDesign* bwd = fwd;
  std::unique_ptr<PopulationDesign> bwd_store;
  Mask cur_in_bwd = mask_;
  Mask prop_in_bwd = *proposal;
  if (propose_populations) {
    std::vector<FeaturePtr> prop_feats;
    for (int i = 0; i < cfg_.pop_size; ++i)
      if (*proposal & (Mask{1} << i))
        prop_feats.push_back(fwd->population()[i]);

    auto sb = propose_population_around(prop_feats);
    if (!sb) {
      ++pop_failures_;
      return reject("population-failed");
    }
    // The reverse randomization has zero density unless the backward space
    // carries every feature of the current model.
    cur_in_bwd = 0;
    bool feasible = true;
    const auto& pop = design_->population();
    for (int i = 0; i < pop.size() && feasible; ++i) {
      if (!(mask_ & (Mask{1} << i))) continue;
      auto idx = sb->index_of(pop[i]->key);
      if (!idx)
        feasible = false;
      else
        cur_in_bwd |= Mask{1} << *idx;
    }
    if (!feasible) {
      rec.feasible = false;
      rec.log_accept_ratio = kNegInf;
      ++infeasible_;
      return reject("infeasible-reverse");
    }
    prop_in_bwd = low_bits(mask_ones(*proposal));
    bwd_store = std::make_unique<PopulationDesign>(std::move(*sb), data_);
    bwd = bwd_store.get();
  }

  int bwd_evals = 0;
  const Mask bwd_jumped = large_jump(prop_in_bwd, cfg_.pop_size,
                                     cfg_.max_model_size,
                                     cfg_.local.jump_prob, rng_);
  const Mask bwd_center = local_optimize(bwd_jumped, *bwd, eval_, cfg_.local,
                                         cfg_.max_model_size, rng_,
                                         &bwd_evals);
  rec.bwd_evals = bwd_evals;
  bwd_requests_ += bwd_evals;
  rec.d_bwd = hamming(cur_in_bwd, bwd_center);
  rec.bwd_center_ones = mask_ones(bwd_center);

  const double log_odds =
      std::log(cfg_.local.swap_prob) - std::log1p(-cfg_.local.swap_prob);
  const double lqr = (rec.d_bwd - rec.d_fwd) * log_odds +
                     log_norm_[rec.fwd_center_ones] -
                     log_norm_[rec.bwd_center_ones];

  bool accepted;
  if (delayed) {
    rec.log_stage2 = lqr;
    rec.log_accept_ratio = rec.log_stage1 + rec.log_stage2;
    accepted = lqr >= 0.0 || std::log(rng_.uniform()) < lqr;
    if (!accepted) rec.reason = "stage2";
  } else {
    rec.log_accept_ratio = (lt_prop - lt_cur) + lqr;
    accepted = std::log(rng_.uniform()) < rec.log_accept_ratio;
    if (!accepted) rec.reason = "mh";
  }

  if (accepted) {
    if (propose_populations)
      adopt(std::move(fwd_store), *proposal);
    else {
      mask_ = *proposal;
      identity_dirty_ = true;
    }
  }
  finalize(rec, accepted);
}

void Chain::baseline_step() {
  if ((steps_taken_ + 1) % static_cast<std::uint64_t>(
                               cfg_.baseline_pop_period) == 0) {
    evolve_population();
    return;
  }
  mode_jump_step(false, false);
}

void Chain::evolve_population() {
  StepRecord rec;
  rec.kind = cfg_.kind;
  rec.s = cfg_.pop_size;
  rec.max_model_size = cfg_.max_model_size;
  rec.swap_prob = cfg_.local.swap_prob;
  rec.log_target_current = design_->target(mask_, eval_);
  rec.reason = "population-evolved";

  std::unordered_map<std::string, double> freqs;
  const auto& pop = design_->population();
  for (int i = 0; i < pop.size(); ++i)
    freqs[pop[i]->key] =
        gen_steps_ > 0 ? incl_counts_[i] / static_cast<double>(gen_steps_)
                       : 1.0;

  auto protected_feats = current_features();
  auto next = next_population(pop, protected_feats, freqs, cfg_.ops, base_,
                              rng_, validator_);
  if (next) {
    Mask new_mask = 0;
    for (const auto& f : protected_feats) {
      auto idx = next->index_of(f->key);
      new_mask |= Mask{1} << *idx;  // protected features always survive
    }
    adopt(std::make_unique<PopulationDesign>(std::move(*next), data_),
          new_mask);
  } else {
    ++pop_failures_;  // keep the old population
  }
  finalize(rec, false);
}

Population make_initial_population(const std::vector<FeaturePtr>& base,
                                   int pop_size, const OperatorConfig& cfg,
                                   RandomSource& rng,
                                   const FeatureValidator& validator) {
  if (static_cast<int>(base.size()) >= pop_size) {
    std::vector<FeaturePtr> picked(base);
    for (int i = 0; i < pop_size; ++i) {
      const std::size_t j = i + rng.uniform_int(picked.size() - i);
      std::swap(picked[i], picked[j]);
    }
    picked.resize(pop_size);
    return Population(std::move(picked), 0);
  }
  auto filled = fill_features(base, pop_size, cfg, base, rng, validator);
  if (!filled)
    throw ConfigError("cannot build an initial population of size " +
                      std::to_string(pop_size));
  return Population(std::move(*filled), 0);
}

namespace {

PosteriorEstimate sorted_estimate(std::vector<PosteriorEstimate::Entry> models,
                                  std::map<std::string, double> inclusion) {
  std::sort(models.begin(), models.end(),
            [](const auto& a, const auto& b) {
              if (a.prob != b.prob) return a.prob > b.prob;
              return a.identity < b.identity;
            });
  std::vector<std::pair<std::string, double>> incl(inclusion.begin(),
                                                   inclusion.end());
  std::sort(incl.begin(), incl.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  PosteriorEstimate out;
  out.models = std::move(models);
  out.inclusions = std::move(incl);
  return out;
}

double kahan_add(double& sum, double& carry, double term) {
  const double y = term - carry;
  const double t = sum + y;
  carry = (t - sum) - y;
  sum = t;
  return sum;
}

}  // namespace

PosteriorEstimate estimate_renormalized(const ModelArchive& archive) {
  auto entries = archive.snapshot();
  if (entries.empty())
    throw EstimatorError("cannot renormalize an empty archive");
  std::sort(entries.begin(), entries.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  double max_lt = kNegInf;
  for (const auto& [id, e] : entries) max_lt = std::max(max_lt, e.log_target());
  if (max_lt == kNegInf)
    throw EstimatorError("archive has no finite-posterior model");

  double norm = 0.0, carry = 0.0;
  std::vector<double> w(entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    w[i] = std::exp(entries[i].second.log_target() - max_lt);
    kahan_add(norm, carry, w[i]);
  }

  std::vector<PosteriorEstimate::Entry> models;
  std::map<std::string, double> inclusion;
  models.reserve(entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& [id, e] = entries[i];
    PosteriorEstimate::Entry m;
    m.identity = id;
    m.keys = e.keys;
    m.prob = w[i] / norm;
    m.log_target = e.log_target();
    m.log_prior = e.log_prior;
    m.log_evidence = e.log_evidence;
    m.count = e.visits;
    for (const auto& k : e.keys) inclusion[k] += m.prob;
    models.push_back(std::move(m));
  }
  return sorted_estimate(std::move(models), std::move(inclusion));
}

PosteriorEstimate estimate_frequency(const FrequencyCounters& counters,
                                     const ModelArchive& archive,
                                     KernelKind kind) {
  if (kind == KernelKind::GmjmcmcBaseline)
    throw EstimatorError(
        "frequency estimates are only valid for the reversible kernels");
  if (counters.total == 0)
    throw EstimatorError("no counted steps, cannot form frequency estimates");

  auto entries = archive.snapshot();
  std::unordered_map<std::string, const ArchiveEntry*> by_id;
  for (const auto& [id, e] : entries) by_id.emplace(id, &e);

  std::vector<PosteriorEstimate::Entry> models;
  std::map<std::string, double> inclusion;
  models.reserve(counters.counts.size());
  for (const auto& [id, c] : counters.counts) {
    auto it = by_id.find(id);
    if (it == by_id.end())
      throw EstimatorError("counted model missing from archive: " + id);
    PosteriorEstimate::Entry m;
    m.identity = id;
    m.keys = it->second->keys;
    m.prob = static_cast<double>(c) / static_cast<double>(counters.total);
    m.log_target = it->second->log_target();
    m.log_prior = it->second->log_prior;
    m.log_evidence = it->second->log_evidence;
    m.count = c;
    for (const auto& k : m.keys) inclusion[k] += m.prob;
    models.push_back(std::move(m));
  }
  return sorted_estimate(std::move(models), std::move(inclusion));
}

void write_step_record(std::string& out, const StepRecord& rec) {
  char buf[512];
  auto num = [](char* b, std::size_t cap, double v) {
    if (std::isnan(v))
      std::snprintf(b, cap, "null");
    else if (std::isinf(v))
      std::snprintf(b, cap, v > 0 ? "\"inf\"" : "\"-inf\"");
    else
      std::snprintf(b, cap, "%.12g", v);
  };
  char lt_cur[40], lt_prop[40], lar[40], ls1[40], ls2[40];
  num(lt_cur, sizeof(lt_cur), rec.log_target_current);
  num(lt_prop, sizeof(lt_prop), rec.log_target_proposal);
  num(lar, sizeof(lar), rec.log_accept_ratio);
  num(ls1, sizeof(ls1), rec.log_stage1);
  num(ls2, sizeof(ls2), rec.log_stage2);
  std::snprintf(
      buf, sizeof(buf),
      "{\"step\":%llu,\"kind\":\"%s\",\"lt_cur\":%s,\"lt_prop\":%s,"
      "\"d_bwd\":%d,\"d_fwd\":%d,\"bwd_ones\":%d,\"fwd_ones\":%d,"
      "\"s\":%d,\"q_cap\":%d,\"rho_r\":%.12g,\"log_amh\":%s,"
      "\"log_stage1\":%s,\"log_stage2\":%s,\"feasible\":%s,"
      "\"accepted\":%s,\"reason\":\"%.*s\",\"bwd_evals\":%d}\n",
      static_cast<unsigned long long>(rec.step), kernel_kind_name(rec.kind),
      lt_cur, lt_prop, rec.d_bwd, rec.d_fwd, rec.bwd_center_ones,
      rec.fwd_center_ones, rec.s, rec.max_model_size, rec.swap_prob, lar, ls1,
      ls2, rec.feasible ? "true" : "false", rec.accepted ? "true" : "false",
      static_cast<int>(rec.reason.size()), rec.reason.data(), rec.bwd_evals);
  out += buf;
}

}  // namespace rgmj
