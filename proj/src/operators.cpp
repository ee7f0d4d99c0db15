#include "rgmj/operators.hpp"

#include <algorithm>
#include <cmath>

#include "rgmj/errors.hpp"

namespace rgmj {

const char* op_kind_name(OpKind k) {
  switch (k) {
    case OpKind::Mutation: return "mutation";
    case OpKind::Crossover: return "crossover";
    case OpKind::Modification: return "modification";
    case OpKind::Projection: return "projection";
  }
  return "?";
}

void OperatorConfig::validate() const {
  for (double p : {p_mutation, p_crossover, p_modification, p_projection})
    if (p < 0.0 || p > 1.0)
      throw ConfigError("operator probabilities must lie in [0,1]");
  const double sum = p_mutation + p_crossover + p_modification + p_projection;
  if (std::abs(sum - 1.0) > 1e-12)
    throw ConfigError("operator probabilities must sum to 1, got " +
                      std::to_string(sum));
  if (!(filtration_threshold > 0.0 && filtration_threshold < 1.0))
    throw ConfigError("filtration threshold must lie in (0,1)");
  if (max_depth < 1) throw ConfigError("max feature depth must be >= 1");
  if (max_retries < 1) throw ConfigError("operator retry budget must be >= 1");
}

Population::Population(std::vector<FeaturePtr> feats, int generation)
    : feats_(std::move(feats)), generation_(generation) {
  for (std::size_t i = 0; i < feats_.size(); ++i) {
    if (!feats_[i]) throw std::invalid_argument("null feature in population");
    if (!index_.emplace(feats_[i]->key, static_cast<int>(i)).second)
      throw std::invalid_argument("duplicate feature key in population: " +
                                  feats_[i]->key);
  }
}

std::optional<int> Population::index_of(const std::string& key) const {
  auto it = index_.find(key);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

OpKind draw_operator_kind(const OperatorConfig& cfg, RandomSource& rng) {
  const double u = rng.uniform();
  if (u < cfg.p_mutation) return OpKind::Mutation;
  if (u < cfg.p_mutation + cfg.p_crossover) return OpKind::Crossover;
  if (u < cfg.p_mutation + cfg.p_crossover + cfg.p_modification)
    return OpKind::Modification;
  return OpKind::Projection;
}

namespace {

constexpr double kProjectionWeights[] = {1.0, -1.0, 0.5, -0.5};

std::optional<FeaturePtr> attempt(OpKind kind,
                                  const std::vector<FeaturePtr>& pool,
                                  const std::vector<FeaturePtr>& base,
                                  const OperatorConfig& cfg,
                                  RandomSource& rng) {
  switch (kind) {
    case OpKind::Mutation: {
      if (base.empty()) return std::nullopt;
      std::vector<const FeaturePtr*> fresh;
      for (const auto& b : base) {
        bool in_pool = false;
        for (const auto& p : pool)
          if (p->key == b->key) { in_pool = true; break; }
        if (!in_pool) fresh.push_back(&b);
      }
      if (!fresh.empty())
        return *fresh[rng.uniform_int(fresh.size())];
      return base[rng.uniform_int(base.size())];
    }
    case OpKind::Crossover: {
      if (pool.size() < 2) return std::nullopt;
      const std::size_t i = rng.uniform_int(pool.size());
      std::size_t j = rng.uniform_int(pool.size() - 1);
      if (j >= i) ++j;
      return make_product({pool[i], pool[j]});
    }
    case OpKind::Modification: {
      if (pool.empty() || cfg.nonlinearities.empty()) return std::nullopt;
      const Nonlin g = cfg.nonlinearities[rng.uniform_int(cfg.nonlinearities.size())];
      return make_unary(g, pool[rng.uniform_int(pool.size())]);
    }
    case OpKind::Projection: {
      if (pool.size() < 2 || cfg.nonlinearities.empty()) return std::nullopt;
      const Nonlin g = cfg.nonlinearities[rng.uniform_int(cfg.nonlinearities.size())];
      std::size_t m = 2;
      if (pool.size() >= 3) m += rng.uniform_int(2);
      // sample m distinct pool indices
      std::vector<std::size_t> idx;
      while (idx.size() < m) {
        const std::size_t c = rng.uniform_int(pool.size());
        if (std::find(idx.begin(), idx.end(), c) == idx.end()) idx.push_back(c);
      }
      std::vector<FeaturePtr> terms;
      std::vector<double> w;
      for (std::size_t c : idx) {
        terms.push_back(pool[c]);
        w.push_back(kProjectionWeights[rng.uniform_int(4)]);
      }
      return make_projection(g, std::move(terms), std::move(w));
    }
  }
  return std::nullopt;
}

}  // namespace

std::optional<FeaturePtr> generate_replacement(
    OpKind kind, const std::vector<FeaturePtr>& pool,
    const std::vector<FeaturePtr>& base, const OperatorConfig& cfg,
    RandomSource& rng) {
  for (int attempt_no = 0; attempt_no < cfg.max_retries; ++attempt_no) {
    auto f = attempt(kind, pool, base, cfg, rng);
    if (!f) return std::nullopt;  // structurally impossible, retrying won't help
    if ((*f)->depth <= cfg.max_depth) return f;
  }
  return std::nullopt;
}

FiltrationResult filtration(
    const Population& pop,
    const std::unordered_map<std::string, double>& inclusion_freq,
    double pi_min, const std::unordered_set<std::string>& protected_keys) {
  FiltrationResult out;
  for (const auto& f : pop.features()) {
    auto it = inclusion_freq.find(f->key);
    if (it == inclusion_freq.end())
      throw std::invalid_argument("no inclusion frequency for feature " +
                                  f->key);
    if (it->second >= pi_min || protected_keys.count(f->key))
      out.survivors.push_back(f);
  }
  out.n_removed = pop.size() - static_cast<int>(out.survivors.size());
  return out;
}

std::optional<std::vector<FeaturePtr>> fill_features(
    std::vector<FeaturePtr> seed, int target_size, const OperatorConfig& cfg,
    const std::vector<FeaturePtr>& base, RandomSource& rng,
    const FeatureValidator& validator) {
  std::unordered_set<std::string> keys;
  for (const auto& f : seed) keys.insert(f->key);
  if (static_cast<int>(keys.size()) != static_cast<int>(seed.size()))
    throw std::invalid_argument("fill_features seed has duplicate keys");

  while (static_cast<int>(seed.size()) < target_size) {
    bool added = false;
    for (int attempt_no = 0; attempt_no < cfg.max_retries; ++attempt_no) {
      const OpKind kind = draw_operator_kind(cfg, rng);
      auto f = generate_replacement(kind, seed, base, cfg, rng);
      if (!f) continue;
      if (keys.count((*f)->key)) continue;
      if (validator && !validator(*f)) continue;
      keys.insert((*f)->key);
      seed.push_back(std::move(*f));
      added = true;
      break;
    }
    if (!added) return std::nullopt;
  }
  return seed;
}

std::optional<Population> next_population(
    const Population& current, const std::vector<FeaturePtr>& protected_feats,
    const std::unordered_map<std::string, double>& inclusion_freq,
    const OperatorConfig& cfg, const std::vector<FeaturePtr>& base,
    RandomSource& rng, const FeatureValidator& validator) {
  std::unordered_set<std::string> protected_keys;
  for (const auto& f : protected_feats) protected_keys.insert(f->key);

  auto filt = filtration(current, inclusion_freq, cfg.filtration_threshold,
                         protected_keys);
  // Protected features not present in the current population are prepended;
  // normally the protected set is a subset of the population.
  std::vector<FeaturePtr> seed;
  for (const auto& f : protected_feats)
    if (!std::any_of(filt.survivors.begin(), filt.survivors.end(),
                     [&](const FeaturePtr& s) { return s->key == f->key; }))
      seed.push_back(f);
  seed.insert(seed.end(), filt.survivors.begin(), filt.survivors.end());

  auto filled =
      fill_features(std::move(seed), current.size(), cfg, base, rng, validator);
  if (!filled) return std::nullopt;
  return Population(std::move(*filled), current.generation() + 1);
}

}  // namespace rgmj
