#include "rgmj/runner.hpp"

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <thread>

#include "rgmj/errors.hpp"

namespace rgmj {

const char* estimator_name(EstimatorChoice e) {
  switch (e) {
    case EstimatorChoice::Renormalized: return "renorm";
    case EstimatorChoice::Frequency: return "freq";
    case EstimatorChoice::Both: return "both";
  }
  return "?";
}

std::optional<EstimatorChoice> estimator_from_name(std::string_view name) {
  if (name == "renorm") return EstimatorChoice::Renormalized;
  if (name == "freq") return EstimatorChoice::Frequency;
  if (name == "both") return EstimatorChoice::Both;
  return std::nullopt;
}

void RunConfig::validate() const {
  kernel_config().validate();
  if (lanes < 1) throw ConfigError("lane count must be >= 1");
  if (iterations < 1) throw ConfigError("iterations must be >= 1");
  if (!(burn_in_fraction >= 0.0 && burn_in_fraction < 1.0))
    throw ConfigError("burn-in fraction must lie in [0,1)");
  if (top_models < 1) throw ConfigError("top-models must be >= 1");
  if (kernel == KernelKind::GmjmcmcBaseline &&
      estimator != EstimatorChoice::Renormalized)
    throw ConfigError(
        "frequency estimates are not valid for gmjmcmc_baseline; use "
        "--estimator renorm");
}

KernelConfig RunConfig::kernel_config() const {
  KernelConfig k;
  k.kind = kernel;
  k.pop_size = pop_size;
  k.max_model_size = max_model_size;
  k.ops = ops;
  k.local = local;
  k.inference = inference;
  k.baseline_pop_period = baseline_pop_period;
  k.fix_population = fix_population;
  return k;
}

void ensure_directory(const std::string& path) {
  std::error_code ec;
  std::filesystem::create_directories(path, ec);
  if (ec) throw LoadError("cannot create directory '" + path + "'");
}

namespace {

struct LaneOutput {
  LaneSummary summary;
  std::unique_ptr<ModelArchive> archive;
  FrequencyCounters counters;
};

LaneOutput run_lane(const RunConfig& cfg, const Dataset& data, int lane) {
  LaneOutput out;
  out.archive = std::make_unique<ModelArchive>();
  out.summary.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(lane));
  try {
    Mt19937Source rng(out.summary.seed);
    auto base = leaf_features(data.names);
    FeatureValidator validator = [&](const FeaturePtr& f) {
      return evaluate(*f, data.X).has_value();
    };
    Population init =
        make_initial_population(base, cfg.pop_size, cfg.ops, rng, validator);

    Chain chain(data, cfg.kernel_config(), base, std::move(init), Mask{0},
                derive_seed(out.summary.seed, 0xC0FFEE), out.archive.get());

    std::ofstream log_file;
    std::string log_buf;
    if (cfg.write_step_log && !cfg.out_dir.empty()) {
      char name[64];
      std::snprintf(name, sizeof(name), "steps_lane%03d.ndjson", lane);
      const std::string path = cfg.out_dir + "/" + name;
      log_file.open(path);
      if (!log_file) throw LoadError("cannot write step log '" + path + "'");
      chain.set_step_sink([&](const StepRecord& rec) {
        log_buf.clear();
        write_step_record(log_buf, rec);
        log_file << log_buf;
      });
    }

    const auto burn =
        static_cast<std::uint64_t>(cfg.burn_in_fraction *
                                   static_cast<double>(cfg.iterations));
    for (std::uint64_t i = 0; i < cfg.iterations; ++i) {
      chain.set_counting(i >= burn);
      chain.step();
    }

    out.counters = chain.counters();
    out.summary.steps = chain.steps_taken();
    out.summary.backward_target_requests = chain.backward_target_requests();
    out.summary.infeasible_rejections = chain.infeasible_rejections();
    out.summary.final_identity = chain.current_identity();
  } catch (const std::exception& e) {
    out.summary.failed = true;
    out.summary.error = e.what();
  }
  return out;
}

}  // namespace

RunResult run_sampler(const RunConfig& cfg, const Dataset& data) {
  cfg.validate();
  data.validate();
  if (cfg.write_step_log && !cfg.out_dir.empty()) ensure_directory(cfg.out_dir);

  std::vector<LaneOutput> outputs(cfg.lanes);
  const unsigned workers =
      std::min<unsigned>(std::max(1u, std::thread::hardware_concurrency()),
                         static_cast<unsigned>(cfg.lanes));
  std::atomic<int> next{0};
  auto worker = [&]() {
    for (;;) {
      const int lane = next.fetch_add(1);
      if (lane >= cfg.lanes) return;
      outputs[lane] = run_lane(cfg, data, lane);
    }
  };
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  RunResult res;
  res.archive = std::make_unique<ModelArchive>();
  for (auto& lane : outputs) {
    res.lane_summaries.push_back(lane.summary);
    if (lane.summary.failed) {
      res.degraded = true;
      continue;
    }
    res.archive->merge_from(*lane.archive);
    res.counters.add(lane.counters);
  }

  const bool all_failed = res.archive->size() == 0;
  if (!all_failed) {
    if (cfg.estimator != EstimatorChoice::Frequency) {
      res.renormalized = estimate_renormalized(*res.archive);
      res.has_renormalized = true;
    }
    if (cfg.estimator != EstimatorChoice::Renormalized &&
        res.counters.total > 0) {
      res.frequency =
          estimate_frequency(res.counters, *res.archive, cfg.kernel);
      res.has_frequency = true;
    }
  }
  return res;
}

namespace {

std::string fmt_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

void write_models_csv(const RunResult& res, const RunConfig& cfg,
                      const std::string& path) {
  std::ofstream out(path);
  if (!out) throw LoadError("cannot write '" + path + "'");
  out << "model,size,log_prior,log_evidence,log_target,renorm_prob,freq_prob,"
         "visits\n";

  std::unordered_map<std::string, double> freq;
  if (res.has_frequency)
    for (const auto& m : res.frequency.models) freq[m.identity] = m.prob;

  const auto& source =
      res.has_renormalized ? res.renormalized.models : res.frequency.models;
  int written = 0;
  for (const auto& m : source) {
    if (written++ >= cfg.top_models) break;
    out << (m.identity.empty() ? "(null)" : m.identity) << ','
        << m.keys.size() << ',' << fmt_g(m.log_prior) << ','
        << fmt_g(m.log_evidence) << ',' << fmt_g(m.log_target) << ',';
    out << (res.has_renormalized ? fmt_g(m.prob) : std::string()) << ',';
    if (res.has_frequency) {
      auto it = freq.find(m.identity);
      out << fmt_g(it == freq.end() ? 0.0 : it->second);
    }
    out << ',' << m.count << '\n';
  }
}

void write_inclusions_csv(const RunResult& res, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw LoadError("cannot write '" + path + "'");
  out << "feature,renorm_prob,freq_prob\n";

  std::map<std::string, std::pair<double, double>> rows;
  if (res.has_renormalized)
    for (const auto& [k, p] : res.renormalized.inclusions) rows[k].first = p;
  if (res.has_frequency)
    for (const auto& [k, p] : res.frequency.inclusions) rows[k].second = p;

  std::vector<std::pair<std::string, std::pair<double, double>>> sorted(
      rows.begin(), rows.end());
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
    const double pa = std::max(a.second.first, a.second.second);
    const double pb = std::max(b.second.first, b.second.second);
    if (pa != pb) return pa > pb;
    return a.first < b.first;
  });
  for (const auto& [k, pr] : sorted) {
    out << k << ',';
    if (res.has_renormalized) out << fmt_g(pr.first);
    out << ',';
    if (res.has_frequency) out << fmt_g(pr.second);
    out << '\n';
  }
}

}  // namespace

std::string manifest_text(const RunConfig& cfg) {
  std::string s;
  auto kv = [&](const std::string& k, const std::string& v) {
    s += k + "=" + v + "\n";
  };
  kv("data", cfg.data_path);
  kv("response", cfg.response);
  kv("family", family_name(cfg.family));
  kv("out", cfg.out_dir);
  kv("pop-size", std::to_string(cfg.pop_size));
  kv("max-model-size", std::to_string(cfg.max_model_size));
  kv("iterations", std::to_string(cfg.iterations));
  kv("burn-in", fmt_g(cfg.burn_in_fraction));
  kv("kernel", kernel_kind_name(cfg.kernel));
  kv("estimator", estimator_name(cfg.estimator));
  kv("threads", std::to_string(cfg.lanes));
  kv("seed", std::to_string(cfg.seed));
  kv("p-mutation", fmt_g(cfg.ops.p_mutation));
  kv("p-crossover", fmt_g(cfg.ops.p_crossover));
  kv("p-modification", fmt_g(cfg.ops.p_modification));
  kv("p-projection", fmt_g(cfg.ops.p_projection));
  std::string nl;
  for (std::size_t i = 0; i < cfg.ops.nonlinearities.size(); ++i) {
    if (i) nl += ",";
    nl += nonlin_name(cfg.ops.nonlinearities[i]);
  }
  kv("nonlinearities", nl.empty() ? "none" : nl);
  kv("pi-min", fmt_g(cfg.ops.filtration_threshold));
  kv("max-depth", std::to_string(cfg.ops.max_depth));
  kv("operator-retries", std::to_string(cfg.ops.max_retries));
  kv("rho-jump", fmt_g(cfg.local.jump_prob));
  kv("k-local", std::to_string(cfg.local.local_steps));
  kv("local-move", move_name(cfg.local.move));
  kv("rho-r", fmt_g(cfg.local.swap_prob));
  kv("g", fmt_g(cfg.inference.evidence.g));
  kv("gamma", fmt_g(cfg.inference.prior.gamma));
  kv("baseline-pop-period", std::to_string(cfg.baseline_pop_period));
  kv("fix-population", cfg.fix_population ? "true" : "false");
  kv("step-log", cfg.write_step_log ? "true" : "false");
  kv("top-models", std::to_string(cfg.top_models));
  return s;
}

void write_run_outputs(const RunResult& res, const RunConfig& cfg) {
  ensure_directory(cfg.out_dir);
  write_models_csv(res, cfg, cfg.out_dir + "/models.csv");
  write_inclusions_csv(res, cfg.out_dir + "/inclusions.csv");

  std::ofstream mf(cfg.out_dir + "/manifest.ini");
  if (!mf) throw LoadError("cannot write manifest");
  mf << manifest_text(cfg);
  mf << "# lane summaries\n";
  for (std::size_t i = 0; i < res.lane_summaries.size(); ++i) {
    const auto& l = res.lane_summaries[i];
    mf << "# lane " << i << ": seed=" << l.seed
       << " steps=" << l.steps
       << " backward_requests=" << l.backward_target_requests
       << " infeasible=" << l.infeasible_rejections
       << (l.failed ? " FAILED: " + l.error : std::string()) << "\n";
  }
  if (res.degraded) mf << "# degraded-run=true\n";
}

}  // namespace rgmj
