#include "rgmj/enumerate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "rgmj/errors.hpp"

namespace rgmj {

double model_space_size(int q, int max_model_size) {
  double total = 1.0;  // null model
  double c = 1.0;
  for (int k = 1; k <= std::min(q, max_model_size); ++k) {
    c *= static_cast<double>(q - k + 1) / k;
    total += c;
  }
  return total;
}

EnumeratedPosterior enumerate_posterior(const std::vector<FeaturePtr>& features,
                                        int max_model_size, const Dataset& data,
                                        const InferenceConfig& cfg,
                                        ModelArchive* archive) {
  const int q = static_cast<int>(features.size());
  if (q < 1) throw EnumerationError("need at least one feature");
  const double count = model_space_size(q, max_model_size);
  if (count > 1e6) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.0f", count);
    throw EnumerationError("model space has " + std::string(buf) +
                           " models, refusing to enumerate beyond 1e6");
  }

  // Work in key-sorted feature order so each model's keys come out sorted.
  std::vector<FeaturePtr> sorted(features);
  std::sort(sorted.begin(), sorted.end(),
            [](const FeaturePtr& a, const FeaturePtr& b) {
              return a->key < b->key;
            });
  for (int i = 1; i < q; ++i)
    if (sorted[i]->key == sorted[i - 1]->key)
      throw EnumerationError("duplicate feature key: " + sorted[i]->key);

  std::vector<Eigen::VectorXd> cols(q);
  for (int i = 0; i < q; ++i) {
    auto col = evaluate(*sorted[i], data.X);
    if (!col)
      throw EnumerationError("feature " + sorted[i]->key +
                             " is non-finite on this dataset");
    cols[i] = std::move(*col);
  }

  ModelArchive local;
  ModelArchive* arch = archive ? archive : &local;
  Evaluator ev(data, cfg, arch);

  EnumeratedPosterior out;
  out.q = q;
  out.max_model_size = max_model_size;

  std::vector<int> idx;
  std::vector<FeaturePtr> feats;
  std::vector<const Eigen::VectorXd*> fcols;
  auto emit = [&]() {
    feats.clear();
    fcols.clear();
    std::vector<std::string> keys;
    for (int i : idx) {
      feats.push_back(sorted[i]);
      fcols.push_back(&cols[i]);
      keys.push_back(sorted[i]->key);
    }
    EnumeratedPosterior::Row row;
    row.size = static_cast<int>(idx.size());
    row.log_target = ev.log_target(feats, fcols);
    row.identity = model_identity(keys);
    row.keys = std::move(keys);
    out.rows.push_back(std::move(row));
  };

  // All index combinations of size 0..max_model_size, lexicographic.
  emit();  // null model
  const int kmax = std::min(q, max_model_size);
  for (int k = 1; k <= kmax; ++k) {
    idx.assign(k, 0);
    for (int i = 0; i < k; ++i) idx[i] = i;
    while (true) {
      emit();
      int pos = k - 1;
      while (pos >= 0 && idx[pos] == q - k + pos) --pos;
      if (pos < 0) break;
      ++idx[pos];
      for (int i = pos + 1; i < k; ++i) idx[i] = idx[i - 1] + 1;
    }
  }

  double max_lt = -std::numeric_limits<double>::infinity();
  for (const auto& r : out.rows) max_lt = std::max(max_lt, r.log_target);
  if (!(max_lt > -std::numeric_limits<double>::infinity()))
    throw EnumerationError("no model has a finite posterior");
  double norm = 0.0, carry = 0.0;
  for (const auto& r : out.rows) {
    const double y = std::exp(r.log_target - max_lt) - carry;
    const double t = norm + y;
    carry = (t - norm) - y;
    norm = t;
  }
  for (auto& r : out.rows) r.prob = std::exp(r.log_target - max_lt) / norm;
  out.log_norm = max_lt + std::log(norm);

  std::sort(out.rows.begin(), out.rows.end(),
            [](const auto& a, const auto& b) {
              if (a.size != b.size && (a.size == 0 || b.size == 0))
                return a.size < b.size;  // null model first
              return a.identity < b.identity;
            });
  return out;
}

void write_enumerated_csv(const EnumeratedPosterior& post,
                          const std::string& path) {
  std::ofstream out(path);
  if (!out) throw LoadError("cannot write '" + path + "'");
  out << "model,size,log_target,prob\n";
  char buf[80];
  for (const auto& r : post.rows) {
    out << (r.identity.empty() ? "(null)" : r.identity) << ',' << r.size << ',';
    std::snprintf(buf, sizeof(buf), "%.12g,%.12g", r.log_target, r.prob);
    out << buf << '\n';
  }
}

}  // namespace rgmj
