#include "rgmj/feature.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace rgmj {

const char* nonlin_name(Nonlin g) {
  switch (g) {
    case Nonlin::Cbrt: return "cbrt";
    case Nonlin::Square: return "square";
    case Nonlin::Cube: return "cube";
    case Nonlin::Log1pAbs: return "log1pabs";
    case Nonlin::SqrtAbs: return "sqrtabs";
    case Nonlin::Sigmoid: return "sigmoid";
  }
  return "?";
}

std::optional<Nonlin> nonlin_from_name(std::string_view name) {
  for (Nonlin g : {Nonlin::Cbrt, Nonlin::Square, Nonlin::Cube,
                   Nonlin::Log1pAbs, Nonlin::SqrtAbs, Nonlin::Sigmoid}) {
    if (name == nonlin_name(g)) return g;
  }
  return std::nullopt;
}

double apply_nonlin(Nonlin g, double x) {
  switch (g) {
    case Nonlin::Cbrt: return std::cbrt(x);
    case Nonlin::Square: return x * x;
    case Nonlin::Cube: return x * x * x;
    case Nonlin::Log1pAbs: return std::log1p(std::abs(x));
    case Nonlin::SqrtAbs: return std::sqrt(std::abs(x));
    case Nonlin::Sigmoid: return 1.0 / (1.0 + std::exp(-x));
  }
  return x;
}

namespace {

std::string format_weight(double w) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.12g", w);
  return buf;
}

bool key_less(const FeaturePtr& a, const FeaturePtr& b) {
  return a->key < b->key;
}

}  // namespace

FeaturePtr make_leaf(int index, std::string name) {
  if (index < 0) throw std::invalid_argument("leaf index must be non-negative");
  if (name.empty()) throw std::invalid_argument("leaf name must be non-empty");
  auto f = std::make_shared<Feature>();
  f->kind = NodeKind::Leaf;
  f->leaf_index = index;
  f->leaf_name = name;
  f->depth = 0;
  f->node_count = 1;
  f->key = std::move(name);
  return f;
}

FeaturePtr make_product(std::vector<FeaturePtr> parts) {
  std::vector<FeaturePtr> factors;
  for (auto& p : parts) {
    if (!p) throw std::invalid_argument("null feature in product");
    if (p->kind == NodeKind::Product) {
      factors.insert(factors.end(), p->children.begin(), p->children.end());
    } else {
      factors.push_back(p);
    }
  }
  if (factors.size() < 2) throw std::invalid_argument("product needs >= 2 factors");
  std::sort(factors.begin(), factors.end(), key_less);

  auto f = std::make_shared<Feature>();
  f->kind = NodeKind::Product;
  f->children = std::move(factors);
  int depth = 0, nodes = 1;
  std::string key;
  for (std::size_t i = 0; i < f->children.size(); ++i) {
    const auto& c = f->children[i];
    depth = std::max(depth, c->depth);
    nodes += c->node_count;
    if (i) key += '*';
    key += c->key;
  }
  f->depth = depth + 1;
  f->node_count = nodes;
  f->key = std::move(key);
  return f;
}

FeaturePtr make_unary(Nonlin fn, FeaturePtr arg) {
  if (!arg) throw std::invalid_argument("null feature in unary node");
  auto f = std::make_shared<Feature>();
  f->kind = NodeKind::Unary;
  f->fn = fn;
  f->depth = arg->depth + 1;
  f->node_count = arg->node_count + 1;
  f->key = std::string(nonlin_name(fn)) + "(" + arg->key + ")";
  f->children.push_back(std::move(arg));
  return f;
}

FeaturePtr make_projection(Nonlin fn, std::vector<FeaturePtr> parts,
                           std::vector<double> weights) {
  if (parts.size() != weights.size())
    throw std::invalid_argument("projection weights must align with terms");
  if (parts.size() < 2 || parts.size() > 3)
    throw std::invalid_argument("projection takes 2 or 3 terms");
  std::vector<std::size_t> order(parts.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (parts[a]->key != parts[b]->key) return parts[a]->key < parts[b]->key;
    return weights[a] < weights[b];
  });

  auto f = std::make_shared<Feature>();
  f->kind = NodeKind::Projection;
  f->fn = fn;
  int depth = 0, nodes = 1;
  std::string body;
  for (std::size_t r = 0; r < order.size(); ++r) {
    const auto& c = parts[order[r]];
    const double w = weights[order[r]];
    depth = std::max(depth, c->depth);
    nodes += c->node_count;
    if (r == 0) {
      body += format_weight(w);
    } else {
      body += (w < 0) ? "-" : "+";
      body += format_weight(std::abs(w));
    }
    body += "*";
    body += c->key;
    f->children.push_back(c);
    f->weights.push_back(w);
  }
  f->depth = depth + 1;
  f->node_count = nodes;
  f->key = std::string(nonlin_name(fn)) + "(" + body + ")";
  return f;
}

namespace {

Eigen::VectorXd eval_rec(const Feature& f, const Eigen::MatrixXd& X) {
  switch (f.kind) {
    case NodeKind::Leaf:
      if (f.leaf_index >= X.cols())
        throw std::out_of_range("leaf index " + std::to_string(f.leaf_index) +
                                " out of range for " +
                                std::to_string(X.cols()) + " columns");
      return X.col(f.leaf_index);
    case NodeKind::Product: {
      Eigen::VectorXd v = eval_rec(*f.children[0], X);
      for (std::size_t i = 1; i < f.children.size(); ++i)
        v.array() *= eval_rec(*f.children[i], X).array();
      return v;
    }
    case NodeKind::Unary: {
      Eigen::VectorXd v = eval_rec(*f.children[0], X);
      for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = apply_nonlin(f.fn, v[i]);
      return v;
    }
    case NodeKind::Projection: {
      Eigen::VectorXd acc = Eigen::VectorXd::Zero(X.rows());
      for (std::size_t i = 0; i < f.children.size(); ++i)
        acc += f.weights[i] * eval_rec(*f.children[i], X);
      for (Eigen::Index i = 0; i < acc.size(); ++i)
        acc[i] = apply_nonlin(f.fn, acc[i]);
      return acc;
    }
  }
  throw std::logic_error("unreachable feature kind");
}

}  // namespace

std::optional<Eigen::VectorXd> evaluate(const Feature& f,
                                        const Eigen::MatrixXd& X) {
  Eigen::VectorXd v = eval_rec(f, X);
  if (!v.allFinite()) return std::nullopt;
  return v;
}

std::vector<FeaturePtr> leaf_features(const std::vector<std::string>& names) {
  std::vector<FeaturePtr> out;
  out.reserve(names.size());
  for (std::size_t i = 0; i < names.size(); ++i)
    out.push_back(make_leaf(static_cast<int>(i), names[i]));
  return out;
}

}  // namespace rgmj
