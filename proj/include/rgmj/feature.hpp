#pragma once

#include <Eigen/Dense>

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace rgmj {

// Named unary nonlinearities. All of them are total on the reals: log and
// sqrt act on |x| (log with a +1 shift), cbrt is the signed real cube root.
enum class Nonlin { Cbrt, Square, Cube, Log1pAbs, SqrtAbs, Sigmoid };

const char* nonlin_name(Nonlin g);
std::optional<Nonlin> nonlin_from_name(std::string_view name);
double apply_nonlin(Nonlin g, double x);

enum class NodeKind { Leaf, Product, Unary, Projection };

struct Feature;
using FeaturePtr = std::shared_ptr<const Feature>;

// An immutable expression tree over input covariates.
//
// Products are kept in canonical form: nested products are flattened into a
// single n-ary node and the children sorted by key, so any commutative
// arrangement of the same factors shares one canonical key. Repeated factors
// are allowed (X*X arises from crossing a feature with one of its own
// factors). No further algebraic rewriting is done.
struct Feature {
  NodeKind kind = NodeKind::Leaf;
  int leaf_index = -1;              // Leaf: column in the data matrix
  std::string leaf_name;            // Leaf
  Nonlin fn = Nonlin::Cbrt;         // Unary / Projection
  std::vector<FeaturePtr> children; // Product: >= 2, Unary: 1, Projection: 2..3
  std::vector<double> weights;      // Projection, aligned with children
  int depth = 0;                    // leaves are 0
  int node_count = 1;               // tree size, used by the complexity prior
  std::string key;                  // canonical key
};

FeaturePtr make_leaf(int index, std::string name);
FeaturePtr make_product(std::vector<FeaturePtr> parts);
FeaturePtr make_unary(Nonlin fn, FeaturePtr arg);
FeaturePtr make_projection(Nonlin fn, std::vector<FeaturePtr> parts,
                           std::vector<double> weights);

inline const std::string& canonical_key(const Feature& f) { return f.key; }
inline const std::string& canonical_key(const FeaturePtr& f) { return f->key; }

// Materialize the feature on a data matrix (rows = observations, columns =
// input covariates). Returns nullopt when the result has non-finite entries;
// callers discard such features.
std::optional<Eigen::VectorXd> evaluate(const Feature& f,
                                        const Eigen::MatrixXd& X);

// One leaf feature per input column.
std::vector<FeaturePtr> leaf_features(const std::vector<std::string>& names);

}  // namespace rgmj
