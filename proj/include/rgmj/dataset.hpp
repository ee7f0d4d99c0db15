#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace rgmj {

enum class Family { Gaussian, Binomial };

const char* family_name(Family f);
std::optional<Family> family_from_name(std::string_view name);

struct Dataset {
  Eigen::MatrixXd X;               // n x q covariates
  Eigen::VectorXd y;               // response, length n
  Family family = Family::Gaussian;
  std::vector<std::string> names;  // q column names

  int n() const { return static_cast<int>(X.rows()); }
  int q() const { return static_cast<int>(X.cols()); }

  // No missing/non-finite values, unique sane column names, n >= 3,
  // binomial responses in {0,1}. Throws LoadError.
  void validate() const;
};

// Parse a headered CSV, pulling `response` out as y. Errors carry 1-based
// row/column coordinates.
Dataset load_csv(const std::string& path, const std::string& response,
                 Family family);

// Inverse of load_csv: covariates plus the response as the last column.
void write_csv(const Dataset& d, const std::string& response_name,
               const std::string& path);

}  // namespace rgmj
