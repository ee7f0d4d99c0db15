#include "rgmj/dataset.hpp"

#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "rgmj/errors.hpp"

namespace rgmj {

const char* family_name(Family f) {
  return f == Family::Gaussian ? "gaussian" : "binomial";
}

std::optional<Family> family_from_name(std::string_view name) {
  if (name == "gaussian") return Family::Gaussian;
  if (name == "binomial") return Family::Binomial;
  return std::nullopt;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

double parse_cell(const std::string& cell, std::size_t row, std::size_t col,
                  const std::string& col_name) {
  const std::string t = trim(cell);
  if (t.empty())
    throw LoadError("missing value at row " + std::to_string(row) +
                    ", column " + std::to_string(col) + " (" + col_name + ")");
  char* end = nullptr;
  const double v = std::strtod(t.c_str(), &end);
  if (end != t.c_str() + t.size())
    throw LoadError("non-numeric cell '" + t + "' at row " +
                    std::to_string(row) + ", column " + std::to_string(col) +
                    " (" + col_name + ")");
  return v;
}

}  // namespace

void Dataset::validate() const {
  if (n() < 3) throw LoadError("need at least 3 observations, got " +
                               std::to_string(n()));
  if (q() < 1) throw LoadError("need at least one covariate column");
  if (static_cast<int>(names.size()) != q())
    throw LoadError("column name count does not match covariate count");
  std::set<std::string> seen;
  for (const auto& nm : names) {
    if (nm.empty()) throw LoadError("empty column name");
    if (nm.find('|') != std::string::npos || nm.find(',') != std::string::npos)
      throw LoadError("column name '" + nm + "' contains a reserved character");
    if (!seen.insert(nm).second)
      throw LoadError("duplicate column name '" + nm + "'");
  }
  if (!X.allFinite()) throw LoadError("covariate matrix has non-finite values");
  if (!y.allFinite()) throw LoadError("response has non-finite values");
  if (family == Family::Binomial) {
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      if (y[i] != 0.0 && y[i] != 1.0)
        throw LoadError("binomial response must be 0/1, got " +
                        std::to_string(y[i]) + " at row " +
                        std::to_string(i + 1));
    }
  }
}

Dataset load_csv(const std::string& path, const std::string& response,
                 Family family) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open '" + path + "'");

  std::string line;
  if (!std::getline(in, line)) throw LoadError("'" + path + "' is empty");
  std::vector<std::string> header = split_line(line);
  for (auto& h : header) h = trim(h);

  int resp_col = -1;
  for (std::size_t j = 0; j < header.size(); ++j)
    if (header[j] == response) resp_col = static_cast<int>(j);
  if (resp_col < 0)
    throw LoadError("response column '" + response + "' not found in '" +
                    path + "'");

  std::vector<std::vector<double>> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto cells = split_line(line);
    if (cells.size() != header.size())
      throw LoadError("row " + std::to_string(lineno) + " has " +
                      std::to_string(cells.size()) + " cells, expected " +
                      std::to_string(header.size()));
    std::vector<double> vals(cells.size());
    for (std::size_t j = 0; j < cells.size(); ++j)
      vals[j] = parse_cell(cells[j], lineno, j + 1, header[j]);
    rows.push_back(std::move(vals));
  }

  Dataset d;
  d.family = family;
  const std::size_t n = rows.size();
  const std::size_t q = header.size() - 1;
  d.X.resize(n, q);
  d.y.resize(n);
  for (std::size_t j = 0, c = 0; j < header.size(); ++j)
    if (static_cast<int>(j) != resp_col) d.names.push_back(header[j]), ++c;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t c = 0;
    for (std::size_t j = 0; j < header.size(); ++j) {
      if (static_cast<int>(j) == resp_col)
        d.y[i] = rows[i][j];
      else
        d.X(i, c++) = rows[i][j];
    }
  }
  d.validate();
  return d;
}

void write_csv(const Dataset& d, const std::string& response_name,
               const std::string& path) {
  std::ofstream out(path);
  if (!out) throw LoadError("cannot write '" + path + "'");
  for (const auto& nm : d.names) out << nm << ',';
  out << response_name << '\n';
  char buf[40];
  for (int i = 0; i < d.n(); ++i) {
    for (int j = 0; j < d.q(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.12g", d.X(i, j));
      out << buf << ',';
    }
    std::snprintf(buf, sizeof(buf), "%.12g", d.y[i]);
    out << buf << '\n';
  }
}

}  // namespace rgmj
