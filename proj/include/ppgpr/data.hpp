// Copyright 2026 The ppgpr Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Dataset ingestion: CSV tables, per-column standardisation, a synthetic
// sine benchmark, and seeded train/test and per-agent splits.

#include <Eigen/Dense>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <istream>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ppgpr/gpr.hpp"

namespace ppgpr {

struct Table {
  std::vector<std::string> features;
  std::vector<std::string> targets;
  Eigen::MatrixXd X;  // rows × features
  Eigen::MatrixXd Y;  // rows × targets

  std::size_t rows() const { return static_cast<std::size_t>(X.rows()); }

  Table select(std::span<const std::size_t> rows) const {
    Table out{features, targets, Eigen::MatrixXd(rows.size(), X.cols()),
              Eigen::MatrixXd(rows.size(), Y.cols())};
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const auto src = static_cast<Eigen::Index>(rows[r]);
      out.X.row(static_cast<Eigen::Index>(r)) = X.row(src);
      out.Y.row(static_cast<Eigen::Index>(r)) = Y.row(src);
    }
    return out;
  }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    cells.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

}  // namespace detail

/// Header row naming the columns, then one comma-separated row of floats per
/// sample. `target_columns` picks the outputs by name; empty means the last
/// column. Every other column is a feature.
inline Table read_csv(std::istream& in,
                      std::span<const std::string> target_columns = {}) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (header.empty() && std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    for (auto cell : detail::split_commas(line)) header.emplace_back(cell);
  }
  if (header.size() < 2) {
    throw std::invalid_argument("CSV needs a header with at least two columns");
  }
  std::vector<bool> is_target(header.size(), false);
  if (target_columns.empty()) {
    is_target.back() = true;
  } else {
    for (const std::string& name : target_columns) {
      const auto it = std::find(header.begin(), header.end(), name);
      if (it == header.end()) {
        throw std::invalid_argument("target column '" + name + "' not in header");
      }
      is_target[static_cast<std::size_t>(it - header.begin())] = true;
    }
  }
  Table t;
  for (std::size_t c = 0; c < header.size(); ++c) {
    (is_target[c] ? t.targets : t.features).push_back(header[c]);
  }
  if (t.features.empty()) throw std::invalid_argument("CSV has no feature columns");

  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split_commas(line);
    if (cells.size() != header.size()) {
      throw std::invalid_argument("line " + std::to_string(line_no) + ": expected " +
                                  std::to_string(header.size()) + " fields, got " +
                                  std::to_string(cells.size()));
    }
    std::vector<double> row(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const auto cell = cells[c];
      const auto [ptr, ec] =
          std::from_chars(cell.data(), cell.data() + cell.size(), row[c]);
      if (ec != std::errc() || ptr != cell.data() + cell.size() ||
          !std::isfinite(row[c])) {
        throw std::invalid_argument("line " + std::to_string(line_no) +
                                    ", column '" + header[c] +
                                    "': not a finite number: '" +
                                    std::string(cell) + "'");
      }
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::invalid_argument("CSV has no data rows");
  const auto n = static_cast<Eigen::Index>(rows.size());
  t.X.resize(n, static_cast<Eigen::Index>(t.features.size()));
  t.Y.resize(n, static_cast<Eigen::Index>(t.targets.size()));
  for (Eigen::Index r = 0; r < n; ++r) {
    Eigen::Index fx = 0, fy = 0;
    for (std::size_t c = 0; c < header.size(); ++c) {
      const double v = rows[static_cast<std::size_t>(r)][c];
      if (is_target[c]) {
        t.Y(r, fy++) = v;
      } else {
        t.X(r, fx++) = v;
      }
    }
  }
  return t;
}

inline Table load_csv(const std::string& path,
                      std::span<const std::string> target_columns = {}) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open dataset " + path);
  return read_csv(in, target_columns);
}

/// Per-column (v - mean) / std. Constant columns keep scale 1.
class Normalizer {
 public:
  static Normalizer fit(const Eigen::MatrixXd& m) {
    Normalizer n;
    n.mean_ = m.colwise().mean();
    n.scale_ = Eigen::RowVectorXd::Ones(m.cols());
    if (m.rows() > 1) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        const double var = (m.col(c).array() - n.mean_[c]).square().sum() /
                           static_cast<double>(m.rows() - 1);
        if (var > 0.0) n.scale_[c] = std::sqrt(var);
      }
    }
    return n;
  }

  static Normalizer identity(Eigen::Index columns) {
    Normalizer n;
    n.mean_ = Eigen::RowVectorXd::Zero(columns);
    n.scale_ = Eigen::RowVectorXd::Ones(columns);
    return n;
  }

  Eigen::MatrixXd apply(const Eigen::MatrixXd& m) const {
    return (m.rowwise() - mean_).array().rowwise() / scale_.array();
  }

  Eigen::MatrixXd invert(const Eigen::MatrixXd& m) const {
    return (m.array().rowwise() * scale_.array()).matrix().rowwise() + mean_;
  }

  const Eigen::RowVectorXd& mean() const { return mean_; }
  const Eigen::RowVectorXd& scale() const { return scale_; }

 private:
  Eigen::RowVectorXd mean_;
  Eigen::RowVectorXd scale_;
};

/// y = sin(frequency · x) + N(0, noise_std²), x ~ U[x_min, x_max].
struct SineSpec {
  std::size_t samples = 200;
  double noise_std = 0.1;
  double x_min = -5.0;
  double x_max = 5.0;
  double frequency = 1.0;
};

inline Table synthesize_sine(const SineSpec& spec, std::uint64_t seed) {
  if (spec.samples == 0) throw std::invalid_argument("no samples requested");
  if (!(spec.x_max > spec.x_min)) throw std::invalid_argument("empty input range");
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> ux(spec.x_min, spec.x_max);
  std::normal_distribution<double> noise(0.0, spec.noise_std);
  Table t{{"x"}, {"y"}, Eigen::MatrixXd(spec.samples, 1),
          Eigen::MatrixXd(spec.samples, 1)};
  for (Eigen::Index r = 0; r < t.X.rows(); ++r) {
    const double x = ux(gen);
    t.X(r, 0) = x;
    t.Y(r, 0) = std::sin(spec.frequency * x) + (spec.noise_std > 0 ? noise(gen) : 0.0);
  }
  return t;
}

/// Evenly spaced 1-D inputs on [lo, hi].
inline Eigen::MatrixXd grid_points(std::size_t n, double lo, double hi) {
  return Eigen::VectorXd::LinSpaced(static_cast<Eigen::Index>(n), lo, hi);
}

/// Shuffled rows dealt round-robin, so agent sizes differ by at most one.
inline std::vector<std::vector<std::size_t>> partition_evenly(
    std::size_t rows, std::size_t agents, std::uint64_t seed) {
  if (agents == 0) throw std::invalid_argument("no agents");
  if (rows < agents) {
    throw std::invalid_argument("fewer samples than agents");
  }
  std::vector<std::size_t> order(rows);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 gen(seed);
  std::shuffle(order.begin(), order.end(), gen);
  std::vector<std::vector<std::size_t>> parts(agents);
  for (std::size_t k = 0; k < rows; ++k) parts[k % agents].push_back(order[k]);
  for (auto& p : parts) std::sort(p.begin(), p.end());
  return parts;
}

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// ⌈fraction · rows⌉ rows drawn at random for testing.
inline Split train_test_split(std::size_t rows, double test_fraction,
                              std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw std::invalid_argument("test fraction must lie in (0, 1)");
  }
  std::vector<std::size_t> order(rows);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 gen(seed);
  std::shuffle(order.begin(), order.end(), gen);
  const auto n_test = static_cast<std::size_t>(
      std::ceil(test_fraction * static_cast<double>(rows)));
  Split s{{order.begin() + static_cast<std::ptrdiff_t>(n_test), order.end()},
          {order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test)}};
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

/// One GP dataset per agent for target column `output`.
inline std::vector<Dataset> agent_datasets(
    const Table& t, const std::vector<std::vector<std::size_t>>& parts,
    std::size_t output, double noise_variance) {
  std::vector<Dataset> out;
  out.reserve(parts.size());
  for (const auto& rows : parts) {
    const Table s = t.select(rows);
    out.push_back({s.X, s.Y.col(static_cast<Eigen::Index>(output)), noise_variance});
    out.back().validate();
  }
  return out;
}

}  // namespace ppgpr
