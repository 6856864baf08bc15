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

// Local Gaussian process regression with the squared-exponential kernel and
// the product-of-experts fusion rule. Zero prior mean throughout.

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ppgpr/errors.hpp"

namespace ppgpr {

struct Hyperparams {
  double length_scale = 1.0;  // θ_l
  double signal_std = 1.0;    // θ_s

  void validate() const {
    if (!(length_scale > 0.0) || !(signal_std > 0.0) ||
        !std::isfinite(length_scale) || !std::isfinite(signal_std)) {
      throw std::invalid_argument(
          "hyperparameters must be positive and finite, got (" +
          std::to_string(length_scale) + ", " + std::to_string(signal_std) +
          ")");
    }
  }

  friend bool operator==(const Hyperparams&, const Hyperparams&) = default;
};

/// Rows of X are inputs; y holds one target per row.
struct Dataset {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  double noise_variance = 0.01;  // σ_ε²

  std::size_t size() const { return static_cast<std::size_t>(X.rows()); }
  std::size_t input_dim() const { return static_cast<std::size_t>(X.cols()); }

  void validate() const {
    if (X.rows() < 1) throw std::invalid_argument("dataset is empty");
    if (X.rows() != y.size()) {
      throw std::invalid_argument("dataset has " + std::to_string(X.rows()) +
                                  " inputs but " + std::to_string(y.size()) +
                                  " targets");
    }
    if (!(noise_variance > 0.0) || !std::isfinite(noise_variance)) {
      throw std::invalid_argument("noise variance must be positive");
    }
    if (!X.allFinite() || !y.allFinite()) {
      throw std::invalid_argument("dataset contains non-finite values");
    }
  }
};

/// θ_s² exp(-‖x - x'‖² / (2θ_l²)).
inline double kernel_eval(const Eigen::Ref<const Eigen::VectorXd>& x,
                          const Eigen::Ref<const Eigen::VectorXd>& xp,
                          const Hyperparams& theta) {
  const double d2 = (x - xp).squaredNorm();
  return theta.signal_std * theta.signal_std *
         std::exp(-0.5 * d2 / (theta.length_scale * theta.length_scale));
}

/// Pairwise squared distances between the rows of a and b.
inline Eigen::MatrixXd squared_distances(const Eigen::MatrixXd& a,
                                         const Eigen::MatrixXd& b) {
  Eigen::MatrixXd d(a.rows(), b.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < b.rows(); ++j) {
      d(i, j) = (a.row(i) - b.row(j)).squaredNorm();
    }
  }
  return d;
}

inline Eigen::MatrixXd kernel_from_distances(const Eigen::MatrixXd& d2,
                                             const Hyperparams& theta) {
  const double s2 = theta.signal_std * theta.signal_std;
  const double inv = -0.5 / (theta.length_scale * theta.length_scale);
  return (d2.array() * inv).exp().matrix() * s2;
}

struct Posterior {
  double mean = 0.0;      // f̂_i(x)
  double variance = 0.0;  // V_i(x)
};

using PoEResult = Posterior;

class LocalModel {
 public:
  static constexpr double kFirstJitter = 1e-10;
  static constexpr double kLastJitter = 1e-4;

  /// Factorises K + σ²I. On an indefinite pivot the diagonal is loaded with
  /// 1e-10·θ_s², then ×10 per retry up to 1e-4·θ_s².
  LocalModel(Dataset data, Hyperparams theta)
      : data_(std::move(data)), theta_(theta) {
    data_.validate();
    theta_.validate();
    sq_dist_ = squared_distances(data_.X, data_.X);
    gram_ = kernel_from_distances(sq_dist_, theta_);
    Eigen::MatrixXd a = gram_;
    a.diagonal().array() += data_.noise_variance;
    const double s2 = theta_.signal_std * theta_.signal_std;
    llt_.compute(a);
    for (double j = kFirstJitter; !factor_ok(); j *= 10.0) {
      if (j > kLastJitter * (1 + 1e-9)) {
        throw FactorizationError(
            "K + noise is not positive definite even with jitter 1e-4*theta_s^2");
      }
      jitter_ = j * s2;
      Eigen::MatrixXd aj = a;
      aj.diagonal().array() += jitter_;
      llt_.compute(aj);
    }
    alpha_ = llt_.solve(data_.y);
  }

  const Dataset& data() const { return data_; }
  const Hyperparams& hyperparams() const { return theta_; }
  /// Diagonal loading that was needed, 0 if none.
  double jitter() const { return jitter_; }
  /// Lower Cholesky factor L with L Lᵀ = K + (σ² + jitter) I.
  Eigen::MatrixXd factor() const { return llt_.matrixL(); }

  Posterior posterior(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    if (static_cast<std::size_t>(x.size()) != data_.input_dim()) {
      throw std::invalid_argument("test point has the wrong dimension");
    }
    Eigen::VectorXd k(data_.X.rows());
    for (Eigen::Index l = 0; l < k.size(); ++l) {
      k[l] = kernel_eval(data_.X.row(l).transpose(), x, theta_);
    }
    const Eigen::VectorXd v = llt_.matrixL().solve(k);
    Posterior p{k.dot(alpha_), kernel_eval(x, x, theta_) - v.squaredNorm()};
    if (!(p.variance > 0.0)) {
      throw std::domain_error("posterior variance lost to round-off");
    }
    return p;
  }

  /// -½ yᵀA⁻¹y - ½ log det A - (N/2) log 2π with A = K + σ²I.
  double log_marginal_likelihood() const {
    const double n = static_cast<double>(data_.size());
    const double logdet =
        2.0 * llt_.matrixLLT().diagonal().array().log().sum();
    return -0.5 * data_.y.dot(alpha_) - 0.5 * logdet -
           0.5 * n * std::log(2.0 * std::numbers::pi);
  }

  /// (∂/∂θ_l, ∂/∂θ_s) of the log marginal likelihood; the jitter is held
  /// fixed.
  Eigen::Vector2d lml_gradient() const {
    const Eigen::MatrixXd a_inv = llt_.solve(
        Eigen::MatrixXd::Identity(gram_.rows(), gram_.cols()));
    const double l = theta_.length_scale;
    const Eigen::MatrixXd dk_dl =
        (gram_.array() * sq_dist_.array()).matrix() / (l * l * l);
    const Eigen::MatrixXd dk_ds = 2.0 * gram_ / theta_.signal_std;
    auto part = [&](const Eigen::MatrixXd& dk) {
      return 0.5 * alpha_.dot(dk * alpha_) -
             0.5 * (a_inv.array() * dk.array()).sum();
    };
    return {part(dk_dl), part(dk_ds)};
  }

 private:
  bool factor_ok() const {
    return llt_.info() == Eigen::Success &&
           (llt_.matrixLLT().diagonal().array() > 0.0).all();
  }

  Dataset data_;
  Hyperparams theta_;
  Eigen::MatrixXd sq_dist_;
  Eigen::MatrixXd gram_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::VectorXd alpha_;
  double jitter_ = 0.0;
};

inline LocalModel fit(Dataset data, Hyperparams theta) {
  return LocalModel(std::move(data), theta);
}

inline Posterior local_posterior(const LocalModel& model,
                                 const Eigen::Ref<const Eigen::VectorXd>& x) {
  return model.posterior(x);
}

inline double log_marginal_likelihood(const LocalModel& model) {
  return model.log_marginal_likelihood();
}

inline Eigen::Vector2d lml_gradient(const LocalModel& model) {
  return model.lml_gradient();
}

/// V = 1 / Σ V_i⁻¹, f̂ = V Σ V_i⁻¹ f̂_i.
inline PoEResult poe_aggregate(std::span<const Posterior> experts) {
  if (experts.empty()) {
    throw std::invalid_argument("product of experts needs at least one expert");
  }
  double precision = 0.0;
  double weighted = 0.0;
  for (const Posterior& e : experts) {
    if (!(e.variance > 0.0)) {
      throw std::invalid_argument("expert variance must be positive");
    }
    precision += 1.0 / e.variance;
    weighted += e.mean / e.variance;
  }
  const double v = 1.0 / precision;
  return {v * weighted, v};
}

}  // namespace ppgpr
