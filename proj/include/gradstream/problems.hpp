// Copyright 2026 The Gradstream Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// =============================================================================

#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "gradstream/core.hpp"

namespace gradstream {

enum class ProblemKind : std::uint8_t {
  // i.i.d. standard-normal gradient stream; no underlying objective.
  kGaussianStream,
  // f(w) = 1/2 sum_j lambda_j w_j^2 with isotropic gradient noise of total
  // variance sigma2. Known L = max lambda and f* = 0.
  kNoisyQuadratic,
  // l2-regularized logistic regression on two synthetic Gaussian clusters;
  // stochasticity from minibatch sampling.
  kSyntheticLogistic,
};

inline const char* to_string(ProblemKind k) {
  switch (k) {
    case ProblemKind::kGaussianStream: return "gaussian";
    case ProblemKind::kNoisyQuadratic: return "quadratic";
    case ProblemKind::kSyntheticLogistic: return "logistic";
  }
  return "?";
}

struct ProblemSpec {
  ProblemKind kind = ProblemKind::kGaussianStream;
  std::uint32_t d = 1;
  double sigma2 = 0.0;

  // quadratic spectrum, linearly spaced over [lambda_min, lambda_max]
  double lambda_min = 0.1;
  double lambda_max = 1.0;

  // synthetic logistic dataset
  std::uint32_t dataset_size = 2048;
  std::uint32_t batch_size = 32;
  double class_separation = 2.0;
  double l2_reg = 1e-4;

  void validate() const {
    if (d < 1) throw ConfigError("problem: d must be >= 1");
    if (sigma2 < 0.0) throw ConfigError("problem: sigma2 must be >= 0");
    if (kind == ProblemKind::kNoisyQuadratic) {
      if (!(lambda_min > 0.0) || lambda_max < lambda_min) {
        throw ConfigError("problem: quadratic spectrum requires 0 < lambda_min <= lambda_max");
      }
    }
    if (kind == ProblemKind::kSyntheticLogistic) {
      if (dataset_size < 2 || batch_size < 1 || batch_size > dataset_size) {
        throw ConfigError("problem: logistic dataset/batch sizes invalid");
      }
      if (l2_reg < 0.0) throw ConfigError("problem: l2_reg must be >= 0");
    }
  }
};

class Problem {
 public:
  static Problem build(const ProblemSpec& spec, std::uint64_t data_seed) {
    spec.validate();
    Problem p;
    p.spec_ = spec;
    switch (spec.kind) {
      case ProblemKind::kGaussianStream:
        break;
      case ProblemKind::kNoisyQuadratic: {
        p.lambda_.resize(spec.d);
        for (std::uint32_t j = 0; j < spec.d; ++j) {
          p.lambda_[j] = spec.d == 1
                             ? spec.lambda_max
                             : spec.lambda_min + (spec.lambda_max - spec.lambda_min) *
                                                     static_cast<double>(j) /
                                                     static_cast<double>(spec.d - 1);
        }
        break;
      }
      case ProblemKind::kSyntheticLogistic: {
        RngStream rng(data_seed);
        const std::uint32_t n = spec.dataset_size;
        p.features_.reserve(n);
        p.labels_.reserve(n);
        const double mean_shift = 0.5 * spec.class_separation / std::sqrt(double(spec.d));
        for (std::uint32_t i = 0; i < n; ++i) {
          const double label = i < n / 2 ? 1.0 : -1.0;
          ParamVector x = gaussian_vector(rng, spec.d);
          for (std::uint32_t j = 0; j < spec.d; ++j) x[j] += label * mean_shift;
          p.features_.push_back(std::move(x));
          p.labels_.push_back(label);
        }
        break;
      }
    }
    return p;
  }

  const ProblemSpec& spec() const { return spec_; }

  bool has_objective() const { return spec_.kind != ProblemKind::kGaussianStream; }

  ParamVector initial_point() const {
    // Deterministic starting point: ones for the quadratic (so f(w0) > 0),
    // zeros otherwise.
    if (spec_.kind == ProblemKind::kNoisyQuadratic) return ParamVector(spec_.d, 1.0);
    return ParamVector(spec_.d);
  }

  double lipschitz() const {
    if (spec_.kind != ProblemKind::kNoisyQuadratic) {
      throw ConfigError("lipschitz constant is only tracked for the quadratic problem");
    }
    return spec_.lambda_max;
  }

  double optimal_value() const {
    if (spec_.kind != ProblemKind::kNoisyQuadratic) {
      throw ConfigError("optimal value is only tracked for the quadratic problem");
    }
    return 0.0;
  }

  double loss(const ParamVector& w) const {
    switch (spec_.kind) {
      case ProblemKind::kGaussianStream:
        throw ConfigError("gaussian stream has no objective");
      case ProblemKind::kNoisyQuadratic: {
        double acc = 0.0;
        for (std::uint32_t j = 0; j < spec_.d; ++j) acc += lambda_[j] * w[j] * w[j];
        return 0.5 * acc;
      }
      case ProblemKind::kSyntheticLogistic: {
        double acc = 0.0;
        for (std::size_t i = 0; i < features_.size(); ++i) {
          acc += log1p_exp(-labels_[i] * features_[i].dot(w));
        }
        return acc / static_cast<double>(features_.size()) +
               0.5 * spec_.l2_reg * w.squared_norm();
      }
    }
    throw ConfigError("unknown problem kind");
  }

  // Exact gradient: analytic for the quadratic, full-batch for logistic.
  ParamVector gradient_oracle(const ParamVector& w) const {
    switch (spec_.kind) {
      case ProblemKind::kGaussianStream:
        throw ConfigError("gaussian stream has no objective");
      case ProblemKind::kNoisyQuadratic: {
        ParamVector g(spec_.d);
        for (std::uint32_t j = 0; j < spec_.d; ++j) g[j] = lambda_[j] * w[j];
        return g;
      }
      case ProblemKind::kSyntheticLogistic: {
        std::vector<std::uint32_t> all(features_.size());
        std::iota(all.begin(), all.end(), 0u);
        return logistic_gradient(w, all);
      }
    }
    throw ConfigError("unknown problem kind");
  }

  ParamVector stochastic_gradient(const ParamVector& w, RngStream& rng) const {
    switch (spec_.kind) {
      case ProblemKind::kGaussianStream:
        return gaussian_vector(rng, spec_.d);
      case ProblemKind::kNoisyQuadratic: {
        ParamVector g = gradient_oracle(w);
        if (spec_.sigma2 > 0.0) {
          const double noise_scale = std::sqrt(spec_.sigma2 / static_cast<double>(spec_.d));
          g.add_scaled(noise_scale, gaussian_vector(rng, spec_.d));
        }
        return g;
      }
      case ProblemKind::kSyntheticLogistic:
        return logistic_gradient(w, sample_batch(rng));
    }
    throw ConfigError("unknown problem kind");
  }

  // Minibatch gradient of the regularized logistic loss.
  ParamVector logistic_gradient(const ParamVector& w,
                                std::span<const std::uint32_t> batch) const {
    if (spec_.kind != ProblemKind::kSyntheticLogistic) {
      throw ConfigError("logistic_gradient requires the logistic problem");
    }
    if (batch.empty()) throw std::invalid_argument("logistic_gradient: empty batch");
    ParamVector g(spec_.d);
    for (std::uint32_t idx : batch) {
      if (idx >= features_.size()) throw std::invalid_argument("logistic_gradient: bad index");
      const double margin = labels_[idx] * features_[idx].dot(w);
      const double weight = -labels_[idx] * sigmoid(-margin);
      g.add_scaled(weight, features_[idx]);
    }
    g.scale(1.0 / static_cast<double>(batch.size()));
    g.add_scaled(spec_.l2_reg, w);
    return g;
  }

  std::vector<std::uint32_t> sample_batch(RngStream& rng) const {
    std::vector<std::uint32_t> batch(spec_.batch_size);
    for (std::uint32_t& idx : batch) {
      idx = static_cast<std::uint32_t>(rng.next_u64() % features_.size());
    }
    return batch;
  }

  std::size_t dataset_size() const { return features_.size(); }

 private:
  static double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
  static double log1p_exp(double x) {
    // log(1 + e^x) without overflow for large x
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
  }

  ProblemSpec spec_;
  std::vector<double> lambda_;
  std::vector<ParamVector> features_;
  std::vector<double> labels_;
};

}  // namespace gradstream
