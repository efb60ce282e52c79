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
//
// Predictors for the reconstruction stream. The same predictor instance is
// replicated at the worker and in the master's per-worker chain; both are
// advanced with the identical decoded quantizer output, so their states
// stay bitwise equal.

#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "gradstream/core.hpp"

namespace gradstream {

enum class PredictorKind : std::uint8_t { kZero, kLinear, kEstK };

inline const char* to_string(PredictorKind k) {
  switch (k) {
    case PredictorKind::kZero: return "zero";
    case PredictorKind::kLinear: return "linear";
    case PredictorKind::kEstK: return "estk";
  }
  return "?";
}

struct PredictorSpec {
  PredictorKind kind = PredictorKind::kZero;
  double beta = 0.0;

  void validate() const {
    if (!(beta >= 0.0) || beta >= 1.0) {
      throw std::invalid_argument("PredictorSpec: beta must be in [0, 1)");
    }
  }
};

inline ParamVector predict_zero(const ParamVector& r_tilde) {
  return ParamVector(r_tilde.dim());
}

inline ParamVector predict_linear(const ParamVector& r_tilde, double beta) {
  if (!(beta >= 0.0) || beta >= 1.0) {
    throw std::invalid_argument("predict_linear: beta must be in [0, 1)");
  }
  return scaled(beta, r_tilde);
}

// ---------------------------------------------------------------------------
// Est-K: a per-component momentum estimator for the Top-K quantizer family.
//
// For each component k, tau[k] counts the iterations since k last appeared
// in the transmitted support. When k is selected, the estimate p[k] becomes
// the span-average
//
//   p'[k] = (s(tau[k]) * p[k] + u~[k]) / (tau[k] + 1),
//   s(t)  = beta + beta^2 + ... + beta^(t+1),
//
// which equals the average momentum over the interval between the two
// selections; between selections p[k] is held and the prediction decays as
// beta^(tau[k]+1) * p[k].
// ---------------------------------------------------------------------------

struct EstKState {
  ParamVector p;                   // momentum estimate
  std::vector<std::int64_t> tau;   // staleness counters
  double beta = 0.0;

  EstKState() = default;
  EstKState(std::size_t d, double beta_in)
      : p(d), tau(d, 0), beta(beta_in) {
    if (!(beta >= 0.0) || beta >= 1.0) {
      throw std::invalid_argument("EstKState: beta must be in [0, 1)");
    }
  }

  friend bool operator==(const EstKState& a, const EstKState& b) {
    return a.p == b.p && a.tau == b.tau && a.beta == b.beta;
  }
};

// Closed form of s(tau) = beta + ... + beta^(tau+1). For very large tau the
// beta^(tau+1) factor underflows to zero and s saturates at beta/(1-beta).
inline double estk_geometric_sum(double beta, std::int64_t tau) {
  if (beta == 0.0) return 0.0;
  return beta * (1.0 - std::pow(beta, static_cast<double>(tau + 1))) / (1.0 - beta);
}

// One Est-K step. The support of u_tilde is its non-zero entries; entries
// whose value is exactly zero are treated as unselected. Returns the next
// prediction.
inline ParamVector estk_update(EstKState& state, const SparseUpdate& u_tilde) {
  const std::size_t d = state.p.dim();
  if (u_tilde.dim() != d || state.tau.size() != d) {
    throw std::invalid_argument("estk_update: dimension mismatch");
  }
  std::vector<bool> selected(d, false);
  for (const SparseEntry& e : u_tilde.entries()) {
    if (e.value != 0.0) selected[e.index] = true;
  }
  for (const SparseEntry& e : u_tilde.entries()) {
    if (e.value == 0.0) continue;
    const std::int64_t tau = state.tau[e.index];
    state.p[e.index] = (estk_geometric_sum(state.beta, tau) * state.p[e.index] + e.value) /
                       static_cast<double>(tau + 1);
  }
  ParamVector r_hat_next(d);
  for (std::size_t j = 0; j < d; ++j) {
    state.tau[j] = selected[j] ? 0 : state.tau[j] + 1;
    r_hat_next[j] = std::pow(state.beta, static_cast<double>(state.tau[j] + 1)) * state.p[j];
  }
  return r_hat_next;
}

// ---------------------------------------------------------------------------
// Stateful chain wrapper used by worker and master. Holds the current
// prediction r^ and advances it from each decoded quantizer output.
// ---------------------------------------------------------------------------

class PredictorChain {
 public:
  PredictorChain() = default;

  PredictorChain(PredictorKind kind, std::size_t d, double beta)
      : kind_(kind), beta_(beta), rhat_(d) {
    PredictorSpec{kind, beta}.validate();
    if (kind == PredictorKind::kEstK) estk_.emplace(d, beta);
  }

  PredictorKind kind() const { return kind_; }

  // r^_t, the prediction for the current iteration.
  const ParamVector& prediction() const { return rhat_; }

  // Consumes the decoded quantizer output u~_t and produces r^_{t+1}.
  // `support` must be non-null for Est-K (Top-K family only).
  void advance(const ParamVector& u_tilde_dense, const SparseUpdate* support) {
    switch (kind_) {
      case PredictorKind::kZero:
        break;  // rhat_ stays all-zeros
      case PredictorKind::kLinear: {
        // r~_t = u~_t + r^_t, then r^_{t+1} = beta * r~_t
        rhat_.add(u_tilde_dense);
        rhat_.scale(beta_);
        break;
      }
      case PredictorKind::kEstK: {
        if (support == nullptr) {
          throw ConfigError("Est-K predictor requires a Top-K family quantizer");
        }
        rhat_ = estk_update(*estk_, *support);
        break;
      }
    }
  }

  const EstKState& estk_state() const { return *estk_; }

  bool state_equals(const PredictorChain& other) const {
    if (kind_ != other.kind_ || beta_ != other.beta_) return false;
    if (!(rhat_ == other.rhat_)) return false;
    if (estk_.has_value() != other.estk_.has_value()) return false;
    if (estk_ && !(*estk_ == *other.estk_)) return false;
    return true;
  }

 private:
  PredictorKind kind_ = PredictorKind::kZero;
  double beta_ = 0.0;
  ParamVector rhat_;
  std::optional<EstKState> estk_;
};

}  // namespace gradstream
