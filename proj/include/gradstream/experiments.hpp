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
// Experiment runners. Every runner is a pure function of its parameter
// struct (seed included); rerunning reproduces output byte for byte.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "gradstream/codec.hpp"
#include "gradstream/constants.hpp"
#include "gradstream/core.hpp"
#include "gradstream/metrics.hpp"
#include "gradstream/pipeline.hpp"
#include "gradstream/problems.hpp"

namespace gradstream {

// ---------------------------------------------------------------------------
// Single-worker Top-K time series: traces one component of v, u, u~ and r^
// through the error-feedback loop with a constant step size.
// ---------------------------------------------------------------------------

struct TimeseriesParams {
  double beta = constants::kTimeseriesBetaSmooth;
  std::uint32_t d = constants::kTimeseriesDim;
  std::uint32_t k = constants::kTimeseriesK;
  std::uint64_t iters = constants::kTimeseriesIters;
  PredictorKind predictor = PredictorKind::kZero;
  std::uint64_t seed = constants::kTimeseriesSeed;
  std::uint32_t component = 0;
};

struct TimeseriesResult {
  std::vector<MetricsRow> rows;
  std::vector<double> v, u, uq, rhat;  // traced component per iteration
};

inline TimeseriesResult run_timeseries(const TimeseriesParams& p) {
  RunConfig cfg;
  cfg.d = p.d;
  cfg.workers = 1;
  cfg.iters = p.iters;
  cfg.beta = p.beta;
  cfg.error_feedback = true;
  cfg.quantizer = {QuantizerKind::kTopK, p.k, 0.0};
  cfg.predictor = p.predictor;
  cfg.schedule = {1.0, 0, 1.0};  // constant step; the EF scaling is then 1
  cfg.problem = {.kind = ProblemKind::kGaussianStream, .d = p.d};
  cfg.seed = p.seed;
  if (p.predictor == PredictorKind::kLinear) {
    throw ConfigError("run_timeseries supports the zero and Est-K predictors");
  }

  RunOptions opts;
  opts.trace_component = p.component;
  RunResult run = run_training(cfg, opts);

  TimeseriesResult out;
  out.rows = std::move(run.metrics);
  out.v.reserve(out.rows.size());
  for (const MetricsRow& r : out.rows) {
    out.v.push_back(*r.trace_v);
    out.u.push_back(*r.trace_u);
    out.uq.push_back(*r.trace_uq);
    out.rhat.push_back(*r.trace_rhat);
  }
  return out;
}

// Gaps between consecutive non-zero samples of a trace.
inline std::vector<double> peak_intervals(std::span<const double> trace) {
  std::vector<double> intervals;
  std::int64_t last = -1;
  for (std::size_t t = 0; t < trace.size(); ++t) {
    if (trace[t] != 0.0) {
      if (last >= 0) intervals.push_back(static_cast<double>(static_cast<std::int64_t>(t) - last));
      last = static_cast<std::int64_t>(t);
    }
  }
  return intervals;
}

// Population coefficient of variation (std / mean).
inline double coefficient_of_variation(std::span<const double> xs) {
  if (xs.size() < 2) throw std::invalid_argument("coefficient_of_variation: need >= 2 samples");
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  var /= static_cast<double>(xs.size());
  return std::sqrt(var) / mean;
}

// ---------------------------------------------------------------------------
// Error growth with the linear predictor: bounded without error feedback,
// divergent with it.
// ---------------------------------------------------------------------------

struct ErrorGrowthParams {
  bool error_feedback = false;
  double beta = constants::kErrorGrowthBeta;
  std::uint32_t d = constants::kErrorGrowthDim;
  std::uint32_t k = constants::kErrorGrowthK;
  std::uint64_t iters = constants::kErrorGrowthIters;
  std::uint64_t seed = constants::kErrorGrowthSeed;
};

struct ErrorGrowthResult {
  std::vector<MetricsRow> rows;
  std::vector<double> error_sq;  // ||e_t||^2 per iteration
};

inline ErrorGrowthResult run_error_growth(const ErrorGrowthParams& p) {
  RunConfig cfg;
  cfg.d = p.d;
  cfg.workers = 1;
  cfg.iters = p.iters;
  cfg.beta = p.beta;
  cfg.error_feedback = p.error_feedback;
  cfg.quantizer = {QuantizerKind::kTopKQ, p.k, 0.0};
  cfg.predictor = PredictorKind::kLinear;
  cfg.schedule = {1.0, 0, 1.0};
  cfg.problem = {.kind = ProblemKind::kGaussianStream, .d = p.d};
  cfg.seed = p.seed;

  RunResult run = run_training(cfg);
  ErrorGrowthResult out;
  out.error_sq.reserve(run.metrics.size());
  for (const MetricsRow& r : run.metrics) {
    out.error_sq.push_back(*r.mse * static_cast<double>(p.d));
  }
  out.rows = std::move(run.metrics);
  return out;
}

// ---------------------------------------------------------------------------
// Convergence bound for error-feedback SGD under a mean-squared-error
// distortion budget D. With xi > 1/2, c = 1 - 1/(2 xi) and step size
// c / (L sqrt(T)):
//
//   E[min_t ||grad f(w_t)||^2] <= A + B,
//   A = (2L/c^2 * (f(w_0) - f*) + sigma^2/n) / (2 sqrt(T) - 1),
//   B = c xi D / (2T - sqrt(T)).
//
// With xi = T^(1/4) the same bound splits into the corollary form
// term1 + term2 + remainder below, where the remainder is the exact O(1/T)
// residual of the split.
// ---------------------------------------------------------------------------

struct BoundInputs {
  double T = 0.0;
  double L = 0.0;
  double delta_f = 0.0;  // f(w_0) - f*
  double sigma2 = 0.0;
  double n = 1.0;
  double D = 0.0;
  double xi = 0.0;  // may be +infinity when D = 0

  void validate() const {
    if (!(T >= 1.0)) throw std::domain_error("bound: T must be >= 1");
    if (!(L > 0.0)) throw std::domain_error("bound: L must be > 0");
    if (delta_f < 0.0) throw std::domain_error("bound: f(w0) - f* must be >= 0");
    if (sigma2 < 0.0 || D < 0.0) throw std::domain_error("bound: sigma2 and D must be >= 0");
    if (!(n >= 1.0)) throw std::domain_error("bound: n must be >= 1");
    if (!(xi > 0.5)) throw std::domain_error("bound: xi must be > 1/2");
    if (std::isinf(xi) && D != 0.0) {
      throw std::domain_error("bound: xi = infinity requires D = 0");
    }
  }
};

struct CorollaryTerms {
  double term1 = 0.0;      // (2L delta_f + sigma2/n) / (2 sqrt(T) - 1)
  double term2 = 0.0;      // (2L delta_f + D) / (2 T^(3/4) - T^(1/4))
  double remainder = 0.0;  // exact residual, O(1/T)

  double total() const { return term1 + term2 + remainder; }
};

struct BoundTerms {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  double step_size = 0.0;  // c / (L sqrt(T))
  bool has_corollary = false;
  CorollaryTerms corollary;

  double total() const { return a + b; }
};

// Plain SGD baseline: (2L delta_f + sigma2/n) / (2 sqrt(T) - 1).
inline double plain_sgd_bound(double L, double delta_f, double sigma2, double n, double T) {
  return (2.0 * L * delta_f + sigma2 / n) / (2.0 * std::sqrt(T) - 1.0);
}

inline BoundTerms theoretical_bound(const BoundInputs& in) {
  in.validate();
  BoundTerms out;
  const double sqrt_t = std::sqrt(in.T);
  out.c = std::isinf(in.xi) ? 1.0 : 1.0 - 1.0 / (2.0 * in.xi);
  out.step_size = out.c / (in.L * sqrt_t);
  out.a = (2.0 * in.L * in.delta_f / (out.c * out.c) + in.sigma2 / in.n) / (2.0 * sqrt_t - 1.0);
  out.b = std::isinf(in.xi) ? 0.0 : out.c * in.xi * in.D / (2.0 * in.T - sqrt_t);

  const double xi_corollary = std::pow(in.T, 0.25);
  if (!std::isinf(in.xi) && std::fabs(in.xi - xi_corollary) <= 1e-12 * xi_corollary) {
    const double c = out.c;
    out.has_corollary = true;
    out.corollary.term1 = plain_sgd_bound(in.L, in.delta_f, in.sigma2, in.n, in.T);
    out.corollary.term2 =
        (2.0 * in.L * in.delta_f + in.D) / (2.0 * std::pow(in.T, 0.75) - xi_corollary);
    out.corollary.remainder =
        2.0 * in.L * in.delta_f * (1.0 / (c * c) - 1.0 - 1.0 / in.xi) / (2.0 * sqrt_t - 1.0) -
        in.D / (2.0 * (2.0 * in.T - sqrt_t));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Convergence run: momentum off, error feedback on, bounded-MSE quantizer,
// noisy quadratic with known L, f* and sigma2.
// ---------------------------------------------------------------------------

struct ConvergenceParams {
  std::uint32_t d = constants::kConvergenceDim;
  std::uint32_t workers = constants::kConvergenceWorkers;
  std::uint64_t iters = constants::kConvergenceIters;
  double sigma2 = constants::kConvergenceSigma2;
  double dither_step = constants::kDitherStepDefault;  // 0 selects lossless
  std::uint64_t seed = 1;
};

struct ConvergenceReport {
  double empirical_min_grad_sq = 0.0;
  BoundTerms bound;
  double distortion = 0.0;  // D
  double step_size = 0.0;
  bool satisfied = false;
};

inline ConvergenceReport run_convergence(const ConvergenceParams& p) {
  if (p.dither_step < 0.0) throw ConfigError("run_convergence: dither_step must be >= 0");
  RunConfig cfg;
  cfg.d = p.d;
  cfg.workers = p.workers;
  cfg.iters = p.iters;
  cfg.beta = 0.0;
  cfg.error_feedback = true;
  cfg.predictor = PredictorKind::kZero;
  cfg.problem = {.kind = ProblemKind::kNoisyQuadratic, .d = p.d, .sigma2 = p.sigma2};
  cfg.seed = p.seed;

  const bool lossless = p.dither_step == 0.0;
  cfg.quantizer = lossless ? QuantizerSpec{QuantizerKind::kLossless, 0, 0.0}
                           : QuantizerSpec{QuantizerKind::kDitheredUniform, 0, p.dither_step};

  const Problem probe = Problem::build(cfg.problem, data_seed(cfg.seed));
  const double L = probe.lipschitz();
  const double delta_f =
      probe.loss(probe.initial_point()) - probe.optimal_value();
  const double T = static_cast<double>(p.iters);
  const double D =
      lossless ? 0.0 : static_cast<double>(p.d) * p.dither_step * p.dither_step / 12.0;

  BoundInputs inputs;
  inputs.T = T;
  inputs.L = L;
  inputs.delta_f = delta_f;
  inputs.sigma2 = p.sigma2;
  inputs.n = static_cast<double>(p.workers);
  inputs.D = D;
  inputs.xi = lossless ? std::numeric_limits<double>::infinity() : std::pow(T, 0.25);

  ConvergenceReport report;
  report.bound = theoretical_bound(inputs);
  report.distortion = D;
  report.step_size = report.bound.step_size;

  cfg.schedule = {report.step_size, 0, 1.0};
  const RunResult run = run_training(cfg);
  report.empirical_min_grad_sq = run.min_grad_norm_sq;
  report.satisfied = report.empirical_min_grad_sq <= report.bound.total();
  return report;
}

// ---------------------------------------------------------------------------
// Rate table: analytic bits per component next to bits measured from
// encoded frames on the Gaussian stream.
// ---------------------------------------------------------------------------

struct RateTableParams {
  std::uint32_t d = 100000;
  std::uint64_t iters = 16;  // frames averaged per row
  std::uint64_t seed = 1;
};

struct RateRow {
  QuantizerKind scheme = QuantizerKind::kTopK;
  double k_frac = 0.0;  // 0 for schemes without K
  double analytic_bits = 0.0;
  double measured_bits = 0.0;
};

inline std::vector<RateRow> rate_table(const RateTableParams& p) {
  struct Entry {
    QuantizerKind scheme;
    double k_frac;
  };
  // The Top-K / Top-K-Q rows mirror the reference operating points; the
  // scaled-sign row has no K.
  const Entry entries[] = {
      {QuantizerKind::kTopK, 0.015},  {QuantizerKind::kTopK, 0.35},
      {QuantizerKind::kTopKQ, 0.01},  {QuantizerKind::kTopKQ, 0.23},
      {QuantizerKind::kScaledSign, 0.0},
  };
  std::vector<RateRow> rows;
  for (const Entry& entry : entries) {
    RunConfig cfg;
    cfg.d = p.d;
    cfg.workers = 1;
    cfg.iters = p.iters;
    cfg.beta = 0.99;
    cfg.error_feedback = false;
    cfg.predictor = PredictorKind::kZero;
    cfg.schedule = {1.0, 0, 1.0};
    cfg.problem = {.kind = ProblemKind::kGaussianStream, .d = p.d};
    cfg.seed = p.seed;
    cfg.quantizer.kind = entry.scheme;
    if (entry.scheme != QuantizerKind::kScaledSign) {
      cfg.quantizer.k = resolve_k(p.d, std::nullopt, entry.k_frac);
    }

    const RunResult run = run_training(cfg);
    double bits = 0.0;
    for (const MetricsRow& r : run.metrics) bits += *r.frame_bits;
    bits /= static_cast<double>(run.metrics.size()) * static_cast<double>(p.d);

    RateRow row;
    row.scheme = entry.scheme;
    row.k_frac = entry.k_frac;
    row.analytic_bits = entry.scheme == QuantizerKind::kScaledSign
                            ? bits_per_component(entry.scheme, 0, p.d)
                            : bits_per_component(entry.scheme, cfg.quantizer.k, p.d);
    row.measured_bits = bits;
    rows.push_back(row);
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Mean-squared-error comparison: Est-K against the zero predictor on
// synthetic logistic regression with matched K, seeds and error feedback.
// ---------------------------------------------------------------------------

struct MseCompareParams {
  std::uint32_t d = constants::kMseCompareDim;
  std::uint32_t k = constants::kMseCompareK;
  double beta = constants::kMseCompareBeta;
  double lr = constants::kMseCompareLr;
  std::uint64_t iters = constants::kMseCompareIters;
  std::uint64_t seed = constants::kMseCompareSeed;
};

struct MseCompareResult {
  std::vector<MetricsRow> zero_rows;
  std::vector<MetricsRow> estk_rows;
  double zero_final_quarter_mean = 0.0;
  double estk_final_quarter_mean = 0.0;
};

inline double final_quarter_mean_mse(std::span<const MetricsRow> rows) {
  const std::size_t begin = rows.size() - rows.size() / 4;
  double acc = 0.0;
  std::size_t count = 0;
  for (std::size_t i = begin; i < rows.size(); ++i) {
    acc += *rows[i].mse;
    ++count;
  }
  return acc / static_cast<double>(count);
}

inline MseCompareResult run_mse_comparison(const MseCompareParams& p) {
  RunConfig cfg;
  cfg.d = p.d;
  cfg.workers = 1;
  cfg.iters = p.iters;
  cfg.beta = p.beta;
  cfg.error_feedback = true;
  cfg.quantizer = {QuantizerKind::kTopK, p.k, 0.0};
  cfg.schedule = {p.lr, 0, 1.0};
  cfg.problem = {.kind = ProblemKind::kSyntheticLogistic, .d = p.d};
  cfg.seed = p.seed;

  MseCompareResult out;
  cfg.predictor = PredictorKind::kZero;
  out.zero_rows = run_training(cfg).metrics;
  cfg.predictor = PredictorKind::kEstK;
  out.estk_rows = run_training(cfg).metrics;
  out.zero_final_quarter_mean = final_quarter_mean_mse(out.zero_rows);
  out.estk_final_quarter_mean = final_quarter_mean_mse(out.estk_rows);
  return out;
}

}  // namespace gradstream
