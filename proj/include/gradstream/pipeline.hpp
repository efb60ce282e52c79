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
// Worker and master state machines.
//
// Worker, per iteration t with gradient g and step size eta:
//
//   v   <- beta * v + (1 - beta) * g          momentum filter
//   r   <- v ( + (eta_prev / eta) * e )       error feedback, if enabled
//   u   <- r - r^                             prediction residual
//   u~  <- Q(u)                               quantize, encode, decode
//   r~  <- u~ + r^                            reconstruction
//   e   <- r - r~                             quantization error
//   r^  <- P(r~)                              next prediction
//
// Initial state: v, e, r^ all zero and eta_prev = 0, so the error-feedback
// term vanishes at t = 0. The worker uses the *decoded* quantizer output
// (32-bit rounded values) in r~ and in the predictor, exactly as the master
// does, so the two predictor chains stay bitwise synchronized.
//
// Master, per iteration: decodes each worker's frames, reconstructs
// r~_i = u~_i + r^_i through its per-worker chain, advances the chain, and
// applies w <- w - eta * mean_i(r~_i).

#pragma once

#include <cstdlib>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "gradstream/codec.hpp"
#include "gradstream/core.hpp"
#include "gradstream/metrics.hpp"
#include "gradstream/predictors.hpp"
#include "gradstream/problems.hpp"
#include "gradstream/quantizers.hpp"

namespace gradstream {

// ---------------------------------------------------------------------------
// Run configuration.
// ---------------------------------------------------------------------------

struct StepSchedule {
  double lr = 0.1;
  std::uint32_t decay_every = 0;  // 0 = constant
  double decay_factor = 1.0;

  double at(std::uint64_t t) const {
    if (decay_every == 0) return lr;
    return lr * std::pow(decay_factor, static_cast<double>(t / decay_every));
  }

  void validate() const {
    if (!(lr > 0.0)) throw ConfigError("lr must be > 0");
    if (!(decay_factor > 0.0) || decay_factor > 1.0) {
      throw ConfigError("lr_decay_factor must be in (0, 1]");
    }
  }
};

struct RunConfig {
  std::uint32_t d = 0;
  std::uint32_t workers = 1;
  std::uint64_t iters = 100;
  double beta = 0.0;
  bool error_feedback = false;
  QuantizerSpec quantizer;
  PredictorKind predictor = PredictorKind::kZero;
  StepSchedule schedule;
  ProblemSpec problem;
  std::uint64_t seed = 1;
  std::vector<std::uint32_t> block_offsets;  // interior boundaries, strictly increasing

  void validate() const {
    if (d < 1) throw ConfigError("d must be >= 1");
    if (workers < 1) throw ConfigError("workers must be >= 1");
    if (iters < 1) throw ConfigError("iters must be >= 1");
    if (!(beta >= 0.0) || beta >= 1.0) throw ConfigError("beta must be in [0, 1)");
    quantizer.validate(d);
    schedule.validate();
    if (predictor == PredictorKind::kEstK && quantizer.kind != QuantizerKind::kTopK &&
        quantizer.kind != QuantizerKind::kTopKQ) {
      throw ConfigError("predictor=estk requires a Top-K family scheme");
    }
    if (problem.d != d) throw ConfigError("problem dimension must match d");
    problem.validate();
    std::uint32_t prev = 0;
    for (std::uint32_t off : block_offsets) {
      if (off <= prev || off >= d) throw ConfigError("blocks offsets must be increasing in (0, d)");
      prev = off;
    }
    if (!block_offsets.empty() && quantizer.kind == QuantizerKind::kLossless) {
      throw ConfigError("blocks have no effect in lossless mode");
    }
  }
};

// Contiguous block partition of [0, d). Default is one whole-vector block.
class BlockLayout {
 public:
  static BlockLayout whole(std::uint32_t d) {
    BlockLayout b;
    b.bounds_ = {0, d};
    return b;
  }

  static BlockLayout with_offsets(std::uint32_t d, std::span<const std::uint32_t> offsets) {
    BlockLayout b;
    b.bounds_.push_back(0);
    for (std::uint32_t off : offsets) b.bounds_.push_back(off);
    b.bounds_.push_back(d);
    return b;
  }

  static BlockLayout from_config(const RunConfig& cfg) {
    return cfg.block_offsets.empty() ? whole(cfg.d) : with_offsets(cfg.d, cfg.block_offsets);
  }

  std::size_t count() const { return bounds_.size() - 1; }
  std::uint32_t begin(std::size_t i) const { return bounds_[i]; }
  std::uint32_t end(std::size_t i) const { return bounds_[i + 1]; }
  std::uint32_t length(std::size_t i) const { return bounds_[i + 1] - bounds_[i]; }

  // Per-block K, scaled from the whole-vector K by block length.
  std::uint32_t block_k(std::size_t i, std::uint32_t k, std::uint32_t d) const {
    const double scaled = static_cast<double>(k) * length(i) / static_cast<double>(d);
    const auto rounded = static_cast<std::uint32_t>(std::llround(scaled));
    return std::min(length(i), std::max<std::uint32_t>(1, rounded));
  }

 private:
  std::vector<std::uint32_t> bounds_;
};

namespace detail {

// Substream tags for deriving per-worker streams from the run seed.
inline constexpr std::uint64_t kTagGradient = 1;
inline constexpr std::uint64_t kTagDither = 2;
inline constexpr std::uint64_t kTagData = 3;

inline std::uint64_t stream_id(std::uint64_t tag, std::uint32_t worker) {
  return (tag << 32) | worker;
}

}  // namespace detail

inline RngStream gradient_stream(std::uint64_t seed, std::uint32_t worker) {
  return RngStream(seed).fork(detail::stream_id(detail::kTagGradient, worker));
}

inline RngStream dither_stream(std::uint64_t seed, std::uint32_t worker) {
  return RngStream(seed).fork(detail::stream_id(detail::kTagDither, worker));
}

inline std::uint64_t data_seed(std::uint64_t seed) {
  return RngStream(seed).fork(detail::stream_id(detail::kTagData, 0)).next_u64();
}

// ---------------------------------------------------------------------------
// Worker.
// ---------------------------------------------------------------------------

class Worker {
 public:
  struct StepResult {
    std::vector<CompressedFrame> frames;       // one per block; empty in lossless mode
    std::uint64_t payload_bits = 0;            // measured, summed over blocks
    std::optional<ParamVector> lossless_update;  // set only in lossless mode
  };

  Worker(const RunConfig& cfg, std::uint32_t worker_id)
      : d_(cfg.d),
        beta_(cfg.beta),
        ef_(cfg.error_feedback),
        quantizer_(cfg.quantizer),
        blocks_(BlockLayout::from_config(cfg)),
        chain_(cfg.predictor, cfg.d, cfg.beta),
        dither_(dither_stream(cfg.seed, worker_id)),
        v_(cfg.d),
        e_(cfg.d),
        r_(cfg.d),
        u_(cfg.d),
        utilde_(cfg.d),
        rtilde_(cfg.d),
        rhat_used_(cfg.d) {}

  const StepResult& step(const ParamVector& g, double eta) {
    if (g.dim() != d_) throw std::invalid_argument("worker step: gradient dimension mismatch");
    if (!(eta > 0.0)) throw std::invalid_argument("worker step: step size must be > 0");
    if (!g.all_finite()) throw NumericError("worker step: gradient has non-finite entries");

    v_.scale(beta_);
    v_.add_scaled(1.0 - beta_, g);

    r_ = v_;
    if (ef_) r_.add_scaled(eta_prev_ / eta, e_);

    u_ = r_;
    u_.sub(chain_.prediction());
    if (!u_.all_finite()) throw NumericError("worker step: residual has non-finite entries");

    quantize();

    rtilde_ = utilde_;
    rtilde_.add(chain_.prediction());

    e_ = r_;
    e_.sub(rtilde_);

    rhat_used_ = chain_.prediction();
    chain_.advance(utilde_, support_ ? &*support_ : nullptr);
    eta_prev_ = eta;
    return result_;
  }

  const ParamVector& momentum() const { return v_; }
  const ParamVector& error() const { return e_; }
  const ParamVector& residual() const { return u_; }
  const ParamVector& quantized_residual() const { return utilde_; }
  const ParamVector& reconstruction() const { return rtilde_; }
  const ParamVector& ef_input() const { return r_; }
  // r^_t as used in the most recent step (prediction() already holds r^_{t+1}).
  const ParamVector& prediction_before_step() const { return rhat_used_; }
  const ParamVector& prediction() const { return chain_.prediction(); }
  const PredictorChain& chain() const { return chain_; }
  const StepResult& step_result() const { return result_; }

 private:
  void quantize() {
    result_.frames.clear();
    result_.payload_bits = 0;
    result_.lossless_update.reset();
    support_.reset();

    if (quantizer_.kind == QuantizerKind::kLossless) {
      utilde_ = u_;
      result_.lossless_update = u_;
      result_.payload_bits = 32ull * d_;
      return;
    }

    utilde_.fill(0.0);
    std::vector<SparseEntry> merged;
    for (std::size_t b = 0; b < blocks_.count(); ++b) {
      const std::uint32_t begin = blocks_.begin(b);
      const std::uint32_t len = blocks_.length(b);
      ParamVector block(len);
      for (std::uint32_t j = 0; j < len; ++j) block[j] = u_[begin + j];

      QuantizerSpec block_spec = quantizer_;
      if (block_spec.kind == QuantizerKind::kTopK || block_spec.kind == QuantizerKind::kTopKQ) {
        block_spec.k = blocks_.block_k(b, quantizer_.k, d_);
      }

      CompressedFrame frame;
      switch (block_spec.kind) {
        case QuantizerKind::kTopK:
          frame = encode_frame(top_k(block, block_spec.k), block_spec, len);
          break;
        case QuantizerKind::kTopKQ:
          frame = encode_frame(top_k_q(block, block_spec.k), block_spec, len);
          break;
        case QuantizerKind::kScaledSign:
          frame = encode_frame(scaled_sign(block), block_spec, len);
          break;
        case QuantizerKind::kDitheredUniform: {
          auto quantized = dithered_quantize(block, block_spec.step, dither_);
          frame = encode_frame(std::move(quantized.codes), block_spec, len);
          // Validate the stream parses, then reconstruct from the codes and
          // the in-step dither draws (the master replays the same draws).
          decode_frame(frame.to_bytes());
          for (std::uint32_t j = 0; j < len; ++j) utilde_[begin + j] = quantized.recon[j];
          break;
        }
        case QuantizerKind::kLossless:
          break;  // handled above
      }

      if (block_spec.kind != QuantizerKind::kDitheredUniform) {
        // Use the decoded (32-bit rounded) values on the worker side too.
        const DecodedFrame decoded = decode_frame(frame.to_bytes());
        if (decoded.scheme == SchemeCode::kScaledSign) {
          const ParamVector dense = decoded.sign().to_dense();
          for (std::uint32_t j = 0; j < len; ++j) utilde_[begin + j] = dense[j];
        } else {
          for (const SparseEntry& entry : decoded.sparse().entries()) {
            utilde_[begin + entry.index] = entry.value;
            merged.push_back({begin + entry.index, entry.value});
          }
        }
      }

      result_.payload_bits += frame.payload_bits;
      result_.frames.push_back(std::move(frame));
    }
    if (quantizer_.kind == QuantizerKind::kTopK || quantizer_.kind == QuantizerKind::kTopKQ) {
      support_ = SparseUpdate(d_, std::move(merged));
    }
  }

  std::uint32_t d_;
  double beta_;
  bool ef_;
  QuantizerSpec quantizer_;
  BlockLayout blocks_;
  PredictorChain chain_;
  RngStream dither_;

  ParamVector v_, e_, r_, u_, utilde_, rtilde_, rhat_used_;
  std::optional<SparseUpdate> support_;
  double eta_prev_ = 0.0;
  StepResult result_;
};

// ---------------------------------------------------------------------------
// Master.
// ---------------------------------------------------------------------------

class Master {
 public:
  Master(const RunConfig& cfg, ParamVector w0)
      : d_(cfg.d),
        quantizer_(cfg.quantizer),
        blocks_(BlockLayout::from_config(cfg)),
        w_(std::move(w0)),
        mean_rtilde_(cfg.d) {
    if (w_.dim() != d_) throw std::invalid_argument("master: w0 dimension mismatch");
    chains_.reserve(cfg.workers);
    for (std::uint32_t i = 0; i < cfg.workers; ++i) {
      chains_.push_back(Chain{PredictorChain(cfg.predictor, cfg.d, cfg.beta),
                              dither_stream(cfg.seed, i)});
    }
  }

  // Decodes one StepResult per worker, advances every chain, updates the
  // parameter vector, and returns the broadcast mean of the r~_i.
  const ParamVector& step(std::span<const Worker::StepResult> worker_results, double eta) {
    if (worker_results.size() != chains_.size()) {
      throw DecodeError("master step: expected one result per worker");
    }
    if (!(eta > 0.0)) throw std::invalid_argument("master step: step size must be > 0");
    mean_rtilde_.fill(0.0);
    ParamVector utilde(d_);
    ParamVector rtilde(d_);
    for (std::size_t i = 0; i < chains_.size(); ++i) {
      std::optional<SparseUpdate> support;
      materialize(worker_results[i], chains_[i], utilde, support);
      rtilde = utilde;
      rtilde.add(chains_[i].predictor.prediction());
      chains_[i].predictor.advance(utilde, support ? &*support : nullptr);
      mean_rtilde_.add(rtilde);
    }
    mean_rtilde_.scale(1.0 / static_cast<double>(chains_.size()));
    w_.add_scaled(-eta, mean_rtilde_);
    return mean_rtilde_;
  }

  const ParamVector& parameters() const { return w_; }
  const ParamVector& broadcast() const { return mean_rtilde_; }
  const PredictorChain& chain(std::uint32_t i) const { return chains_.at(i).predictor; }
  std::uint32_t workers() const { return static_cast<std::uint32_t>(chains_.size()); }

 private:
  struct Chain {
    PredictorChain predictor;
    RngStream dither;
  };

  void materialize(const Worker::StepResult& result, Chain& chain, ParamVector& utilde,
                   std::optional<SparseUpdate>& support) const {
    if (quantizer_.kind == QuantizerKind::kLossless) {
      if (!result.lossless_update) throw DecodeError("master step: missing lossless update");
      utilde = *result.lossless_update;
      return;
    }
    if (result.frames.size() != blocks_.count()) {
      throw DecodeError("master step: expected one frame per block");
    }
    utilde.fill(0.0);
    std::vector<SparseEntry> merged;
    for (std::size_t b = 0; b < blocks_.count(); ++b) {
      const std::uint32_t begin = blocks_.begin(b);
      const std::uint32_t len = blocks_.length(b);
      const DecodedFrame decoded = decode_frame(result.frames[b].to_bytes());
      if (decoded.d != len) throw DecodeError("master step: frame dimension mismatch");
      switch (decoded.scheme) {
        case SchemeCode::kTopK:
        case SchemeCode::kTopKQ:
          for (const SparseEntry& entry : decoded.sparse().entries()) {
            utilde[begin + entry.index] = entry.value;
            merged.push_back({begin + entry.index, entry.value});
          }
          break;
        case SchemeCode::kScaledSign: {
          const ParamVector dense = decoded.sign().to_dense();
          for (std::uint32_t j = 0; j < len; ++j) utilde[begin + j] = dense[j];
          break;
        }
        case SchemeCode::kDitheredUniform: {
          const ParamVector recon =
              dithered_reconstruct(decoded.codes(), quantizer_.step, chain.dither);
          for (std::uint32_t j = 0; j < len; ++j) utilde[begin + j] = recon[j];
          break;
        }
      }
    }
    if (quantizer_.kind == QuantizerKind::kTopK || quantizer_.kind == QuantizerKind::kTopKQ) {
      support = SparseUpdate(d_, std::move(merged));
    }
  }

  std::uint32_t d_;
  QuantizerSpec quantizer_;
  BlockLayout blocks_;
  ParamVector w_;
  ParamVector mean_rtilde_;
  std::vector<Chain> chains_;
};

// ---------------------------------------------------------------------------
// Synchronized training loop.
// ---------------------------------------------------------------------------

struct RunOptions {
  bool record_history = false;                    // keep w / mean-g / mean-e trajectories
  std::optional<std::uint32_t> trace_component;   // fill trace_* columns from worker 0
};

struct RunHistory {
  double beta = 0.0;
  bool error_feedback = false;
  std::vector<double> etas;
  std::vector<ParamVector> w;       // w_0 ... w_T
  std::vector<ParamVector> mean_g;  // one per iteration
  std::vector<ParamVector> mean_e;  // one per iteration
};

struct RunResult {
  std::vector<MetricsRow> metrics;
  RunHistory history;
  ParamVector final_w;
  double min_grad_norm_sq = std::numeric_limits<double>::infinity();
};

// Worker-parallelism cap: min(workers, GRADSTREAM_THREADS or hardware).
inline unsigned worker_thread_cap(std::uint32_t workers) {
  unsigned cap = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("GRADSTREAM_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) cap = static_cast<unsigned>(v);
  }
  return std::min<unsigned>(cap, workers);
}

inline RunResult run_training(const RunConfig& cfg, const RunOptions& opts = {}) {
  cfg.validate();
  const Problem problem = Problem::build(cfg.problem, data_seed(cfg.seed));
  const std::uint32_t n = cfg.workers;

  std::vector<Worker> workers;
  workers.reserve(n);
  std::vector<RngStream> grad_rngs;
  grad_rngs.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    workers.emplace_back(cfg, i);
    grad_rngs.push_back(gradient_stream(cfg.seed, i));
  }
  Master master(cfg, problem.initial_point());

  std::optional<double> analytic_bits;
  switch (cfg.quantizer.kind) {
    case QuantizerKind::kTopK:
    case QuantizerKind::kTopKQ:
      analytic_bits = bits_per_component(cfg.quantizer.kind, cfg.quantizer.k, cfg.d);
      break;
    case QuantizerKind::kScaledSign:
      analytic_bits = 1.0;
      break;
    case QuantizerKind::kLossless:
      analytic_bits = 32.0;
      break;
    case QuantizerKind::kDitheredUniform:
      break;  // measured only
  }

  RunResult out;
  out.history.beta = cfg.beta;
  out.history.error_feedback = cfg.error_feedback;
  if (opts.record_history) {
    out.history.w.push_back(master.parameters());
  }
  out.metrics.reserve(static_cast<std::size_t>(cfg.iters) * n);

  std::vector<ParamVector> grads(n);
  const unsigned threads = worker_thread_cap(n);

  for (std::uint64_t t = 0; t < cfg.iters; ++t) {
    const double eta = cfg.schedule.at(t);
    const ParamVector& w = master.parameters();

    std::optional<double> loss;
    std::optional<double> grad_norm_sq;
    if (problem.has_objective()) {
      loss = problem.loss(w);
      grad_norm_sq = problem.gradient_oracle(w).squared_norm();
      out.min_grad_norm_sq = std::min(out.min_grad_norm_sq, *grad_norm_sq);
    }

    const auto run_worker = [&](std::uint32_t i) {
      grads[i] = problem.stochastic_gradient(w, grad_rngs[i]);
      workers[i].step(grads[i], eta);
    };
    if (threads <= 1 || n == 1) {
      for (std::uint32_t i = 0; i < n; ++i) run_worker(i);
    } else {
      std::vector<std::thread> pool;
      pool.reserve(threads);
      for (unsigned c = 0; c < threads; ++c) {
        pool.emplace_back([&, c] {
          for (std::uint32_t i = c; i < n; i += threads) run_worker(i);
        });
      }
      for (std::thread& th : pool) th.join();
    }

    for (std::uint32_t i = 0; i < n; ++i) {
      MetricsRow row;
      row.t = t;
      row.worker = i;
      row.loss = loss;
      row.grad_norm_sq = grad_norm_sq;
      row.mse = workers[i].error().squared_norm() / static_cast<double>(cfg.d);
      row.frame_bits = static_cast<double>(workers[i].step_result().payload_bits);
      row.analytic_bits = analytic_bits;
      if (opts.trace_component && i == 0) {
        const std::uint32_t j = *opts.trace_component;
        row.trace_v = workers[0].momentum()[j];
        row.trace_u = workers[0].residual()[j];
        row.trace_uq = workers[0].quantized_residual()[j];
        row.trace_rhat = workers[0].prediction_before_step()[j];
      }
      out.metrics.push_back(row);
    }

    if (opts.record_history) {
      ParamVector mean_g(cfg.d);
      ParamVector mean_e(cfg.d);
      for (std::uint32_t i = 0; i < n; ++i) {
        mean_g.add(grads[i]);
        mean_e.add(workers[i].error());
      }
      mean_g.scale(1.0 / n);
      mean_e.scale(1.0 / n);
      out.history.etas.push_back(eta);
      out.history.mean_g.push_back(std::move(mean_g));
      out.history.mean_e.push_back(std::move(mean_e));
    }

    std::vector<Worker::StepResult> results;
    results.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) results.push_back(workers[i].step_result());
    master.step(results, eta);

    if (opts.record_history) out.history.w.push_back(master.parameters());
  }

  out.final_w = master.parameters();
  return out;
}

// ---------------------------------------------------------------------------
// Virtual iterates: w~_{t+1} = w_{t+1} - eta_t * mean_e_t evolves exactly
// like uncompressed SGD when momentum is off and error feedback is on.
// ---------------------------------------------------------------------------

struct VirtualIterateResult {
  std::vector<ParamVector> w_tilde;  // w~_0 ... w~_T
  double max_relative_violation = 0.0;
};

inline VirtualIterateResult virtual_iterates(const RunHistory& h) {
  if (h.beta != 0.0 || !h.error_feedback) {
    throw ConfigError("virtual_iterates requires beta = 0 and error feedback on");
  }
  if (h.w.size() != h.mean_e.size() + 1 || h.mean_e.size() != h.mean_g.size() ||
      h.etas.size() != h.mean_g.size() || h.w.empty()) {
    throw ConfigError("virtual_iterates requires a run recorded with history");
  }
  VirtualIterateResult out;
  out.w_tilde.reserve(h.w.size());
  out.w_tilde.push_back(h.w[0]);
  for (std::size_t t = 0; t < h.mean_e.size(); ++t) {
    ParamVector wt = h.w[t + 1];
    wt.add_scaled(-h.etas[t], h.mean_e[t]);

    ParamVector recurrence = out.w_tilde.back();
    recurrence.add_scaled(-h.etas[t], h.mean_g[t]);

    ParamVector diff = sub(wt, recurrence);
    const double denom = std::max(1.0, std::sqrt(wt.squared_norm()));
    out.max_relative_violation =
        std::max(out.max_relative_violation, std::sqrt(diff.squared_norm()) / denom);
    out.w_tilde.push_back(std::move(wt));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Master-side momentum variant: the worker quantizes the raw gradient (with
// optional error feedback, constant step) and the master applies the
// momentum filter to the decoded stream. Reports how far the master's
// momentum drifts from the momentum of the uncompressed stream.
// ---------------------------------------------------------------------------

struct MasterMomentumConfig {
  std::uint32_t d = 256;
  std::uint64_t iters = 200;
  double beta_tilde = 0.9;
  QuantizerSpec quantizer;
  bool error_feedback = false;
  std::uint64_t seed = 1;

  void validate() const {
    if (d < 1 || iters < 1) throw ConfigError("master momentum: d and iters must be >= 1");
    if (!(beta_tilde >= 0.0) || beta_tilde >= 1.0) {
      throw ConfigError("master momentum: beta must be in [0, 1)");
    }
    quantizer.validate(d);
  }
};

struct MasterMomentumResult {
  std::vector<double> deviation_sq;     // ||v~_t - v_ideal_t||^2
  std::vector<ParamVector> deviation;   // v~_t - v_ideal_t
  std::vector<ParamVector> errors;      // e_t
};

inline MasterMomentumResult master_momentum_sim(const MasterMomentumConfig& cfg) {
  cfg.validate();
  RngStream grad_rng = gradient_stream(cfg.seed, 0);
  RngStream worker_dither = dither_stream(cfg.seed, 0);
  RngStream master_dither = dither_stream(cfg.seed, 0);

  ParamVector v_tilde(cfg.d);
  ParamVector v_ideal(cfg.d);
  ParamVector e(cfg.d);

  MasterMomentumResult out;
  out.deviation_sq.reserve(cfg.iters);
  out.deviation.reserve(cfg.iters);
  out.errors.reserve(cfg.iters);

  for (std::uint64_t t = 0; t < cfg.iters; ++t) {
    const ParamVector g = gaussian_vector(grad_rng, cfg.d);
    ParamVector u = g;
    if (cfg.error_feedback) u.add(e);

    ParamVector utilde(cfg.d);
    switch (cfg.quantizer.kind) {
      case QuantizerKind::kTopK:
        utilde = top_k(u, cfg.quantizer.k).to_dense();
        break;
      case QuantizerKind::kTopKQ:
        utilde = top_k_q(u, cfg.quantizer.k).to_dense();
        break;
      case QuantizerKind::kScaledSign:
        utilde = scaled_sign(u).to_dense();
        break;
      case QuantizerKind::kDitheredUniform: {
        const auto q = dithered_quantize(u, cfg.quantizer.step, worker_dither);
        utilde = dithered_reconstruct(q.codes, cfg.quantizer.step, master_dither);
        break;
      }
      case QuantizerKind::kLossless:
        utilde = u;
        break;
    }

    e = sub(u, utilde);

    v_tilde.scale(cfg.beta_tilde);
    v_tilde.add_scaled(1.0 - cfg.beta_tilde, utilde);
    v_ideal.scale(cfg.beta_tilde);
    v_ideal.add_scaled(1.0 - cfg.beta_tilde, g);

    ParamVector dev = sub(v_tilde, v_ideal);
    out.deviation_sq.push_back(dev.squared_norm());
    out.deviation.push_back(std::move(dev));
    out.errors.push_back(e);
  }
  return out;
}

}  // namespace gradstream
