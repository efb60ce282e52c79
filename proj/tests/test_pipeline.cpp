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

#include <cstdlib>
#include <sstream>

#include <catch2/catch_amalgamated.hpp>

#include "gradstream/metrics.hpp"
#include "gradstream/pipeline.hpp"

using namespace gradstream;

namespace {

RunConfig base_config(std::uint32_t d) {
  RunConfig cfg;
  cfg.d = d;
  cfg.workers = 1;
  cfg.iters = 50;
  cfg.beta = 0.9;
  cfg.error_feedback = true;
  cfg.quantizer = {QuantizerKind::kTopK, std::max(1u, d / 20), 0.0};
  cfg.predictor = PredictorKind::kZero;
  cfg.schedule = {1.0, 0, 1.0};
  cfg.problem = {.kind = ProblemKind::kGaussianStream, .d = d};
  cfg.seed = 21;
  return cfg;
}

std::string metrics_to_string(std::span<const MetricsRow> rows) {
  std::ostringstream os;
  write_metrics_csv(os, rows);
  return os.str();
}

}  // namespace

TEST_CASE("first step has no error-feedback contribution") {
  RunConfig cfg = base_config(64);
  cfg.beta = 0.8;
  Worker worker(cfg, 0);
  RngStream rng(3);
  const ParamVector g = gaussian_vector(rng, 64);
  worker.step(g, 0.5);
  REQUIRE(worker.ef_input() == scaled(1.0 - cfg.beta, g));
  REQUIRE(worker.momentum() == scaled(1.0 - cfg.beta, g));
}

TEST_CASE("zero predictor leaves the residual equal to the EF output") {
  RunConfig cfg = base_config(32);
  Worker worker(cfg, 0);
  RngStream rng(8);
  for (int t = 0; t < 10; ++t) {
    worker.step(gaussian_vector(rng, 32), 1.0);
    REQUIRE(worker.residual() == worker.ef_input());
  }
}

TEST_CASE("lossless logistic run has identically zero reconstruction error") {
  RunConfig cfg;
  cfg.d = 32;
  cfg.workers = 1;
  cfg.iters = 40;
  cfg.beta = 0.99;
  cfg.error_feedback = true;
  cfg.quantizer = {QuantizerKind::kLossless, 0, 0.0};
  cfg.predictor = PredictorKind::kZero;
  cfg.schedule = {0.05, 0, 1.0};
  cfg.problem = {.kind = ProblemKind::kSyntheticLogistic, .d = 32};
  cfg.seed = 6;
  const RunResult run = run_training(cfg);
  for (const MetricsRow& row : run.metrics) REQUIRE(*row.mse == 0.0);
}

TEST_CASE("K=d top-k with zero predictor is lossless up to binary32 rounding") {
  RunConfig cfg = base_config(32);
  cfg.error_feedback = false;
  cfg.quantizer.k = 32;
  Worker worker(cfg, 0);
  RngStream rng(4);
  for (int t = 0; t < 20; ++t) {
    worker.step(gaussian_vector(rng, 32), 1.0);
    const double u_norm = worker.residual().squared_norm();
    REQUIRE(worker.error().squared_norm() <= 1e-12 * u_norm);
    const ParamVector diff = sub(worker.reconstruction(), worker.momentum());
    REQUIRE(diff.squared_norm() <= 1e-12 * worker.momentum().squared_norm());
  }
}

TEST_CASE("reconstruction identity r - r~ = e holds bitwise") {
  for (QuantizerKind kind : {QuantizerKind::kTopK, QuantizerKind::kTopKQ,
                             QuantizerKind::kScaledSign, QuantizerKind::kDitheredUniform}) {
    RunConfig cfg = base_config(48);
    cfg.quantizer.kind = kind;
    cfg.quantizer.step = 0.25;
    Worker worker(cfg, 0);
    RngStream rng(5);
    for (int t = 0; t < 25; ++t) {
      worker.step(gaussian_vector(rng, 48), 1.0);
      const ParamVector lhs = sub(worker.ef_input(), worker.reconstruction());
      REQUIRE(lhs == worker.error());
    }
  }
}

TEST_CASE("linear predictor without EF gives u = beta e + (1-beta) g") {
  RunConfig cfg = base_config(64);
  cfg.error_feedback = false;
  cfg.predictor = PredictorKind::kLinear;
  cfg.quantizer = {QuantizerKind::kTopKQ, 6, 0.0};
  Worker worker(cfg, 0);
  RngStream rng(6);

  ParamVector prev_e(64);
  bool have_prev = false;
  for (int t = 0; t < 30; ++t) {
    const ParamVector g = gaussian_vector(rng, 64);
    worker.step(g, 1.0);
    if (have_prev) {
      ParamVector expected = scaled(cfg.beta, prev_e);
      expected.add_scaled(1.0 - cfg.beta, g);
      const ParamVector diff = sub(worker.residual(), expected);
      REQUIRE(diff.max_abs() <= 1e-12);
    }
    prev_e = worker.error();
    have_prev = true;
  }
}

TEST_CASE("worker rejects invalid steps and gradients") {
  RunConfig cfg = base_config(8);
  Worker worker(cfg, 0);
  RngStream rng(7);
  const ParamVector g = gaussian_vector(rng, 8);
  REQUIRE_THROWS_AS(worker.step(g, 0.0), std::invalid_argument);
  REQUIRE_THROWS_AS(worker.step(g, -1.0), std::invalid_argument);
  ParamVector bad = g;
  bad[3] = std::numeric_limits<double>::quiet_NaN();
  REQUIRE_THROWS_AS(worker.step(bad, 1.0), NumericError);
  REQUIRE_THROWS_AS(worker.step(gaussian_vector(rng, 7), 1.0), std::invalid_argument);
}

TEST_CASE("worker and master chains stay bitwise synchronized") {
  struct Scenario {
    QuantizerKind kind;
    PredictorKind predictor;
    bool ef;
    double step;
    std::vector<std::uint32_t> blocks;
  };
  const Scenario scenarios[] = {
      {QuantizerKind::kTopK, PredictorKind::kEstK, true, 0.0, {}},
      {QuantizerKind::kTopK, PredictorKind::kEstK, true, 0.0, {20, 56}},
      {QuantizerKind::kTopKQ, PredictorKind::kLinear, false, 0.0, {}},
      {QuantizerKind::kScaledSign, PredictorKind::kLinear, false, 0.0, {}},
      {QuantizerKind::kDitheredUniform, PredictorKind::kZero, true, 0.5, {}},
  };
  for (const Scenario& sc : scenarios) {
    RunConfig cfg = base_config(96);
    cfg.workers = 3;
    cfg.beta = 0.95;
    cfg.quantizer.kind = sc.kind;
    cfg.quantizer.step = sc.step;
    cfg.predictor = sc.predictor;
    cfg.error_feedback = sc.ef;
    cfg.block_offsets = sc.blocks;
    cfg.validate();

    const Problem problem = Problem::build(cfg.problem, data_seed(cfg.seed));
    std::vector<Worker> workers;
    std::vector<RngStream> rngs;
    for (std::uint32_t i = 0; i < cfg.workers; ++i) {
      workers.emplace_back(cfg, i);
      rngs.push_back(gradient_stream(cfg.seed, i));
    }
    Master master(cfg, problem.initial_point());
    const ParamVector w(cfg.d);
    for (int t = 0; t < 30; ++t) {
      std::vector<Worker::StepResult> results;
      for (std::uint32_t i = 0; i < cfg.workers; ++i) {
        results.push_back(workers[i].step(problem.stochastic_gradient(w, rngs[i]), 1.0));
      }
      master.step(results, 1.0);
      for (std::uint32_t i = 0; i < cfg.workers; ++i) {
        REQUIRE(workers[i].chain().state_equals(master.chain(i)));
      }
    }
  }
}

TEST_CASE("master broadcast equals the componentwise average") {
  RunConfig cfg = base_config(40);
  cfg.workers = 4;
  const Problem problem = Problem::build(cfg.problem, data_seed(cfg.seed));
  std::vector<Worker> workers;
  std::vector<RngStream> rngs;
  for (std::uint32_t i = 0; i < 4; ++i) {
    workers.emplace_back(cfg, i);
    rngs.push_back(gradient_stream(cfg.seed, i));
  }
  Master master(cfg, problem.initial_point());
  const ParamVector w(cfg.d);
  for (int t = 0; t < 10; ++t) {
    std::vector<Worker::StepResult> results;
    for (std::uint32_t i = 0; i < 4; ++i) {
      results.push_back(workers[i].step(problem.stochastic_gradient(w, rngs[i]), 1.0));
    }
    const ParamVector& mean = master.step(results, 1.0);
    ParamVector expected(cfg.d);
    for (const Worker& worker : workers) expected.add(worker.reconstruction());
    expected.scale(0.25);
    REQUIRE(sub(mean, expected).max_abs() <= 1e-15);
  }
}

TEST_CASE("identical worker streams give a mean equal to any one of them") {
  RunConfig cfg = base_config(24);
  cfg.workers = 3;
  // all workers constructed with the same id share gradients and dither
  const Problem problem = Problem::build(cfg.problem, data_seed(cfg.seed));
  std::vector<Worker> workers;
  std::vector<RngStream> rngs;
  for (std::uint32_t i = 0; i < 3; ++i) {
    workers.emplace_back(cfg, 0);
    rngs.push_back(gradient_stream(cfg.seed, 0));
  }
  Master master(cfg, problem.initial_point());
  const ParamVector w(cfg.d);
  std::vector<Worker::StepResult> results;
  for (std::uint32_t i = 0; i < 3; ++i) {
    results.push_back(workers[i].step(problem.stochastic_gradient(w, rngs[i]), 1.0));
  }
  const ParamVector& mean = master.step(results, 1.0);
  REQUIRE(sub(mean, workers[0].reconstruction()).max_abs() <= 1e-15);
}

TEST_CASE("master rejects a worker-count mismatch") {
  RunConfig cfg = base_config(16);
  cfg.workers = 2;
  const Problem problem = Problem::build(cfg.problem, data_seed(cfg.seed));
  Master master(cfg, problem.initial_point());
  Worker worker(cfg, 0);
  RngStream rng = gradient_stream(cfg.seed, 0);
  std::vector<Worker::StepResult> results;
  results.push_back(worker.step(gaussian_vector(rng, 16), 1.0));
  REQUIRE_THROWS_AS(master.step(results, 1.0), DecodeError);
}

TEST_CASE("lossless run with beta=0 matches plain SGD") {
  RunConfig cfg;
  cfg.d = 12;
  cfg.workers = 1;
  cfg.iters = 40;
  cfg.beta = 0.0;
  cfg.error_feedback = false;
  cfg.quantizer = {QuantizerKind::kLossless, 0, 0.0};
  cfg.predictor = PredictorKind::kZero;
  cfg.schedule = {0.05, 0, 1.0};
  cfg.problem = {.kind = ProblemKind::kNoisyQuadratic, .d = 12, .sigma2 = 0.5};
  cfg.seed = 33;

  const RunResult run = run_training(cfg);

  // reference: plain SGD with the identical gradient stream
  const Problem problem = Problem::build(cfg.problem, data_seed(cfg.seed));
  RngStream rng = gradient_stream(cfg.seed, 0);
  ParamVector w = problem.initial_point();
  for (std::uint64_t t = 0; t < cfg.iters; ++t) {
    w.add_scaled(-0.05, problem.stochastic_gradient(w, rng));
  }
  REQUIRE(sub(run.final_w, w).max_abs() <= 1e-12);
}

TEST_CASE("momentum descent on the noiseless quadratic is monotone") {
  RunConfig cfg;
  cfg.d = 16;
  cfg.workers = 1;
  cfg.iters = 200;
  cfg.beta = 0.9;
  cfg.error_feedback = false;
  cfg.quantizer = {QuantizerKind::kLossless, 0, 0.0};
  cfg.predictor = PredictorKind::kZero;
  cfg.schedule = {0.05, 0, 1.0};
  cfg.problem = {.kind = ProblemKind::kNoisyQuadratic, .d = 16, .sigma2 = 0.0};
  cfg.seed = 1;

  const RunResult run = run_training(cfg);
  double prev = std::numeric_limits<double>::infinity();
  for (const MetricsRow& row : run.metrics) {
    REQUIRE(*row.loss <= prev + 1e-15);
    prev = *row.loss;
  }
  REQUIRE(prev < 0.01 * *run.metrics.front().loss);
}

TEST_CASE("run_training is deterministic") {
  RunConfig cfg = base_config(64);
  cfg.workers = 2;
  cfg.quantizer.kind = QuantizerKind::kTopKQ;
  cfg.predictor = PredictorKind::kLinear;
  const RunResult a = run_training(cfg);
  const RunResult b = run_training(cfg);
  REQUIRE(metrics_to_string(a.metrics) == metrics_to_string(b.metrics));
  REQUIRE(a.final_w == b.final_w);
}

TEST_CASE("results are independent of the thread schedule") {
  RunConfig cfg = base_config(64);
  cfg.workers = 5;
  cfg.quantizer = {QuantizerKind::kDitheredUniform, 0, 0.3};
  cfg.problem.kind = ProblemKind::kNoisyQuadratic;
  cfg.problem.sigma2 = 1.0;
  cfg.beta = 0.0;
  cfg.schedule = {0.02, 0, 1.0};

  setenv("GRADSTREAM_THREADS", "1", 1);
  const RunResult serial = run_training(cfg);
  setenv("GRADSTREAM_THREADS", "4", 1);
  const RunResult parallel = run_training(cfg);
  unsetenv("GRADSTREAM_THREADS");
  REQUIRE(serial.final_w == parallel.final_w);
  REQUIRE(metrics_to_string(serial.metrics) == metrics_to_string(parallel.metrics));
}

TEST_CASE("blockwise compression emits one frame per block and keeps sync") {
  RunConfig cfg = base_config(100);
  cfg.quantizer = {QuantizerKind::kTopK, 10, 0.0};
  cfg.block_offsets = {30, 50};
  cfg.validate();
  Worker worker(cfg, 0);
  RngStream rng(44);
  const auto& result = worker.step(gaussian_vector(rng, 100), 1.0);
  REQUIRE(result.frames.size() == 3);
  // block lengths 30, 20, 50 share K=10 proportionally: 3, 2, 5
  REQUIRE(result.frames[0].k == 3);
  REQUIRE(result.frames[1].k == 2);
  REQUIRE(result.frames[2].k == 5);
  std::uint64_t bits = 0;
  for (const auto& f : result.frames) bits += f.payload_bits;
  REQUIRE(result.payload_bits == bits);

  // every kept value is the binary32 rounding of the residual there
  const ParamVector& u = worker.residual();
  const ParamVector& uq = worker.quantized_residual();
  std::size_t kept = 0;
  for (std::size_t j = 0; j < 100; ++j) {
    if (uq[j] != 0.0) {
      ++kept;
      REQUIRE(uq[j] == static_cast<double>(static_cast<float>(u[j])));
    }
  }
  REQUIRE(kept == 10);
}

TEST_CASE("virtual iterates follow the uncompressed SGD recurrence") {
  RunConfig cfg;
  cfg.d = 32;
  cfg.workers = 2;
  cfg.iters = 1000;
  cfg.beta = 0.0;
  cfg.error_feedback = true;
  cfg.quantizer = {QuantizerKind::kDitheredUniform, 0, 0.5};
  cfg.predictor = PredictorKind::kZero;
  cfg.schedule = {0.05, 100, 0.7};  // exercise a decaying schedule
  cfg.problem = {.kind = ProblemKind::kNoisyQuadratic, .d = 32, .sigma2 = 1.0};
  cfg.seed = 9;

  RunOptions opts;
  opts.record_history = true;
  const RunResult run = run_training(cfg, opts);
  const VirtualIterateResult v = virtual_iterates(run.history);
  REQUIRE(v.w_tilde.size() == cfg.iters + 1);
  REQUIRE(v.w_tilde[0] == run.history.w[0]);
  REQUIRE(v.max_relative_violation <= 1e-9);
}

TEST_CASE("virtual iterates equal the raw iterates in lossless mode") {
  RunConfig cfg;
  cfg.d = 8;
  cfg.workers = 1;
  cfg.iters = 50;
  cfg.beta = 0.0;
  cfg.error_feedback = true;
  cfg.quantizer = {QuantizerKind::kLossless, 0, 0.0};
  cfg.predictor = PredictorKind::kZero;
  cfg.schedule = {0.1, 0, 1.0};
  cfg.problem = {.kind = ProblemKind::kNoisyQuadratic, .d = 8, .sigma2 = 1.0};
  cfg.seed = 10;

  RunOptions opts;
  opts.record_history = true;
  const RunResult run = run_training(cfg, opts);
  const VirtualIterateResult v = virtual_iterates(run.history);
  for (std::size_t t = 0; t < v.w_tilde.size(); ++t) {
    REQUIRE(v.w_tilde[t] == run.history.w[t]);
  }
}

TEST_CASE("virtual iterates reject momentum runs") {
  RunConfig cfg = base_config(8);
  cfg.beta = 0.5;
  RunOptions opts;
  opts.record_history = true;
  const RunResult run = run_training(cfg, opts);
  REQUIRE_THROWS_AS(virtual_iterates(run.history), ConfigError);
}

TEST_CASE("master momentum deviation is zero for a lossless stream") {
  MasterMomentumConfig cfg;
  cfg.d = 32;
  cfg.iters = 100;
  cfg.beta_tilde = 0.9;
  cfg.quantizer = {QuantizerKind::kLossless, 0, 0.0};
  const MasterMomentumResult result = master_momentum_sim(cfg);
  for (double dev : result.deviation_sq) REQUIRE(dev == 0.0);
}

TEST_CASE("master momentum deviation matches the geometric error accumulation") {
  MasterMomentumConfig cfg;
  cfg.d = 64;
  cfg.iters = 150;
  cfg.beta_tilde = 0.9;
  cfg.quantizer = {QuantizerKind::kTopK, 4, 0.0};
  cfg.error_feedback = false;
  const MasterMomentumResult result = master_momentum_sim(cfg);

  // accumulate S_t = sum_k beta^(t-k) e_k; deviation must equal -(1-beta) S_t
  ParamVector acc(cfg.d);
  for (std::size_t t = 0; t < result.errors.size(); ++t) {
    acc.scale(cfg.beta_tilde);
    acc.add(result.errors[t]);
    ParamVector expected = scaled(-(1.0 - cfg.beta_tilde), acc);
    REQUIRE(sub(expected, result.deviation[t]).max_abs() <= 1e-10);
    REQUIRE(result.deviation_sq[t] ==
            Catch::Approx(expected.squared_norm()).epsilon(1e-9).margin(1e-12));
  }
}

TEST_CASE("master momentum deviation with EF matches the two-term form") {
  MasterMomentumConfig cfg;
  cfg.d = 64;
  cfg.iters = 150;
  cfg.beta_tilde = 0.9;
  cfg.quantizer = {QuantizerKind::kTopK, 4, 0.0};
  cfg.error_feedback = true;
  const MasterMomentumResult result = master_momentum_sim(cfg);

  // deviation_t = -(1-b) e_t + (1-b)^2 sum_{k<t} b^(t-1-k) e_k
  const double b = cfg.beta_tilde;
  ParamVector hist(cfg.d);  // sum_{k <= t-1} b^(t-1-k) e_k
  for (std::size_t t = 0; t < result.errors.size(); ++t) {
    if (t > 0) {
      hist.scale(b);
      hist.add(result.errors[t - 1]);
    }
    ParamVector expected = scaled(-(1.0 - b), result.errors[t]);
    expected.add_scaled((1.0 - b) * (1.0 - b), hist);
    REQUIRE(sub(expected, result.deviation[t]).max_abs() <= 1e-10);
  }
}

TEST_CASE("config validation catches inconsistent setups") {
  RunConfig cfg = base_config(16);
  cfg.predictor = PredictorKind::kEstK;
  cfg.quantizer = {QuantizerKind::kScaledSign, 0, 0.0};
  REQUIRE_THROWS_AS(cfg.validate(), ConfigError);

  cfg = base_config(16);
  cfg.beta = 1.0;
  REQUIRE_THROWS_AS(cfg.validate(), ConfigError);

  cfg = base_config(16);
  cfg.schedule.lr = 0.0;
  REQUIRE_THROWS_AS(cfg.validate(), ConfigError);

  cfg = base_config(16);
  cfg.block_offsets = {16};
  REQUIRE_THROWS_AS(cfg.validate(), ConfigError);

  cfg = base_config(16);
  cfg.problem.d = 8;
  REQUIRE_THROWS_AS(cfg.validate(), ConfigError);

  cfg = base_config(16);
  cfg.quantizer = {QuantizerKind::kLossless, 0, 0.0};
  cfg.block_offsets = {8};
  REQUIRE_THROWS_AS(cfg.validate(), ConfigError);
}
