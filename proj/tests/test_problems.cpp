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

#include <numeric>

#include <catch2/catch_amalgamated.hpp>

#include "gradstream/core.hpp"
#include "gradstream/problems.hpp"

using namespace gradstream;

namespace {

// Central finite differences of the loss.
ParamVector finite_difference_gradient(const Problem& problem, const ParamVector& w, double h) {
  ParamVector g(w.dim());
  ParamVector probe = w;
  for (std::size_t j = 0; j < w.dim(); ++j) {
    const double orig = probe[j];
    probe[j] = orig + h;
    const double up = problem.loss(probe);
    probe[j] = orig - h;
    const double down = problem.loss(probe);
    probe[j] = orig;
    g[j] = (up - down) / (2.0 * h);
  }
  return g;
}

double relative_error(const ParamVector& a, const ParamVector& b) {
  const double diff = std::sqrt(sub(a, b).squared_norm());
  const double scale = std::max(1.0, std::sqrt(b.squared_norm()));
  return diff / scale;
}

}  // namespace

TEST_CASE("quadratic gradient and loss at the minimizer are zero") {
  ProblemSpec spec{.kind = ProblemKind::kNoisyQuadratic, .d = 8, .sigma2 = 0.0};
  const Problem p = Problem::build(spec, 1);
  const ParamVector w(8);
  REQUIRE(p.loss(w) == 0.0);
  REQUIRE(p.gradient_oracle(w).squared_norm() == 0.0);
  REQUIRE(p.optimal_value() == 0.0);
}

TEST_CASE("quadratic with sigma2=0 has deterministic gradients") {
  ProblemSpec spec{.kind = ProblemKind::kNoisyQuadratic, .d = 6, .sigma2 = 0.0};
  const Problem p = Problem::build(spec, 1);
  RngStream rng(4);
  const ParamVector w = gaussian_vector(rng, 6);
  REQUIRE(p.stochastic_gradient(w, rng) == p.gradient_oracle(w));
}

TEST_CASE("flat quadratic spectrum gives the expected norm") {
  ProblemSpec spec{.kind = ProblemKind::kNoisyQuadratic,
                   .d = 2,
                   .sigma2 = 0.0,
                   .lambda_min = 1.0,
                   .lambda_max = 1.0};
  const Problem p = Problem::build(spec, 1);
  const ParamVector w(std::vector<double>{3.0, 4.0});
  REQUIRE(p.gradient_oracle(w).squared_norm() == 25.0);
  REQUIRE(p.lipschitz() == 1.0);
}

TEST_CASE("quadratic noise variance is within 3% of sigma2") {
  ProblemSpec spec{.kind = ProblemKind::kNoisyQuadratic, .d = 16, .sigma2 = 2.5};
  const Problem p = Problem::build(spec, 1);
  RngStream rng(5);
  RngStream grad_rng(6);
  const ParamVector w = gaussian_vector(rng, 16);
  const ParamVector mean_grad = p.gradient_oracle(w);
  double acc = 0.0;
  const int samples = 100000;
  for (int s = 0; s < samples; ++s) {
    acc += sub(p.stochastic_gradient(w, grad_rng), mean_grad).squared_norm();
  }
  acc /= samples;
  REQUIRE(acc == Catch::Approx(2.5).epsilon(0.03));
}

TEST_CASE("analytic gradients match finite differences") {
  RngStream rng(7);

  ProblemSpec quad{.kind = ProblemKind::kNoisyQuadratic, .d = 10, .sigma2 = 0.0};
  const Problem p_quad = Problem::build(quad, 1);
  ProblemSpec logi{.kind = ProblemKind::kSyntheticLogistic, .d = 10};
  logi.dataset_size = 256;
  const Problem p_logi = Problem::build(logi, 2);

  for (int trial = 0; trial < 100; ++trial) {
    const ParamVector w = gaussian_vector(rng, 10);
    REQUIRE(relative_error(finite_difference_gradient(p_quad, w, 1e-5),
                           p_quad.gradient_oracle(w)) < 1e-6);
    REQUIRE(relative_error(finite_difference_gradient(p_logi, w, 1e-5),
                           p_logi.gradient_oracle(w)) < 1e-6);
  }
}

TEST_CASE("full-batch logistic gradient equals the oracle exactly") {
  ProblemSpec spec{.kind = ProblemKind::kSyntheticLogistic, .d = 12};
  spec.dataset_size = 128;
  const Problem p = Problem::build(spec, 3);
  RngStream rng(8);
  const ParamVector w = gaussian_vector(rng, 12);
  std::vector<std::uint32_t> all(p.dataset_size());
  std::iota(all.begin(), all.end(), 0u);
  REQUIRE(p.logistic_gradient(w, all) == p.gradient_oracle(w));
}

TEST_CASE("logistic gradient at zero matches the half class-mean difference") {
  ProblemSpec spec{.kind = ProblemKind::kSyntheticLogistic, .d = 6};
  spec.dataset_size = 512;
  spec.l2_reg = 0.0;
  const Problem p = Problem::build(spec, 4);
  const ParamVector w(6);
  const ParamVector g = p.gradient_oracle(w);
  const ParamVector fd = finite_difference_gradient(p, w, 1e-5);
  REQUIRE(relative_error(fd, g) < 1e-6);
  // sigma(0) = 1/2, so the gradient is -(1/2) * mean(y * x).
  REQUIRE(g.squared_norm() > 0.0);
}

TEST_CASE("empty logistic batch is rejected") {
  ProblemSpec spec{.kind = ProblemKind::kSyntheticLogistic, .d = 4};
  spec.dataset_size = 64;
  const Problem p = Problem::build(spec, 5);
  const ParamVector w(4);
  REQUIRE_THROWS_AS(p.logistic_gradient(w, {}), std::invalid_argument);
}

TEST_CASE("minibatch sampling replays per seed") {
  ProblemSpec spec{.kind = ProblemKind::kSyntheticLogistic, .d = 4};
  spec.dataset_size = 64;
  const Problem p = Problem::build(spec, 6);
  RngStream a(9);
  RngStream b(9);
  for (int t = 0; t < 20; ++t) {
    REQUIRE(p.sample_batch(a) == p.sample_batch(b));
  }
}

TEST_CASE("gaussian stream matches gaussian_vector and has no objective") {
  ProblemSpec spec{.kind = ProblemKind::kGaussianStream, .d = 33};
  const Problem p = Problem::build(spec, 7);
  REQUIRE_FALSE(p.has_objective());
  RngStream a(10);
  RngStream b(10);
  const ParamVector w(33);
  REQUIRE(p.stochastic_gradient(w, a) == gaussian_vector(b, 33));
  REQUIRE_THROWS_AS(p.loss(w), ConfigError);
}

TEST_CASE("independent worker streams are nearly uncorrelated") {
  RngStream root(11);
  RngStream s0 = root.fork(0);
  RngStream s1 = root.fork(1);
  const std::size_t n = 100000;
  double sum0 = 0.0, sum1 = 0.0, sum00 = 0.0, sum11 = 0.0, sum01 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = s0.next_gaussian();
    const double b = s1.next_gaussian();
    sum0 += a;
    sum1 += b;
    sum00 += a * a;
    sum11 += b * b;
    sum01 += a * b;
  }
  const double mean0 = sum0 / n;
  const double mean1 = sum1 / n;
  const double cov = sum01 / n - mean0 * mean1;
  const double var0 = sum00 / n - mean0 * mean0;
  const double var1 = sum11 / n - mean1 * mean1;
  REQUIRE(std::fabs(cov / std::sqrt(var0 * var1)) < 0.02);
}

TEST_CASE("problem validation rejects bad specs") {
  ProblemSpec spec{.kind = ProblemKind::kNoisyQuadratic, .d = 4};
  spec.lambda_min = 0.0;
  REQUIRE_THROWS_AS(Problem::build(spec, 1), ConfigError);
  spec.lambda_min = 0.1;
  spec.sigma2 = -1.0;
  REQUIRE_THROWS_AS(Problem::build(spec, 1), ConfigError);
}
