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
// Calibration constants for the experiment assertions, collected in one
// place. The thresholds are deliberately conservative rewrites of visual
// claims ("around half", "grows unbounded") so the checks are robust to the
// choice of seed.

#pragma once

#include <cstdint>

namespace gradstream::constants {

// --- assertion thresholds ---------------------------------------------------

// Est-K residual peak vs. the no-predictor baseline ("around half").
inline constexpr double kEstkResidualMaxRatio = 0.7;

// Error-feedback + linear predictor: ||e_100||^2 must exceed this multiple
// of ||e_10||^2 (the trace grows without bound).
inline constexpr double kEfGrowthFactor = 10.0;

// Without error feedback the same system stays bounded:
// max over t in [50, 100] of ||e_t||^2 <= this multiple of the
// median over t in [10, 50].
inline constexpr double kNoEfStabilityFactor = 3.0;

// Est-K final-quarter mean squared error vs. the no-predictor baseline
// (desk-scale stand-in for the two-orders-of-magnitude full-scale gap).
inline constexpr double kMseImprovementFactor = 0.5;

// --- default experiment parameters ------------------------------------------

// Single-worker Top-K time-series study.
inline constexpr std::uint32_t kTimeseriesDim = 1000;
inline constexpr std::uint32_t kTimeseriesK = 10;
inline constexpr std::uint64_t kTimeseriesIters = 1001;
inline constexpr double kTimeseriesBetaSmooth = 0.995;
inline constexpr double kTimeseriesBetaRough = 0.8;
inline constexpr std::uint64_t kTimeseriesSeed = 4;
inline constexpr std::uint64_t kResidualWindowBegin = 100;  // peak-ratio window

// Error-growth study (Top-K-Q + linear predictor on the Gaussian stream).
inline constexpr std::uint32_t kErrorGrowthDim = 1000;
inline constexpr std::uint32_t kErrorGrowthK = 10;
inline constexpr double kErrorGrowthBeta = 0.99;
inline constexpr std::uint64_t kErrorGrowthIters = 101;  // indices 0..100
inline constexpr std::uint64_t kErrorGrowthSeed = 7;

// Default subtractive-dither step when the scheme is dithered; the config
// format carries no step key.
inline constexpr double kDitherStepDefault = 0.5;

// Convergence study on the noisy quadratic.
inline constexpr std::uint32_t kConvergenceDim = 64;
inline constexpr std::uint32_t kConvergenceWorkers = 4;
inline constexpr std::uint64_t kConvergenceIters = 10000;
inline constexpr double kConvergenceSigma2 = 1.0;

// Mean-squared-error comparison on synthetic logistic regression.
inline constexpr std::uint32_t kMseCompareDim = 256;
inline constexpr std::uint32_t kMseCompareK = 3;
inline constexpr double kMseCompareBeta = 0.995;
inline constexpr double kMseCompareLr = 0.05;
inline constexpr std::uint64_t kMseCompareIters = 2000;
inline constexpr std::uint64_t kMseCompareSeed = 5;

}  // namespace gradstream::constants
