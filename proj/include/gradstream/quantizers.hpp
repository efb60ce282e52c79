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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "gradstream/core.hpp"

namespace gradstream {

enum class QuantizerKind : std::uint8_t {
  kTopK,
  kTopKQ,
  kScaledSign,
  kDitheredUniform,
  // Identity map with no 32-bit value rounding. Exists for exact-equality
  // baselines; never produces frames.
  kLossless,
};

inline const char* to_string(QuantizerKind k) {
  switch (k) {
    case QuantizerKind::kTopK: return "topk";
    case QuantizerKind::kTopKQ: return "topkq";
    case QuantizerKind::kScaledSign: return "scaledsign";
    case QuantizerKind::kDitheredUniform: return "dithered";
    case QuantizerKind::kLossless: return "lossless";
  }
  return "?";
}

struct QuantizerSpec {
  QuantizerKind kind = QuantizerKind::kTopK;
  std::uint32_t k = 0;     // Top-K family only
  double step = 0.0;       // dithered uniform only

  void validate(std::uint32_t dim) const {
    switch (kind) {
      case QuantizerKind::kTopK:
      case QuantizerKind::kTopKQ:
        if (k < 1 || k > dim) {
          throw std::invalid_argument("QuantizerSpec: K must satisfy 1 <= K <= d");
        }
        break;
      case QuantizerKind::kDitheredUniform:
        if (!(step > 0.0)) {
          throw std::invalid_argument("QuantizerSpec: step must be > 0");
        }
        break;
      case QuantizerKind::kScaledSign:
      case QuantizerKind::kLossless:
        break;
    }
  }
};

// Resolves an absolute-or-fractional K against dimension d. Fractions round
// to nearest, never below 1.
inline std::uint32_t resolve_k(std::uint32_t d, std::optional<std::uint32_t> k,
                               std::optional<double> k_frac) {
  if (k.has_value() == k_frac.has_value()) {
    throw ConfigError("exactly one of k and k_frac must be given");
  }
  if (k) {
    if (*k < 1 || *k > d) throw ConfigError("k out of range [1, d]");
    return *k;
  }
  if (!(*k_frac > 0.0) || *k_frac > 1.0) throw ConfigError("k_frac out of range (0, 1]");
  const auto rounded = static_cast<std::uint32_t>(std::llround(*k_frac * d));
  return std::min(d, std::max<std::uint32_t>(1, rounded));
}

namespace detail {

// Indices of the K largest-magnitude components. Ties break toward the
// lower index so results are identical on every platform.
inline std::vector<std::uint32_t> top_k_indices(const ParamVector& u, std::uint32_t k) {
  const std::size_t d = u.dim();
  if (k < 1 || k > d) throw std::invalid_argument("top_k: K must satisfy 1 <= K <= d");
  std::vector<std::uint32_t> idx(d);
  std::iota(idx.begin(), idx.end(), 0u);
  const auto larger = [&u](std::uint32_t a, std::uint32_t b) {
    const double ma = std::fabs(u[a]);
    const double mb = std::fabs(u[b]);
    if (ma != mb) return ma > mb;
    return a < b;
  };
  if (k < d) std::nth_element(idx.begin(), idx.begin() + k, idx.end(), larger);
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace detail

// Keeps the K components largest in magnitude, zeroing the rest. Kept
// values are passed through unmodified.
inline SparseUpdate top_k(const ParamVector& u, std::uint32_t k) {
  const auto idx = detail::top_k_indices(u, k);
  std::vector<SparseEntry> entries;
  entries.reserve(idx.size());
  for (std::uint32_t i : idx) entries.push_back({i, u[i]});
  return SparseUpdate(static_cast<std::uint32_t>(u.dim()), std::move(entries));
}

// Top-K with the kept values collapsed to two reconstruction levels: the
// mean of the positive kept values and the mean of the negative kept
// values. Zeros count as positive. Minimizes squared error within each
// sign class for the fixed support.
inline SparseUpdate top_k_q(const ParamVector& u, std::uint32_t k) {
  const auto idx = detail::top_k_indices(u, k);
  double pos_sum = 0.0, neg_sum = 0.0;
  std::size_t pos_n = 0, neg_n = 0;
  for (std::uint32_t i : idx) {
    if (u[i] < 0.0) {
      neg_sum += u[i];
      ++neg_n;
    } else {
      pos_sum += u[i];
      ++pos_n;
    }
  }
  const double pos_level = pos_n > 0 ? pos_sum / static_cast<double>(pos_n) : 0.0;
  const double neg_level = neg_n > 0 ? neg_sum / static_cast<double>(neg_n) : 0.0;
  std::vector<SparseEntry> entries;
  entries.reserve(idx.size());
  for (std::uint32_t i : idx) {
    entries.push_back({i, u[i] < 0.0 ? neg_level : pos_level});
  }
  return SparseUpdate(static_cast<std::uint32_t>(u.dim()), std::move(entries));
}

// Two-level quantizer a * sign(u) with a = ||u||_1 / d. Sign of zero is +1.
struct SignQuantized {
  double scale = 0.0;
  std::vector<std::int8_t> signs;  // +1 / -1

  ParamVector to_dense() const {
    ParamVector out(signs.size());
    for (std::size_t i = 0; i < signs.size(); ++i) {
      out[i] = scale * static_cast<double>(signs[i]);
    }
    return out;
  }
};

inline SignQuantized scaled_sign(const ParamVector& u) {
  SignQuantized out;
  out.signs.resize(u.dim());
  out.scale = u.dim() > 0 ? u.l1_norm() / static_cast<double>(u.dim()) : 0.0;
  for (std::size_t i = 0; i < u.dim(); ++i) {
    out.signs[i] = u[i] < 0.0 ? -1 : 1;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Subtractive-dither uniform quantizer.
//
// Each component is coded as q = round(u/step + z) with z ~ Uniform(-1/2,
// 1/2) and reconstructed as step * (q - z). The coding error is uniform on
// (-step/2, step/2) independent of the input, so the mean squared error of
// a d-vector is d * step^2 / 12. The dither stream must be replayed with
// identical state by whoever reconstructs.
// ---------------------------------------------------------------------------

struct DitheredQuantized {
  std::vector<std::int64_t> codes;
  ParamVector recon;
};

inline DitheredQuantized dithered_quantize(const ParamVector& u, double step, RngStream& dither) {
  if (!(step > 0.0)) throw std::invalid_argument("dithered_quantize: step must be > 0");
  DitheredQuantized out;
  out.codes.resize(u.dim());
  out.recon = ParamVector(u.dim());
  for (std::size_t i = 0; i < u.dim(); ++i) {
    const double z = dither.next_unit() - 0.5;
    const double y = u[i] / step + z;
    if (!(std::fabs(y) < 9.0e18)) {
      throw NumericError("dithered_quantize: value exceeds integer code range");
    }
    const std::int64_t q = std::llround(y);
    out.codes[i] = q;
    out.recon[i] = step * (static_cast<double>(q) - z);
  }
  return out;
}

inline ParamVector dithered_reconstruct(std::span<const std::int64_t> codes, double step,
                                        RngStream& dither) {
  if (!(step > 0.0)) throw std::invalid_argument("dithered_reconstruct: step must be > 0");
  ParamVector out(codes.size());
  for (std::size_t i = 0; i < codes.size(); ++i) {
    const double z = dither.next_unit() - 0.5;
    out[i] = step * (static_cast<double>(codes[i]) - z);
  }
  return out;
}

inline ParamVector dithered_uniform(const ParamVector& u, double step, RngStream& dither) {
  return dithered_quantize(u, step, dither).recon;
}

// ||u - q||^2 <= (1 - delta) * ||u||^2 ?
inline bool delta_check(const ParamVector& u, const ParamVector& q_out, double delta) {
  if (!(delta > 0.0) || delta > 1.0) throw std::domain_error("delta_check: delta in (0, 1]");
  const ParamVector err = sub(u, q_out);
  return err.squared_norm() <= (1.0 - delta) * u.squared_norm();
}

}  // namespace gradstream
