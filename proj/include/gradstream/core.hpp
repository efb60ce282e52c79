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
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace gradstream {

// Error raised when a configuration is invalid or a runner is asked to
// operate outside its supported setting.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Error raised when a bit stream or frame cannot be decoded.
class DecodeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Error raised when a numeric quantity leaves its valid range (NaN/Inf
// where finite values are required, integer overflow in quantization).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Deterministic random streams.
//
// Counter-based generator: output i is splitmix64_mix(base + i * gamma),
// where base is a scrambled function of the seed. The sequence for a given
// seed is a pure function of (seed, counter) and is identical on every
// platform with 64-bit integers. Unit tests pin golden values; changing
// the mixing constants is a format-breaking change.
// ---------------------------------------------------------------------------

class RngStream {
 public:
  RngStream() : RngStream(0) {}
  explicit RngStream(std::uint64_t seed) : base_(mix(seed + kGamma)), counter_(0) {}

  std::uint64_t next_u64() { return mix(base_ + (++counter_) * kGamma); }

  // Uniform on [0, 1) with 53 random bits.
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform on [-1, 1).
  double next_symmetric() { return 2.0 * next_unit() - 1.0; }

  // Standard normal via the Marsaglia polar method. Consumes a variable
  // number of uniforms; the second variate of the accepted pair is returned
  // alongside the first so vector fills do not waste draws.
  std::pair<double, double> next_gaussian_pair() {
    for (;;) {
      const double a = next_symmetric();
      const double b = next_symmetric();
      const double s = a * a + b * b;
      if (s > 0.0 && s < 1.0) {
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        return {a * f, b * f};
      }
    }
  }

  double next_gaussian() { return next_gaussian_pair().first; }

  // Derives an independent stream for a substream id (worker index, dither
  // channel). Forking is deterministic and commutes with nothing: fork(k)
  // depends only on (seed, k), not on how far this stream has advanced.
  RngStream fork(std::uint64_t stream_id) const {
    return RngStream(mix(base_ ^ mix(stream_id + kGamma)));
  }

  std::uint64_t counter() const { return counter_; }

  friend bool operator==(const RngStream& a, const RngStream& b) {
    return a.base_ == b.base_ && a.counter_ == b.counter_;
  }

 private:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  std::uint64_t base_;
  std::uint64_t counter_;
};

// ---------------------------------------------------------------------------
// Dense parameter-space vector. Scalars are 64-bit floats everywhere in the
// signal chain; 32-bit floats appear only inside encoded frames.
// ---------------------------------------------------------------------------

class ParamVector {
 public:
  ParamVector() = default;
  explicit ParamVector(std::size_t dim, double value = 0.0) : data_(dim, value) {}
  explicit ParamVector(std::vector<double> values) : data_(std::move(values)) {}

  std::size_t dim() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<const double> values() const { return data_; }
  std::span<double> values() { return data_; }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  void add(const ParamVector& other) {
    check_same_dim(other);
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  }

  void sub(const ParamVector& other) {
    check_same_dim(other);
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  }

  // this += a * other
  void add_scaled(double a, const ParamVector& other) {
    check_same_dim(other);
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += a * other.data_[i];
  }

  void scale(double a) {
    for (double& v : data_) v *= a;
  }

  double dot(const ParamVector& other) const {
    check_same_dim(other);
    double acc = 0.0;
    for (std::size_t i = 0; i < data_.size(); ++i) acc += data_[i] * other.data_[i];
    return acc;
  }

  double squared_norm() const {
    double acc = 0.0;
    for (double v : data_) acc += v * v;
    return acc;
  }

  double l1_norm() const {
    double acc = 0.0;
    for (double v : data_) acc += std::fabs(v);
    return acc;
  }

  double max_abs() const {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::fabs(v));
    return m;
  }

  bool all_finite() const {
    for (double v : data_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  friend bool operator==(const ParamVector& a, const ParamVector& b) {
    return a.data_ == b.data_;
  }

 private:
  void check_same_dim(const ParamVector& other) const {
    if (other.data_.size() != data_.size()) {
      throw std::invalid_argument("ParamVector dimension mismatch: " +
                                  std::to_string(data_.size()) + " vs " +
                                  std::to_string(other.data_.size()));
    }
  }

  std::vector<double> data_;
};

inline ParamVector add(const ParamVector& a, const ParamVector& b) {
  ParamVector out = a;
  out.add(b);
  return out;
}

inline ParamVector sub(const ParamVector& a, const ParamVector& b) {
  ParamVector out = a;
  out.sub(b);
  return out;
}

inline ParamVector scaled(double a, const ParamVector& x) {
  ParamVector out = x;
  out.scale(a);
  return out;
}

// ---------------------------------------------------------------------------
// Sparse update: the K surviving (index, value) pairs of a sparsifying
// quantizer over a vector of dimension dim. Indices strictly increasing.
// ---------------------------------------------------------------------------

struct SparseEntry {
  std::uint32_t index = 0;
  double value = 0.0;

  friend bool operator==(const SparseEntry&, const SparseEntry&) = default;
};

class SparseUpdate {
 public:
  SparseUpdate() = default;

  SparseUpdate(std::uint32_t dim, std::vector<SparseEntry> entries)
      : dim_(dim), entries_(std::move(entries)) {
    validate();
  }

  std::uint32_t dim() const { return dim_; }
  const std::vector<SparseEntry>& entries() const { return entries_; }

  ParamVector to_dense() const {
    ParamVector out(dim_);
    for (const SparseEntry& e : entries_) out[e.index] = e.value;
    return out;
  }

  void scatter_into(ParamVector& out) const {
    if (out.dim() != dim_) throw std::invalid_argument("scatter_into: dimension mismatch");
    for (const SparseEntry& e : entries_) out[e.index] = e.value;
  }

  friend bool operator==(const SparseUpdate& a, const SparseUpdate& b) {
    return a.dim_ == b.dim_ && a.entries_ == b.entries_;
  }

 private:
  void validate() const {
    if (entries_.size() > dim_) {
      throw std::invalid_argument("SparseUpdate: more entries than dimensions");
    }
    std::uint32_t prev = 0;
    bool first = true;
    for (const SparseEntry& e : entries_) {
      if (e.index >= dim_) throw std::invalid_argument("SparseUpdate: index out of range");
      if (!first && e.index <= prev) {
        throw std::invalid_argument("SparseUpdate: indices must be strictly increasing");
      }
      prev = e.index;
      first = false;
    }
  }

  std::uint32_t dim_ = 0;
  std::vector<SparseEntry> entries_;
};

// d i.i.d. standard-normal samples; advances rng deterministically.
inline ParamVector gaussian_vector(RngStream& rng, std::size_t d) {
  if (d == 0) throw std::invalid_argument("gaussian_vector: dimension must be >= 1");
  ParamVector out(d);
  std::size_t i = 0;
  while (i + 1 < d) {
    const auto [a, b] = rng.next_gaussian_pair();
    out[i] = a;
    out[i + 1] = b;
    i += 2;
  }
  if (i < d) out[i] = rng.next_gaussian();
  return out;
}

}  // namespace gradstream
