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
// Lossless frame codec for quantizer outputs, plus the analytic rate
// formulas used for reporting.
//
// Frame layout (all multi-byte header integers little-endian):
//
//   offset  size  field
//   0       4     magic "GCF1"
//   4       1     scheme code (0=TopK, 1=TopKQ, 2=ScaledSign, 3=Dithered)
//   5       4     d   (vector dimension)
//   9       4     K   (kept components; 0 for dense schemes)
//   13      4     m   (Golomb parameter; 0 for dense schemes)
//   17      8     payload length in bits
//   25      -     payload, MSB-first within bytes, zero-padded
//
// Payloads:
//   TopK        Golomb-coded index gaps, then K binary32 values in index
//               order.
//   TopKQ       Golomb-coded index gaps, then K level-assignment bits
//               (0 = positive level, 1 = negative level), then the two
//               binary32 levels (positive first).
//   ScaledSign  One binary32 scale, then d sign bits (1 = negative).
//   Dithered    d integer codes, zigzag-mapped then Elias-gamma coded.
//
// Index gaps are the first index followed by successive differences minus
// one. Each gap N is Golomb coded with parameter m: floor(N/m) one-bits, a
// zero terminator, then N mod m in truncated binary.

#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <span>
#include <variant>
#include <vector>

#include "gradstream/bitstream.hpp"
#include "gradstream/core.hpp"
#include "gradstream/quantizers.hpp"

namespace gradstream {

enum class SchemeCode : std::uint8_t {
  kTopK = 0,
  kTopKQ = 1,
  kScaledSign = 2,
  kDitheredUniform = 3,
};

inline constexpr std::size_t kFrameHeaderBytes = 25;
inline constexpr char kFrameMagic[4] = {'G', 'C', 'F', '1'};

// ---------------------------------------------------------------------------
// Golomb coding of sorted index sets.
// ---------------------------------------------------------------------------

// Near-optimal parameter for gaps of a uniformly random K-subset of [0, d):
// m = max(1, round(-1 / log2(1 - K/d))).
inline std::uint32_t golomb_parameter(std::uint32_t k, std::uint32_t d) {
  if (k == 0 || d == 0 || k > d) throw std::invalid_argument("golomb_parameter: need 1 <= K <= d");
  if (k == d) return 1;
  const double p = static_cast<double>(k) / static_cast<double>(d);
  const double m = -1.0 / std::log2(1.0 - p);
  if (!(m >= 1.0)) return 1;
  return static_cast<std::uint32_t>(std::llround(m));
}

namespace detail {

inline void golomb_put(BitWriter& w, std::uint64_t n, std::uint32_t m) {
  std::uint64_t q = n / m;
  const std::uint64_t r = n % m;
  while (q--) w.put_bit(true);
  w.put_bit(false);
  if (m == 1) return;
  // truncated binary remainder
  const unsigned b = static_cast<unsigned>(std::bit_width(m - 1));
  const std::uint64_t cutoff = (1ull << b) - m;
  if (r < cutoff) {
    w.put_bits(r, b - 1);
  } else {
    w.put_bits(r + cutoff, b);
  }
}

inline std::uint64_t golomb_get(BitReader& rd, std::uint32_t m) {
  std::uint64_t q = 0;
  while (rd.get_bit()) {
    if (++q > (1ull << 40)) throw DecodeError("golomb_get: runaway unary prefix");
  }
  if (m == 1) return q;
  const unsigned b = static_cast<unsigned>(std::bit_width(std::uint32_t(m - 1)));
  const std::uint64_t cutoff = (1ull << b) - m;
  std::uint64_t r = b > 1 ? rd.get_bits(b - 1) : 0;
  if (r >= cutoff) {
    r = (r << 1) | static_cast<std::uint64_t>(rd.get_bit());
    r -= cutoff;
  }
  return q * m + r;
}

// Elias-gamma code for n >= 1: floor(log2 n) zero bits then n in binary.
inline void elias_gamma_put(BitWriter& w, std::uint64_t n) {
  const unsigned width = static_cast<unsigned>(std::bit_width(n));
  for (unsigned i = 1; i < width; ++i) w.put_bit(false);
  w.put_bits(n, width);
}

inline std::uint64_t elias_gamma_get(BitReader& rd) {
  unsigned zeros = 0;
  while (!rd.get_bit()) {
    if (++zeros > 63) throw DecodeError("elias_gamma_get: runaway prefix");
  }
  std::uint64_t n = 1;
  for (unsigned i = 0; i < zeros; ++i) {
    n = (n << 1) | static_cast<std::uint64_t>(rd.get_bit());
  }
  return n;
}

inline std::uint64_t zigzag(std::int64_t v) {
  return (static_cast<std::uint64_t>(v) << 1) ^ static_cast<std::uint64_t>(v >> 63);
}

inline std::int64_t unzigzag(std::uint64_t v) {
  return static_cast<std::int64_t>(v >> 1) ^ -static_cast<std::int64_t>(v & 1);
}

inline void check_indices(std::span<const std::uint32_t> indices, std::uint32_t d) {
  std::uint32_t prev = 0;
  bool first = true;
  for (std::uint32_t idx : indices) {
    if (idx >= d) throw std::invalid_argument("golomb_encode: index out of range");
    if (!first && idx <= prev) {
      throw std::invalid_argument("golomb_encode: indices must be strictly increasing");
    }
    prev = idx;
    first = false;
  }
}

}  // namespace detail

struct BitBuffer {
  std::vector<std::uint8_t> bytes;
  std::uint64_t bit_count = 0;
};

inline BitBuffer golomb_encode(std::span<const std::uint32_t> indices, std::uint32_t d,
                               std::uint32_t m) {
  if (m < 1) throw std::invalid_argument("golomb_encode: m must be >= 1");
  detail::check_indices(indices, d);
  BitWriter w;
  std::uint32_t prev = 0;
  bool first = true;
  for (std::uint32_t idx : indices) {
    const std::uint64_t gap = first ? idx : idx - prev - 1;
    detail::golomb_put(w, gap, m);
    prev = idx;
    first = false;
  }
  BitBuffer out;
  out.bit_count = w.bit_count();
  out.bytes = w.take();
  return out;
}

inline std::vector<std::uint32_t> golomb_decode(const BitBuffer& buf, std::uint32_t count,
                                                std::uint32_t d, std::uint32_t m) {
  if (m < 1) throw DecodeError("golomb_decode: m must be >= 1");
  BitReader rd(buf.bytes, buf.bit_count);
  std::vector<std::uint32_t> indices;
  indices.reserve(count);
  std::uint64_t prev = 0;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint64_t gap = detail::golomb_get(rd, m);
    const std::uint64_t idx = i == 0 ? gap : prev + gap + 1;
    if (idx >= d) throw DecodeError("golomb_decode: index out of range");
    indices.push_back(static_cast<std::uint32_t>(idx));
    prev = idx;
  }
  return indices;
}

// ---------------------------------------------------------------------------
// Frames.
// ---------------------------------------------------------------------------

struct CompressedFrame {
  SchemeCode scheme = SchemeCode::kTopK;
  std::uint32_t d = 0;
  std::uint32_t k = 0;
  std::uint32_t m = 0;
  std::uint64_t payload_bits = 0;
  std::vector<std::uint8_t> payload;

  std::vector<std::uint8_t> to_bytes() const {
    std::vector<std::uint8_t> out;
    out.reserve(kFrameHeaderBytes + payload.size());
    out.insert(out.end(), kFrameMagic, kFrameMagic + 4);
    out.push_back(static_cast<std::uint8_t>(scheme));
    const auto put_u32 = [&out](std::uint32_t v) {
      for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    };
    put_u32(d);
    put_u32(k);
    put_u32(m);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(payload_bits >> (8 * i)));
    out.insert(out.end(), payload.begin(), payload.end());
    return out;
  }
};

// Decoded frame contents. For TopK the sparse values are the binary32
// roundings of the originals; for TopKQ they are the two levels.
struct DecodedFrame {
  SchemeCode scheme = SchemeCode::kTopK;
  std::uint32_t d = 0;
  std::uint32_t k = 0;
  std::uint32_t m = 0;
  std::variant<SparseUpdate, SignQuantized, std::vector<std::int64_t>> payload;

  const SparseUpdate& sparse() const { return std::get<SparseUpdate>(payload); }
  const SignQuantized& sign() const { return std::get<SignQuantized>(payload); }
  const std::vector<std::int64_t>& codes() const {
    return std::get<std::vector<std::int64_t>>(payload);
  }
};

namespace detail {

inline CompressedFrame finish_frame(SchemeCode scheme, std::uint32_t d, std::uint32_t k,
                                    std::uint32_t m, BitWriter&& w) {
  CompressedFrame f;
  f.scheme = scheme;
  f.d = d;
  f.k = k;
  f.m = m;
  f.payload_bits = w.bit_count();
  f.payload = w.take();
  return f;
}

inline float to_f32(double v) { return static_cast<float>(v); }

}  // namespace detail

inline CompressedFrame encode_topk_frame(const SparseUpdate& u) {
  const std::uint32_t d = u.dim();
  const auto k = static_cast<std::uint32_t>(u.entries().size());
  if (k == 0 || k > d) throw std::invalid_argument("encode_topk_frame: need 1 <= K <= d");
  const std::uint32_t m = golomb_parameter(k, d);
  BitWriter w;
  std::uint32_t prev = 0;
  bool first = true;
  for (const SparseEntry& e : u.entries()) {
    detail::golomb_put(w, first ? e.index : e.index - prev - 1, m);
    prev = e.index;
    first = false;
  }
  for (const SparseEntry& e : u.entries()) w.put_f32(detail::to_f32(e.value));
  return detail::finish_frame(SchemeCode::kTopK, d, k, m, std::move(w));
}

inline CompressedFrame encode_topkq_frame(const SparseUpdate& u) {
  const std::uint32_t d = u.dim();
  const auto k = static_cast<std::uint32_t>(u.entries().size());
  if (k == 0 || k > d) throw std::invalid_argument("encode_topkq_frame: need 1 <= K <= d");
  float pos_level = 0.0f;
  float neg_level = 0.0f;
  for (const SparseEntry& e : u.entries()) {
    if (e.value < 0.0) {
      neg_level = detail::to_f32(e.value);
    } else if (e.value > 0.0) {
      pos_level = detail::to_f32(e.value);
    }
  }
  const std::uint32_t m = golomb_parameter(k, d);
  BitWriter w;
  std::uint32_t prev = 0;
  bool first = true;
  for (const SparseEntry& e : u.entries()) {
    detail::golomb_put(w, first ? e.index : e.index - prev - 1, m);
    prev = e.index;
    first = false;
  }
  for (const SparseEntry& e : u.entries()) w.put_bit(e.value < 0.0);
  w.put_f32(pos_level);
  w.put_f32(neg_level);
  return detail::finish_frame(SchemeCode::kTopKQ, d, k, m, std::move(w));
}

inline CompressedFrame encode_scaled_sign_frame(const SignQuantized& q) {
  const auto d = static_cast<std::uint32_t>(q.signs.size());
  BitWriter w;
  w.put_f32(detail::to_f32(q.scale));
  for (std::int8_t s : q.signs) w.put_bit(s < 0);
  return detail::finish_frame(SchemeCode::kScaledSign, d, 0, 0, std::move(w));
}

inline CompressedFrame encode_dithered_frame(std::span<const std::int64_t> codes,
                                             std::uint32_t d) {
  if (codes.size() != d) throw std::invalid_argument("encode_dithered_frame: code count != d");
  BitWriter w;
  for (std::int64_t c : codes) detail::elias_gamma_put(w, detail::zigzag(c) + 1);
  return detail::finish_frame(SchemeCode::kDitheredUniform, d, 0, 0, std::move(w));
}

// Quantizer output to frame, dispatching on the spec. The update must be
// the matching alternative and agree with the spec parameters.
using QuantizedUpdate = std::variant<SparseUpdate, SignQuantized, std::vector<std::int64_t>>;

inline CompressedFrame encode_frame(const QuantizedUpdate& update, const QuantizerSpec& spec,
                                    std::uint32_t d) {
  switch (spec.kind) {
    case QuantizerKind::kTopK:
    case QuantizerKind::kTopKQ: {
      const auto* u = std::get_if<SparseUpdate>(&update);
      if (u == nullptr || u->dim() != d || u->entries().size() != spec.k) {
        throw std::invalid_argument("encode_frame: update inconsistent with Top-K spec");
      }
      return spec.kind == QuantizerKind::kTopK ? encode_topk_frame(*u) : encode_topkq_frame(*u);
    }
    case QuantizerKind::kScaledSign: {
      const auto* q = std::get_if<SignQuantized>(&update);
      if (q == nullptr || q->signs.size() != d) {
        throw std::invalid_argument("encode_frame: update inconsistent with scaled-sign spec");
      }
      return encode_scaled_sign_frame(*q);
    }
    case QuantizerKind::kDitheredUniform: {
      const auto* c = std::get_if<std::vector<std::int64_t>>(&update);
      if (c == nullptr || c->size() != d) {
        throw std::invalid_argument("encode_frame: update inconsistent with dithered spec");
      }
      return encode_dithered_frame(*c, d);
    }
    case QuantizerKind::kLossless:
      throw std::invalid_argument("encode_frame: lossless mode produces no frames");
  }
  throw std::invalid_argument("encode_frame: unknown scheme");
}

inline DecodedFrame decode_frame(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kFrameHeaderBytes) throw DecodeError("decode_frame: truncated header");
  if (std::memcmp(bytes.data(), kFrameMagic, 4) != 0) {
    throw DecodeError("decode_frame: bad magic");
  }
  const std::uint8_t scheme_raw = bytes[4];
  if (scheme_raw > 3) throw DecodeError("decode_frame: unknown scheme code");
  const auto get_u32 = [&bytes](std::size_t off) {
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | bytes[off + static_cast<std::size_t>(i)];
    return v;
  };
  DecodedFrame f;
  f.scheme = static_cast<SchemeCode>(scheme_raw);
  f.d = get_u32(5);
  f.k = get_u32(9);
  f.m = get_u32(13);
  std::uint64_t payload_bits = 0;
  for (int i = 7; i >= 0; --i) {
    payload_bits = (payload_bits << 8) | bytes[17 + static_cast<std::size_t>(i)];
  }
  const std::span<const std::uint8_t> payload = bytes.subspan(kFrameHeaderBytes);
  BitReader rd(payload, payload_bits);

  switch (f.scheme) {
    case SchemeCode::kTopK: {
      if (f.k < 1 || f.k > f.d || f.m < 1) throw DecodeError("decode_frame: bad TopK header");
      std::vector<std::uint32_t> indices;
      indices.reserve(f.k);
      std::uint64_t prev = 0;
      for (std::uint32_t i = 0; i < f.k; ++i) {
        const std::uint64_t gap = detail::golomb_get(rd, f.m);
        const std::uint64_t idx = i == 0 ? gap : prev + gap + 1;
        if (idx >= f.d) throw DecodeError("decode_frame: index out of range");
        indices.push_back(static_cast<std::uint32_t>(idx));
        prev = idx;
      }
      std::vector<SparseEntry> entries;
      entries.reserve(f.k);
      for (std::uint32_t idx : indices) {
        entries.push_back({idx, static_cast<double>(rd.get_f32())});
      }
      f.payload = SparseUpdate(f.d, std::move(entries));
      break;
    }
    case SchemeCode::kTopKQ: {
      if (f.k < 1 || f.k > f.d || f.m < 1) throw DecodeError("decode_frame: bad TopKQ header");
      std::vector<std::uint32_t> indices;
      indices.reserve(f.k);
      std::uint64_t prev = 0;
      for (std::uint32_t i = 0; i < f.k; ++i) {
        const std::uint64_t gap = detail::golomb_get(rd, f.m);
        const std::uint64_t idx = i == 0 ? gap : prev + gap + 1;
        if (idx >= f.d) throw DecodeError("decode_frame: index out of range");
        indices.push_back(static_cast<std::uint32_t>(idx));
        prev = idx;
      }
      std::vector<bool> negative(f.k);
      for (std::uint32_t i = 0; i < f.k; ++i) negative[i] = rd.get_bit();
      const double pos_level = static_cast<double>(rd.get_f32());
      const double neg_level = static_cast<double>(rd.get_f32());
      std::vector<SparseEntry> entries;
      entries.reserve(f.k);
      for (std::uint32_t i = 0; i < f.k; ++i) {
        entries.push_back({indices[i], negative[i] ? neg_level : pos_level});
      }
      f.payload = SparseUpdate(f.d, std::move(entries));
      break;
    }
    case SchemeCode::kScaledSign: {
      SignQuantized q;
      q.scale = static_cast<double>(rd.get_f32());
      q.signs.resize(f.d);
      for (std::uint32_t i = 0; i < f.d; ++i) q.signs[i] = rd.get_bit() ? -1 : 1;
      f.payload = std::move(q);
      break;
    }
    case SchemeCode::kDitheredUniform: {
      std::vector<std::int64_t> codes;
      codes.reserve(f.d);
      for (std::uint32_t i = 0; i < f.d; ++i) {
        codes.push_back(detail::unzigzag(detail::elias_gamma_get(rd) - 1));
      }
      f.payload = std::move(codes);
      break;
    }
  }
  if (rd.remaining() != 0) throw DecodeError("decode_frame: trailing payload bits");
  return f;
}

// ---------------------------------------------------------------------------
// Analytic rate accounting.
// ---------------------------------------------------------------------------

// Binary entropy in bits, with 0 log 0 = 0.
inline double binary_entropy(double p) {
  if (!(p >= 0.0) || p > 1.0) throw std::domain_error("binary_entropy: p must be in [0, 1]");
  double h = 0.0;
  if (p > 0.0) h -= p * std::log2(p);
  if (p < 1.0) h -= (1.0 - p) * std::log2(1.0 - p);
  return h;
}

// Entropy in bits of a ternary assignment with probabilities (p_plus,
// p_minus, 1 - p_plus - p_minus).
inline double ternary_entropy(double p_plus, double p_minus) {
  if (!(p_plus >= 0.0) || !(p_minus >= 0.0) || p_plus + p_minus > 1.0 + 1e-15) {
    throw std::domain_error("ternary_entropy: probabilities out of range");
  }
  const double p0 = std::max(0.0, 1.0 - p_plus - p_minus);
  double h = 0.0;
  for (double p : {p_plus, p_minus, p0}) {
    if (p > 0.0) h -= p * std::log2(p);
  }
  return h;
}

// Analytic bits per vector component. TopKQ assumes an even split of the
// kept components between the two levels; use ternary_entropy directly for
// measured sign counts. Dithered rates are measured, never analytic.
inline double bits_per_component(QuantizerKind kind, double k_over_d) {
  switch (kind) {
    case QuantizerKind::kTopK:
      if (!(k_over_d >= 0.0) || k_over_d > 1.0) {
        throw std::domain_error("bits_per_component: K/d must be in [0, 1]");
      }
      return binary_entropy(k_over_d) + 32.0 * k_over_d;
    case QuantizerKind::kTopKQ:
      if (!(k_over_d >= 0.0) || k_over_d > 1.0) {
        throw std::domain_error("bits_per_component: K/d must be in [0, 1]");
      }
      return ternary_entropy(k_over_d / 2.0, k_over_d / 2.0);
    case QuantizerKind::kScaledSign:
      return 1.0;
    case QuantizerKind::kLossless:
      return 32.0;
    case QuantizerKind::kDitheredUniform:
      throw std::domain_error("bits_per_component: dithered rate is empirical only");
  }
  throw std::domain_error("bits_per_component: unknown scheme");
}

inline double bits_per_component(QuantizerKind kind, std::uint32_t k, std::uint32_t d) {
  if (d == 0) throw std::domain_error("bits_per_component: d must be >= 1");
  return bits_per_component(kind, static_cast<double>(k) / static_cast<double>(d));
}

}  // namespace gradstream
