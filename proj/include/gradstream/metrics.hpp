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

#include <charconv>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace gradstream {

// One record per (iteration, worker). Optional fields are emitted as empty
// CSV cells. mse is the per-component squared quantization error
// (1/d)*||e_t||^2; frame_bits is the measured payload size of the encoded
// frame(s); traces are a single component of the named iterate.
struct MetricsRow {
  std::uint64_t t = 0;
  std::uint32_t worker = 0;
  std::optional<double> loss;
  std::optional<double> grad_norm_sq;
  std::optional<double> mse;
  std::optional<double> frame_bits;
  std::optional<double> analytic_bits;
  std::optional<double> trace_v;
  std::optional<double> trace_u;
  std::optional<double> trace_uq;
  std::optional<double> trace_rhat;
};

inline constexpr const char* kMetricsCsvHeader =
    "t,worker,loss,grad_norm_sq,mse,frame_bits,analytic_bits,"
    "trace_v,trace_u,trace_uq,trace_rhat";

// Shortest round-trip decimal form; locale-independent by construction.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::string format_field(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string();
}

inline void write_metrics_csv(std::ostream& os, std::span<const MetricsRow> rows) {
  os << kMetricsCsvHeader << '\n';
  for (const MetricsRow& r : rows) {
    os << r.t << ',' << r.worker << ',' << format_field(r.loss) << ','
       << format_field(r.grad_norm_sq) << ',' << format_field(r.mse) << ','
       << format_field(r.frame_bits) << ',' << format_field(r.analytic_bits) << ','
       << format_field(r.trace_v) << ',' << format_field(r.trace_u) << ','
       << format_field(r.trace_uq) << ',' << format_field(r.trace_rhat) << '\n';
  }
}

}  // namespace gradstream
