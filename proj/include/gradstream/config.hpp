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
// Flat key=value run configuration.
//
//   scheme=topk|topkq|scaledsign|dithered|lossless
//   predictor=zero|linear|estk        (default zero)
//   ef=true|false                     (default false)
//   beta=<real in [0,1)>              (default 0)
//   k=<int> | k_frac=<real>           (Top-K family only; mutually exclusive)
//   d=<int>                           (required)
//   workers=<int>                     (default 1)
//   iters=<int>                       (default 100)
//   lr=<real>                         (default 0.1)
//   lr_decay_every=<int>              (default 0 = constant)
//   lr_decay_factor=<real in (0,1]>   (default 1)
//   problem=gaussian|quadratic|logistic  (default gaussian)
//   sigma2=<real>                     (quadratic only; default 1)
//   seed=<int>                        (default 1)
//   blocks=<off1,off2,...>            (ascending offsets in (0,d))
//
// Tokens are whitespace separated; '#' starts a comment that runs to the
// end of the line. Unknown and duplicate keys are rejected.

#pragma once

#include <charconv>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>

#include "gradstream/constants.hpp"
#include "gradstream/pipeline.hpp"

namespace gradstream {

namespace detail {

inline double parse_real(const std::string& key, std::string_view text) {
  double value = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw ConfigError("config: invalid numeric value for key '" + key + "'");
  }
  return value;
}

inline std::uint64_t parse_uint(const std::string& key, std::string_view text) {
  std::uint64_t value = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw ConfigError("config: invalid integer value for key '" + key + "'");
  }
  return value;
}

inline bool parse_bool(const std::string& key, std::string_view text) {
  if (text == "true") return true;
  if (text == "false") return false;
  throw ConfigError("config: key '" + key + "' expects true or false");
}

}  // namespace detail

inline RunConfig parse_config(std::string_view text) {
  // strip comments, then tokenize
  std::string cleaned;
  cleaned.reserve(text.size());
  bool in_comment = false;
  for (char c : text) {
    if (c == '#') in_comment = true;
    if (c == '\n') in_comment = false;
    cleaned.push_back(in_comment ? ' ' : c);
  }

  std::map<std::string, std::string> kv;
  std::istringstream tokens{cleaned};
  std::string token;
  while (tokens >> token) {
    const std::size_t eq = token.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 >= token.size()) {
      throw ConfigError("config: expected key=value, got '" + token + "'");
    }
    const std::string key = token.substr(0, eq);
    if (!kv.emplace(key, token.substr(eq + 1)).second) {
      throw ConfigError("config: duplicate key '" + key + "'");
    }
  }

  static const std::map<std::string, int, std::less<>> known = {
      {"scheme", 0},  {"predictor", 0},      {"ef", 0},
      {"beta", 0},    {"k", 0},              {"k_frac", 0},
      {"d", 0},       {"workers", 0},        {"iters", 0},
      {"lr", 0},      {"lr_decay_every", 0}, {"lr_decay_factor", 0},
      {"problem", 0}, {"sigma2", 0},         {"seed", 0},
      {"blocks", 0},
  };
  for (const auto& [key, value] : kv) {
    if (!known.contains(key)) throw ConfigError("config: unknown key '" + key + "'");
  }

  const auto get = [&kv](const char* key) -> std::optional<std::string> {
    const auto it = kv.find(key);
    if (it == kv.end()) return std::nullopt;
    return it->second;
  };

  RunConfig cfg;

  const auto scheme = get("scheme");
  if (!scheme) throw ConfigError("config: missing required key 'scheme'");
  if (*scheme == "topk") {
    cfg.quantizer.kind = QuantizerKind::kTopK;
  } else if (*scheme == "topkq") {
    cfg.quantizer.kind = QuantizerKind::kTopKQ;
  } else if (*scheme == "scaledsign") {
    cfg.quantizer.kind = QuantizerKind::kScaledSign;
  } else if (*scheme == "dithered") {
    cfg.quantizer.kind = QuantizerKind::kDitheredUniform;
    cfg.quantizer.step = constants::kDitherStepDefault;
  } else if (*scheme == "lossless") {
    cfg.quantizer.kind = QuantizerKind::kLossless;
  } else {
    throw ConfigError("config: key 'scheme' has unknown value '" + *scheme + "'");
  }

  const auto d_text = get("d");
  if (!d_text) throw ConfigError("config: missing required key 'd'");
  const std::uint64_t d64 = detail::parse_uint("d", *d_text);
  if (d64 < 1 || d64 > 0xFFFFFFFFull) throw ConfigError("config: key 'd' out of range");
  cfg.d = static_cast<std::uint32_t>(d64);

  if (const auto v = get("predictor")) {
    if (*v == "zero") {
      cfg.predictor = PredictorKind::kZero;
    } else if (*v == "linear") {
      cfg.predictor = PredictorKind::kLinear;
    } else if (*v == "estk") {
      cfg.predictor = PredictorKind::kEstK;
    } else {
      throw ConfigError("config: key 'predictor' has unknown value '" + *v + "'");
    }
  }

  if (const auto v = get("ef")) cfg.error_feedback = detail::parse_bool("ef", *v);

  if (const auto v = get("beta")) {
    cfg.beta = detail::parse_real("beta", *v);
    if (!(cfg.beta >= 0.0) || cfg.beta >= 1.0) {
      throw ConfigError("config: key 'beta' must be in [0, 1)");
    }
  }

  const auto k_text = get("k");
  const auto k_frac_text = get("k_frac");
  const bool needs_k = cfg.quantizer.kind == QuantizerKind::kTopK ||
                       cfg.quantizer.kind == QuantizerKind::kTopKQ;
  if (k_text && k_frac_text) throw ConfigError("config: keys 'k' and 'k_frac' are exclusive");
  if (needs_k) {
    if (!k_text && !k_frac_text) {
      throw ConfigError("config: scheme requires key 'k' or 'k_frac'");
    }
    std::optional<std::uint32_t> k;
    std::optional<double> k_frac;
    if (k_text) {
      const std::uint64_t kv64 = detail::parse_uint("k", *k_text);
      if (kv64 < 1 || kv64 > cfg.d) throw ConfigError("config: key 'k' out of range [1, d]");
      k = static_cast<std::uint32_t>(kv64);
    } else {
      k_frac = detail::parse_real("k_frac", *k_frac_text);
      if (!(*k_frac > 0.0) || *k_frac > 1.0) {
        throw ConfigError("config: key 'k_frac' must be in (0, 1]");
      }
    }
    cfg.quantizer.k = resolve_k(cfg.d, k, k_frac);
  } else if (k_text || k_frac_text) {
    throw ConfigError("config: key 'k'/'k_frac' is only valid with a Top-K family scheme");
  }

  if (const auto v = get("workers")) {
    const std::uint64_t w = detail::parse_uint("workers", *v);
    if (w < 1 || w > 0xFFFFFFFFull) throw ConfigError("config: key 'workers' out of range");
    cfg.workers = static_cast<std::uint32_t>(w);
  }

  if (const auto v = get("iters")) {
    cfg.iters = detail::parse_uint("iters", *v);
    if (cfg.iters < 1) throw ConfigError("config: key 'iters' must be >= 1");
  }

  if (const auto v = get("lr")) {
    cfg.schedule.lr = detail::parse_real("lr", *v);
    if (!(cfg.schedule.lr > 0.0)) throw ConfigError("config: key 'lr' must be > 0");
  }
  if (const auto v = get("lr_decay_every")) {
    const std::uint64_t every = detail::parse_uint("lr_decay_every", *v);
    if (every > 0xFFFFFFFFull) throw ConfigError("config: key 'lr_decay_every' out of range");
    cfg.schedule.decay_every = static_cast<std::uint32_t>(every);
  }
  if (const auto v = get("lr_decay_factor")) {
    cfg.schedule.decay_factor = detail::parse_real("lr_decay_factor", *v);
    if (!(cfg.schedule.decay_factor > 0.0) || cfg.schedule.decay_factor > 1.0) {
      throw ConfigError("config: key 'lr_decay_factor' must be in (0, 1]");
    }
  }

  cfg.problem.kind = ProblemKind::kGaussianStream;
  if (const auto v = get("problem")) {
    if (*v == "gaussian") {
      cfg.problem.kind = ProblemKind::kGaussianStream;
    } else if (*v == "quadratic") {
      cfg.problem.kind = ProblemKind::kNoisyQuadratic;
    } else if (*v == "logistic") {
      cfg.problem.kind = ProblemKind::kSyntheticLogistic;
    } else {
      throw ConfigError("config: key 'problem' has unknown value '" + *v + "'");
    }
  }
  cfg.problem.d = cfg.d;

  if (const auto v = get("sigma2")) {
    if (cfg.problem.kind != ProblemKind::kNoisyQuadratic) {
      throw ConfigError("config: key 'sigma2' is only valid with problem=quadratic");
    }
    cfg.problem.sigma2 = detail::parse_real("sigma2", *v);
    if (cfg.problem.sigma2 < 0.0) throw ConfigError("config: key 'sigma2' must be >= 0");
  } else if (cfg.problem.kind == ProblemKind::kNoisyQuadratic) {
    cfg.problem.sigma2 = 1.0;
  }

  if (const auto v = get("seed")) cfg.seed = detail::parse_uint("seed", *v);

  if (const auto v = get("blocks")) {
    std::string_view rest = *v;
    while (!rest.empty()) {
      const std::size_t comma = rest.find(',');
      const std::string_view item = rest.substr(0, comma);
      if (item.empty()) throw ConfigError("config: key 'blocks' has an empty offset");
      const std::uint64_t off = detail::parse_uint("blocks", item);
      if (off < 1 || off >= cfg.d) throw ConfigError("config: key 'blocks' offset out of (0, d)");
      cfg.block_offsets.push_back(static_cast<std::uint32_t>(off));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
  }

  cfg.validate();
  return cfg;
}

}  // namespace gradstream
