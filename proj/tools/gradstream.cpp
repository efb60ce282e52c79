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
// Command-line front end. Exit codes: 0 success, 1 runtime error, 2 usage
// or configuration error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "gradstream/config.hpp"
#include "gradstream/experiments.hpp"
#include "gradstream/metrics.hpp"
#include "gradstream/pipeline.hpp"

namespace {

using gradstream::ConfigError;
using gradstream::MetricsRow;
using nlohmann::json;

struct CommonArgs {
  std::string config_path;
  std::string output_path;  // empty = stdout
  std::optional<std::uint64_t> seed_override;
  std::string format = "csv";
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "run configuration file (key=value)")
      ->required();
  cmd->add_option("-o,--output", args.output_path, "output path (default: stdout)");
  cmd->add_option("--seed", args.seed_override, "override the config seed");
  cmd->add_option("--format", args.format, "output format")
      ->check(CLI::IsMember({"csv", "json"}));
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_output(const std::string& path, const std::string& content) {
  if (path.empty()) {
    std::cout << content;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open output file: " + path);
  out << content;
  if (!out) throw std::runtime_error("failed writing output file: " + path);
}

gradstream::RunConfig load_config(const CommonArgs& args) {
  gradstream::RunConfig cfg = gradstream::parse_config(read_file(args.config_path));
  if (args.seed_override) {
    cfg.seed = *args.seed_override;
    cfg.validate();
  }
  return cfg;
}

json row_to_json(const MetricsRow& r) {
  const auto field = [](const std::optional<double>& v) {
    return v ? json(*v) : json(nullptr);
  };
  return json{{"t", r.t},
              {"worker", r.worker},
              {"loss", field(r.loss)},
              {"grad_norm_sq", field(r.grad_norm_sq)},
              {"mse", field(r.mse)},
              {"frame_bits", field(r.frame_bits)},
              {"analytic_bits", field(r.analytic_bits)},
              {"trace_v", field(r.trace_v)},
              {"trace_u", field(r.trace_u)},
              {"trace_uq", field(r.trace_uq)},
              {"trace_rhat", field(r.trace_rhat)}};
}

std::string render_rows(std::span<const MetricsRow> rows, const std::string& format) {
  if (format == "json") {
    json arr = json::array();
    for (const MetricsRow& r : rows) arr.push_back(row_to_json(r));
    return arr.dump(2) + "\n";
  }
  std::ostringstream os;
  gradstream::write_metrics_csv(os, rows);
  return os.str();
}

void require(bool condition, const char* message) {
  if (!condition) throw ConfigError(message);
}

// --- subcommand bodies -------------------------------------------------------

void cmd_simulate(const CommonArgs& args) {
  const gradstream::RunConfig cfg = load_config(args);
  const gradstream::RunResult result = gradstream::run_training(cfg);
  write_output(args.output_path, render_rows(result.metrics, args.format));
}

void cmd_timeseries(const CommonArgs& args) {
  const gradstream::RunConfig cfg = load_config(args);
  require(cfg.quantizer.kind == gradstream::QuantizerKind::kTopK,
          "timeseries requires scheme=topk");
  require(cfg.workers == 1, "timeseries requires workers=1");
  require(cfg.error_feedback, "timeseries requires ef=true");
  require(cfg.predictor != gradstream::PredictorKind::kLinear,
          "timeseries requires predictor=zero or predictor=estk");
  gradstream::TimeseriesParams p;
  p.beta = cfg.beta;
  p.d = cfg.d;
  p.k = cfg.quantizer.k;
  p.iters = cfg.iters;
  p.predictor = cfg.predictor;
  p.seed = cfg.seed;
  const gradstream::TimeseriesResult result = gradstream::run_timeseries(p);
  write_output(args.output_path, render_rows(result.rows, args.format));
}

void cmd_error_growth(const CommonArgs& args) {
  const gradstream::RunConfig cfg = load_config(args);
  require(cfg.quantizer.kind == gradstream::QuantizerKind::kTopKQ,
          "error-growth requires scheme=topkq");
  require(cfg.predictor == gradstream::PredictorKind::kLinear,
          "error-growth requires predictor=linear");
  require(cfg.workers == 1, "error-growth requires workers=1");
  require(cfg.problem.kind == gradstream::ProblemKind::kGaussianStream,
          "error-growth requires problem=gaussian");
  gradstream::ErrorGrowthParams p;
  p.error_feedback = cfg.error_feedback;
  p.beta = cfg.beta;
  p.d = cfg.d;
  p.k = cfg.quantizer.k;
  p.iters = cfg.iters;
  p.seed = cfg.seed;
  const gradstream::ErrorGrowthResult result = gradstream::run_error_growth(p);
  write_output(args.output_path, render_rows(result.rows, args.format));
}

void cmd_convergence(const CommonArgs& args) {
  const gradstream::RunConfig cfg = load_config(args);
  require(cfg.problem.kind == gradstream::ProblemKind::kNoisyQuadratic,
          "convergence requires problem=quadratic");
  require(cfg.beta == 0.0, "convergence requires beta=0");
  require(cfg.error_feedback, "convergence requires ef=true");
  require(cfg.predictor == gradstream::PredictorKind::kZero,
          "convergence requires predictor=zero");
  require(cfg.quantizer.kind == gradstream::QuantizerKind::kDitheredUniform ||
              cfg.quantizer.kind == gradstream::QuantizerKind::kLossless,
          "convergence requires scheme=dithered or scheme=lossless");
  gradstream::ConvergenceParams p;
  p.d = cfg.d;
  p.workers = cfg.workers;
  p.iters = cfg.iters;
  p.sigma2 = cfg.problem.sigma2;
  p.dither_step =
      cfg.quantizer.kind == gradstream::QuantizerKind::kLossless ? 0.0 : cfg.quantizer.step;
  p.seed = cfg.seed;
  const gradstream::ConvergenceReport report = gradstream::run_convergence(p);

  if (args.format == "json") {
    json obj{{"min_grad_norm_sq", report.empirical_min_grad_sq},
             {"bound_a", report.bound.a},
             {"bound_b", report.bound.b},
             {"bound_total", report.bound.total()},
             {"step_size", report.step_size},
             {"distortion", report.distortion},
             {"satisfied", report.satisfied}};
    write_output(args.output_path, obj.dump(2) + "\n");
    return;
  }
  std::ostringstream os;
  os << "min_grad_norm_sq,bound_a,bound_b,bound_total,step_size,distortion,satisfied\n"
     << gradstream::format_double(report.empirical_min_grad_sq) << ','
     << gradstream::format_double(report.bound.a) << ','
     << gradstream::format_double(report.bound.b) << ','
     << gradstream::format_double(report.bound.total()) << ','
     << gradstream::format_double(report.step_size) << ','
     << gradstream::format_double(report.distortion) << ','
     << (report.satisfied ? "true" : "false") << '\n';
  write_output(args.output_path, os.str());
}

void cmd_rate_table(const CommonArgs& args) {
  const gradstream::RunConfig cfg = load_config(args);
  gradstream::RateTableParams p;
  p.d = cfg.d;
  p.seed = cfg.seed;
  const std::vector<gradstream::RateRow> rows = gradstream::rate_table(p);

  if (args.format == "json") {
    json arr = json::array();
    for (const auto& r : rows) {
      arr.push_back(json{{"scheme", gradstream::to_string(r.scheme)},
                         {"k_frac", r.k_frac},
                         {"analytic_bits", r.analytic_bits},
                         {"measured_bits", r.measured_bits}});
    }
    write_output(args.output_path, arr.dump(2) + "\n");
    return;
  }
  std::ostringstream os;
  os << "scheme,k_frac,analytic_bits,measured_bits\n";
  for (const auto& r : rows) {
    os << gradstream::to_string(r.scheme) << ',' << gradstream::format_double(r.k_frac) << ','
       << gradstream::format_double(r.analytic_bits) << ','
       << gradstream::format_double(r.measured_bits) << '\n';
  }
  write_output(args.output_path, os.str());
}

void cmd_mse_compare(const CommonArgs& args) {
  const gradstream::RunConfig cfg = load_config(args);
  require(cfg.problem.kind == gradstream::ProblemKind::kSyntheticLogistic,
          "mse-compare requires problem=logistic");
  require(cfg.quantizer.kind == gradstream::QuantizerKind::kTopK,
          "mse-compare requires scheme=topk");
  require(cfg.error_feedback, "mse-compare requires ef=true");
  require(cfg.workers == 1, "mse-compare requires workers=1");
  require(!args.output_path.empty(), "mse-compare requires -o; it writes one file per predictor");

  gradstream::MseCompareParams p;
  p.d = cfg.d;
  p.k = cfg.quantizer.k;
  p.beta = cfg.beta;
  p.lr = cfg.schedule.lr;
  p.iters = cfg.iters;
  p.seed = cfg.seed;
  const gradstream::MseCompareResult result = gradstream::run_mse_comparison(p);

  const std::filesystem::path base(args.output_path);
  const std::filesystem::path stem = base.parent_path() / base.stem();
  const std::string ext = base.extension().string();
  write_output(stem.string() + "_zero" + ext, render_rows(result.zero_rows, args.format));
  write_output(stem.string() + "_estk" + ext, render_rows(result.estk_rows, args.format));
  std::cout << "final-quarter mean mse: zero="
            << gradstream::format_double(result.zero_final_quarter_mean)
            << " estk=" << gradstream::format_double(result.estk_final_quarter_mean) << '\n';
}

void cmd_master_momentum(const CommonArgs& args) {
  const gradstream::RunConfig cfg = load_config(args);
  require(cfg.workers == 1, "master-momentum requires workers=1");
  gradstream::MasterMomentumConfig p;
  p.d = cfg.d;
  p.iters = cfg.iters;
  p.beta_tilde = cfg.beta;
  p.quantizer = cfg.quantizer;
  p.error_feedback = cfg.error_feedback;
  p.seed = cfg.seed;
  const gradstream::MasterMomentumResult result = gradstream::master_momentum_sim(p);

  if (args.format == "json") {
    json arr = json::array();
    for (std::size_t t = 0; t < result.deviation_sq.size(); ++t) {
      arr.push_back(json{{"t", t}, {"deviation_sq", result.deviation_sq[t]}});
    }
    write_output(args.output_path, arr.dump(2) + "\n");
    return;
  }
  std::ostringstream os;
  os << "t,deviation_sq\n";
  for (std::size_t t = 0; t < result.deviation_sq.size(); ++t) {
    os << t << ',' << gradstream::format_double(result.deviation_sq[t]) << '\n';
  }
  write_output(args.output_path, os.str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gradstream: momentum-SGD gradient compression simulator"};
  app.require_subcommand(1);

  CommonArgs args;
  CLI::App* simulate = app.add_subcommand("simulate", "run the full training pipeline");
  CLI::App* timeseries = app.add_subcommand("timeseries", "trace one component through Top-K");
  CLI::App* error_growth =
      app.add_subcommand("error-growth", "linear-predictor error norms with/without EF");
  CLI::App* convergence =
      app.add_subcommand("convergence", "check the empirical gradient norm against the bound");
  CLI::App* rate_table = app.add_subcommand("rate-table", "analytic vs measured bits/component");
  CLI::App* mse_compare =
      app.add_subcommand("mse-compare", "Est-K vs zero predictor error on logistic regression");
  CLI::App* master_momentum =
      app.add_subcommand("master-momentum", "error accumulation when momentum runs on the master");
  for (CLI::App* cmd :
       {simulate, timeseries, error_growth, convergence, rate_table, mse_compare, master_momentum}) {
    add_common(cmd, args);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << '\n' << app.help();
    return 2;
  }

  try {
    if (simulate->parsed()) {
      cmd_simulate(args);
    } else if (timeseries->parsed()) {
      cmd_timeseries(args);
    } else if (error_growth->parsed()) {
      cmd_error_growth(args);
    } else if (convergence->parsed()) {
      cmd_convergence(args);
    } else if (rate_table->parsed()) {
      cmd_rate_table(args);
    } else if (mse_compare->parsed()) {
      cmd_mse_compare(args);
    } else if (master_momentum->parsed()) {
      cmd_master_momentum(args);
    }
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
