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
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <catch2/catch_amalgamated.hpp>

#include "gradstream/config.hpp"

namespace fs = std::filesystem;
using namespace gradstream;

namespace {

std::string cli_path() {
  const char* path = std::getenv("GRADSTREAM_CLI");
  REQUIRE(path != nullptr);
  return path;
}

fs::path scratch_dir() {
  const fs::path dir = fs::temp_directory_path() / "gradstream_cli_test";
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args) {
  const std::string command = cli_path() + " " + args + " >/dev/null 2>&1";
  const int status = std::system(command.c_str());
  return WEXITSTATUS(status);
}

}  // namespace

TEST_CASE("parse_config accepts the documented shorthand") {
  const RunConfig cfg =
      parse_config("beta=0.99 ef=true scheme=topk k_frac=0.015 d=100000 workers=4");
  REQUIRE(cfg.beta == 0.99);
  REQUIRE(cfg.error_feedback);
  REQUIRE(cfg.quantizer.kind == QuantizerKind::kTopK);
  REQUIRE(cfg.quantizer.k == 1500);
  REQUIRE(cfg.d == 100000);
  REQUIRE(cfg.workers == 4);
  REQUIRE(cfg.predictor == PredictorKind::kZero);  // defaults
  REQUIRE(cfg.seed == 1);
}

TEST_CASE("parse_config rejects invalid settings with the key name") {
  REQUIRE_THROWS_WITH(parse_config("scheme=topk k=1 d=10 beta=1.0"),
                      Catch::Matchers::ContainsSubstring("beta"));
  REQUIRE_THROWS_WITH(parse_config("scheme=scaledsign predictor=estk d=10"),
                      Catch::Matchers::ContainsSubstring("estk"));
  REQUIRE_THROWS_WITH(parse_config("scheme=topk k=1 d=10 mystery=3"),
                      Catch::Matchers::ContainsSubstring("mystery"));
  REQUIRE_THROWS_WITH(parse_config("scheme=topk k=1 k_frac=0.5 d=10"),
                      Catch::Matchers::ContainsSubstring("k"));
  REQUIRE_THROWS_WITH(parse_config("scheme=topk d=10"),
                      Catch::Matchers::ContainsSubstring("k"));
  REQUIRE_THROWS_WITH(parse_config("scheme=topk k=1 d=10 sigma2=1.0"),
                      Catch::Matchers::ContainsSubstring("sigma2"));
  REQUIRE_THROWS_WITH(parse_config("scheme=lossless k=5 d=10"),
                      Catch::Matchers::ContainsSubstring("k"));
  REQUIRE_THROWS_WITH(parse_config("scheme=topk k=1 d=10 seed=1 seed=2"),
                      Catch::Matchers::ContainsSubstring("duplicate"));
  REQUIRE_THROWS_AS(parse_config("scheme=unknown d=10"), ConfigError);
}

TEST_CASE("parse_config handles comments and blocks") {
  const RunConfig cfg = parse_config(
      "# a comment line\n"
      "scheme=topk k=4 d=100 blocks=25,75  # trailing comment\n"
      "problem=quadratic sigma2=2.0\n");
  REQUIRE(cfg.block_offsets == std::vector<std::uint32_t>{25, 75});
  REQUIRE(cfg.problem.sigma2 == 2.0);
}

TEST_CASE("cli: unknown subcommand exits 2") {
  REQUIRE(run_cli("frobnicate") == 2);
  REQUIRE(run_cli("") == 2);
}

TEST_CASE("cli: help exits 0") {
  REQUIRE(run_cli("--help") == 0);
}

TEST_CASE("cli: missing config file exits 2") {
  REQUIRE(run_cli("simulate --config /nonexistent/nope.cfg") == 2);
}

TEST_CASE("cli: invalid config exits 2") {
  const fs::path dir = scratch_dir();
  const fs::path cfg = dir / "bad.cfg";
  write_file(cfg, "scheme=scaledsign predictor=estk d=100\n");
  REQUIRE(run_cli("simulate --config " + cfg.string()) == 2);
}

TEST_CASE("cli: unwritable output exits 1") {
  const fs::path dir = scratch_dir();
  const fs::path cfg = dir / "ok.cfg";
  write_file(cfg, "scheme=topk k=2 d=20 iters=2\n");
  REQUIRE(run_cli("simulate --config " + cfg.string() + " -o /nonexistent/dir/out.csv") == 1);
}

TEST_CASE("cli: simulate writes deterministic csv") {
  const fs::path dir = scratch_dir();
  const fs::path cfg = dir / "sim.cfg";
  write_file(cfg,
             "scheme=topk k_frac=0.05 d=200 workers=2 iters=20 beta=0.9 ef=true "
             "predictor=estk problem=quadratic sigma2=0.5 lr=0.05 seed=42\n");
  const fs::path out_a = dir / "a.csv";
  const fs::path out_b = dir / "b.csv";
  REQUIRE(run_cli("simulate --config " + cfg.string() + " -o " + out_a.string()) == 0);
  REQUIRE(run_cli("simulate --config " + cfg.string() + " -o " + out_b.string()) == 0);
  const std::string a = read_file(out_a);
  REQUIRE(a == read_file(out_b));
  REQUIRE(a.rfind("t,worker,loss,", 0) == 0);
  // header + 20 iterations x 2 workers
  REQUIRE(std::count(a.begin(), a.end(), '\n') == 41);
}

TEST_CASE("cli: json output mirrors the rows") {
  const fs::path dir = scratch_dir();
  const fs::path cfg = dir / "json.cfg";
  write_file(cfg, "scheme=scaledsign d=50 iters=3 beta=0.9 problem=gaussian seed=2\n");
  const fs::path out = dir / "rows.json";
  REQUIRE(run_cli("simulate --config " + cfg.string() + " --format json -o " +
                  out.string()) == 0);
  const std::string text = read_file(out);
  REQUIRE(text.find("\"t\": 0") != std::string::npos);
  REQUIRE(text.find("\"mse\"") != std::string::npos);
  REQUIRE(text.find("\"loss\": null") != std::string::npos);  // gaussian stream
}

TEST_CASE("cli: seed override changes the output") {
  const fs::path dir = scratch_dir();
  const fs::path cfg = dir / "seed.cfg";
  write_file(cfg, "scheme=topk k=5 d=100 iters=10 beta=0.9 problem=gaussian seed=1\n");
  const fs::path out_a = dir / "s1.csv";
  const fs::path out_b = dir / "s2.csv";
  REQUIRE(run_cli("simulate --config " + cfg.string() + " -o " + out_a.string()) == 0);
  REQUIRE(run_cli("simulate --config " + cfg.string() + " --seed 2 -o " + out_b.string()) == 0);
  REQUIRE(read_file(out_a) != read_file(out_b));
}

TEST_CASE("cli: rate-table emits one row per scheme") {
  const fs::path dir = scratch_dir();
  const fs::path cfg = dir / "rate.cfg";
  write_file(cfg, "scheme=topk k=100 d=10000 seed=1\n");
  const fs::path out = dir / "rate.csv";
  REQUIRE(run_cli("rate-table --config " + cfg.string() + " -o " + out.string()) == 0);
  const std::string table = read_file(out);
  REQUIRE(table.rfind("scheme,k_frac,analytic_bits,measured_bits", 0) == 0);
  REQUIRE(std::count(table.begin(), table.end(), '\n') == 6);  // header + 5 rows
}

TEST_CASE("cli: timeseries validates its preconditions") {
  const fs::path dir = scratch_dir();
  const fs::path cfg = dir / "ts_bad.cfg";
  write_file(cfg, "scheme=topkq k=5 d=100 iters=10 ef=true beta=0.9\n");
  REQUIRE(run_cli("timeseries --config " + cfg.string()) == 2);

  const fs::path good = dir / "ts.cfg";
  write_file(good, "scheme=topk k=5 d=100 iters=50 ef=true beta=0.99 predictor=estk seed=4\n");
  const fs::path out = dir / "ts.csv";
  REQUIRE(run_cli("timeseries --config " + good.string() + " -o " + out.string()) == 0);
  const std::string csv = read_file(out);
  REQUIRE(csv.find("0,0,,,") != std::string::npos);  // loss/grad empty on the stream
}

TEST_CASE("cli: convergence json reports the bound fields") {
  const fs::path dir = scratch_dir();
  const fs::path cfg = dir / "conv.cfg";
  write_file(cfg,
             "scheme=dithered d=16 workers=2 iters=500 beta=0.0 ef=true "
             "predictor=zero problem=quadratic sigma2=1.0 seed=3\n");
  const fs::path out = dir / "conv.json";
  REQUIRE(run_cli("convergence --config " + cfg.string() + " --format json -o " +
                  out.string()) == 0);
  const std::string json_text = read_file(out);
  REQUIRE(json_text.find("\"min_grad_norm_sq\"") != std::string::npos);
  REQUIRE(json_text.find("\"bound_total\"") != std::string::npos);
  REQUIRE(json_text.find("\"satisfied\": true") != std::string::npos);
}

TEST_CASE("cli: mse-compare writes one file per predictor") {
  const fs::path dir = scratch_dir();
  const fs::path cfg = dir / "mse.cfg";
  write_file(cfg,
             "scheme=topk k=3 d=64 iters=200 beta=0.99 ef=true "
             "problem=logistic lr=0.05 seed=5\n");
  const fs::path out = dir / "mse.csv";
  REQUIRE(run_cli("mse-compare --config " + cfg.string() + " -o " + out.string()) == 0);
  REQUIRE(fs::exists(dir / "mse_zero.csv"));
  REQUIRE(fs::exists(dir / "mse_estk.csv"));
  // requires -o
  REQUIRE(run_cli("mse-compare --config " + cfg.string()) == 2);
}

TEST_CASE("cli: master-momentum traces deviation") {
  const fs::path dir = scratch_dir();
  const fs::path cfg = dir / "mm.cfg";
  write_file(cfg, "scheme=topk k=4 d=64 iters=50 beta=0.9 ef=false seed=2\n");
  const fs::path out = dir / "mm.csv";
  REQUIRE(run_cli("master-momentum --config " + cfg.string() + " -o " + out.string()) == 0);
  const std::string csv = read_file(out);
  REQUIRE(csv.rfind("t,deviation_sq", 0) == 0);
  REQUIRE(std::count(csv.begin(), csv.end(), '\n') == 51);
}

TEST_CASE("cli: error-growth runs with and without EF") {
  const fs::path dir = scratch_dir();
  const fs::path cfg = dir / "eg.cfg";
  write_file(cfg,
             "scheme=topkq k=10 d=1000 iters=101 beta=0.99 ef=true "
             "predictor=linear problem=gaussian seed=7\n");
  const fs::path out = dir / "eg.csv";
  REQUIRE(run_cli("error-growth --config " + cfg.string() + " -o " + out.string()) == 0);
  const std::string csv = read_file(out);
  REQUIRE(std::count(csv.begin(), csv.end(), '\n') == 102);
}
