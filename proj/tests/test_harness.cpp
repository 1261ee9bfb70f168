// Copyright 2026 The dptd Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <doctest.h>

#include "dptd/errors.hpp"
#include "dptd/harness.hpp"
#include "oracles.hpp"

using namespace dptd;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  REQUIRE(f.good());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// Rows only: header lines carry run identity (algorithm name, seed), which
// legitimately differs between otherwise identical runs.
std::string strip_comments(const std::string& csv) {
  std::istringstream in(csv);
  std::ostringstream out;
  std::string line;
  while (std::getline(in, line))
    if (line.rfind("# ", 0) != 0) out << line << "\n";
  return out.str();
}

fs::path fresh_dir(const char* name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(DPTD_CLI_PATH) + " " + args +
                          " > /dev/null 2> /dev/null";
  const int ret = std::system(cmd.c_str());
  return WEXITSTATUS(ret);
}

ExperimentSpec small_spec(const fs::path& out_dir) {
  ExperimentSpec spec;
  spec.mdp.family = "chain";
  spec.mdp.states = 5;
  spec.dataset.mode = "sas";
  spec.dataset.n = 400;
  spec.dataset.seed = 9;
  spec.model.kind = "linear";
  spec.model.features = "onehot";
  spec.optimizer.T = 500;
  spec.optimizer.clip_G = 1.0;
  spec.privacy.mode = "sas";
  spec.privacy.epsilons = {10.0};
  spec.privacy.delta = 1e-5;
  spec.algorithms = {"dptd"};
  spec.seeds = {1, 2};
  spec.f_interval = 50;
  spec.metric_interval = 100;
  spec.out_dir = out_dir.string();
  spec.validate();
  return spec;
}

}  // namespace

TEST_CASE("chain family: documented structure and in-box value function") {
  const TabularMdp mdp = make_chain_mdp(5);
  CHECK(mdp.n_states == 5);
  CHECK(mdp.n_actions == 2);
  CHECK(mdp.gamma == 0.95);
  CHECK(mdp.r(4, 1) == 1.0);   // stepping off the right end
  CHECK(mdp.r(0, 0) == -1.0);  // stepping off the left end
  CHECK(mdp.r(2, 0) == 0.0);
  // right at the right end restarts at the center
  CHECK(mdp.p(4, 1, 2) == doctest::Approx(0.9));
  CHECK(mdp.p(4, 1, 4) == doctest::Approx(0.1));
  // interior move
  CHECK(mdp.p(1, 1, 2) == doctest::Approx(0.9));
  // the exact value function must live strictly inside the unit box for the
  // projected optimizer to be able to reach it
  const Vector v = exact_value(mdp, Policy::uniform(5, 2));
  CHECK(norm_inf(v) < 0.95);
  CHECK_NOTHROW(stationary_distribution(mdp, Policy::uniform(5, 2)));
}

TEST_CASE("twostate family: hand-checkable symmetric values") {
  const TabularMdp mdp = make_twostate_mdp();
  const Vector v = exact_value(mdp, Policy::uniform(2, 2));
  // rewards +-0.5 and a symmetric chain put the values at +-x with x < 1
  CHECK(v[0] == doctest::Approx(-v[1]).epsilon(1e-12));
  CHECK(v[0] > 0.0);
  CHECK(norm_inf(v) < 1.0);
}

TEST_CASE("random family: ergodic and reproducible per seed") {
  const TabularMdp a = make_random_mdp(6, 3, 42);
  const TabularMdp b = make_random_mdp(6, 3, 42);
  CHECK(a.transition == b.transition);
  CHECK(a.reward == b.reward);
  CHECK_NOTHROW(stationary_distribution(a, Policy::uniform(6, 3)));
}

TEST_CASE("unknown family raises InvalidConfig") {
  MdpSpec spec;
  spec.family = "gridworld";
  CHECK_THROWS_AS(make_mdp(spec), InvalidConfig);
}

TEST_CASE("generate: same seed gives identical file bytes") {
  const TabularMdp mdp = make_chain_mdp(5);
  const Policy pi = Policy::uniform(5, 2);
  DatasetSpec spec;
  spec.mode = "trajectory";
  spec.m = 4;
  spec.n_max = 20;
  spec.seed = 77;
  const fs::path dir = fresh_dir("dptd_gen_test");
  save_dataset((dir / "a.jsonl").string(), generate_dataset(mdp, pi, spec));
  save_dataset((dir / "b.jsonl").string(), generate_dataset(mdp, pi, spec));
  CHECK(slurp((dir / "a.jsonl").string()) == slurp((dir / "b.jsonl").string()));
  CHECK(file_hash_hex((dir / "a.jsonl").string()) ==
        file_hash_hex((dir / "b.jsonl").string()));
  fs::remove_all(dir);
}

TEST_CASE("generate: long-run state frequencies approach the stationary law") {
  const TabularMdp mdp = make_chain_mdp(5);
  const Policy pi = Policy::uniform(5, 2);
  DatasetSpec spec;
  spec.mode = "sas";
  spec.n = 200000;
  spec.seed = 3;
  const TrajectoryDataset ds = generate_dataset(mdp, pi, spec);
  const Vector mu = stationary_distribution(mdp, pi);
  std::vector<long> counts(5, 0);
  for (const auto& tr : ds.trajectories[0]) counts[tr.state]++;
  for (int s = 0; s < 5; ++s) {
    const double freq = static_cast<double>(counts[s]) / spec.n;
    const double se = std::sqrt(mu[s] * (1.0 - mu[s]) / spec.n);
    // 3 standard errors plus slack for the burn-in from the uniform start
    CHECK(std::fabs(freq - mu[s]) <= 3.0 * se + 2e-3);
  }
}

TEST_CASE("runlog csv round trip preserves rows and header") {
  const fs::path dir = fresh_dir("dptd_csv_test");
  std::vector<RunRow> rows(3);
  rows[0] = {0, 0.5, 1.25, std::nullopt, std::nullopt};
  rows[1] = {10, 0.25, -0.5, 0.125, std::array<double, 3>{0.1, 0.2, 0.3}};
  rows[2] = {20, 0.125, 0.0, std::nullopt, std::nullopt};
  nlohmann::json header{{"algorithm", "dptd"},
                        {"calibration", nullptr},
                        {"dataset_hash", "abc"}};
  const std::string path = (dir / "log.csv").string();
  write_runlog_csv(path, header, rows);
  const LoadedRunLog log = load_runlog_csv(path);
  CHECK(log.header.at("dataset_hash") == "abc");
  REQUIRE(log.rows.size() == 3);
  CHECK(log.rows[1].t == 10);
  CHECK(log.rows[1].f_value == -0.5);
  CHECK(log.rows[1].mspbe == 0.125);
  CHECK((*log.rows[1].metric)[2] == 0.3);
  CHECK(!log.rows[2].mspbe);
  fs::remove_all(dir);
}

TEST_CASE("train: private headers embed the calibration and claim policy") {
  const fs::path dir = fresh_dir("dptd_train_claim");
  ExperimentSpec spec = small_spec(dir);
  // Small n at this epsilon leaves the subsampling regime invalid, so the
  // budget must not be claimed even though the run proceeds with formula noise.
  spec.privacy.epsilons = {0.5};
  const TrainOutputs out = train_experiment(spec);
  REQUIRE(out.cells.size() == 2);
  for (const auto& cell : out.cells) {
    CHECK_FALSE(cell.claimed);
    const LoadedRunLog log = load_runlog_csv(cell.file);
    CHECK(log.header.at("claimed_budget").is_null());
    CHECK_FALSE(log.header.at("calibration").is_null());
    CHECK(log.header.at("calibration").at("valid").get<bool>() == false);
    CHECK(log.header.at("dataset_hash").get<std::string>() == out.dataset_hash);
  }
  fs::remove_all(dir);
}

TEST_CASE("train: valid regime claims the budget and reruns byte-identically") {
  const fs::path dir1 = fresh_dir("dptd_train_a");
  const fs::path dir2 = fresh_dir("dptd_train_b");
  ExperimentSpec spec = small_spec(dir1);
  spec.optimizer.T = 20000;
  spec.f_interval = 500;
  spec.metric_interval = 0;
  const TrainOutputs a = train_experiment(spec);
  spec.out_dir = dir2.string();
  const TrainOutputs b = train_experiment(spec);
  REQUIRE(a.cells.size() == b.cells.size());
  for (std::size_t i = 0; i < a.cells.size(); ++i) {
    CHECK(a.cells[i].claimed);
    CHECK(slurp(a.cells[i].file) == slurp(b.cells[i].file));
  }
  CHECK(a.dataset_hash == b.dataset_hash);

  // A sequential sweep sits outside the subsampling analysis: same valid
  // calibration, but the budget stays unclaimed.
  const fs::path dir3 = fresh_dir("dptd_train_sweep");
  spec.out_dir = dir3.string();
  spec.optimizer.sequential_sweep = true;
  const TrainOutputs swept = train_experiment(spec);
  for (const auto& cell : swept.cells) {
    CHECK_FALSE(cell.claimed);
    CHECK(load_runlog_csv(cell.file)
              .header.at("calibration")
              .at("valid")
              .get<bool>());
  }
  fs::remove_all(dir1);
  fs::remove_all(dir2);
  fs::remove_all(dir3);
}

TEST_CASE("train: dptd with privacy off reproduces the non-private baseline") {
  const fs::path dir = fresh_dir("dptd_train_np");
  ExperimentSpec spec = small_spec(dir);
  spec.privacy.mode = "none";
  spec.privacy.epsilons.clear();
  spec.optimizer.clip_G = 0.0;
  spec.algorithms = {"dptd", "nonprivate_td"};
  spec.seeds = {5};
  const TrainOutputs out = train_experiment(spec);
  REQUIRE(out.cells.size() == 2);
  CHECK(strip_comments(slurp(out.cells[0].file)) ==
        strip_comments(slurp(out.cells[1].file)));
  fs::remove_all(dir);
}

TEST_CASE("report: single seed has zero std; two constant logs average") {
  const fs::path dir = fresh_dir("dptd_report_test");
  auto write_constant = [&](const std::string& name, double c) {
    std::vector<RunRow> rows;
    for (long t = 0; t < 6; ++t) {
      RunRow r;
      r.t = t;
      r.nu_t = 0.1;
      r.f_value = c;
      rows.push_back(r);
    }
    nlohmann::json header{{"algorithm", "dptd"}, {"calibration", nullptr}};
    write_runlog_csv((dir / name).string(), header, rows);
  };
  write_constant("dptd_seed1.csv", 2.0);
  const std::string out1 = (dir / "agg1.out").string();
  write_aggregate_report(dir.string(), out1, 3);
  {
    std::ifstream f(out1);
    std::string header, line;
    std::getline(f, header);
    REQUIRE(std::getline(f, line));
    CHECK(line.rfind("dptd,0,2,0,", 0) == 0);
  }
  write_constant("dptd_seed2.csv", 4.0);
  fs::remove(out1);
  const std::string out2 = (dir / "agg2.out").string();
  write_aggregate_report(dir.string(), out2, 3);
  {
    std::ifstream f(out2);
    std::string header, line;
    std::getline(f, header);
    REQUIRE(std::getline(f, line));
    // mean (2+4)/2 = 3, population std = 1
    CHECK(line.rfind("dptd,0,3,1,", 0) == 0);
  }
  fs::remove_all(dir);
}

TEST_CASE("report: matches a spreadsheet-style recomputation on 3 small logs") {
  const fs::path dir = fresh_dir("dptd_report_hand");
  const std::vector<std::vector<double>> values{
      {1.0, 2.0, 3.0, 4.0}, {2.0, 2.0, 2.0, 2.0}, {0.0, 4.0, 1.0, 5.0}};
  for (int seed = 0; seed < 3; ++seed) {
    std::vector<RunRow> rows;
    for (long t = 0; t < 4; ++t) {
      RunRow r;
      r.t = t;
      r.nu_t = 0.1;
      r.f_value = values[seed][t];
      rows.push_back(r);
    }
    nlohmann::json header{{"algorithm", "run"}, {"calibration", nullptr}};
    write_runlog_csv((dir / ("run_seed" + std::to_string(seed) + ".csv")).string(),
                     header, rows);
  }
  const std::string out = (dir / "agg.out").string();
  write_aggregate_report(dir.string(), out, 2);
  // epoch 0 per-seed means: 1.5, 2.0, 2.0 -> mean 11/6, std sqrt(1/18)
  // epoch 1 per-seed means: 3.5, 2.0, 3.0 -> mean 17/6
  std::ifstream f(out);
  std::string line;
  std::getline(f, line);  // header
  REQUIRE(std::getline(f, line));
  {
    std::stringstream ss(line);
    std::string group, epoch, mean, stdev;
    std::getline(ss, group, ',');
    std::getline(ss, epoch, ',');
    std::getline(ss, mean, ',');
    std::getline(ss, stdev, ',');
    CHECK(std::stod(mean) == doctest::Approx(11.0 / 6).epsilon(1e-12));
    CHECK(std::stod(stdev) ==
          doctest::Approx(std::sqrt(1.0 / 18.0)).epsilon(1e-9));
  }
  REQUIRE(std::getline(f, line));
  {
    std::stringstream ss(line);
    std::string group, epoch, mean;
    std::getline(ss, group, ',');
    std::getline(ss, epoch, ',');
    std::getline(ss, mean, ',');
    CHECK(std::stod(mean) == doctest::Approx(17.0 / 6).epsilon(1e-12));
  }
  fs::remove_all(dir);
}

TEST_CASE("experiment spec json round trip") {
  ExperimentSpec spec = small_spec("outdir");
  spec.privacy.epsilons = {0.1, 1.0, 10.0};
  spec.metric_interval = 25;
  const ExperimentSpec back = ExperimentSpec::from_json(spec.to_json());
  CHECK(back.to_json() == spec.to_json());
  CHECK(back.privacy.epsilons == spec.privacy.epsilons);
  CHECK(back.optimizer.T == spec.optimizer.T);
}

TEST_CASE("spec validation catches mode mismatches and unknown algorithms") {
  ExperimentSpec spec = small_spec("outdir");
  spec.privacy.mode = "trajectory";  // dataset is sas
  CHECK_THROWS_AS(spec.validate(), InvalidConfig);
  spec.privacy.mode = "sas";
  spec.algorithms = {"adamw"};
  CHECK_THROWS_AS(spec.validate(), InvalidConfig);
  spec.algorithms = {"dptd"};
  spec.privacy.epsilons.clear();
  CHECK_THROWS_AS(spec.validate(), InvalidConfig);
}

TEST_CASE("cli: generate/calibrate exit codes follow the contract") {
  const fs::path dir = fresh_dir("dptd_cli_test");
  const std::string data = (dir / "d.jsonl").string();
  CHECK(run_cli("generate --family chain --states 5 --mode sas --n 100 --out " +
                data) == 0);
  CHECK(run_cli("generate --family nosuch --out " + data + "x") == 2);
  // valid regime at desk scale
  CHECK(run_cli("calibrate --mode trajectory --epsilon 10 --delta 1e-5 "
                "--iters 20000 --n-max 5 --m 100 --clip 1 --grid") == 0);
  // sigma'^2 floor violated: report still printed, exit code 3
  CHECK(run_cli("calibrate --mode sas --epsilon 1 --delta 1e-5 --iters 100 "
                "--n 10000 --clip 1") == 3);
  fs::remove_all(dir);
}

TEST_CASE("cli: train runs a config file end to end") {
  const fs::path dir = fresh_dir("dptd_cli_train");
  ExperimentSpec spec = small_spec(dir / "runs");
  spec.optimizer.T = 200;
  spec.seeds = {1};
  const std::string cfg = (dir / "spec.json").string();
  {
    std::ofstream f(cfg);
    f << spec.to_json().dump(2) << "\n";
  }
  CHECK(run_cli("train --config " + cfg) == 0);
  CHECK(fs::exists(dir / "runs" / "summary.json"));
  CHECK(run_cli("report --dir " + (dir / "runs").string() + " --out " +
                (dir / "agg.csv").string() + " --epoch 100") == 0);
  CHECK(fs::exists(dir / "agg.csv"));
  fs::remove_all(dir);
}
