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

#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "dptd/errors.hpp"
#include "dptd/harness.hpp"

namespace {

// Exit codes: 0 success, 2 invalid configuration, 3 privacy regime invalid.
constexpr int kOk = 0;
constexpr int kBadConfig = 2;
constexpr int kBadRegime = 3;

int run_generate(const std::string& family, int states, int actions,
                 std::uint64_t mdp_seed, double gamma, const std::string& mode,
                 long n, long m, long n_max, std::uint64_t seed,
                 const std::string& out) {
  dptd::MdpSpec mspec{family, states, actions, mdp_seed, gamma};
  const dptd::TabularMdp mdp = dptd::make_mdp(mspec);
  const dptd::Policy policy = dptd::Policy::uniform(mdp.n_states, mdp.n_actions);
  dptd::DatasetSpec dspec;
  dspec.mode = mode;
  dspec.n = n;
  dspec.m = m;
  dspec.n_max = n_max;
  dspec.seed = seed;
  const dptd::TrajectoryDataset ds = dptd::generate_dataset(mdp, policy, dspec);
  dptd::save_dataset(out, ds);
  std::cout << "wrote " << ds.transition_count() << " transitions to " << out
            << " (hash " << dptd::file_hash_hex(out) << ")\n";
  return kOk;
}

int run_calibrate(const std::string& mode, double epsilon, double delta,
                  long iters, long n, long n_max, long m, double clip,
                  double beta_prime, bool grid) {
  const dptd::PrivacyBudget budget{epsilon, delta};
  dptd::NoiseCalibration cal;
  if (mode == "sas") {
    cal = grid ? dptd::calibrate_sas_grid(budget, iters, n, clip)
               : dptd::calibrate_sas(budget, iters, n, clip, beta_prime);
  } else if (mode == "trajectory") {
    cal = grid ? dptd::calibrate_trajectory_grid(budget, iters, n_max, m, clip)
               : dptd::calibrate_trajectory(budget, iters, n_max, m, clip,
                                            beta_prime);
  } else {
    throw dptd::InvalidConfig("calibrate: mode must be sas or trajectory");
  }

  nlohmann::json report = cal.to_json();
  try {
    // Forward accounting over the default grid plus the calibration's own
    // order; reports the tightest epsilon the noise actually achieves.
    std::vector<double> alphas = dptd::default_alpha_grid();
    alphas.push_back(cal.alpha_prime);
    const dptd::AchievedBudget achieved = dptd::verify_budget(
        cal.sigma, cal.iterations, cal.sensitivity, cal.sampling_rate,
        cal.delta, alphas);
    report["achieved"] = {{"epsilon", achieved.epsilon},
                          {"alpha", achieved.alpha}};
  } catch (const dptd::NoAdmissibleOrder&) {
    report["achieved"] = nullptr;
  }
  if (!cal.valid)
    report["hint"] =
        "regime invalid: try a larger dataset, fewer iterations, or a "
        "different beta'";
  std::cout << report.dump(2) << "\n";
  return cal.valid ? kOk : kBadRegime;
}

int run_train(const std::string& config_path, const std::string& out_dir) {
  std::ifstream f(config_path);
  if (!f) throw dptd::InvalidConfig("train: cannot open " + config_path);
  nlohmann::json j = nlohmann::json::parse(f, nullptr, false);
  if (j.is_discarded())
    throw dptd::ParseError("train: invalid JSON in " + config_path);
  dptd::ExperimentSpec spec = dptd::ExperimentSpec::from_json(j);
  if (!out_dir.empty()) spec.out_dir = out_dir;
  const dptd::TrainOutputs outputs = dptd::train_experiment(spec);
  std::cout << "wrote " << outputs.cells.size() << " run logs under "
            << spec.out_dir << "\n";
  for (const auto& agg : outputs.summary.at("aggregates"))
    std::cout << agg.dump() << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Differentially private temporal-difference policy evaluation"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("generate", "Sample a dataset from a built-in MDP family");
  std::string family = "chain", mode = "sas", out = "dataset.jsonl";
  int states = 5, actions = 2;
  std::uint64_t mdp_seed = 0, seed = 0;
  double gamma = 0.95;
  long n = 1000, m = 5, n_max = 100;
  gen->add_option("--family", family, "chain | random | twostate");
  gen->add_option("--states", states);
  gen->add_option("--actions", actions);
  gen->add_option("--mdp-seed", mdp_seed);
  gen->add_option("--gamma", gamma);
  gen->add_option("--mode", mode, "sas | trajectory");
  gen->add_option("--n", n, "trajectory length (sas mode)");
  gen->add_option("--m", m, "trajectory count (trajectory mode)");
  gen->add_option("--n-max", n_max, "trajectory length (trajectory mode)");
  gen->add_option("--seed", seed);
  gen->add_option("--out", out);

  auto* cal = app.add_subcommand("calibrate", "Calibrate per-iteration Gaussian noise for a budget");
  std::string cal_mode = "sas";
  double epsilon = 1.0, delta = 1e-5, clip = 1.0, beta_prime = 0.5;
  long iters = 1000, cal_n = 1000, cal_n_max = 100, cal_m = 5;
  bool grid = false;
  cal->add_option("--mode", cal_mode, "sas | trajectory");
  cal->add_option("--epsilon", epsilon)->required();
  cal->add_option("--delta", delta);
  cal->add_option("--iters", iters, "iteration count T");
  cal->add_option("--n", cal_n, "trajectory length (sas mode)");
  cal->add_option("--n-max", cal_n_max, "max trajectory length (trajectory mode)");
  cal->add_option("--m", cal_m, "trajectory count (trajectory mode)");
  cal->add_option("--clip", clip, "per-sample gradient clip bound G");
  cal->add_option("--beta-prime", beta_prime);
  cal->add_flag("--grid", grid, "grid-search beta' minimizing sigma^2");

  auto* train = app.add_subcommand("train", "Run an experiment described by a JSON spec");
  std::string config_path, train_out;
  train->add_option("--config", config_path)->required();
  train->add_option("--out-dir", train_out, "override the spec's output directory");

  auto* report = app.add_subcommand("report", "Aggregate run logs into mean/std curves");
  std::string report_dir, report_out = "aggregate.csv";
  long epoch_len = 100;
  report->add_option("--dir", report_dir)->required();
  report->add_option("--out", report_out);
  report->add_option("--epoch", epoch_len, "iterations per epoch block");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed())
      return run_generate(family, states, actions, mdp_seed, gamma, mode, n, m,
                          n_max, seed, out);
    if (cal->parsed())
      return run_calibrate(cal_mode, epsilon, delta, iters, cal_n, cal_n_max,
                           cal_m, clip, beta_prime, grid);
    if (train->parsed()) return run_train(config_path, train_out);
    if (report->parsed()) {
      dptd::write_aggregate_report(report_dir, report_out, epoch_len);
      std::cout << "wrote " << report_out << "\n";
      return kOk;
    }
  } catch (const dptd::InvalidRegime& e) {
    std::cerr << "error: " << e.what() << "\n";
    for (const auto& c : e.failed) std::cerr << "  " << c << "\n";
    return kBadRegime;
  } catch (const dptd::NoAdmissibleOrder& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kBadRegime;
  } catch (const dptd::InvalidConfig& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kBadConfig;
  } catch (const dptd::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kBadConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kBadConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kBadConfig;
}
