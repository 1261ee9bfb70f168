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

#ifndef DPTD_HARNESS_HPP
#define DPTD_HARNESS_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dptd/mdp.hpp"
#include "dptd/metric.hpp"
#include "dptd/objective.hpp"
#include "dptd/optimizer.hpp"
#include "dptd/privacy.hpp"
#include "dptd/value_model.hpp"

namespace dptd {

// ---------------------------------------------------------------------------
// Built-in MDP families. Tabular dynamics keep every oracle exact.

// Random-walk chain with k states and left/right actions. Stepping off either
// end pays -1/+1 and restarts at the middle state, which keeps the chain
// ergodic and the value function inside the unit box.
TabularMdp make_chain_mdp(int k, double gamma = 0.95);

// Dirichlet-sampled ergodic MDP with rewards uniform on [-0.5, 0.5].
TabularMdp make_random_mdp(int k, int n_actions, std::uint64_t seed,
                           double gamma = 0.95);

// Two states, two actions, +-0.5 rewards; small enough to analyze by hand.
TabularMdp make_twostate_mdp(double gamma = 0.95);

struct MdpSpec {
  std::string family = "chain";
  int states = 5;
  int actions = 2;
  std::uint64_t seed = 0;
  double gamma = 0.95;
};

TabularMdp make_mdp(const MdpSpec& spec);

// ---------------------------------------------------------------------------
// Experiment specification (JSON config surface of the CLI).

struct DatasetSpec {
  std::string mode = "sas";  // "sas" or "trajectory"
  long n = 1000;             // sas: trajectory length
  long m = 5;                // trajectory mode: trajectory count
  long n_max = 100;          // trajectory mode: per-trajectory length
  std::uint64_t seed = 0;
  std::string path;  // when set, load instead of generating
};

struct ModelSpec {
  std::string kind = "linear";     // "linear" or "mlp"
  std::string features = "onehot";  // "onehot" or "random"
  int feature_dim = 8;              // for random features
  std::uint64_t feature_seed = 0;
  int hidden = 50;
};

struct PrivacySpec {
  std::string mode = "none";  // "none", "sas", "trajectory"
  std::vector<double> epsilons;
  double delta = 1e-5;
  double beta_prime = 0.5;
  bool grid_search = true;
};

struct ExperimentSpec {
  MdpSpec mdp;
  std::string policy = "uniform";
  DatasetSpec dataset;
  ModelSpec model;
  DptdConfig optimizer;
  PrivacySpec privacy;
  std::vector<std::string> algorithms{"dptd"};
  std::vector<std::uint64_t> seeds{1};
  long f_interval = 10;
  long metric_interval = 10;
  double l_f = 1.0;
  double ridge = 1e-8;
  std::string out_dir = "out";

  static ExperimentSpec from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  void validate() const;
};

nlohmann::json dptd_config_to_json(const DptdConfig& c);
DptdConfig dptd_config_from_json(const nlohmann::json& j);

// ---------------------------------------------------------------------------
// Dataset generation and hashing.

TrajectoryDataset generate_dataset(const TabularMdp& mdp, const Policy& policy,
                                   const DatasetSpec& spec);

std::uint64_t fnv1a64(const std::string& bytes);
std::string file_hash_hex(const std::string& path);

// ---------------------------------------------------------------------------
// Run logs on disk: '#'-prefixed JSON header lines, then CSV rows
// t,nu_t,F_value,mspbe,m1,m2,m3 with empty cells for values not logged.

void write_runlog_csv(const std::string& path, const nlohmann::json& header,
                      std::span<const RunRow> rows);

struct LoadedRunLog {
  nlohmann::json header;
  std::vector<RunRow> rows;
};

LoadedRunLog load_runlog_csv(const std::string& path);

// ---------------------------------------------------------------------------
// Training orchestration: one run per (algorithm, epsilon, seed) cell,
// executed concurrently, plus a summary with per-cell finals and per-group
// aggregates.

struct CellResult {
  std::string algorithm;
  std::optional<double> epsilon;
  std::uint64_t seed = 0;
  std::string file;
  double final_f = 0.0;
  double final_f_gap = 0.0;  // |F| at the last logged iterate
  std::optional<double> final_mspbe;
  std::optional<double> min_mspbe;
  bool claimed = false;  // budget claimable (valid calibration)
};

struct TrainOutputs {
  nlohmann::json summary;
  std::vector<CellResult> cells;
  std::string dataset_file;
  std::string dataset_hash;
};

TrainOutputs train_experiment(const ExperimentSpec& spec);

// Aggregates per-seed logs in `dir` into epoch-block curves with mean and
// standard deviation columns. Throws InvalidConfig on mixed schemas.
void write_aggregate_report(const std::string& dir, const std::string& out_csv,
                            long epoch_len = 100);

// Deterministic formatting used for every floating-point value we emit.
std::string format_double(double v);

}  // namespace dptd

#endif  // DPTD_HARNESS_HPP
