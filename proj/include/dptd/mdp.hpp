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

#ifndef DPTD_MDP_HPP
#define DPTD_MDP_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dptd/linalg.hpp"
#include "dptd/rng.hpp"

namespace dptd {

// Finite discounted MDP (S, A, P, R, gamma) in tabular form.
// P is stored as a flat [s][a][s'] tensor, R as a flat [s][a] table.
struct TabularMdp {
  int n_states = 0;
  int n_actions = 0;
  std::vector<double> transition;  // n_states * n_actions * n_states
  std::vector<double> reward;      // n_states * n_actions
  double gamma = 0.0;

  double p(int s, int a, int s2) const {
    return transition[(static_cast<std::size_t>(s) * n_actions + a) * n_states +
                      s2];
  }
  double& p(int s, int a, int s2) {
    return transition[(static_cast<std::size_t>(s) * n_actions + a) * n_states +
                      s2];
  }
  double r(int s, int a) const {
    return reward[static_cast<std::size_t>(s) * n_actions + a];
  }
  double& r(int s, int a) {
    return reward[static_cast<std::size_t>(s) * n_actions + a];
  }

  // Checks shapes, row-stochasticity within 1e-12, and gamma in (0, 1).
  void validate() const;
};

struct Policy {
  int n_states = 0;
  int n_actions = 0;
  std::vector<double> probs;  // n_states * n_actions

  double pi(int s, int a) const {
    return probs[static_cast<std::size_t>(s) * n_actions + a];
  }
  double& pi(int s, int a) {
    return probs[static_cast<std::size_t>(s) * n_actions + a];
  }

  static Policy uniform(int n_states, int n_actions);
  static Policy deterministic(int n_states, int n_actions,
                              const std::vector<int>& action_per_state);

  void validate() const;
};

// One recorded step. The realized reward travels with the triple because the
// sampled TD error consumes it.
struct Transition {
  int state = 0;
  int action = 0;
  int next_state = 0;
  double reward = 0.0;

  bool operator==(const Transition&) const = default;
};

enum class DatasetMode { kStateActionState, kTrajectory };

std::string to_string(DatasetMode mode);
DatasetMode dataset_mode_from_string(const std::string& s);

struct TrajectoryDataset {
  DatasetMode mode = DatasetMode::kStateActionState;
  int n_states = 0;
  int n_actions = 0;
  double gamma = 0.0;
  int n_max = 0;  // maximum trajectory length (recorded for trajectory mode)
  std::vector<std::vector<Transition>> trajectories;

  std::size_t transition_count() const;
  std::vector<Transition> flat() const;

  // Mode invariants: state-action-state has exactly one nonempty trajectory;
  // trajectory mode has m >= 1 trajectories each of length <= n_max.
  void validate() const;
};

// P^pi(s, s') = sum_a pi(a|s) P(s, a, s'). Rows sum to 1 within 1e-10.
Matrix induced_transition(const TabularMdp& mdp, const Policy& policy);

// R^pi(s) = sum_a pi(a|s) R(s, a).
Vector policy_reward(const TabularMdp& mdp, const Policy& policy);

// Solves the Bellman system (I - gamma P^pi) V = R^pi directly and checks the
// fixed-point residual to 1e-10.
Vector exact_value(const TabularMdp& mdp, const Policy& policy);

// Stationary distribution of the induced chain by power iteration.
// Throws NonErgodicChain if the iteration cap is exhausted.
Vector stationary_distribution(const TabularMdp& mdp, const Policy& policy,
                               long max_iters = 1000000, double tol = 1e-12);

// Samples a trajectory of `length` transitions following `policy`. The initial
// state is drawn from `initial` when given, otherwise uniformly.
std::vector<Transition> sample_trajectory(const TabularMdp& mdp,
                                          const Policy& policy, long length,
                                          Rng& rng,
                                          const Vector* initial = nullptr);

// Line-oriented JSON dataset file: one header object, then one object per
// transition. Round trips are lossless.
void save_dataset(const std::string& path, const TrajectoryDataset& dataset);
TrajectoryDataset load_dataset(const std::string& path);

}  // namespace dptd

#endif  // DPTD_MDP_HPP
