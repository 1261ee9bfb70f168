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

#include "dptd/mdp.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "dptd/errors.hpp"

namespace dptd {

namespace {
constexpr double kRowSumTol = 1e-12;
}

void TabularMdp::validate() const {
  if (n_states <= 0 || n_actions <= 0)
    throw std::invalid_argument("TabularMdp: state/action counts must be positive");
  if (!(gamma > 0.0 && gamma < 1.0))
    throw std::invalid_argument("TabularMdp: gamma must lie in (0, 1)");
  const std::size_t want_p =
      static_cast<std::size_t>(n_states) * n_actions * n_states;
  const std::size_t want_r = static_cast<std::size_t>(n_states) * n_actions;
  if (transition.size() != want_p || reward.size() != want_r)
    throw std::invalid_argument("TabularMdp: tensor shape mismatch");
  for (int s = 0; s < n_states; ++s) {
    for (int a = 0; a < n_actions; ++a) {
      double row = 0.0;
      for (int s2 = 0; s2 < n_states; ++s2) {
        const double v = p(s, a, s2);
        if (v < 0.0)
          throw std::invalid_argument("TabularMdp: negative transition probability");
        row += v;
      }
      if (std::fabs(row - 1.0) > kRowSumTol)
        throw std::invalid_argument("TabularMdp: transition row does not sum to 1");
    }
  }
}

Policy Policy::uniform(int n_states, int n_actions) {
  Policy p{n_states, n_actions,
           std::vector<double>(static_cast<std::size_t>(n_states) * n_actions,
                               1.0 / n_actions)};
  return p;
}

Policy Policy::deterministic(int n_states, int n_actions,
                             const std::vector<int>& action_per_state) {
  Policy p{n_states, n_actions,
           std::vector<double>(static_cast<std::size_t>(n_states) * n_actions,
                               0.0)};
  for (int s = 0; s < n_states; ++s) p.pi(s, action_per_state.at(s)) = 1.0;
  return p;
}

void Policy::validate() const {
  if (probs.size() != static_cast<std::size_t>(n_states) * n_actions)
    throw std::invalid_argument("Policy: shape mismatch");
  for (int s = 0; s < n_states; ++s) {
    double row = 0.0;
    for (int a = 0; a < n_actions; ++a) {
      if (pi(s, a) < 0.0)
        throw std::invalid_argument("Policy: negative probability");
      row += pi(s, a);
    }
    if (std::fabs(row - 1.0) > kRowSumTol)
      throw std::invalid_argument("Policy: row does not sum to 1");
  }
}

std::string to_string(DatasetMode mode) {
  return mode == DatasetMode::kStateActionState ? "sas" : "trajectory";
}

DatasetMode dataset_mode_from_string(const std::string& s) {
  if (s == "sas") return DatasetMode::kStateActionState;
  if (s == "trajectory") return DatasetMode::kTrajectory;
  throw std::invalid_argument("unknown dataset mode: " + s);
}

std::size_t TrajectoryDataset::transition_count() const {
  std::size_t n = 0;
  for (const auto& t : trajectories) n += t.size();
  return n;
}

std::vector<Transition> TrajectoryDataset::flat() const {
  std::vector<Transition> out;
  out.reserve(transition_count());
  for (const auto& t : trajectories) out.insert(out.end(), t.begin(), t.end());
  return out;
}

void TrajectoryDataset::validate() const {
  if (trajectories.empty())
    throw std::invalid_argument("TrajectoryDataset: needs at least one trajectory");
  if (mode == DatasetMode::kStateActionState && trajectories.size() != 1)
    throw std::invalid_argument(
        "TrajectoryDataset: state-action-state mode carries exactly one trajectory");
  for (const auto& traj : trajectories) {
    if (traj.empty())
      throw std::invalid_argument("TrajectoryDataset: empty trajectory");
    if (static_cast<int>(traj.size()) > n_max)
      throw std::invalid_argument("TrajectoryDataset: trajectory longer than n_max");
    for (const auto& tr : traj) {
      if (tr.state < 0 || tr.state >= n_states || tr.next_state < 0 ||
          tr.next_state >= n_states || tr.action < 0 || tr.action >= n_actions)
        throw std::invalid_argument("TrajectoryDataset: index out of bounds");
    }
  }
}

Matrix induced_transition(const TabularMdp& mdp, const Policy& policy) {
  if (policy.n_states != mdp.n_states || policy.n_actions != mdp.n_actions)
    throw std::invalid_argument("induced_transition: dimension mismatch");
  Matrix out(mdp.n_states, mdp.n_states);
  for (int s = 0; s < mdp.n_states; ++s)
    for (int a = 0; a < mdp.n_actions; ++a) {
      const double w = policy.pi(s, a);
      if (w == 0.0) continue;
      for (int s2 = 0; s2 < mdp.n_states; ++s2) out(s, s2) += w * mdp.p(s, a, s2);
    }
  return out;
}

Vector policy_reward(const TabularMdp& mdp, const Policy& policy) {
  if (policy.n_states != mdp.n_states || policy.n_actions != mdp.n_actions)
    throw std::invalid_argument("policy_reward: dimension mismatch");
  Vector out(mdp.n_states, 0.0);
  for (int s = 0; s < mdp.n_states; ++s)
    for (int a = 0; a < mdp.n_actions; ++a)
      out[s] += policy.pi(s, a) * mdp.r(s, a);
  return out;
}

Vector exact_value(const TabularMdp& mdp, const Policy& policy) {
  const Matrix ppi = induced_transition(mdp, policy);
  const Vector rpi = policy_reward(mdp, policy);
  const int n = mdp.n_states;
  Matrix a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      a(i, j) = (i == j ? 1.0 : 0.0) - mdp.gamma * ppi(i, j);
  Vector v = solve_lu(a, rpi);
  // Bellman residual check; gamma < 1 guarantees solvability, so a failure
  // here is a numerical one and must not pass silently.
  Vector bv = matvec(ppi, v);
  double resid = 0.0;
  for (int i = 0; i < n; ++i)
    resid = std::max(resid, std::fabs(v[i] - rpi[i] - mdp.gamma * bv[i]));
  if (resid > 1e-10)
    throw SingularSystem("exact_value: Bellman residual above 1e-10");
  return v;
}

Vector stationary_distribution(const TabularMdp& mdp, const Policy& policy,
                               long max_iters, double tol) {
  const Matrix ppi = induced_transition(mdp, policy);
  const int n = mdp.n_states;
  Vector mu(n, 1.0 / n);
  for (long it = 0; it < max_iters; ++it) {
    Vector next = matvec_t(ppi, mu);
    double mass = 0.0;
    for (double v : next) mass += v;
    for (double& v : next) v /= mass;
    double diff = 0.0;
    for (int i = 0; i < n; ++i) diff = std::max(diff, std::fabs(next[i] - mu[i]));
    mu = std::move(next);
    if (diff <= tol) return mu;
  }
  throw NonErgodicChain(
      "stationary_distribution: power iteration did not converge");
}

std::vector<Transition> sample_trajectory(const TabularMdp& mdp,
                                          const Policy& policy, long length,
                                          Rng& rng, const Vector* initial) {
  if (length < 1)
    throw std::invalid_argument("sample_trajectory: length must be >= 1");
  if (policy.n_states != mdp.n_states || policy.n_actions != mdp.n_actions)
    throw std::invalid_argument("sample_trajectory: dimension mismatch");

  auto draw = [&](std::span<const double> weights) {
    const double u = rng.uniform();
    double acc = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      acc += weights[i];
      if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(weights.size() - 1);
  };

  int s;
  if (initial != nullptr) {
    if (static_cast<int>(initial->size()) != mdp.n_states)
      throw std::invalid_argument("sample_trajectory: initial distribution size");
    s = draw(*initial);
  } else {
    s = static_cast<int>(rng.uniform_index(mdp.n_states));
  }

  std::vector<Transition> out;
  out.reserve(length);
  for (long i = 0; i < length; ++i) {
    const int a = draw(std::span<const double>(
        policy.probs.data() + static_cast<std::size_t>(s) * mdp.n_actions,
        static_cast<std::size_t>(mdp.n_actions)));
    const int s2 = draw(std::span<const double>(
        mdp.transition.data() +
            (static_cast<std::size_t>(s) * mdp.n_actions + a) * mdp.n_states,
        static_cast<std::size_t>(mdp.n_states)));
    out.push_back(Transition{s, a, s2, mdp.r(s, a)});
    s = s2;
  }
  return out;
}

void save_dataset(const std::string& path, const TrajectoryDataset& dataset) {
  dataset.validate();
  std::ofstream f(path);
  if (!f) throw std::runtime_error("save_dataset: cannot open " + path);
  nlohmann::json header{{"n_states", dataset.n_states},
                        {"n_actions", dataset.n_actions},
                        {"gamma", dataset.gamma},
                        {"mode", to_string(dataset.mode)},
                        {"n_max", dataset.n_max}};
  f << header.dump() << "\n";
  for (std::size_t i = 0; i < dataset.trajectories.size(); ++i) {
    for (const auto& tr : dataset.trajectories[i]) {
      nlohmann::json row{{"traj", i},
                         {"s", tr.state},
                         {"a", tr.action},
                         {"sp", tr.next_state},
                         {"r", tr.reward}};
      f << row.dump() << "\n";
    }
  }
}

TrajectoryDataset load_dataset(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ParseError("load_dataset: cannot open " + path);
  std::string line;
  long lineno = 0;

  auto parse_line = [&](const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
    if (j.is_discarded())
      throw ParseError("load_dataset: line " + std::to_string(lineno) +
                       ": invalid JSON");
    return j;
  };

  if (!std::getline(f, line))
    throw ParseError("load_dataset: line 1: missing header");
  ++lineno;
  nlohmann::json header = parse_line(line);

  TrajectoryDataset ds;
  try {
    ds.n_states = header.at("n_states").get<int>();
    ds.n_actions = header.at("n_actions").get<int>();
    ds.gamma = header.at("gamma").get<double>();
    ds.mode = dataset_mode_from_string(header.at("mode").get<std::string>());
    ds.n_max = header.at("n_max").get<int>();
  } catch (const std::exception& e) {
    throw ParseError("load_dataset: line 1: bad header: " + std::string(e.what()));
  }

  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j = parse_line(line);
    long traj;
    Transition tr;
    try {
      traj = j.at("traj").get<long>();
      tr.state = j.at("s").get<int>();
      tr.action = j.at("a").get<int>();
      tr.next_state = j.at("sp").get<int>();
      tr.reward = j.at("r").get<double>();
    } catch (const std::exception& e) {
      throw ParseError("load_dataset: line " + std::to_string(lineno) + ": " +
                       std::string(e.what()));
    }
    if (tr.state < 0 || tr.state >= ds.n_states || tr.next_state < 0 ||
        tr.next_state >= ds.n_states || tr.action < 0 ||
        tr.action >= ds.n_actions)
      throw ParseError("load_dataset: line " + std::to_string(lineno) +
                       ": index out of declared bounds");
    if (traj < 0 || traj > static_cast<long>(ds.trajectories.size()))
      throw ParseError("load_dataset: line " + std::to_string(lineno) +
                       ": trajectory ids must be contiguous");
    if (traj == static_cast<long>(ds.trajectories.size()))
      ds.trajectories.emplace_back();
    ds.trajectories[traj].push_back(tr);
  }
  try {
    ds.validate();
  } catch (const std::invalid_argument& e) {
    throw ParseError("load_dataset: " + std::string(e.what()));
  }
  return ds;
}

}  // namespace dptd
