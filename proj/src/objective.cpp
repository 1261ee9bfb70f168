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

#include "dptd/objective.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dptd/errors.hpp"

namespace dptd {

WeightedTransitions WeightedTransitions::from_dataset(
    const TrajectoryDataset& ds) {
  WeightedTransitions out;
  out.items = ds.flat();
  if (out.items.empty())
    throw std::invalid_argument("WeightedTransitions: empty dataset");
  out.weights.assign(out.items.size(), 1.0 / out.items.size());
  out.gamma = ds.gamma;
  return out;
}

WeightedTransitions WeightedTransitions::from_mdp(const TabularMdp& mdp,
                                                  const Policy& policy) {
  const Vector mu = stationary_distribution(mdp, policy);
  WeightedTransitions out;
  out.gamma = mdp.gamma;
  for (int s = 0; s < mdp.n_states; ++s)
    for (int a = 0; a < mdp.n_actions; ++a) {
      const double wa = mu[s] * policy.pi(s, a);
      if (wa == 0.0) continue;
      for (int s2 = 0; s2 < mdp.n_states; ++s2) {
        const double w = wa * mdp.p(s, a, s2);
        if (w == 0.0) continue;
        out.items.push_back(Transition{s, a, s2, mdp.r(s, a)});
        out.weights.push_back(w);
      }
    }
  return out;
}

double td_error(const ValueModel& model, std::span<const double> theta,
                const Transition& xi, double gamma) {
  return xi.reward + gamma * model.value(theta, xi.next_state) -
         model.value(theta, xi.state);
}

double loss(const ValueModel& model, std::span<const double> theta,
            std::span<const double> omega, const Transition& xi, double gamma) {
  const Vector psi = model.grad_vec(theta, xi.state);
  const double delta = td_error(model, theta, xi, gamma);
  const double proj = dot(psi, omega);
  return delta * proj - 0.5 * proj * proj;
}

Vector grad_dual(const ValueModel& model, std::span<const double> theta,
                 std::span<const double> omega, const Transition& xi,
                 double gamma) {
  Vector psi = model.grad_vec(theta, xi.state);
  const double delta = td_error(model, theta, xi, gamma);
  const double proj = dot(psi, omega);
  scale(delta - proj, psi);
  return psi;
}

Vector grad_primal(const ValueModel& model, std::span<const double> theta,
                   std::span<const double> omega, const Transition& xi,
                   double gamma) {
  const Vector psi_s = model.grad_vec(theta, xi.state);
  const Vector psi_sp = model.grad_vec(theta, xi.next_state);
  const double delta = td_error(model, theta, xi, gamma);
  const double proj = dot(psi_s, omega);
  Vector out = model.hvp_vec(theta, xi.state, omega);
  scale(delta - proj, out);
  axpy(gamma * proj, psi_sp, out);
  axpy(-proj, psi_s, out);
  return out;
}

SampleGrad sample_grad(const ValueModel& model, std::span<const double> theta,
                       std::span<const double> omega, const Transition& xi,
                       double gamma) {
  const Vector psi_s = model.grad_vec(theta, xi.state);
  const Vector psi_sp = model.grad_vec(theta, xi.next_state);
  const double delta = td_error(model, theta, xi, gamma);
  const double proj = dot(psi_s, omega);

  SampleGrad g;
  g.primal = model.hvp_vec(theta, xi.state, omega);
  scale(delta - proj, g.primal);
  axpy(gamma * proj, psi_sp, g.primal);
  axpy(-proj, psi_s, g.primal);

  g.dual = psi_s;
  scale(delta - proj, g.dual);
  return g;
}

double empirical_f(const ValueModel& model, std::span<const double> theta,
                   std::span<const double> omega,
                   const WeightedTransitions& batch) {
  if (batch.size() == 0)
    throw std::invalid_argument("empirical_f: empty batch");
  double acc = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i)
    acc += batch.weights[i] *
           loss(model, theta, omega, batch.items[i], batch.gamma);
  return acc;
}

Vector mean_grad_primal(const ValueModel& model, std::span<const double> theta,
                        std::span<const double> omega,
                        const WeightedTransitions& batch) {
  if (batch.size() == 0)
    throw std::invalid_argument("mean_grad_primal: empty batch");
  Vector acc(model.dim(), 0.0);
  for (std::size_t i = 0; i < batch.size(); ++i)
    axpy(batch.weights[i],
         grad_primal(model, theta, omega, batch.items[i], batch.gamma), acc);
  return acc;
}

Vector mean_grad_dual(const ValueModel& model, std::span<const double> theta,
                      std::span<const double> omega,
                      const WeightedTransitions& batch) {
  if (batch.size() == 0)
    throw std::invalid_argument("mean_grad_dual: empty batch");
  Vector acc(model.dim(), 0.0);
  for (std::size_t i = 0; i < batch.size(); ++i)
    axpy(batch.weights[i],
         grad_dual(model, theta, omega, batch.items[i], batch.gamma), acc);
  return acc;
}

Matrix gram(const ValueModel& model, std::span<const double> theta,
            const WeightedTransitions& batch) {
  if (batch.size() == 0) throw std::invalid_argument("gram: empty batch");
  const int d = model.dim();
  Matrix g(d, d);
  Vector psi(d);
  for (std::size_t n = 0; n < batch.size(); ++n) {
    model.grad(theta, batch.items[n].state, psi);
    const double w = batch.weights[n];
    for (int i = 0; i < d; ++i) {
      const double wi = w * psi[i];
      if (wi == 0.0) continue;
      for (int j = 0; j < d; ++j) g(i, j) += wi * psi[j];
    }
  }
  return g;
}

Vector mean_td_grad(const ValueModel& model, std::span<const double> theta,
                    const WeightedTransitions& batch) {
  if (batch.size() == 0)
    throw std::invalid_argument("mean_td_grad: empty batch");
  Vector acc(model.dim(), 0.0);
  Vector psi(model.dim());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& xi = batch.items[i];
    model.grad(theta, xi.state, psi);
    axpy(batch.weights[i] * td_error(model, theta, xi, batch.gamma), psi, acc);
  }
  return acc;
}

DualSolution dual_maximizer(const ValueModel& model,
                            std::span<const double> theta,
                            const WeightedTransitions& batch, double ridge,
                            double box_radius) {
  Matrix g = gram(model, theta, batch);
  for (std::size_t i = 0; i < g.rows(); ++i) g(i, i) += ridge;
  const Vector b = mean_td_grad(model, theta, batch);
  Vector omega;
  try {
    omega = solve_spd(g, b);
  } catch (const SingularSystem&) {
    throw SingularGram(
        "dual_maximizer: Gram matrix is singular; use a nonzero ridge");
  }
  DualSolution sol{std::move(omega), false};
  for (double& v : sol.omega) {
    if (std::fabs(v) > box_radius) {
      v = std::clamp(v, -box_radius, box_radius);
      sol.at_boundary = true;
    }
  }
  return sol;
}

double mspbe(const ValueModel& model, std::span<const double> theta,
             const WeightedTransitions& batch, double ridge) {
  Matrix g = gram(model, theta, batch);
  for (std::size_t i = 0; i < g.rows(); ++i) g(i, i) += ridge;
  const Vector b = mean_td_grad(model, theta, batch);
  Vector x;
  try {
    x = solve_spd(g, b);
  } catch (const SingularSystem&) {
    throw SingularGram("mspbe: Gram matrix is singular; use a nonzero ridge");
  }
  return 0.5 * dot(b, x);
}

Vector clip_to_norm(Vector g, double bound) {
  clip_to_norm_inplace(g, bound);
  return g;
}

void clip_to_norm_inplace(std::span<double> g, double bound) {
  if (bound <= 0.0)
    throw std::invalid_argument("clip_to_norm: bound must be positive");
  const double n = norm2(g);
  if (n > bound) scale(bound / n, g);
}

}  // namespace dptd
