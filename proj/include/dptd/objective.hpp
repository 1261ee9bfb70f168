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

#ifndef DPTD_OBJECTIVE_HPP
#define DPTD_OBJECTIVE_HPP

#include <limits>
#include <span>

#include "dptd/linalg.hpp"
#include "dptd/mdp.hpp"
#include "dptd/value_model.hpp"

namespace dptd {

// A distribution over transitions: either a dataset with uniform weights or
// the exact visitation law of an MDP under a policy. All batch quantities
// below are weighted sums, so both sources share one code path.
struct WeightedTransitions {
  std::vector<Transition> items;
  Vector weights;  // sums to 1
  double gamma = 0.0;

  std::size_t size() const { return items.size(); }

  static WeightedTransitions from_dataset(const TrajectoryDataset& ds);
  // Enumerates (s, a, s') with weights mu_pi(s) pi(a|s) P(s, a, s') and
  // realized rewards R(s, a).
  static WeightedTransitions from_mdp(const TabularMdp& mdp,
                                      const Policy& policy);
};

struct SampleGrad {
  Vector primal;  // d f / d theta
  Vector dual;    // d f / d omega
};

// delta = r + gamma V(s') - V(s)
double td_error(const ValueModel& model, std::span<const double> theta,
                const Transition& xi, double gamma);

// f(theta, omega; xi) = delta (psi(s).omega) - 1/2 (psi(s).omega)^2
double loss(const ValueModel& model, std::span<const double> theta,
            std::span<const double> omega, const Transition& xi, double gamma);

// d f / d omega = delta psi(s) - (psi(s).omega) psi(s)
Vector grad_dual(const ValueModel& model, std::span<const double> theta,
                 std::span<const double> omega, const Transition& xi,
                 double gamma);

// d f / d theta = (gamma psi(s') - psi(s)) (psi(s).omega)
//               + (delta - psi(s).omega) H(s) omega
// with H(s) the value Hessian; the second term vanishes for linear models.
Vector grad_primal(const ValueModel& model, std::span<const double> theta,
                   std::span<const double> omega, const Transition& xi,
                   double gamma);

// Both gradients at once, sharing the psi evaluations.
SampleGrad sample_grad(const ValueModel& model, std::span<const double> theta,
                       std::span<const double> omega, const Transition& xi,
                       double gamma);

// Weighted mean of the per-sample loss. Throws on an empty batch.
double empirical_f(const ValueModel& model, std::span<const double> theta,
                   std::span<const double> omega,
                   const WeightedTransitions& batch);

Vector mean_grad_primal(const ValueModel& model, std::span<const double> theta,
                        std::span<const double> omega,
                        const WeightedTransitions& batch);
Vector mean_grad_dual(const ValueModel& model, std::span<const double> theta,
                      std::span<const double> omega,
                      const WeightedTransitions& batch);

// G_theta = E[psi(s) psi(s)^T] over the batch's source states.
Matrix gram(const ValueModel& model, std::span<const double> theta,
            const WeightedTransitions& batch);

// E[delta psi(s)] over the batch.
Vector mean_td_grad(const ValueModel& model, std::span<const double> theta,
                    const WeightedTransitions& batch);

struct DualSolution {
  Vector omega;
  bool at_boundary = false;  // clamped into the feasible box
};

// Solves (G + ridge I) omega = E[delta psi]; the unconstrained maximizer of
// the dual quadratic. Solutions leaving the box are clamped and flagged.
// ridge == 0 with a rank-deficient Gram throws SingularGram.
DualSolution dual_maximizer(
    const ValueModel& model, std::span<const double> theta,
    const WeightedTransitions& batch, double ridge = 1e-8,
    double box_radius = std::numeric_limits<double>::infinity());

// 1/2 E[delta psi]^T (G + ridge I)^{-1} E[delta psi]; nonnegative.
double mspbe(const ValueModel& model, std::span<const double> theta,
             const WeightedTransitions& batch, double ridge = 1e-8);

// Rescales g onto the L2 ball of radius bound when it lies outside.
Vector clip_to_norm(Vector g, double bound);
void clip_to_norm_inplace(std::span<double> g, double bound);

}  // namespace dptd

#endif  // DPTD_OBJECTIVE_HPP
