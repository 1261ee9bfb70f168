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

#include "dptd/metric.hpp"

#include <stdexcept>

namespace dptd {

MetricSample evaluate_metric(const ValueModel& model, const IterState& state,
                             const Vector& theta_tilde,
                             const WeightedTransitions& batch, double kappa,
                             double l_f, double ridge,
                             double omega_box_radius) {
  if (batch.size() == 0)
    throw std::invalid_argument("evaluate_metric: empty batch");
  MetricSample m;
  m.l_f = l_f;
  m.m1 = norm2(sub(theta_tilde, state.theta)) / kappa;
  const Vector full_grad =
      mean_grad_primal(model, state.theta, state.omega, batch);
  m.m2 = norm2(sub(full_grad, state.p));
  const DualSolution sol =
      dual_maximizer(model, state.theta, batch, ridge, omega_box_radius);
  m.m3 = norm2(sub(state.omega, sol.omega));
  m.combined = m.m1 + m.m2 + l_f * m.m3;
  return m;
}

double average_metric(std::span<const RunRow> rows, double l_f) {
  double acc = 0.0;
  long n = 0;
  for (const auto& row : rows) {
    if (!row.metric) continue;
    const auto& m = *row.metric;
    acc += m[0] + m[1] + l_f * m[2];
    ++n;
  }
  if (n == 0)
    throw std::invalid_argument("average_metric: no metric samples in log");
  return acc / static_cast<double>(n);
}

std::function<std::array<double, 3>(const IterState&, const Vector&)>
make_metric_hook(const ValueModel& model, const WeightedTransitions& batch,
                 double kappa, double ridge, double omega_box_radius) {
  return [&model, &batch, kappa, ridge, omega_box_radius](
             const IterState& state, const Vector& theta_tilde) {
    const MetricSample m = evaluate_metric(model, state, theta_tilde, batch,
                                           kappa, 1.0, ridge, omega_box_radius);
    return std::array<double, 3>{m.m1, m.m2, m.m3};
  };
}

}  // namespace dptd
