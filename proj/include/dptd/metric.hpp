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

#ifndef DPTD_METRIC_HPP
#define DPTD_METRIC_HPP

#include "dptd/objective.hpp"
#include "dptd/optimizer.hpp"

namespace dptd {

// Three-part stationarity measure for the constrained saddle problem:
//   m1 = ||theta~ - theta|| / kappa
//   m2 = ||grad_theta F(theta, omega) - p||   (full-batch, unclipped)
//   m3 = ||omega - omega*(theta)||
// combined = m1 + m2 + l_f * m3 with a user-supplied smoothness constant.
struct MetricSample {
  double m1 = 0.0;
  double m2 = 0.0;
  double m3 = 0.0;
  double l_f = 1.0;
  double combined = 0.0;
};

MetricSample evaluate_metric(const ValueModel& model, const IterState& state,
                             const Vector& theta_tilde,
                             const WeightedTransitions& batch, double kappa,
                             double l_f = 1.0, double ridge = 1e-8,
                             double omega_box_radius = 1.0);

// Mean of the combined metric over the rows that carry one.
double average_metric(std::span<const RunRow> rows, double l_f = 1.0);

// Adapter wiring the metric into the run loop's hook slot.
std::function<std::array<double, 3>(const IterState&, const Vector&)>
make_metric_hook(const ValueModel& model, const WeightedTransitions& batch,
                 double kappa, double ridge = 1e-8,
                 double omega_box_radius = 1.0);

}  // namespace dptd

#endif  // DPTD_METRIC_HPP
