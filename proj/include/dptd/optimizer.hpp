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

#ifndef DPTD_OPTIMIZER_HPP
#define DPTD_OPTIMIZER_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>

#include "dptd/mdp.hpp"
#include "dptd/objective.hpp"
#include "dptd/privacy.hpp"
#include "dptd/value_model.hpp"

namespace dptd {

// Single-timescale projected momentum stochastic gradient descent-ascent with
// per-iteration Gaussian perturbation of both gradient estimators.
struct DptdConfig {
  double kappa = 2.0;  // primal step scale
  double eta = 2.0;    // dual step scale
  double alpha = 3.0;  // primal momentum weight
  double beta = 3.0;   // dual momentum weight
  double nu_a = 0.25;  // schedule numerator: nu_t = nu_a / sqrt(t + nu_b)
  double nu_b = 3.0;
  long T = 0;  // iteration count
  double box_radius = 1.0;
  double clip_G = 1.0;  // per-sample gradient clip bound; <= 0 disables
  std::optional<NoiseCalibration> noise;
  std::uint64_t seed = 0;
  // Cyclic pass over the dataset instead of uniform sampling. Debugging aid:
  // the accountant's subsampling bound does not cover it, so such runs never
  // claim a privacy budget.
  bool sequential_sweep = false;

  double nu(long t) const {
    return nu_a / std::sqrt(static_cast<double>(t) + nu_b);
  }
  double sigma() const { return noise ? noise->sigma : 0.0; }

  // Enforces alpha nu_t <= 1 and beta nu_t <= 1 for all t, positive scales,
  // and consistency between the noise calibration and (T, clip_G).
  void validate() const;
};

struct IterState {
  Vector theta, omega;  // primal/dual iterates, inside the box
  Vector p, d;          // momentum gradient estimators
  long t = 0;
};

struct StepRecord {
  Vector theta_tilde, omega_tilde;  // pre-averaging projected targets
  double nu_t = 0.0;
  std::uint64_t noise_draws_primal = 0;  // stream positions before the draw
  std::uint64_t noise_draws_dual = 0;
};

// Coordinate-wise clamp onto [-radius, radius]; idempotent and nonexpansive.
Vector project_box(Vector x, double radius);
void project_box_inplace(std::span<double> x, double radius);

// Aggregate stochastic gradient of the sampled unit: one transition in
// state-action-state mode, a whole trajectory in trajectory mode. Per-sample
// gradients are clipped to clip_G (when positive) and summed, so the
// trajectory-mode aggregate stays within the 2nG sensitivity budget.
SampleGrad unit_grad(const ValueModel& model, std::span<const double> theta,
                     std::span<const double> omega,
                     std::span<const Transition> unit, double gamma,
                     double clip_G);

// p0 = clipped gradient at (theta0, omega0; xi0) plus Gaussian noise; same on
// the dual side.
IterState dptd_init(const DptdConfig& config, const ValueModel& model,
                    std::span<const Transition> unit, double gamma,
                    Rng& noise_primal, Rng& noise_dual, Vector theta0,
                    Vector omega0);

// One update:
//   theta~ = P(theta - kappa p),  omega~ = P(omega + eta d)
//   theta += nu_t (theta~ - theta), omega += nu_t (omega~ - omega)
//   gradients at the new iterate on `unit`, clipped when private
//   p = (1 - alpha nu_t) p + alpha nu_t g_theta + u_p   (u ~ N(0, sigma^2 I))
//   d = (1 - beta  nu_t) d + beta  nu_t g_omega + u_d
std::pair<IterState, StepRecord> dptd_step(const IterState& state,
                                           std::span<const Transition> unit,
                                           const DptdConfig& config,
                                           const ValueModel& model,
                                           double gamma, Rng& noise_primal,
                                           Rng& noise_dual);

struct RunRow {
  long t = 0;
  double nu_t = 0.0;
  std::optional<double> f_value;
  std::optional<double> mspbe;
  std::optional<std::array<double, 3>> metric;  // m1, m2, m3
};

struct RunHooks {
  long f_interval = 1;       // objective logging period; 0 disables
  long metric_interval = 0;  // mspbe + metric period; 0 disables
  std::function<double(std::span<const double>, std::span<const double>)>
      f_eval;  // (theta, omega) -> empirical objective
  std::function<double(std::span<const double>)> mspbe_eval;
  std::function<std::array<double, 3>(const IterState&, const Vector&)>
      metric_eval;  // (iterate, theta_tilde) -> components
};

struct RunResult {
  Vector theta_out, omega_out;  // iterate sampled uniformly from t = 0..T-1
  long out_index = 0;
  IterState final_state;
  std::vector<RunRow> rows;
};

// Runs T steps. Fully deterministic given (config, dataset); all randomness
// comes from streams derived from config.seed.
RunResult run_dptd(const DptdConfig& config, const ValueModel& model,
                   const TrajectoryDataset& dataset, const RunHooks& hooks = {});

enum class BaselineKind {
  kNonPrivateTd,      // the momentum algorithm with sigma = 0
  kPlainSgda,         // simultaneous projected gradient steps, no momentum
  kPrivatePlainSgda,  // plain steps on noised clipped gradients
};

std::string to_string(BaselineKind kind);

RunResult run_baseline(BaselineKind kind, DptdConfig config,
                       const ValueModel& model, const TrajectoryDataset& dataset,
                       const RunHooks& hooks = {});

}  // namespace dptd

#endif  // DPTD_OPTIMIZER_HPP
