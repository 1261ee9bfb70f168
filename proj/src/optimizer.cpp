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

#include "dptd/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dptd {

namespace {

// Stream indices derived from the run seed. Primal and dual noise live on
// separate streams so disabling one side never perturbs the other.
enum Stream : std::uint64_t {
  kThetaInit = 0,
  kOmegaInit = 1,
  kSampling = 2,
  kNoisePrimal = 3,
  kNoiseDual = 4,
  kOutputIndex = 5,
};

void add_noise(Vector& v, double sigma, Rng& rng) {
  if (sigma <= 0.0) return;
  for (double& x : v) x += sigma * rng.normal();
}

// Sampler over the dataset's units: transitions in state-action-state mode,
// whole trajectories in trajectory mode. Uniform with replacement by default;
// optionally a cyclic sweep.
class UnitSampler {
 public:
  UnitSampler(const TrajectoryDataset& dataset, Rng rng, bool sequential)
      : dataset_(dataset), rng_(std::move(rng)), sequential_(sequential) {
    if (dataset.mode == DatasetMode::kStateActionState) flat_ = dataset.flat();
  }

  std::span<const Transition> next() {
    const std::size_t count = dataset_.mode == DatasetMode::kStateActionState
                                  ? flat_.size()
                                  : dataset_.trajectories.size();
    const std::size_t i =
        sequential_ ? cursor_++ % count : rng_.uniform_index(count);
    if (dataset_.mode == DatasetMode::kStateActionState)
      return {flat_.data() + i, 1};
    return dataset_.trajectories[i];
  }

 private:
  const TrajectoryDataset& dataset_;
  std::vector<Transition> flat_;
  Rng rng_;
  bool sequential_ = false;
  std::size_t cursor_ = 0;
};

bool should_log(long t, long interval, long last) {
  return interval > 0 && (t % interval == 0 || t == last);
}

RunRow make_row(long t, double nu_t, const IterState& state,
                const Vector& theta_tilde, const RunHooks& hooks, long last) {
  RunRow row;
  row.t = t;
  row.nu_t = nu_t;
  if (should_log(t, hooks.f_interval, last) && hooks.f_eval)
    row.f_value = hooks.f_eval(state.theta, state.omega);
  if (should_log(t, hooks.metric_interval, last)) {
    if (hooks.mspbe_eval) row.mspbe = hooks.mspbe_eval(state.theta);
    if (hooks.metric_eval) row.metric = hooks.metric_eval(state, theta_tilde);
  }
  return row;
}

bool row_has_content(const RunRow& row) {
  return row.f_value || row.mspbe || row.metric;
}

}  // namespace

void DptdConfig::validate() const {
  if (T < 1) throw std::invalid_argument("DptdConfig: T must be >= 1");
  if (!(kappa > 0.0 && eta > 0.0 && alpha > 0.0 && beta > 0.0))
    throw std::invalid_argument("DptdConfig: step scales must be positive");
  if (!(nu_a > 0.0 && nu_b > 0.0))
    throw std::invalid_argument("DptdConfig: schedule parameters must be positive");
  if (!(box_radius > 0.0))
    throw std::invalid_argument("DptdConfig: box radius must be positive");
  // nu_t is decreasing, so the t = 0 check covers every iteration.
  if (alpha * nu(0) > 1.0 || beta * nu(0) > 1.0)
    throw std::invalid_argument(
        "DptdConfig: momentum weights require alpha*nu_0 <= 1 and beta*nu_0 <= 1");
  if (noise) {
    if (noise->iterations != T)
      throw std::invalid_argument(
          "DptdConfig: noise calibration iteration count does not match T");
    if (!(clip_G > 0.0))
      throw std::invalid_argument(
          "DptdConfig: private runs require a positive clip bound");
    if (noise->clip_bound != clip_G)
      throw std::invalid_argument(
          "DptdConfig: noise calibration clip bound does not match clip_G");
  }
}

Vector project_box(Vector x, double radius) {
  project_box_inplace(x, radius);
  return x;
}

void project_box_inplace(std::span<double> x, double radius) {
  if (!(radius > 0.0))
    throw std::invalid_argument("project_box: radius must be positive");
  for (double& v : x) v = std::clamp(v, -radius, radius);
}

SampleGrad unit_grad(const ValueModel& model, std::span<const double> theta,
                     std::span<const double> omega,
                     std::span<const Transition> unit, double gamma,
                     double clip_G) {
  SampleGrad acc{Vector(model.dim(), 0.0), Vector(model.dim(), 0.0)};
  for (const Transition& xi : unit) {
    SampleGrad g = sample_grad(model, theta, omega, xi, gamma);
    if (clip_G > 0.0) {
      clip_to_norm_inplace(g.primal, clip_G);
      clip_to_norm_inplace(g.dual, clip_G);
    }
    axpy(1.0, g.primal, acc.primal);
    axpy(1.0, g.dual, acc.dual);
  }
  return acc;
}

IterState dptd_init(const DptdConfig& config, const ValueModel& model,
                    std::span<const Transition> unit, double gamma,
                    Rng& noise_primal, Rng& noise_dual, Vector theta0,
                    Vector omega0) {
  IterState s;
  s.theta = project_box(std::move(theta0), config.box_radius);
  s.omega = project_box(std::move(omega0), config.box_radius);
  SampleGrad g = unit_grad(model, s.theta, s.omega, unit, gamma, config.clip_G);
  add_noise(g.primal, config.sigma(), noise_primal);
  add_noise(g.dual, config.sigma(), noise_dual);
  s.p = std::move(g.primal);
  s.d = std::move(g.dual);
  s.t = 0;
  return s;
}

std::pair<IterState, StepRecord> dptd_step(const IterState& state,
                                           std::span<const Transition> unit,
                                           const DptdConfig& config,
                                           const ValueModel& model,
                                           double gamma, Rng& noise_primal,
                                           Rng& noise_dual) {
  const double nu_t = config.nu(state.t);
  if (config.alpha * nu_t > 1.0 || config.beta * nu_t > 1.0)
    throw std::invalid_argument("dptd_step: momentum weight exceeds 1");

  StepRecord rec;
  rec.nu_t = nu_t;

  // Descent/ascent targets, projected into the feasible boxes.
  rec.theta_tilde = state.theta;
  axpy(-config.kappa, state.p, rec.theta_tilde);
  project_box_inplace(rec.theta_tilde, config.box_radius);
  rec.omega_tilde = state.omega;
  axpy(config.eta, state.d, rec.omega_tilde);
  project_box_inplace(rec.omega_tilde, config.box_radius);

  IterState next;
  next.t = state.t + 1;
  next.theta = state.theta;
  next.omega = state.omega;
  for (std::size_t i = 0; i < next.theta.size(); ++i)
    next.theta[i] += nu_t * (rec.theta_tilde[i] - state.theta[i]);
  for (std::size_t i = 0; i < next.omega.size(); ++i)
    next.omega[i] += nu_t * (rec.omega_tilde[i] - state.omega[i]);

  // Momentum blend with the stochastic gradients at the new iterate.
  SampleGrad g =
      unit_grad(model, next.theta, next.omega, unit, gamma, config.clip_G);
  next.p = state.p;
  scale(1.0 - config.alpha * nu_t, next.p);
  axpy(config.alpha * nu_t, g.primal, next.p);
  next.d = state.d;
  scale(1.0 - config.beta * nu_t, next.d);
  axpy(config.beta * nu_t, g.dual, next.d);

  rec.noise_draws_primal = noise_primal.draw_count();
  rec.noise_draws_dual = noise_dual.draw_count();
  add_noise(next.p, config.sigma(), noise_primal);
  add_noise(next.d, config.sigma(), noise_dual);
  return {std::move(next), std::move(rec)};
}

RunResult run_dptd(const DptdConfig& config, const ValueModel& model,
                   const TrajectoryDataset& dataset, const RunHooks& hooks) {
  config.validate();
  dataset.validate();

  const Rng base(config.seed);
  Rng theta_rng = base.derive(kThetaInit);
  Rng omega_rng = base.derive(kOmegaInit);
  Rng noise_primal = base.derive(kNoisePrimal);
  Rng noise_dual = base.derive(kNoiseDual);
  Rng out_rng = base.derive(kOutputIndex);
  UnitSampler sampler(dataset, base.derive(kSampling), config.sequential_sweep);

  const long out_index =
      static_cast<long>(out_rng.uniform_index(static_cast<std::size_t>(config.T)));

  IterState state = dptd_init(
      config, model, sampler.next(), dataset.gamma, noise_primal, noise_dual,
      model.init_params(theta_rng, config.box_radius),
      model.init_params(omega_rng, config.box_radius));

  RunResult result;
  result.out_index = out_index;
  for (long t = 0; t < config.T; ++t) {
    if (t == out_index) {
      result.theta_out = state.theta;
      result.omega_out = state.omega;
    }
    auto [next, rec] = dptd_step(state, sampler.next(), config, model,
                                 dataset.gamma, noise_primal, noise_dual);
    RunRow row =
        make_row(t, rec.nu_t, state, rec.theta_tilde, hooks, config.T - 1);
    if (row_has_content(row)) result.rows.push_back(std::move(row));
    state = std::move(next);
  }
  result.final_state = std::move(state);
  return result;
}

std::string to_string(BaselineKind kind) {
  switch (kind) {
    case BaselineKind::kNonPrivateTd:
      return "nonprivate_td";
    case BaselineKind::kPlainSgda:
      return "plain_sgda";
    case BaselineKind::kPrivatePlainSgda:
      return "private_plain_sgda";
  }
  return "unknown";
}

namespace {

// Simultaneous projected gradient descent/ascent without momentum. The
// private variant perturbs each clipped gradient directly.
RunResult run_plain(const DptdConfig& config, const ValueModel& model,
                    const TrajectoryDataset& dataset, const RunHooks& hooks) {
  config.validate();
  dataset.validate();

  const Rng base(config.seed);
  Rng theta_rng = base.derive(kThetaInit);
  Rng omega_rng = base.derive(kOmegaInit);
  Rng noise_primal = base.derive(kNoisePrimal);
  Rng noise_dual = base.derive(kNoiseDual);
  Rng out_rng = base.derive(kOutputIndex);
  UnitSampler sampler(dataset, base.derive(kSampling), config.sequential_sweep);

  const long out_index =
      static_cast<long>(out_rng.uniform_index(static_cast<std::size_t>(config.T)));

  IterState state;
  state.theta = project_box(model.init_params(theta_rng, config.box_radius),
                            config.box_radius);
  state.omega = project_box(model.init_params(omega_rng, config.box_radius),
                            config.box_radius);
  state.p.assign(model.dim(), 0.0);
  state.d.assign(model.dim(), 0.0);

  RunResult result;
  result.out_index = out_index;
  for (long t = 0; t < config.T; ++t) {
    if (t == out_index) {
      result.theta_out = state.theta;
      result.omega_out = state.omega;
    }
    const double nu_t = config.nu(t);
    SampleGrad g = unit_grad(model, state.theta, state.omega, sampler.next(),
                             dataset.gamma, config.clip_G);
    add_noise(g.primal, config.sigma(), noise_primal);
    add_noise(g.dual, config.sigma(), noise_dual);

    RunRow row = make_row(t, nu_t, state, state.theta, hooks, config.T - 1);
    if (row_has_content(row)) result.rows.push_back(std::move(row));

    axpy(-config.kappa * nu_t, g.primal, state.theta);
    project_box_inplace(state.theta, config.box_radius);
    axpy(config.eta * nu_t, g.dual, state.omega);
    project_box_inplace(state.omega, config.box_radius);
    state.t = t + 1;
  }
  result.final_state = std::move(state);
  return result;
}

}  // namespace

RunResult run_baseline(BaselineKind kind, DptdConfig config,
                       const ValueModel& model, const TrajectoryDataset& dataset,
                       const RunHooks& hooks) {
  switch (kind) {
    case BaselineKind::kNonPrivateTd:
      config.noise.reset();
      return run_dptd(config, model, dataset, hooks);
    case BaselineKind::kPlainSgda:
      config.noise.reset();
      return run_plain(config, model, dataset, hooks);
    case BaselineKind::kPrivatePlainSgda:
      return run_plain(config, model, dataset, hooks);
  }
  throw std::invalid_argument("run_baseline: unknown kind");
}

}  // namespace dptd
