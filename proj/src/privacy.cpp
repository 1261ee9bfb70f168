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

#include "dptd/privacy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "dptd/errors.hpp"

namespace dptd {

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

void check_positive(double v, const char* name) {
  if (!(v > 0.0))
    throw std::invalid_argument(std::string(name) + " must be positive");
}

}  // namespace

void PrivacyBudget::validate() const {
  check_positive(epsilon, "epsilon");
  if (!(delta > 0.0 && delta < 1.0))
    throw std::invalid_argument("delta must lie in (0, 1)");
}

RegimeCheck check_subsampled_regime(double sensitivity, double sigma,
                                    double alpha, double tau) {
  RegimeCheck out;
  out.sigma_prime_sq = (sigma * sigma) / (sensitivity * sensitivity);
  const double arg = 1.0 / (tau * alpha * (1.0 + out.sigma_prime_sq));
  out.order_bound = 2.0 * out.sigma_prime_sq * std::log(arg) / 3.0 + 1.0;
  out.ok = true;
  if (!(alpha > 1.0)) {
    out.ok = false;
    out.failed.push_back("alpha > 1 violated (alpha = " + fmt(alpha) + ")");
  }
  if (out.sigma_prime_sq < 0.7) {
    out.ok = false;
    out.failed.push_back("sigma'^2 >= 0.7 violated (sigma'^2 = " +
                         fmt(out.sigma_prime_sq) +
                         ", slack = " + fmt(out.sigma_prime_sq - 0.7) + ")");
  }
  if (alpha > out.order_bound) {
    out.ok = false;
    out.failed.push_back(
        "alpha <= 2 sigma'^2 log(1/(tau alpha (1+sigma'^2)))/3 + 1 violated "
        "(alpha = " +
        fmt(alpha) + ", bound = " + fmt(out.order_bound) +
        ", slack = " + fmt(out.order_bound - alpha) + ")");
  }
  return out;
}

RdpPoint rdp_gaussian(double sensitivity, double sigma, double alpha) {
  check_positive(sensitivity, "sensitivity");
  check_positive(sigma, "sigma");
  if (!(alpha > 1.0)) throw std::invalid_argument("alpha must exceed 1");
  return {alpha, alpha * sensitivity * sensitivity / (2.0 * sigma * sigma)};
}

RdpPoint rdp_subsampled_gaussian(double sensitivity, double sigma, double alpha,
                                 double tau) {
  check_positive(sensitivity, "sensitivity");
  check_positive(sigma, "sigma");
  if (!(tau > 0.0 && tau <= 1.0))
    throw std::invalid_argument("tau must lie in (0, 1]");
  const RegimeCheck rc = check_subsampled_regime(sensitivity, sigma, alpha, tau);
  if (!rc.ok)
    throw InvalidRegime("rdp_subsampled_gaussian: outside admissible regime",
                        rc.failed);
  return {alpha,
          3.5 * tau * tau * sensitivity * sensitivity * alpha / (sigma * sigma)};
}

RdpPoint compose(std::span<const RdpPoint> points) {
  if (points.empty())
    return {std::numeric_limits<double>::infinity(), 0.0};
  const double alpha = points.front().alpha;
  double rho = 0.0;
  for (const auto& p : points) {
    if (p.alpha != alpha)
      throw std::invalid_argument("compose: mixed RDP orders");
    rho += p.rho;
  }
  return {alpha, rho};
}

PrivacyBudget rdp_to_dp(const RdpPoint& point, double delta) {
  if (!(point.alpha > 1.0)) throw std::invalid_argument("alpha must exceed 1");
  if (!(delta > 0.0 && delta < 1.0))
    throw std::invalid_argument("delta must lie in (0, 1)");
  if (point.rho < 0.0) throw std::invalid_argument("rho must be nonnegative");
  return {point.rho + std::log(1.0 / delta) / (point.alpha - 1.0), delta};
}

namespace {

// Shared closed form: sigma^2 = 3.5 sensitivity^2 T alpha' / (units^2 beta' eps)
// with units = n (sas) or m (trajectory) and tau = 1/units.
NoiseCalibration calibrate_impl(const std::string& mode,
                                const PrivacyBudget& budget, long iterations,
                                long units, double sensitivity,
                                double clip_bound, double beta_prime) {
  budget.validate();
  if (iterations < 1) throw std::invalid_argument("iterations must be >= 1");
  if (units < 1) throw std::invalid_argument("dataset size must be >= 1");
  check_positive(clip_bound, "clip bound");
  if (!(beta_prime > 0.0 && beta_prime < 1.0))
    throw std::invalid_argument("beta' must lie in (0, 1)");

  NoiseCalibration cal;
  cal.mode = mode;
  cal.epsilon = budget.epsilon;
  cal.delta = budget.delta;
  cal.beta_prime = beta_prime;
  cal.iterations = iterations;
  cal.clip_bound = clip_bound;
  cal.sensitivity = sensitivity;
  cal.sampling_rate = 1.0 / static_cast<double>(units);
  cal.alpha_prime =
      std::log(1.0 / budget.delta) / ((1.0 - beta_prime) * budget.epsilon) + 1.0;
  const double units_sq = static_cast<double>(units) * static_cast<double>(units);
  cal.sigma_sq = 3.5 * sensitivity * sensitivity *
                 static_cast<double>(iterations) * cal.alpha_prime /
                 (units_sq * beta_prime * budget.epsilon);
  cal.sigma = std::sqrt(cal.sigma_sq);

  const RegimeCheck rc = check_subsampled_regime(
      sensitivity, cal.sigma, cal.alpha_prime, cal.sampling_rate);
  cal.sigma_prime_sq = rc.sigma_prime_sq;
  cal.order_bound = rc.order_bound;
  cal.valid = rc.ok;
  cal.failed_constraints = rc.failed;
  return cal;
}

NoiseCalibration grid_impl(const std::string& mode, const PrivacyBudget& budget,
                           long iterations, long units, double sens_factor,
                           double clip_bound, std::span<const double> grid) {
  std::vector<double> fallback;
  if (grid.empty()) {
    fallback = default_beta_grid();
    grid = fallback;
  }
  const NoiseCalibration* best_valid = nullptr;
  const NoiseCalibration* least_bad = nullptr;
  std::vector<NoiseCalibration> all;
  all.reserve(grid.size());
  for (double b : grid)
    all.push_back(calibrate_impl(mode, budget, iterations, units,
                                 sens_factor * clip_bound, clip_bound, b));
  auto violation = [](const NoiseCalibration& c) {
    // Distance from the valid region, summed over constraints.
    double v = std::max(0.0, 0.7 - c.sigma_prime_sq);
    v += std::max(0.0, c.alpha_prime - c.order_bound);
    return v;
  };
  for (const auto& c : all) {
    if (c.valid && (best_valid == nullptr || c.sigma_sq < best_valid->sigma_sq))
      best_valid = &c;
    if (least_bad == nullptr || violation(c) < violation(*least_bad))
      least_bad = &c;
  }
  return best_valid != nullptr ? *best_valid : *least_bad;
}

}  // namespace

NoiseCalibration calibrate_sas(const PrivacyBudget& budget, long iterations,
                               long trajectory_length, double clip_bound,
                               double beta_prime) {
  NoiseCalibration cal =
      calibrate_impl("sas", budget, iterations, trajectory_length,
                     2.0 * clip_bound, clip_bound, beta_prime);
  return cal;
}

NoiseCalibration calibrate_trajectory(const PrivacyBudget& budget,
                                      long iterations, long max_length,
                                      long n_trajectories, double clip_bound,
                                      double beta_prime) {
  if (max_length < 1)
    throw std::invalid_argument("max trajectory length must be >= 1");
  return calibrate_impl("trajectory", budget, iterations, n_trajectories,
                        2.0 * static_cast<double>(max_length) * clip_bound,
                        clip_bound, beta_prime);
}

NoiseCalibration calibrate_sas_grid(const PrivacyBudget& budget,
                                    long iterations, long trajectory_length,
                                    double clip_bound,
                                    std::span<const double> beta_grid) {
  return grid_impl("sas", budget, iterations, trajectory_length, 2.0,
                   clip_bound, beta_grid);
}

NoiseCalibration calibrate_trajectory_grid(const PrivacyBudget& budget,
                                           long iterations, long max_length,
                                           long n_trajectories,
                                           double clip_bound,
                                           std::span<const double> beta_grid) {
  if (max_length < 1)
    throw std::invalid_argument("max trajectory length must be >= 1");
  return grid_impl("trajectory", budget, iterations, n_trajectories,
                   2.0 * static_cast<double>(max_length), clip_bound,
                   beta_grid);
}

AchievedBudget verify_budget(double sigma, long iterations, double sensitivity,
                             double tau, double delta,
                             std::span<const double> alpha_grid) {
  if (alpha_grid.empty())
    throw std::invalid_argument("verify_budget: empty alpha grid");
  bool found = false;
  AchievedBudget best{std::numeric_limits<double>::infinity(), delta, 0.0};
  for (double alpha : alpha_grid) {
    if (!(alpha > 1.0)) continue;
    if (!check_subsampled_regime(sensitivity, sigma, alpha, tau).ok) continue;
    const RdpPoint step = rdp_subsampled_gaussian(sensitivity, sigma, alpha, tau);
    const RdpPoint total{alpha, step.rho * static_cast<double>(iterations)};
    const PrivacyBudget achieved = rdp_to_dp(total, delta);
    if (achieved.epsilon < best.epsilon) {
      best = {achieved.epsilon, delta, alpha};
      found = true;
    }
  }
  if (!found)
    throw NoAdmissibleOrder(
        "verify_budget: no grid order satisfies the subsampling regime");
  return best;
}

AchievedBudget verify_calibration(const NoiseCalibration& cal) {
  const double alpha[] = {cal.alpha_prime};
  return verify_budget(cal.sigma, cal.iterations, cal.sensitivity,
                       cal.sampling_rate, cal.delta, alpha);
}

std::vector<double> default_alpha_grid() {
  std::vector<double> grid;
  for (double a = 1.125; a < 2.0; a += 0.125) grid.push_back(a);
  for (double a = 2.0; a <= 256.0; a *= std::pow(2.0, 0.25)) grid.push_back(a);
  for (double a = 256.0 * std::pow(2.0, 0.25); a <= 4096.0; a *= 2.0)
    grid.push_back(a);
  return grid;
}

std::vector<double> default_beta_grid() {
  return {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
}

nlohmann::json NoiseCalibration::to_json() const {
  return {{"mode", mode},
          {"sigma", sigma},
          {"sigma_sq", sigma_sq},
          {"alpha_prime", alpha_prime},
          {"beta_prime", beta_prime},
          {"sensitivity", sensitivity},
          {"sampling_rate", sampling_rate},
          {"sigma_prime_sq", sigma_prime_sq},
          {"order_bound", order_bound},
          {"constraint_slacks",
           {{"sigma_prime_sq_floor", sigma_prime_sq - 0.7},
            {"order_bound", order_bound - alpha_prime}}},
          {"iterations", iterations},
          {"epsilon", epsilon},
          {"delta", delta},
          {"clip_bound", clip_bound},
          {"valid", valid},
          {"failed_constraints", failed_constraints}};
}

NoiseCalibration NoiseCalibration::from_json(const nlohmann::json& j) {
  NoiseCalibration c;
  c.mode = j.at("mode").get<std::string>();
  c.sigma = j.at("sigma").get<double>();
  c.sigma_sq = j.at("sigma_sq").get<double>();
  c.alpha_prime = j.at("alpha_prime").get<double>();
  c.beta_prime = j.at("beta_prime").get<double>();
  c.sensitivity = j.at("sensitivity").get<double>();
  c.sampling_rate = j.at("sampling_rate").get<double>();
  c.sigma_prime_sq = j.at("sigma_prime_sq").get<double>();
  c.order_bound = j.at("order_bound").get<double>();
  c.iterations = j.at("iterations").get<long>();
  c.epsilon = j.at("epsilon").get<double>();
  c.delta = j.at("delta").get<double>();
  c.clip_bound = j.at("clip_bound").get<double>();
  c.valid = j.at("valid").get<bool>();
  c.failed_constraints =
      j.at("failed_constraints").get<std::vector<std::string>>();
  return c;
}

}  // namespace dptd
