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

#ifndef DPTD_PRIVACY_HPP
#define DPTD_PRIVACY_HPP

#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace dptd {

struct PrivacyBudget {
  double epsilon = 0.0;
  double delta = 0.0;

  void validate() const;  // epsilon > 0, delta in (0, 1)
};

// One point on a Renyi-DP curve: order alpha > 1 and divergence bound rho.
struct RdpPoint {
  double alpha = 0.0;
  double rho = 0.0;
};

// Outcome of the admissibility check for the subsampled Gaussian bound:
// sigma'^2 = sigma^2 / Delta^2 >= 0.7 and
// alpha <= 2 sigma'^2 log(1 / (tau alpha (1 + sigma'^2))) / 3 + 1.
struct RegimeCheck {
  bool ok = false;
  double sigma_prime_sq = 0.0;
  double order_bound = 0.0;  // right-hand side of the order constraint
  std::vector<std::string> failed;
};

RegimeCheck check_subsampled_regime(double sensitivity, double sigma,
                                    double alpha, double tau);

// Gaussian mechanism with L2 sensitivity `sensitivity` and noise scale sigma:
// rho = alpha sensitivity^2 / (2 sigma^2).
RdpPoint rdp_gaussian(double sensitivity, double sigma, double alpha);

// Same mechanism applied to a uniform subsample at rate tau:
// rho = 3.5 tau^2 sensitivity^2 alpha / sigma^2, valid only in the regime
// above. Throws InvalidRegime naming the violated constraints and slack.
RdpPoint rdp_subsampled_gaussian(double sensitivity, double sigma, double alpha,
                                 double tau);

// Adaptive composition at a common order: rho_total = sum rho_i.
// An empty list composes to rho = 0 (at order infinity).
RdpPoint compose(std::span<const RdpPoint> points);

// (alpha, rho)-RDP implies (rho + log(1/delta) / (alpha - 1), delta)-DP.
PrivacyBudget rdp_to_dp(const RdpPoint& point, double delta);

// Per-iteration Gaussian scale backing a requested (epsilon, delta) budget,
// together with the RDP order, split, and regime flags that justify it.
struct NoiseCalibration {
  std::string mode;          // "sas" or "trajectory"
  double sigma = 0.0;        // standard deviation, constant over iterations
  double sigma_sq = 0.0;
  double alpha_prime = 0.0;
  double beta_prime = 0.0;
  double sensitivity = 0.0;  // 2G (sas) or 2nG (trajectory)
  double sampling_rate = 0.0;
  double sigma_prime_sq = 0.0;
  double order_bound = 0.0;
  long iterations = 0;  // composed mechanism count per side
  double epsilon = 0.0;
  double delta = 0.0;
  double clip_bound = 0.0;
  bool valid = false;
  std::vector<std::string> failed_constraints;

  nlohmann::json to_json() const;
  static NoiseCalibration from_json(const nlohmann::json& j);
};

// sigma^2 = 14 G^2 T alpha' / (n^2 beta' epsilon) with
// alpha' = log(1/delta) / ((1 - beta') epsilon) + 1; sensitivity 2G, tau = 1/n.
NoiseCalibration calibrate_sas(const PrivacyBudget& budget, long iterations,
                               long trajectory_length, double clip_bound,
                               double beta_prime);

// sigma^2 = 14 n^2 G^2 T alpha' / (m^2 beta' epsilon); sensitivity 2nG,
// tau = 1/m, with n the maximum trajectory length and m the trajectory count.
NoiseCalibration calibrate_trajectory(const PrivacyBudget& budget,
                                      long iterations, long max_length,
                                      long n_trajectories, double clip_bound,
                                      double beta_prime);

// Grid search over beta' minimizing sigma^2 subject to regime validity.
// When no grid point is valid, returns the least-violating point flagged
// valid = false.
NoiseCalibration calibrate_sas_grid(const PrivacyBudget& budget,
                                    long iterations, long trajectory_length,
                                    double clip_bound,
                                    std::span<const double> beta_grid = {});
NoiseCalibration calibrate_trajectory_grid(const PrivacyBudget& budget,
                                           long iterations, long max_length,
                                           long n_trajectories,
                                           double clip_bound,
                                           std::span<const double> beta_grid = {});

struct AchievedBudget {
  double epsilon = 0.0;
  double delta = 0.0;
  double alpha = 0.0;  // order achieving the minimum
};

// Forward accountant: smallest epsilon over admissible grid orders for T
// compositions of the subsampled Gaussian. Inadmissible orders are skipped;
// throws NoAdmissibleOrder when the whole grid is out of regime.
AchievedBudget verify_budget(double sigma, long iterations, double sensitivity,
                             double tau, double delta,
                             std::span<const double> alpha_grid);

// Forward accounting of a calibration at its own order alpha'.
AchievedBudget verify_calibration(const NoiseCalibration& cal);

std::vector<double> default_alpha_grid();
std::vector<double> default_beta_grid();

}  // namespace dptd

#endif  // DPTD_PRIVACY_HPP
