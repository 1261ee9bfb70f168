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

#ifndef DPTD_VALUE_MODEL_HPP
#define DPTD_VALUE_MODEL_HPP

#include <memory>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "dptd/linalg.hpp"
#include "dptd/rng.hpp"

namespace dptd {

// ELU and its first two derivatives. The second derivative at 0 is fixed to
// the right limit (0) so evaluations are deterministic.
inline double elu(double x) { return x > 0.0 ? x : std::expm1(x); }
inline double elu_d1(double x) { return x > 0.0 ? 1.0 : std::exp(x); }
inline double elu_d2(double x) { return x < 0.0 ? std::exp(x) : 0.0; }

// Per-state input encoding: one feature row per state.
struct FeatureMap {
  int n_states = 0;
  int dim = 0;
  std::vector<double> data;  // n_states * dim, row-major

  std::span<const double> row(int s) const {
    return {data.data() + static_cast<std::size_t>(s) * dim,
            static_cast<std::size_t>(dim)};
  }

  static FeatureMap one_hot(int n_states);
  static FeatureMap random(int n_states, int dim, Rng& rng);
};

// Parametric state-value function V_theta with exact first derivative
// psi(s) = dV/dtheta and exact Hessian-vector products.
class ValueModel {
 public:
  virtual ~ValueModel() = default;

  virtual int dim() const = 0;
  virtual int n_states() const = 0;

  virtual double value(std::span<const double> theta, int s) const = 0;
  virtual void grad(std::span<const double> theta, int s,
                    std::span<double> out) const = 0;
  // out = (d^2 V / dtheta^2)(s) * v, exact.
  virtual void hvp(std::span<const double> theta, int s,
                   std::span<const double> v, std::span<double> out) const = 0;

  // Uniform [-1/sqrt(fan_in), 1/sqrt(fan_in)] per layer, clamped into the
  // feasible box.
  virtual Vector init_params(Rng& rng, double box_radius) const = 0;

  // Parameter layout descriptor for serialized flat arrays.
  virtual nlohmann::json describe() const = 0;

  Vector grad_vec(std::span<const double> theta, int s) const {
    Vector g(dim());
    grad(theta, s, g);
    return g;
  }
  Vector hvp_vec(std::span<const double> theta, int s,
                 std::span<const double> v) const {
    Vector h(dim());
    hvp(theta, s, v, h);
    return h;
  }
};

// V_theta(s) = phi(s) . theta
class LinearModel final : public ValueModel {
 public:
  explicit LinearModel(FeatureMap features);

  int dim() const override { return phi_.dim; }
  int n_states() const override { return phi_.n_states; }
  double value(std::span<const double> theta, int s) const override;
  void grad(std::span<const double> theta, int s,
            std::span<double> out) const override;
  void hvp(std::span<const double> theta, int s, std::span<const double> v,
           std::span<double> out) const override;
  Vector init_params(Rng& rng, double box_radius) const override;
  nlohmann::json describe() const override;

 private:
  FeatureMap phi_;
};

// Two-layer network: V(s) = w2 . elu(W1 phi(s) + b1) + b2.
// Flat parameter layout: [W1 row-major (hidden x in)] [b1] [w2] [b2].
class MlpModel final : public ValueModel {
 public:
  MlpModel(FeatureMap features, int hidden);

  int dim() const override { return dim_; }
  int n_states() const override { return phi_.n_states; }
  int hidden() const { return hidden_; }
  double value(std::span<const double> theta, int s) const override;
  void grad(std::span<const double> theta, int s,
            std::span<double> out) const override;
  void hvp(std::span<const double> theta, int s, std::span<const double> v,
           std::span<double> out) const override;
  Vector init_params(Rng& rng, double box_radius) const override;
  nlohmann::json describe() const override;

 private:
  FeatureMap phi_;
  int hidden_ = 0;
  int dim_ = 0;
};

std::unique_ptr<ValueModel> make_model(const std::string& kind,
                                       FeatureMap features, int hidden = 50);

}  // namespace dptd

#endif  // DPTD_VALUE_MODEL_HPP
