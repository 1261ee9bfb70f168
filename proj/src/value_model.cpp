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

#include "dptd/value_model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dptd {

namespace {

void check_dim(std::span<const double> v, int want, const char* who) {
  if (static_cast<int>(v.size()) != want)
    throw std::invalid_argument(std::string(who) + ": dimension mismatch");
}

double clamp_box(double x, double radius) {
  return std::clamp(x, -radius, radius);
}

}  // namespace

FeatureMap FeatureMap::one_hot(int n_states) {
  FeatureMap f{n_states, n_states,
               std::vector<double>(
                   static_cast<std::size_t>(n_states) * n_states, 0.0)};
  for (int s = 0; s < n_states; ++s)
    f.data[static_cast<std::size_t>(s) * n_states + s] = 1.0;
  return f;
}

FeatureMap FeatureMap::random(int n_states, int dim, Rng& rng) {
  FeatureMap f{n_states, dim,
               std::vector<double>(static_cast<std::size_t>(n_states) * dim)};
  for (double& v : f.data) v = rng.uniform(-1.0, 1.0);
  return f;
}

LinearModel::LinearModel(FeatureMap features) : phi_(std::move(features)) {
  if (phi_.n_states <= 0 || phi_.dim <= 0)
    throw std::invalid_argument("LinearModel: empty feature map");
}

double LinearModel::value(std::span<const double> theta, int s) const {
  check_dim(theta, dim(), "LinearModel::value");
  return dot(phi_.row(s), theta);
}

void LinearModel::grad(std::span<const double> theta, int s,
                       std::span<double> out) const {
  check_dim(theta, dim(), "LinearModel::grad");
  check_dim(out, dim(), "LinearModel::grad");
  auto row = phi_.row(s);
  std::copy(row.begin(), row.end(), out.begin());
}

void LinearModel::hvp(std::span<const double> theta, int s,
                      std::span<const double> v, std::span<double> out) const {
  check_dim(theta, dim(), "LinearModel::hvp");
  check_dim(v, dim(), "LinearModel::hvp");
  check_dim(out, dim(), "LinearModel::hvp");
  (void)s;
  std::fill(out.begin(), out.end(), 0.0);
}

Vector LinearModel::init_params(Rng& rng, double box_radius) const {
  const double bound = 1.0 / std::sqrt(static_cast<double>(phi_.dim));
  Vector theta(dim());
  for (double& v : theta)
    v = clamp_box(rng.uniform(-bound, bound), box_radius);
  return theta;
}

nlohmann::json LinearModel::describe() const {
  return {{"kind", "linear"},
          {"inputs", phi_.dim},
          {"dim", dim()},
          {"layout", {"weights (inputs)"}}};
}

MlpModel::MlpModel(FeatureMap features, int hidden)
    : phi_(std::move(features)), hidden_(hidden) {
  if (phi_.n_states <= 0 || phi_.dim <= 0 || hidden_ <= 0)
    throw std::invalid_argument("MlpModel: bad shape");
  dim_ = hidden_ * phi_.dim + hidden_ + hidden_ + 1;
}

double MlpModel::value(std::span<const double> theta, int s) const {
  check_dim(theta, dim_, "MlpModel::value");
  const int in = phi_.dim;
  const auto x = phi_.row(s);
  const double* w1 = theta.data();
  const double* b1 = w1 + static_cast<std::size_t>(hidden_) * in;
  const double* w2 = b1 + hidden_;
  const double b2 = w2[hidden_];
  double out = b2;
  for (int i = 0; i < hidden_; ++i) {
    const double z = dot({w1 + static_cast<std::size_t>(i) * in,
                          static_cast<std::size_t>(in)}, x) + b1[i];
    out += w2[i] * elu(z);
  }
  return out;
}

void MlpModel::grad(std::span<const double> theta, int s,
                    std::span<double> out) const {
  check_dim(theta, dim_, "MlpModel::grad");
  check_dim(out, dim_, "MlpModel::grad");
  const int in = phi_.dim;
  const auto x = phi_.row(s);
  const double* w1 = theta.data();
  const double* b1 = w1 + static_cast<std::size_t>(hidden_) * in;
  const double* w2 = b1 + hidden_;
  double* g_w1 = out.data();
  double* g_b1 = g_w1 + static_cast<std::size_t>(hidden_) * in;
  double* g_w2 = g_b1 + hidden_;
  for (int i = 0; i < hidden_; ++i) {
    const double z = dot({w1 + static_cast<std::size_t>(i) * in,
                          static_cast<std::size_t>(in)}, x) + b1[i];
    const double a1 = elu_d1(z);
    g_w2[i] = elu(z);
    g_b1[i] = w2[i] * a1;
    for (int j = 0; j < in; ++j)
      g_w1[static_cast<std::size_t>(i) * in + j] = w2[i] * a1 * x[j];
  }
  g_w2[hidden_] = 1.0;  // dV/db2
}

// Directional second derivative in closed form. With z_i = W1_i.x + b1_i,
// dz_i = dW1_i.x + db1_i for the direction (dW1, db1, dw2, db2):
//   d(dV/dW1_ij) = (dw2_i elu'(z_i) + w2_i elu''(z_i) dz_i) x_j
//   d(dV/db1_i)  =  dw2_i elu'(z_i) + w2_i elu''(z_i) dz_i
//   d(dV/dw2_i)  =  elu'(z_i) dz_i
//   d(dV/db2)    =  0
void MlpModel::hvp(std::span<const double> theta, int s,
                   std::span<const double> v, std::span<double> out) const {
  check_dim(theta, dim_, "MlpModel::hvp");
  check_dim(v, dim_, "MlpModel::hvp");
  check_dim(out, dim_, "MlpModel::hvp");
  const int in = phi_.dim;
  const auto x = phi_.row(s);
  const double* w1 = theta.data();
  const double* b1 = w1 + static_cast<std::size_t>(hidden_) * in;
  const double* w2 = b1 + hidden_;
  const double* d_w1 = v.data();
  const double* d_b1 = d_w1 + static_cast<std::size_t>(hidden_) * in;
  const double* d_w2 = d_b1 + hidden_;
  double* o_w1 = out.data();
  double* o_b1 = o_w1 + static_cast<std::size_t>(hidden_) * in;
  double* o_w2 = o_b1 + hidden_;
  for (int i = 0; i < hidden_; ++i) {
    const std::size_t off = static_cast<std::size_t>(i) * in;
    const double z = dot({w1 + off, static_cast<std::size_t>(in)}, x) + b1[i];
    const double dz = dot({d_w1 + off, static_cast<std::size_t>(in)}, x) + d_b1[i];
    const double a1 = elu_d1(z);
    const double a2 = elu_d2(z);
    const double mixed = d_w2[i] * a1 + w2[i] * a2 * dz;
    o_b1[i] = mixed;
    o_w2[i] = a1 * dz;
    for (int j = 0; j < in; ++j) o_w1[off + j] = mixed * x[j];
  }
  o_w2[hidden_] = 0.0;  // b2 row of the Hessian vanishes
}

Vector MlpModel::init_params(Rng& rng, double box_radius) const {
  const int in = phi_.dim;
  const double bound1 = 1.0 / std::sqrt(static_cast<double>(in));
  const double bound2 = 1.0 / std::sqrt(static_cast<double>(hidden_));
  Vector theta(dim_);
  std::size_t k = 0;
  for (int i = 0; i < hidden_ * in; ++i)
    theta[k++] = clamp_box(rng.uniform(-bound1, bound1), box_radius);
  for (int i = 0; i < hidden_; ++i)
    theta[k++] = clamp_box(rng.uniform(-bound1, bound1), box_radius);
  for (int i = 0; i < hidden_ + 1; ++i)
    theta[k++] = clamp_box(rng.uniform(-bound2, bound2), box_radius);
  return theta;
}

nlohmann::json MlpModel::describe() const {
  return {{"kind", "mlp"},
          {"inputs", phi_.dim},
          {"hidden", hidden_},
          {"activation", "elu"},
          {"dim", dim_},
          {"layout",
           {"W1 (hidden x inputs, row-major)", "b1 (hidden)", "w2 (hidden)",
            "b2 (1)"}}};
}

std::unique_ptr<ValueModel> make_model(const std::string& kind,
                                       FeatureMap features, int hidden) {
  if (kind == "linear")
    return std::make_unique<LinearModel>(std::move(features));
  if (kind == "mlp") return std::make_unique<MlpModel>(std::move(features), hidden);
  throw std::invalid_argument("make_model: unknown kind " + kind);
}

}  // namespace dptd
