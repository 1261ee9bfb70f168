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

#ifndef DPTD_ERRORS_HPP
#define DPTD_ERRORS_HPP

#include <stdexcept>
#include <string>
#include <vector>

namespace dptd {

// Linear solve hit a numerically singular or indefinite system.
struct SingularSystem : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Empirical Gram matrix not positive definite at the requested ridge.
struct SingularGram : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Power iteration on the induced chain did not converge.
struct NonErgodicChain : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed dataset/config file; message names the offending line.
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// The subsampled-Gaussian bound was queried outside its admissible regime.
// `failed` lists each violated constraint together with its numeric slack.
struct InvalidRegime : std::runtime_error {
  std::vector<std::string> failed;
  InvalidRegime(const std::string& what, std::vector<std::string> failed_in)
      : std::runtime_error(what), failed(std::move(failed_in)) {}
};

// No order in the accountant's alpha grid satisfies the regime constraints.
struct NoAdmissibleOrder : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Experiment/CLI configuration is inconsistent.
struct InvalidConfig : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace dptd

#endif  // DPTD_ERRORS_HPP
