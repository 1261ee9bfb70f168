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

#include "dptd/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include "dptd/errors.hpp"

namespace fs = std::filesystem;

namespace dptd {

namespace {

constexpr double kSlip = 0.1;  // chain family: probability of staying put

std::string fmt_g(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

double mean_of(const std::vector<double>& xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

// Population standard deviation: a single seed aggregates to zero spread.
double std_of(const std::vector<double>& xs) {
  const double m = mean_of(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(xs.size()));
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

TabularMdp make_chain_mdp(int k, double gamma) {
  if (k < 1) throw InvalidConfig("chain family needs at least one state");
  TabularMdp mdp;
  mdp.n_states = k;
  mdp.n_actions = 2;
  mdp.gamma = gamma;
  mdp.transition.assign(static_cast<std::size_t>(k) * 2 * k, 0.0);
  mdp.reward.assign(static_cast<std::size_t>(k) * 2, 0.0);
  const int center = k / 2;
  for (int s = 0; s < k; ++s) {
    // action 0: left, action 1: right; walking off an end restarts at the
    // center with the terminal-style reward.
    const int left = s - 1;
    const int right = s + 1;
    if (left < 0) {
      mdp.p(s, 0, center) += 1.0 - kSlip;
      mdp.r(s, 0) = -1.0;
    } else {
      mdp.p(s, 0, left) += 1.0 - kSlip;
    }
    mdp.p(s, 0, s) += kSlip;
    if (right >= k) {
      mdp.p(s, 1, center) += 1.0 - kSlip;
      mdp.r(s, 1) = 1.0;
    } else {
      mdp.p(s, 1, right) += 1.0 - kSlip;
    }
    mdp.p(s, 1, s) += kSlip;
  }
  mdp.validate();
  return mdp;
}

TabularMdp make_random_mdp(int k, int n_actions, std::uint64_t seed,
                           double gamma) {
  if (k < 1 || n_actions < 1) throw InvalidConfig("random family needs k, actions >= 1");
  Rng rng(seed);
  TabularMdp mdp;
  mdp.n_states = k;
  mdp.n_actions = n_actions;
  mdp.gamma = gamma;
  mdp.transition.assign(static_cast<std::size_t>(k) * n_actions * k, 0.0);
  mdp.reward.assign(static_cast<std::size_t>(k) * n_actions, 0.0);
  for (int s = 0; s < k; ++s)
    for (int a = 0; a < n_actions; ++a) {
      // Dirichlet(1,...,1) row via normalized exponentials: strictly positive,
      // so the induced chain is ergodic under any policy.
      double total = 0.0;
      for (int s2 = 0; s2 < k; ++s2) {
        const double e = -std::log(1.0 - rng.uniform());
        mdp.p(s, a, s2) = e;
        total += e;
      }
      for (int s2 = 0; s2 < k; ++s2) mdp.p(s, a, s2) /= total;
      mdp.r(s, a) = rng.uniform(-0.5, 0.5);
    }
  mdp.validate();
  return mdp;
}

TabularMdp make_twostate_mdp(double gamma) {
  TabularMdp mdp;
  mdp.n_states = 2;
  mdp.n_actions = 2;
  mdp.gamma = gamma;
  mdp.transition.assign(8, 0.0);
  mdp.reward.assign(4, 0.0);
  for (int s = 0; s < 2; ++s) {
    const int other = 1 - s;
    mdp.p(s, 0, s) = 0.8;
    mdp.p(s, 0, other) = 0.2;
    mdp.p(s, 1, other) = 0.8;
    mdp.p(s, 1, s) = 0.2;
    mdp.r(s, 0) = mdp.r(s, 1) = s == 0 ? 0.5 : -0.5;
  }
  mdp.validate();
  return mdp;
}

TabularMdp make_mdp(const MdpSpec& spec) {
  if (spec.family == "chain") return make_chain_mdp(spec.states, spec.gamma);
  if (spec.family == "random")
    return make_random_mdp(spec.states, spec.actions, spec.seed, spec.gamma);
  if (spec.family == "twostate") return make_twostate_mdp(spec.gamma);
  throw InvalidConfig("unknown MDP family: " + spec.family);
}

TrajectoryDataset generate_dataset(const TabularMdp& mdp, const Policy& policy,
                                   const DatasetSpec& spec) {
  Rng rng(spec.seed);
  TrajectoryDataset ds;
  ds.mode = dataset_mode_from_string(spec.mode);
  ds.n_states = mdp.n_states;
  ds.n_actions = mdp.n_actions;
  ds.gamma = mdp.gamma;
  if (ds.mode == DatasetMode::kStateActionState) {
    if (spec.n < 1) throw InvalidConfig("dataset: n must be >= 1");
    ds.n_max = static_cast<int>(spec.n);
    ds.trajectories.push_back(sample_trajectory(mdp, policy, spec.n, rng));
  } else {
    if (spec.m < 1 || spec.n_max < 1)
      throw InvalidConfig("dataset: m and n_max must be >= 1");
    ds.n_max = static_cast<int>(spec.n_max);
    for (long i = 0; i < spec.m; ++i)
      ds.trajectories.push_back(sample_trajectory(mdp, policy, spec.n_max, rng));
  }
  ds.validate();
  return ds;
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

std::string file_hash_hex(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw InvalidConfig("file_hash_hex: cannot open " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  char out[32];
  std::snprintf(out, sizeof(out), "%016llx",
                static_cast<unsigned long long>(fnv1a64(buf.str())));
  return out;
}

nlohmann::json dptd_config_to_json(const DptdConfig& c) {
  nlohmann::json j{{"kappa", c.kappa},   {"eta", c.eta},
                   {"alpha", c.alpha},   {"beta", c.beta},
                   {"nu_a", c.nu_a},     {"nu_b", c.nu_b},
                   {"T", c.T},           {"box_radius", c.box_radius},
                   {"clip_G", c.clip_G}, {"seed", c.seed},
                   {"sequential_sweep", c.sequential_sweep}};
  j["noise"] = c.noise ? c.noise->to_json() : nlohmann::json(nullptr);
  return j;
}

DptdConfig dptd_config_from_json(const nlohmann::json& j) {
  DptdConfig c;
  c.kappa = j.value("kappa", c.kappa);
  c.eta = j.value("eta", c.eta);
  c.alpha = j.value("alpha", c.alpha);
  c.beta = j.value("beta", c.beta);
  c.nu_a = j.value("nu_a", c.nu_a);
  c.nu_b = j.value("nu_b", c.nu_b);
  c.T = j.value("T", c.T);
  c.box_radius = j.value("box_radius", c.box_radius);
  c.clip_G = j.value("clip_G", c.clip_G);
  c.seed = j.value("seed", c.seed);
  c.sequential_sweep = j.value("sequential_sweep", c.sequential_sweep);
  if (j.contains("noise") && !j.at("noise").is_null())
    c.noise = NoiseCalibration::from_json(j.at("noise"));
  return c;
}

ExperimentSpec ExperimentSpec::from_json(const nlohmann::json& j) {
  ExperimentSpec s;
  if (j.contains("mdp")) {
    const auto& m = j.at("mdp");
    s.mdp.family = m.value("family", s.mdp.family);
    s.mdp.states = m.value("states", s.mdp.states);
    s.mdp.actions = m.value("actions", s.mdp.actions);
    s.mdp.seed = m.value("seed", s.mdp.seed);
    s.mdp.gamma = m.value("gamma", s.mdp.gamma);
  }
  s.policy = j.value("policy", s.policy);
  if (j.contains("dataset")) {
    const auto& d = j.at("dataset");
    s.dataset.mode = d.value("mode", s.dataset.mode);
    s.dataset.n = d.value("n", s.dataset.n);
    s.dataset.m = d.value("m", s.dataset.m);
    s.dataset.n_max = d.value("n_max", s.dataset.n_max);
    s.dataset.seed = d.value("seed", s.dataset.seed);
    s.dataset.path = d.value("path", s.dataset.path);
  }
  if (j.contains("model")) {
    const auto& m = j.at("model");
    s.model.kind = m.value("kind", s.model.kind);
    s.model.features = m.value("features", s.model.features);
    s.model.feature_dim = m.value("feature_dim", s.model.feature_dim);
    s.model.feature_seed = m.value("feature_seed", s.model.feature_seed);
    s.model.hidden = m.value("hidden", s.model.hidden);
  }
  if (j.contains("optimizer")) s.optimizer = dptd_config_from_json(j.at("optimizer"));
  if (j.contains("privacy")) {
    const auto& p = j.at("privacy");
    s.privacy.mode = p.value("mode", s.privacy.mode);
    if (p.contains("epsilons"))
      s.privacy.epsilons = p.at("epsilons").get<std::vector<double>>();
    s.privacy.delta = p.value("delta", s.privacy.delta);
    s.privacy.beta_prime = p.value("beta_prime", s.privacy.beta_prime);
    s.privacy.grid_search = p.value("grid_search", s.privacy.grid_search);
  }
  if (j.contains("algorithms"))
    s.algorithms = j.at("algorithms").get<std::vector<std::string>>();
  if (j.contains("seeds"))
    s.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  s.f_interval = j.value("f_interval", s.f_interval);
  s.metric_interval = j.value("metric_interval", s.metric_interval);
  s.l_f = j.value("l_f", s.l_f);
  s.ridge = j.value("ridge", s.ridge);
  s.out_dir = j.value("out_dir", s.out_dir);
  return s;
}

nlohmann::json ExperimentSpec::to_json() const {
  return {{"mdp",
           {{"family", mdp.family},
            {"states", mdp.states},
            {"actions", mdp.actions},
            {"seed", mdp.seed},
            {"gamma", mdp.gamma}}},
          {"policy", policy},
          {"dataset",
           {{"mode", dataset.mode},
            {"n", dataset.n},
            {"m", dataset.m},
            {"n_max", dataset.n_max},
            {"seed", dataset.seed},
            {"path", dataset.path}}},
          {"model",
           {{"kind", model.kind},
            {"features", model.features},
            {"feature_dim", model.feature_dim},
            {"feature_seed", model.feature_seed},
            {"hidden", model.hidden}}},
          {"optimizer", dptd_config_to_json(optimizer)},
          {"privacy",
           {{"mode", privacy.mode},
            {"epsilons", privacy.epsilons},
            {"delta", privacy.delta},
            {"beta_prime", privacy.beta_prime},
            {"grid_search", privacy.grid_search}}},
          {"algorithms", algorithms},
          {"seeds", seeds},
          {"f_interval", f_interval},
          {"metric_interval", metric_interval},
          {"l_f", l_f},
          {"ridge", ridge},
          {"out_dir", out_dir}};
}

namespace {

bool algorithm_is_private(const std::string& alg, const PrivacySpec& privacy) {
  if (alg == "private_plain_sgda") return true;
  return alg == "dptd" && privacy.mode != "none";
}

}  // namespace

void ExperimentSpec::validate() const {
  if (policy != "uniform")
    throw InvalidConfig("only the uniform policy is supported, got " + policy);
  if (algorithms.empty()) throw InvalidConfig("no algorithms requested");
  if (seeds.empty()) throw InvalidConfig("no seeds requested");
  if (out_dir.empty()) throw InvalidConfig("out_dir must be set");
  for (const auto& alg : algorithms) {
    if (alg != "dptd" && alg != "nonprivate_td" && alg != "plain_sgda" &&
        alg != "private_plain_sgda")
      throw InvalidConfig("unknown algorithm: " + alg);
    if (algorithm_is_private(alg, privacy)) {
      if (privacy.mode != "sas" && privacy.mode != "trajectory")
        throw InvalidConfig("private algorithm needs privacy mode sas or trajectory");
      if (privacy.epsilons.empty())
        throw InvalidConfig("private algorithm needs a nonempty epsilon list");
      if (privacy.mode != dataset.mode)
        throw InvalidConfig("privacy mode must match the dataset mode");
    }
  }
  if (privacy.mode != "none" && privacy.mode != "sas" &&
      privacy.mode != "trajectory")
    throw InvalidConfig("unknown privacy mode: " + privacy.mode);
}

void write_runlog_csv(const std::string& path, const nlohmann::json& header,
                      std::span<const RunRow> rows) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InvalidConfig("write_runlog_csv: cannot open " + path);
  f << "# " << header.dump() << "\n";
  f << "t,nu_t,F_value,mspbe,metric_m1,metric_m2,metric_m3\n";
  for (const auto& r : rows) {
    f << r.t << "," << format_double(r.nu_t) << ",";
    if (r.f_value) f << format_double(*r.f_value);
    f << ",";
    if (r.mspbe) f << format_double(*r.mspbe);
    f << ",";
    if (r.metric) f << format_double((*r.metric)[0]);
    f << ",";
    if (r.metric) f << format_double((*r.metric)[1]);
    f << ",";
    if (r.metric) f << format_double((*r.metric)[2]);
    f << "\n";
  }
}

LoadedRunLog load_runlog_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw InvalidConfig("load_runlog_csv: cannot open " + path);
  LoadedRunLog log;
  std::string line;
  if (!std::getline(f, line) || line.rfind("# ", 0) != 0)
    throw InvalidConfig("load_runlog_csv: missing header in " + path);
  log.header = nlohmann::json::parse(line.substr(2));
  if (!std::getline(f, line) ||
      line != "t,nu_t,F_value,mspbe,metric_m1,metric_m2,metric_m3")
    throw InvalidConfig("load_runlog_csv: inconsistent schema in " + path);
  long prev_t = -1;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    cells.resize(7);
    RunRow row;
    row.t = std::stol(cells[0]);
    row.nu_t = std::stod(cells[1]);
    if (!cells[2].empty()) row.f_value = std::stod(cells[2]);
    if (!cells[3].empty()) row.mspbe = std::stod(cells[3]);
    if (!cells[4].empty())
      row.metric = std::array<double, 3>{std::stod(cells[4]),
                                         std::stod(cells[5]),
                                         std::stod(cells[6])};
    if (row.t <= prev_t)
      throw InvalidConfig("load_runlog_csv: rows not increasing in t");
    prev_t = row.t;
    log.rows.push_back(row);
  }
  return log;
}

namespace {

struct Cell {
  std::string algorithm;
  std::optional<double> epsilon;
  std::uint64_t seed = 0;
};

std::string cell_filename(const Cell& cell) {
  std::string name = cell.algorithm;
  if (cell.epsilon) name += "_eps" + fmt_g(*cell.epsilon);
  name += "_seed" + std::to_string(cell.seed) + ".csv";
  return name;
}

RunResult run_cell(const Cell& cell, const DptdConfig& config,
                   const ValueModel& model, const TrajectoryDataset& dataset,
                   const RunHooks& hooks) {
  if (cell.algorithm == "dptd") return run_dptd(config, model, dataset, hooks);
  if (cell.algorithm == "nonprivate_td")
    return run_baseline(BaselineKind::kNonPrivateTd, config, model, dataset,
                        hooks);
  if (cell.algorithm == "plain_sgda")
    return run_baseline(BaselineKind::kPlainSgda, config, model, dataset, hooks);
  if (cell.algorithm == "private_plain_sgda")
    return run_baseline(BaselineKind::kPrivatePlainSgda, config, model, dataset,
                        hooks);
  throw InvalidConfig("unknown algorithm: " + cell.algorithm);
}

}  // namespace

TrainOutputs train_experiment(const ExperimentSpec& spec) {
  spec.validate();
  const TabularMdp mdp = make_mdp(spec.mdp);
  const Policy policy = Policy::uniform(mdp.n_states, mdp.n_actions);

  fs::create_directories(spec.out_dir);
  TrainOutputs out;
  TrajectoryDataset dataset;
  if (spec.dataset.path.empty()) {
    dataset = generate_dataset(mdp, policy, spec.dataset);
    out.dataset_file = (fs::path(spec.out_dir) / "dataset.jsonl").string();
    save_dataset(out.dataset_file, dataset);
  } else {
    dataset = load_dataset(spec.dataset.path);
    out.dataset_file = spec.dataset.path;
  }
  out.dataset_hash = file_hash_hex(out.dataset_file);

  FeatureMap features;
  if (spec.model.features == "onehot") {
    features = FeatureMap::one_hot(dataset.n_states);
  } else if (spec.model.features == "random") {
    Rng frng(spec.model.feature_seed);
    features =
        FeatureMap::random(dataset.n_states, spec.model.feature_dim, frng);
  } else {
    throw InvalidConfig("unknown feature kind: " + spec.model.features);
  }
  const std::unique_ptr<ValueModel> model =
      make_model(spec.model.kind, std::move(features), spec.model.hidden);

  const WeightedTransitions batch = WeightedTransitions::from_dataset(dataset);

  // Calibrations are shared across algorithms and seeds at a given epsilon.
  std::map<double, NoiseCalibration> calibrations;
  const bool any_private = std::any_of(
      spec.algorithms.begin(), spec.algorithms.end(),
      [&](const std::string& a) { return algorithm_is_private(a, spec.privacy); });
  if (any_private) {
    for (double eps : spec.privacy.epsilons) {
      const PrivacyBudget budget{eps, spec.privacy.delta};
      NoiseCalibration cal;
      if (spec.privacy.mode == "sas") {
        const long n = static_cast<long>(dataset.transition_count());
        cal = spec.privacy.grid_search
                  ? calibrate_sas_grid(budget, spec.optimizer.T, n,
                                       spec.optimizer.clip_G)
                  : calibrate_sas(budget, spec.optimizer.T, n,
                                  spec.optimizer.clip_G, spec.privacy.beta_prime);
      } else {
        const long m = static_cast<long>(dataset.trajectories.size());
        cal = spec.privacy.grid_search
                  ? calibrate_trajectory_grid(budget, spec.optimizer.T,
                                              dataset.n_max, m,
                                              spec.optimizer.clip_G)
                  : calibrate_trajectory(budget, spec.optimizer.T, dataset.n_max,
                                         m, spec.optimizer.clip_G,
                                         spec.privacy.beta_prime);
      }
      calibrations.emplace(eps, std::move(cal));
    }
  }

  std::vector<Cell> cells;
  for (const auto& alg : spec.algorithms) {
    if (algorithm_is_private(alg, spec.privacy)) {
      for (double eps : spec.privacy.epsilons)
        for (auto seed : spec.seeds) cells.push_back({alg, eps, seed});
    } else {
      for (auto seed : spec.seeds) cells.push_back({alg, std::nullopt, seed});
    }
  }

  RunHooks hooks;
  hooks.f_interval = spec.f_interval;
  hooks.metric_interval = spec.metric_interval;
  hooks.f_eval = [&](std::span<const double> theta, std::span<const double> omega) {
    return empirical_f(*model, theta, omega, batch);
  };
  if (spec.metric_interval > 0) {
    hooks.mspbe_eval = [&](std::span<const double> theta) {
      return mspbe(*model, theta, batch, spec.ridge);
    };
    hooks.metric_eval = make_metric_hook(*model, batch, spec.optimizer.kappa,
                                         spec.ridge, spec.optimizer.box_radius);
  }

  std::vector<RunResult> results(cells.size());
  std::atomic<std::size_t> next{0};
  const unsigned n_workers = std::max(
      1u, std::min(std::thread::hardware_concurrency(),
                   static_cast<unsigned>(cells.size())));
  std::vector<std::thread> workers;
  std::vector<std::exception_ptr> errors(n_workers);
  for (unsigned w = 0; w < n_workers; ++w) {
    workers.emplace_back([&, w] {
      try {
        for (std::size_t i = next.fetch_add(1); i < cells.size();
             i = next.fetch_add(1)) {
          DptdConfig config = spec.optimizer;
          config.seed = cells[i].seed;
          if (cells[i].epsilon) config.noise = calibrations.at(*cells[i].epsilon);
          results[i] = run_cell(cells[i], config, *model, dataset, hooks);
        }
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : workers) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  nlohmann::json summary;
  summary["spec"] = spec.to_json();
  summary["dataset_hash"] = out.dataset_hash;
  summary["model"] = model->describe();
  nlohmann::json jcals = nlohmann::json::object();
  for (const auto& [eps, cal] : calibrations) jcals[fmt_g(eps)] = cal.to_json();
  summary["calibrations"] = jcals;

  for (std::size_t i = 0; i < cells.size(); ++i) {
    const Cell& cell = cells[i];
    const RunResult& res = results[i];
    CellResult cr;
    cr.algorithm = cell.algorithm;
    cr.epsilon = cell.epsilon;
    cr.seed = cell.seed;
    cr.file = (fs::path(spec.out_dir) / cell_filename(cell)).string();

    const NoiseCalibration* cal =
        cell.epsilon ? &calibrations.at(*cell.epsilon) : nullptr;
    // Sequential sweeps fall outside the subsampling analysis, so they never
    // claim a budget even with a valid calibration.
    cr.claimed = cal != nullptr && cal->valid && !spec.optimizer.sequential_sweep;

    nlohmann::json header;
    DptdConfig config = spec.optimizer;
    config.seed = cell.seed;
    if (cal != nullptr) config.noise = *cal;
    header["algorithm"] = cell.algorithm;
    header["seed"] = cell.seed;
    header["config"] = dptd_config_to_json(config);
    header["calibration"] = cal ? cal->to_json() : nlohmann::json(nullptr);
    header["dataset_hash"] = out.dataset_hash;
    // A run may only claim its budget when the calibration regime is valid.
    header["claimed_budget"] =
        cr.claimed ? nlohmann::json{{"epsilon", cal->epsilon},
                                    {"delta", cal->delta}}
                   : nlohmann::json(nullptr);
    header["model"] = model->describe();
    // Output pair sampled uniformly from the run's iterates, as flat arrays
    // in the model's documented layout.
    header["out_index"] = res.out_index;
    header["theta_out"] = res.theta_out;
    header["omega_out"] = res.omega_out;
    write_runlog_csv(cr.file, header, res.rows);

    for (auto it = res.rows.rbegin(); it != res.rows.rend(); ++it) {
      if (it->f_value) {
        cr.final_f = *it->f_value;
        cr.final_f_gap = std::fabs(*it->f_value);
        break;
      }
    }
    for (auto it = res.rows.rbegin(); it != res.rows.rend(); ++it) {
      if (it->mspbe) {
        cr.final_mspbe = *it->mspbe;
        break;
      }
    }
    for (const auto& row : res.rows)
      if (row.mspbe)
        cr.min_mspbe = cr.min_mspbe ? std::min(*cr.min_mspbe, *row.mspbe)
                                    : *row.mspbe;

    out.cells.push_back(cr);
    nlohmann::json jc{{"algorithm", cr.algorithm},
                      {"seed", cr.seed},
                      {"file", cr.file},
                      {"final_f", cr.final_f},
                      {"final_f_gap", cr.final_f_gap},
                      {"claimed", cr.claimed}};
    jc["epsilon"] = cr.epsilon ? nlohmann::json(*cr.epsilon) : nlohmann::json(nullptr);
    if (cr.final_mspbe) jc["final_mspbe"] = *cr.final_mspbe;
    if (cr.min_mspbe) jc["min_mspbe"] = *cr.min_mspbe;
    summary["cells"].push_back(jc);
  }

  // Seed-averaged finals per (algorithm, epsilon) group.
  std::map<std::pair<std::string, std::string>, std::vector<const CellResult*>>
      groups;
  for (const auto& c : out.cells)
    groups[{c.algorithm, c.epsilon ? fmt_g(*c.epsilon) : ""}].push_back(&c);
  summary["aggregates"] = nlohmann::json::array();
  for (const auto& [key, members] : groups) {
    std::vector<double> gaps, mspbes;
    for (const auto* c : members) {
      gaps.push_back(c->final_f_gap);
      if (c->final_mspbe) mspbes.push_back(*c->final_mspbe);
    }
    nlohmann::json ja{{"algorithm", key.first},
                      {"epsilon", key.second},
                      {"seeds", members.size()},
                      {"mean_final_f_gap", mean_of(gaps)},
                      {"std_final_f_gap", std_of(gaps)}};
    if (!mspbes.empty()) {
      ja["mean_final_mspbe"] = mean_of(mspbes);
      ja["std_final_mspbe"] = std_of(mspbes);
    }
    summary["aggregates"].push_back(ja);
  }

  out.summary = summary;
  std::ofstream sf(fs::path(spec.out_dir) / "summary.json", std::ios::binary);
  sf << summary.dump(2) << "\n";
  return out;
}

void write_aggregate_report(const std::string& dir, const std::string& out_csv,
                            long epoch_len) {
  if (epoch_len < 1) throw InvalidConfig("epoch length must be >= 1");
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() == ".csv") files.push_back(entry.path().string());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw InvalidConfig("no run logs found in " + dir);

  // group -> epoch -> column -> per-seed means
  struct EpochAcc {
    std::vector<double> f, mspbe, m1, m2, m3;
  };
  std::map<std::string, std::map<long, EpochAcc>> groups;
  for (const auto& file : files) {
    const LoadedRunLog log = load_runlog_csv(file);
    std::string group = log.header.value("algorithm", "run");
    const auto& cal = log.header.at("calibration");
    if (!cal.is_null()) group += "_eps" + fmt_g(cal.at("epsilon").get<double>());

    std::map<long, std::array<std::pair<double, long>, 5>> sums;
    for (const auto& row : log.rows) {
      const long epoch = row.t / epoch_len;
      auto& s = sums[epoch];
      if (row.f_value) {
        s[0].first += *row.f_value;
        s[0].second++;
      }
      if (row.mspbe) {
        s[1].first += *row.mspbe;
        s[1].second++;
      }
      if (row.metric) {
        for (int k = 0; k < 3; ++k) {
          s[2 + k].first += (*row.metric)[k];
          s[2 + k].second++;
        }
      }
    }
    for (const auto& [epoch, s] : sums) {
      auto& acc = groups[group][epoch];
      if (s[0].second > 0) acc.f.push_back(s[0].first / s[0].second);
      if (s[1].second > 0) acc.mspbe.push_back(s[1].first / s[1].second);
      if (s[2].second > 0) acc.m1.push_back(s[2].first / s[2].second);
      if (s[3].second > 0) acc.m2.push_back(s[3].first / s[3].second);
      if (s[4].second > 0) acc.m3.push_back(s[4].first / s[4].second);
    }
  }

  std::ofstream f(out_csv, std::ios::binary);
  if (!f) throw InvalidConfig("cannot open " + out_csv);
  f << "group,epoch,F_mean,F_std,mspbe_mean,mspbe_std,m1_mean,m1_std,m2_mean,"
       "m2_std,m3_mean,m3_std\n";
  auto put = [&](const std::vector<double>& xs) {
    if (!xs.empty())
      f << format_double(mean_of(xs)) << "," << format_double(std_of(xs));
    else
      f << ",";
  };
  for (const auto& [group, epochs] : groups) {
    for (const auto& [epoch, acc] : epochs) {
      f << group << "," << epoch << ",";
      put(acc.f);
      f << ",";
      put(acc.mspbe);
      f << ",";
      put(acc.m1);
      f << ",";
      put(acc.m2);
      f << ",";
      put(acc.m3);
      f << "\n";
    }
  }
}

}  // namespace dptd
