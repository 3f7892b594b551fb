// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qfw/chz.hpp"
#include "qfw/metrics.hpp"
#include "qfw/qmem.hpp"
#include "qfw/rng.hpp"

namespace qfw {

enum class Backend { Dense, Chz };

struct ScenarioSpec {
  int version = 1;
  std::string name;
  int n_qubits = 0;
  int data_qubit = 0;
  std::vector<std::pair<int, int>> connectivity;  // ordered CNOT(control->target)
  std::vector<int> measurable_z;
  std::vector<int> measurable_xy;
  std::vector<int> flips_allowed;
  NoiseKind noise_kind = NoiseKind::BitFlip;
  double t_dec = 0.0;
  std::vector<double> moments;
  double msmt_error = 0.0;
  double dt = 1.0;
  int horizon = 0;
  int pca_components = 6;
  int decode_window = 0;
  std::optional<Backend> backend;  // default: CHZ for bit-flip, dense otherwise

  int t_signal() const { return horizon - decode_window; }
  Backend effective_backend() const {
    if (backend) return *backend;
    return noise_kind == NoiseKind::BitFlip ? Backend::Chz : Backend::Dense;
  }
  void validate() const;
  std::string canonical_json() const;
  std::uint64_t content_hash() const;
};

ScenarioSpec scenario_from_json_text(const std::string& text);
ScenarioSpec load_scenario(const std::string& path);

struct ActionSet {
  std::vector<Action> actions;
  int size() const { return int(actions.size()); }
  const Action& operator[](int i) const { return actions.at(i); }
  std::vector<int> measurement_indices() const;
};

// Deterministic ordering: CNOTs (lexicographic), z measurements, x/y
// measurements, flips, idle last.
ActionSet build_action_set(const ScenarioSpec& spec);

int observation_size(const ScenarioSpec& spec);

struct EpisodeState {
  Backend backend = Backend::Dense;
  LogicalFrame dense;
  ChzFrame chz;
  int t = 0;
  int prev_action = -1;
  Rng rng{0};
  double rq = 1.0;
  double rq_bar = 1.0;  // branch-averaged R_Q entering step t

  LogicalFrame as_dense() const { return backend == Backend::Chz ? chz.to_dense() : dense; }
};

struct StepOutcome {
  std::string outcome;
  double probability = 1.0;
  double rq = 0.0;
  double rq_expected = 0.0;
  bool destructive = false;
  bool terminal = false;
};

class Environment {
 public:
  explicit Environment(ScenarioSpec spec);

  const ScenarioSpec& spec() const { return spec_; }
  const ActionSet& actions() const { return actions_; }
  const NoiseGenerator& generator() const { return gen_; }
  int observation_size() const { return obs_size_; }
  RqMethod rq_method() const { return method_; }
  double t_single() const { return gen_.t_single(); }

  EpisodeState reset(std::uint64_t seed) const;
  RVector observe(const EpisodeState& state) const;
  StepOutcome apply(EpisodeState& state, int action_index) const;

  // Destructive-measurement flags for every measurement action, in order.
  std::vector<bool> destructive_flags(const EpisodeState& state) const;

 private:
  ScenarioSpec spec_;
  ActionSet actions_;
  NoiseGenerator gen_;
  RqMethod method_ = RqMethod::Axis;
  Backend backend_ = Backend::Dense;
  int obs_size_ = 0;
  std::vector<std::vector<CPBranch>> dense_maps_;   // per action, cached
  ChzDissipation chz_dis_;
  std::vector<int> msmt_action_ids_;
};

// PCA block of one Hermitian matrix: K scaled eigenvectors sqrt(p)|phi>,
// phase-fixed and sorted; entries appended to `out` as re/im pairs.
void append_pca_block(const Matrix& rho, int k_components, std::vector<double>& out);

}  // namespace qfw
