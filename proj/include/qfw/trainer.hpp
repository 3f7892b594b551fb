// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "qfw/net.hpp"
#include "qfw/reward.hpp"
#include "qfw/scenario.hpp"

namespace qfw {

struct CgConfig {
  int max_iter = 50;
  double damping = 1e-4;
  double tol = 1e-5;  // relative residual target
};

struct TrainConfig {
  int batch = 64;
  int epochs = 100;
  double lambda_pol = 4.0;
  double lambda_entr = 0.0;
  int entropy_off_epoch = 0;  // entropy term active for epoch < entropy_off_epoch
  double eta = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  bool bias_correction = false;
  RewardConfig reward;  // t_single and dt are filled in from the scenario
  CgConfig cg;
  double fisher_subsample = 1.0;  // fraction of batch samples entering the Fisher estimate
  std::vector<int> hidden = {300, 300};
  int checkpoint_every = 0;
  std::uint64_t seed = 1;
  // Optional early-stop targets (0 disables): trailing-window means.
  double target_rq = 0.0;
  double target_destructive_rate = 0.0;
  int target_window = 5;

  std::string canonical_json() const;
  std::uint64_t content_hash() const;
};

TrainConfig train_config_from_json_text(const std::string& text);
TrainConfig load_train_config(const std::string& path);

struct Trajectory {
  RMatrix obs;  // horizon x observation size
  std::vector<int> actions;
  std::vector<std::string> outcomes;
  RVector probs;
  RVector rq, rq_expected;
  RVector r1, r2, r_recov;
  RVector returns;
  double rq_final = 0.0;
  double overlap_final = 0.0;
  int destructive_count = 0;
  double entropy_sum = 0.0;
};

// Per-trajectory seed = splitmix of (base_seed, index); reproducible and
// independent of scheduling.
std::vector<Trajectory> rollout_batch(const Environment& env, const net::Mlp& policy, int batch,
                                      std::uint64_t base_seed, const RewardConfig& reward,
                                      int threads = -1);

// lambda_pol * (1/batch) sum_traj sum_t (R_t - b_t) dln pi(a_t|s_t)/dtheta.
RVector policy_gradient(const net::Mlp& policy, const std::vector<Trajectory>& trajectories,
                        const RVector& baseline, double lambda_pol, int threads = -1);

// lambda_entr * d/dtheta of the mean policy entropy over visited states.
RVector entropy_gradient(const net::Mlp& policy, const std::vector<Trajectory>& trajectories,
                         double lambda_entr, int threads = -1);

// Matrix-free Fisher estimate over the batch's state-action visitation,
// restricted to a deterministic stride subsample.
class FisherOperator {
 public:
  FisherOperator(const net::Mlp& policy, const std::vector<Trajectory>& trajectories, double subsample,
                 int threads = -1);
  RVector apply(const RVector& v) const;
  Eigen::Index samples() const { return n_samples_; }

 private:
  const net::Mlp* policy_;
  std::vector<net::ScoreCache> chunks_;
  Eigen::Index n_samples_ = 0;
  int threads_;
};

struct CgResult {
  RVector x;
  int iterations = 0;
  bool converged = false;
  double residual = 0.0;
};

CgResult conjugate_gradient(const std::function<RVector(const RVector&)>& matvec, const RVector& rhs,
                            const CgConfig& cfg);

// Solves (F + damping I) x = vanilla by CG; returns the best iterate.
CgResult natural_gradient(const net::Mlp& policy, const RVector& vanilla,
                          const std::vector<Trajectory>& trajectories, const CgConfig& cfg,
                          double fisher_subsample = 1.0, int threads = -1);

struct EpochStats {
  int epoch = 0;
  long episodes = 0;
  double mean_rq_final = 0.0;
  double mean_return = 0.0;
  double destructive_rate = 0.0;
  double entropy = 0.0;
  double wall_time = 0.0;
  bool cg_converged = true;
};

enum class TrainStatus { Completed, EarlyStopped, NanAbort };

struct TrainHooks {
  std::function<void(const EpochStats&)> on_epoch;
  std::function<void(int, const net::Mlp&, const net::AdamState&)> on_checkpoint;
  std::function<bool(const std::vector<EpochStats>&)> stop_early;
};

TrainStatus train_state_aware(const Environment& env, const TrainConfig& cfg, net::Mlp& policy,
                              net::AdamState& adam, BaselineStore& baseline,
                              std::vector<EpochStats>& curve, const TrainHooks& hooks = {});

std::uint64_t trajectory_seed(std::uint64_t base_seed, int index);

}  // namespace qfw
