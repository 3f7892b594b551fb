// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "qfw/metrics.hpp"
#include "qfw/qmem.hpp"

namespace qfw {

struct RewardConfig {
  double gamma = 0.95;     // return discount rate
  double kappa = 0.9;      // baseline discount rate
  double punish = 0.1;     // destructive-measurement penalty
  double beta_dec = 20.0;  // decoding reward coefficient
  double beta_corr = 10.0; // correction reward coefficient
  double rq_floor = 0.1;   // decoding score cutoff
  double t_single = 0.0;   // trivial decay time of the scenario
  double dt = 1.0;
};

struct RewardPair {
  double r1 = 0.0;
  double r2 = 0.0;
};

// Protection reward for the step t -> t+1. Case conditions are evaluated on
// the branch-averaged values; equality tests use a 1e-9 threshold.
RewardPair protection_reward(double rq_t, double rq_bar_t, double rq_bar_next, const RewardConfig& cfg);

// R_t = (1-gamma) sum_k gamma^k r1_{t+k} + r2_t. r2 is never distributed
// backwards in time.
RVector protection_return(const RVector& r1, const RVector& r2, double gamma);

// Decoding score D_t: zero until the decode signal, zero below the R_Q floor,
// otherwise (#correct qubits - #wrong qubits)/2 under the partial-trace
// information criterion.
double decode_score(const LogicalFrame& frame, double rq, int t, const RewardConfig& cfg,
                    int target_qubit, int t_signal);

// Recovery reward beta_dec (D_{t+1} - D_t) + beta_corr C_T delta_{t,T-1}.
double recovery_reward(const LogicalFrame& frame_t, const LogicalFrame& frame_next, int t,
                       const RewardConfig& cfg, int target_qubit, int t_signal, int horizon,
                       double rq_t, double rq_next);

struct BaselineStore {
  RVector b;
  long epoch = 0;
};

// b_t <- kappa b_t + (1-kappa) mean_return_t, the recursive form of the
// exponentially decaying average over past epochs.
void baseline_update(BaselineStore& store, const RVector& mean_returns, double kappa);

}  // namespace qfw
