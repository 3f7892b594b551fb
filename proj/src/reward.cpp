// SPDX-License-Identifier: Apache-2.0

#include "qfw/reward.hpp"

#include <stdexcept>

namespace qfw {

namespace {
constexpr double kZeroTol = 1e-9;
}

RewardPair protection_reward(double rq_t, double rq_bar_t, double rq_bar_next, const RewardConfig& cfg) {
  if (cfg.t_single <= 0.0) throw std::invalid_argument("protection_reward: t_single not configured");
  RewardPair r;
  if (rq_bar_next > kZeroTol) {
    r.r1 = 1.0 + (rq_bar_next - rq_t) / (2.0 * cfg.dt / cfg.t_single);
  } else if (rq_bar_t > kZeroTol) {
    r.r2 = -cfg.punish;
  }
  return r;
}

RVector protection_return(const RVector& r1, const RVector& r2, double gamma) {
  if (r1.size() != r2.size()) throw std::invalid_argument("protection_return: length mismatch");
  const Eigen::Index t_max = r1.size();
  RVector out(t_max);
  double acc = 0.0;
  for (Eigen::Index t = t_max - 1; t >= 0; --t) {
    acc = gamma * acc + r1(t);
    out(t) = (1.0 - gamma) * acc + r2(t);
  }
  return out;
}

double decode_score(const LogicalFrame& frame, double rq, int t, const RewardConfig& cfg,
                    int target_qubit, int t_signal) {
  if (t <= t_signal) return 0.0;
  if (rq < cfg.rq_floor) return 0.0;
  const std::vector<bool> flags = qubit_info_flags(frame);
  int score = 0;
  for (int q = 0; q < frame.n_qubits; ++q) {
    const bool want = q == target_qubit;
    score += flags[q] == want ? 1 : -1;
  }
  return 0.5 * double(score);
}

double recovery_reward(const LogicalFrame& frame_t, const LogicalFrame& frame_next, int t,
                       const RewardConfig& cfg, int target_qubit, int t_signal, int horizon,
                       double rq_t, double rq_next) {
  const double d_now = decode_score(frame_t, rq_t, t, cfg, target_qubit, t_signal);
  const double d_next = decode_score(frame_next, rq_next, t + 1, cfg, target_qubit, t_signal);
  double r = cfg.beta_dec * (d_next - d_now);
  if (t == horizon - 1) {
    const std::vector<bool> flags = qubit_info_flags(frame_next);
    bool solely_target = true;
    for (int q = 0; q < frame_next.n_qubits; ++q)
      if (flags[q] != (q == target_qubit)) solely_target = false;
    if (solely_target && overlap_worst_case(frame_next, target_qubit) > 0.5) r += cfg.beta_corr;
  }
  return r;
}

void baseline_update(BaselineStore& store, const RVector& mean_returns, double kappa) {
  if (store.b.size() == 0) store.b = RVector::Zero(mean_returns.size());
  if (store.b.size() != mean_returns.size())
    throw std::invalid_argument("baseline_update: horizon mismatch");
  store.b = kappa * store.b + (1.0 - kappa) * mean_returns;
  store.epoch += 1;
}

}  // namespace qfw
