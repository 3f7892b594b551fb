// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "qfw/net.hpp"
#include "qfw/scenario.hpp"

namespace qfw {

// Teacher policy: action distribution given the state-aware observation.
using TeacherPolicy = std::function<RVector(const RVector& obs, int t)>;

// Input layout of the measurement-driven network: one begin-of-time neuron,
// a one-hot slot per action, and one extra slot per measurement action that
// flags the second outcome.
int event_input_size(const ActionSet& actions);
RVector encode_event(const ActionSet& actions, int prev_action, const std::string& outcome);

struct DistillDataset {
  std::vector<RMatrix> inputs;         // per episode: horizon x event size
  std::vector<RMatrix> teacher_probs;  // per episode: horizon x actions
};

DistillDataset generate_distill_dataset(const Environment& env, const TeacherPolicy& teacher,
                                        int episodes, std::uint64_t seed);

struct DistillConfig {
  int batch = 16;
  double eta = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double dropout = 0.5;
  int hidden = 128;
  int reuse_limit = 5;  // each trajectory enters at most this many updates
  std::uint64_t seed = 1;
  int validation_episodes = 64;
  int validate_every = 0;  // 0: only at the end
};

struct DistillCurveRow {
  int update = 0;
  double ce_loss = 0.0;
  double val_rq = 0.0;
  double val_overlap = 0.0;
  double val_agreement = 0.0;
};

struct ValidationStats {
  double mean_rq_final = 0.0;
  double mean_overlap = 0.0;
  double agreement = 0.0;  // greedy student action vs teacher action
};

// Closed-loop run of the student on the environment; the teacher is consulted
// per step only to score agreement.
ValidationStats validate_student(const Environment& env, const net::Lstm& student,
                                 const TeacherPolicy& teacher, int episodes, std::uint64_t seed,
                                 double keep);

struct DistillResult {
  net::Lstm student;
  std::vector<DistillCurveRow> curve;
  ValidationStats final_validation;
};

DistillResult distill_recurrent(const Environment& env, const TeacherPolicy& teacher,
                                const DistillDataset& dataset, const DistillConfig& cfg);

// One supervised update on a fixed batch; returns the summed cross-entropy
// before the step. Exposed for convergence checks.
double distill_update(net::Lstm& student, net::AdamState& adam, const std::vector<RMatrix>& inputs,
                      const std::vector<RMatrix>& teacher_probs, const std::vector<int>& batch_ids,
                      double dropout, Rng* mask_rng);

}  // namespace qfw
