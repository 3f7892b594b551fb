// SPDX-License-Identifier: Apache-2.0

#include "qfw/distill.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "qfw/threadpool.hpp"

namespace qfw {

int event_input_size(const ActionSet& actions) {
  return 1 + actions.size() + int(actions.measurement_indices().size());
}

RVector encode_event(const ActionSet& actions, int prev_action, const std::string& outcome) {
  RVector v = RVector::Zero(event_input_size(actions));
  if (prev_action < 0) {
    v(0) = 1.0;  // begin of time
    return v;
  }
  v(1 + prev_action) = 1.0;
  const auto msmt = actions.measurement_indices();
  for (int k = 0; k < int(msmt.size()); ++k) {
    if (msmt[k] != prev_action) continue;
    if (outcome == "1" || outcome == "-") v(1 + actions.size() + k) = 1.0;
  }
  return v;
}

DistillDataset generate_distill_dataset(const Environment& env, const TeacherPolicy& teacher,
                                        int episodes, std::uint64_t seed) {
  DistillDataset ds;
  ds.inputs.resize(episodes);
  ds.teacher_probs.resize(episodes);
  const int horizon = env.spec().horizon;
  const int in_size = event_input_size(env.actions());
  const int n_actions = env.actions().size();
  parallel_for(episodes, [&](int e) {
    EpisodeState state = env.reset(splitmix64(seed ^ splitmix64(std::uint64_t(e))));
    RMatrix xs(horizon, in_size);
    RMatrix ps(horizon, n_actions);
    int prev = -1;
    std::string outcome;
    for (int t = 0; t < horizon; ++t) {
      xs.row(t) = encode_event(env.actions(), prev, outcome);
      const RVector obs = env.observe(state);
      const RVector probs = teacher(obs, t);
      ps.row(t) = probs;
      const int a = state.rng.categorical(probs);
      const StepOutcome so = env.apply(state, a);
      prev = a;
      outcome = so.outcome;
    }
    ds.inputs[e] = std::move(xs);
    ds.teacher_probs[e] = std::move(ps);
  });
  return ds;
}

double distill_update(net::Lstm& student, net::AdamState& adam, const std::vector<RMatrix>& inputs,
                      const std::vector<RMatrix>& teacher_probs, const std::vector<int>& batch_ids,
                      double dropout, Rng* mask_rng) {
  const int batch = int(batch_ids.size());
  const int horizon = int(inputs[batch_ids[0]].rows());
  const int in_size = student.input_size();
  const int h = student.hidden_size();
  std::vector<RMatrix> xs(horizon, RMatrix(batch, in_size));
  RMatrix teacher(Eigen::Index(horizon) * batch, student.output_size());
  for (int t = 0; t < horizon; ++t)
    for (int b = 0; b < batch; ++b) {
      xs[t].row(b) = inputs[batch_ids[b]].row(t);
      teacher.row(Eigen::Index(t) * batch + b) = teacher_probs[batch_ids[b]].row(t);
    }
  std::vector<std::array<RMatrix, net::Lstm::kLayers>> masks;
  const std::vector<std::array<RMatrix, net::Lstm::kLayers>>* mask_ptr = nullptr;
  if (mask_rng != nullptr && dropout > 0.0) {
    masks.resize(horizon);
    for (int t = 0; t < horizon; ++t)
      for (int l = 0; l < net::Lstm::kLayers; ++l) {
        masks[t][l].resize(batch, h);
        for (int b = 0; b < batch; ++b)
          for (int k = 0; k < h; ++k) masks[t][l](b, k) = mask_rng->bernoulli(1.0 - dropout) ? 1.0 : 0.0;
      }
    mask_ptr = &masks;
  }
  net::Lstm::SeqCache cache;
  student.forward_seq(xs, mask_ptr, 1.0 - dropout, &cache);
  RVector grad = RVector::Zero(student.param_count());
  const double loss = student.backward_cross_entropy(cache, teacher, grad);
  const double scale = 1.0 / (double(batch) * horizon);
  grad *= scale;
  RVector descent = -grad;  // adam_step ascends
  net::adam_step(student.params(), descent, adam);
  return loss * scale;
}

ValidationStats validate_student(const Environment& env, const net::Lstm& student,
                                 const TeacherPolicy& teacher, int episodes, std::uint64_t seed,
                                 double keep) {
  ValidationStats out;
  const int horizon = env.spec().horizon;
  long agree = 0;
  std::vector<double> rqs(episodes), overlaps(episodes);
  std::vector<long> agrees(episodes);
  parallel_for(episodes, [&](int e) {
    EpisodeState state = env.reset(splitmix64(seed ^ splitmix64(0xabcd0000ull + e)));
    net::Lstm::StepState lstm = student.initial_state();
    int prev = -1;
    std::string outcome;
    long local_agree = 0;
    for (int t = 0; t < horizon; ++t) {
      const RVector x = encode_event(env.actions(), prev, outcome);
      const RVector probs = student.step(lstm, x, keep);
      int a = 0;
      probs.maxCoeff(&a);  // greedy controller
      if (teacher) {
        const RVector obs = env.observe(state);
        const RVector tp = teacher(obs, t);
        int ta = 0;
        tp.maxCoeff(&ta);
        if (ta == a) local_agree += 1;
      }
      const StepOutcome so = env.apply(state, a);
      prev = a;
      outcome = so.outcome;
    }
    rqs[e] = state.rq;
    overlaps[e] = overlap_worst_case(state.as_dense(), env.spec().data_qubit);
    agrees[e] = local_agree;
  });
  for (int e = 0; e < episodes; ++e) {
    out.mean_rq_final += rqs[e];
    out.mean_overlap += overlaps[e];
    agree += agrees[e];
  }
  out.mean_rq_final /= episodes;
  out.mean_overlap /= episodes;
  out.agreement = double(agree) / (double(episodes) * horizon);
  return out;
}

DistillResult distill_recurrent(const Environment& env, const TeacherPolicy& teacher,
                                const DistillDataset& dataset, const DistillConfig& cfg) {
  const int episodes = int(dataset.inputs.size());
  if (episodes < cfg.batch) throw std::invalid_argument("distill_recurrent: dataset smaller than batch");
  DistillResult res;
  res.student = net::Lstm(event_input_size(env.actions()), cfg.hidden, env.actions().size());
  Rng init_rng(splitmix64(cfg.seed ^ 0x5157ull));
  res.student.init_weights(init_rng);
  net::AdamState adam;
  adam.eta = cfg.eta;
  adam.beta1 = cfg.beta1;
  adam.beta2 = cfg.beta2;
  Rng mask_rng(splitmix64(cfg.seed ^ 0xd60full));

  int update = 0;
  for (int pass = 0; pass < cfg.reuse_limit; ++pass) {
    // Deterministic shuffle per pass.
    std::vector<int> order(episodes);
    for (int i = 0; i < episodes; ++i) order[i] = i;
    Rng shuffle_rng(splitmix64(cfg.seed ^ splitmix64(0x77u + pass)));
    for (int i = episodes - 1; i > 0; --i) {
      const int j = int(shuffle_rng.next_u64() % std::uint64_t(i + 1));
      std::swap(order[i], order[j]);
    }
    for (int start = 0; start + cfg.batch <= episodes; start += cfg.batch) {
      std::vector<int> ids(order.begin() + start, order.begin() + start + cfg.batch);
      const double loss =
          distill_update(res.student, adam, dataset.inputs, dataset.teacher_probs, ids, cfg.dropout,
                         &mask_rng);
      update += 1;
      DistillCurveRow row;
      row.update = update;
      row.ce_loss = loss;
      if (cfg.validate_every > 0 && update % cfg.validate_every == 0) {
        const ValidationStats v = validate_student(env, res.student, teacher, cfg.validation_episodes,
                                                   cfg.seed + 0x9000 + update, 1.0 - cfg.dropout);
        row.val_rq = v.mean_rq_final;
        row.val_overlap = v.mean_overlap;
        row.val_agreement = v.agreement;
      }
      res.curve.push_back(row);
    }
  }
  res.final_validation = validate_student(env, res.student, teacher, cfg.validation_episodes,
                                          cfg.seed + 0xf00d, 1.0 - cfg.dropout);
  return res;
}

}  // namespace qfw
