// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <vector>

#include "qfw/linalg.hpp"
#include "qfw/rng.hpp"

namespace qfw::net {

RVector softmax(const RVector& logits);
void softmax_rows_in_place(RMatrix& logits);
double entropy(const RVector& probs);

// Dense ReLU network with a softmax head. Parameters live in one flat vector
// (per layer: column-major W, then b) so optimizers and Fisher solves can
// treat them as plain vectors.
class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(std::vector<int> sizes);

  void init_weights(Rng& rng);

  const std::vector<int>& sizes() const { return sizes_; }
  int layer_count() const { return int(sizes_.size()) - 1; }
  int input_size() const { return sizes_.front(); }
  int output_size() const { return sizes_.back(); }
  Eigen::Index param_count() const { return theta_.size(); }
  RVector& params() { return theta_; }
  const RVector& params() const { return theta_; }

  Eigen::Map<const RMatrix> weight(int layer) const;
  Eigen::Map<const RVector> bias(int layer) const;
  Eigen::Map<RMatrix> weight(int layer);
  Eigen::Map<RVector> bias(int layer);

  struct Cache {
    std::vector<RMatrix> h;  // h[0] = input rows; h[l] = post-ReLU activations
    RMatrix probs;
  };

  // Rows are samples; returns action probabilities per row.
  RMatrix forward(const RMatrix& x, Cache* cache = nullptr) const;
  RVector forward1(const RVector& x) const;

  // Accumulates d(sum_i <logit_err_i, z_i>)/dtheta into grad.
  void backward(const Cache& cache, const RMatrix& logit_err, RVector& grad) const;

  // Gradient of ln pi(action | x) with respect to every parameter.
  RVector grad_logp(const RVector& x, int action) const;

  // Activations of the last hidden layer for one input.
  RVector last_hidden(const RVector& x) const;

 private:
  std::vector<int> sizes_;
  std::vector<Eigen::Index> w_off_, b_off_;
  RVector theta_;
};

// Per-sample score decomposition ds_i = d ln pi(a_i|x_i)/dtheta kept in
// low-rank form (layer inputs and logit-space deltas), so Fisher-vector
// products reduce to a few GEMMs without materializing any score vector.
struct ScoreCache {
  std::vector<RMatrix> h;  // h[l]: inputs to layer l, one row per sample
  std::vector<RMatrix> d;  // d[l]: per-sample delta at layer l outputs
  Eigen::Index count() const { return h.empty() ? 0 : h[0].rows(); }
};

ScoreCache build_score_cache(const Mlp& net, const RMatrix& x, const std::vector<int>& actions);
// alpha_i = s_i . v for every sample.
RVector score_dot(const Mlp& net, const ScoreCache& cache, const RVector& v);
// out += sum_i alpha_i s_i.
void add_weighted_scores(const Mlp& net, const ScoreCache& cache, const RVector& alpha, RVector& out);

// Two stacked LSTM layers with a dense softmax head. Gate row order [i f g o].
class Lstm {
 public:
  Lstm() = default;
  Lstm(int input, int hidden, int actions);

  void init_weights(Rng& rng);

  int input_size() const { return input_; }
  int hidden_size() const { return hidden_; }
  int output_size() const { return actions_; }
  Eigen::Index param_count() const { return theta_.size(); }
  RVector& params() { return theta_; }
  const RVector& params() const { return theta_; }
  std::vector<int> arch() const { return {input_, hidden_, hidden_, actions_}; }

  static constexpr int kLayers = 2;

  struct StepState {
    std::array<RVector, kLayers> h, c;
  };
  StepState initial_state() const;

  // Single evaluation-mode step: layer outputs are rescaled by `keep`.
  RVector step(StepState& state, const RVector& x, double keep) const;
  // As above but also exposes the (rescaled) output of the second LSTM layer.
  RVector step_with_hidden(StepState& state, const RVector& x, double keep, RVector* hidden_out) const;

  struct SeqCache {
    // per step, per layer: layer inputs, gate activations, cell traces,
    // hidden outputs, dropout multipliers and dropped outputs
    std::vector<std::array<RMatrix, kLayers>> in, gi, gf, gg, go, c, tanh_c, h, mask, drop;
    RMatrix probs_flat;  // (steps*batch) x actions, step-major
    int steps = 0, batch = 0;
  };

  // Processes a batch of equally long sequences in lockstep. `masks`, when
  // present, supplies 0/1 dropout masks per (step, layer) of shape
  // batch x hidden (training mode, no rescale); otherwise outputs are
  // rescaled by `keep` (evaluation mode).
  // xs: one matrix per step, batch x input.
  std::vector<RMatrix> forward_seq(const std::vector<RMatrix>& xs,
                                   const std::vector<std::array<RMatrix, kLayers>>* masks, double keep,
                                   SeqCache* cache) const;

  // Accumulates the gradient of sum_{t,b} C(q, p) into grad; returns the
  // summed cross-entropy. `teacher` has one row per (step, batch) pair in
  // step-major order, matching SeqCache::probs_flat.
  double backward_cross_entropy(const SeqCache& cache, const RMatrix& teacher, RVector& grad) const;

 private:
  int input_ = 0, hidden_ = 0, actions_ = 0;
  // per layer: wx (4H x in), wh (4H x H), b (4H); head: wo (A x H), bo (A)
  std::array<Eigen::Index, kLayers> wx_off_{}, wh_off_{}, b_off_{};
  Eigen::Index wo_off_ = 0, bo_off_ = 0;
  RVector theta_;

  friend struct LstmViews;
};

struct AdamState {
  RVector m, v;
  double eta = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  bool bias_correction = false;
  long step = 0;
};

// Ascent update theta += eta * B_n * m / (sqrt(v) + 1e-12); B_n = 1 unless
// bias correction is enabled. Throws on non-finite gradient entries.
void adam_step(RVector& theta, const RVector& grad, AdamState& state);

struct CrossEntropyResult {
  double loss = 0.0;
  RVector dlogits;   // gradient at the student logits: q - p
  bool clamped = false;
};

CrossEntropyResult cross_entropy(const RVector& teacher_p, const RVector& student_q);

}  // namespace qfw::net
