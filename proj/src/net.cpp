// SPDX-License-Identifier: Apache-2.0

#include "qfw/net.hpp"

#include <cmath>
#include <stdexcept>

namespace qfw::net {

RVector softmax(const RVector& logits) {
  RVector out = logits.array() - logits.maxCoeff();
  out = out.array().exp();
  return out / out.sum();
}

void softmax_rows_in_place(RMatrix& logits) {
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    RVector row = logits.row(r);
    logits.row(r) = softmax(row);
  }
}

double entropy(const RVector& probs) {
  double h = 0.0;
  for (Eigen::Index i = 0; i < probs.size(); ++i)
    if (probs(i) > 1e-300) h -= probs(i) * std::log(probs(i));
  return h;
}

Mlp::Mlp(std::vector<int> sizes) : sizes_(std::move(sizes)) {
  if (sizes_.size() < 2) throw std::invalid_argument("Mlp: need at least input and output sizes");
  Eigen::Index off = 0;
  for (int l = 0; l + 1 < int(sizes_.size()); ++l) {
    w_off_.push_back(off);
    off += Eigen::Index(sizes_[l + 1]) * sizes_[l];
    b_off_.push_back(off);
    off += sizes_[l + 1];
  }
  theta_ = RVector::Zero(off);
}

void Mlp::init_weights(Rng& rng) {
  for (int l = 0; l < layer_count(); ++l) {
    const double a = 1.0 / std::sqrt(double(sizes_[l]));
    auto w = weight(l);
    for (Eigen::Index j = 0; j < w.cols(); ++j)
      for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = rng.uniform_symmetric(a);
    bias(l).setZero();
  }
}

Eigen::Map<const RMatrix> Mlp::weight(int layer) const {
  return {theta_.data() + w_off_[layer], sizes_[layer + 1], sizes_[layer]};
}
Eigen::Map<const RVector> Mlp::bias(int layer) const {
  return {theta_.data() + b_off_[layer], sizes_[layer + 1]};
}
Eigen::Map<RMatrix> Mlp::weight(int layer) {
  return {theta_.data() + w_off_[layer], sizes_[layer + 1], sizes_[layer]};
}
Eigen::Map<RVector> Mlp::bias(int layer) {
  return {theta_.data() + b_off_[layer], sizes_[layer + 1]};
}

RMatrix Mlp::forward(const RMatrix& x, Cache* cache) const {
  if (x.cols() != input_size()) throw std::invalid_argument("Mlp::forward: input size mismatch");
  const int L = layer_count();
  RMatrix h = x;
  if (cache) {
    cache->h.clear();
    cache->h.push_back(x);
  }
  for (int l = 0; l < L; ++l) {
    RMatrix z = h * weight(l).transpose();
    z.rowwise() += bias(l).transpose();
    if (l + 1 < L) {
      h = z.cwiseMax(0.0);
      if (cache) cache->h.push_back(h);
    } else {
      softmax_rows_in_place(z);
      if (cache) cache->probs = z;
      return z;
    }
  }
  throw std::logic_error("Mlp::forward: unreachable");
}

RVector Mlp::forward1(const RVector& x) const {
  RMatrix row = x.transpose();
  return forward(row).row(0).transpose();
}

void Mlp::backward(const Cache& cache, const RMatrix& logit_err, RVector& grad) const {
  const int L = layer_count();
  if (grad.size() != theta_.size()) throw std::invalid_argument("Mlp::backward: gradient size mismatch");
  RMatrix err = logit_err;
  for (int l = L - 1; l >= 0; --l) {
    Eigen::Map<RMatrix> dw(grad.data() + w_off_[l], sizes_[l + 1], sizes_[l]);
    Eigen::Map<RVector> db(grad.data() + b_off_[l], sizes_[l + 1]);
    dw.noalias() += err.transpose() * cache.h[l];
    db.noalias() += err.colwise().sum().transpose();
    if (l > 0) {
      RMatrix back = err * weight(l);
      err = back.cwiseProduct((cache.h[l].array() > 0.0).cast<double>().matrix());
    }
  }
}

RVector Mlp::grad_logp(const RVector& x, int action) const {
  if (action < 0 || action >= output_size()) throw std::invalid_argument("Mlp::grad_logp: bad action");
  Cache cache;
  forward(x.transpose(), &cache);
  RMatrix err = -cache.probs;
  err(0, action) += 1.0;
  RVector grad = RVector::Zero(theta_.size());
  backward(cache, err, grad);
  return grad;
}

RVector Mlp::last_hidden(const RVector& x) const {
  const int L = layer_count();
  RVector h = x;
  for (int l = 0; l + 1 < L; ++l) h = (weight(l) * h + bias(l)).cwiseMax(0.0);
  return h;
}

ScoreCache build_score_cache(const Mlp& net, const RMatrix& x, const std::vector<int>& actions) {
  Mlp::Cache cache;
  net.forward(x, &cache);
  const int L = net.layer_count();
  ScoreCache sc;
  sc.h = cache.h;  // inputs to layers 0..L-1
  sc.d.resize(L);
  RMatrix err = -cache.probs;
  for (Eigen::Index i = 0; i < x.rows(); ++i) err(i, actions[i]) += 1.0;
  for (int l = L - 1; l >= 0; --l) {
    sc.d[l] = err;
    if (l > 0) {
      RMatrix back = err * net.weight(l);
      err = back.cwiseProduct((cache.h[l].array() > 0.0).cast<double>().matrix());
    }
  }
  return sc;
}

RVector score_dot(const Mlp& net, const ScoreCache& cache, const RVector& v) {
  const int L = net.layer_count();
  RVector alpha = RVector::Zero(cache.count());
  for (int l = 0; l < L; ++l) {
    Eigen::Map<const RMatrix> vw(v.data() + (net.weight(l).data() - net.params().data()),
                                 net.weight(l).rows(), net.weight(l).cols());
    Eigen::Map<const RVector> vb(v.data() + (net.bias(l).data() - net.params().data()),
                                 net.bias(l).size());
    alpha += (cache.h[l] * vw.transpose()).cwiseProduct(cache.d[l]).rowwise().sum();
    alpha += cache.d[l] * vb;
  }
  return alpha;
}

void add_weighted_scores(const Mlp& net, const ScoreCache& cache, const RVector& alpha, RVector& out) {
  const int L = net.layer_count();
  for (int l = 0; l < L; ++l) {
    RMatrix weighted = cache.d[l].array().colwise() * alpha.array();
    Eigen::Map<RMatrix> ow(out.data() + (net.weight(l).data() - net.params().data()),
                           net.weight(l).rows(), net.weight(l).cols());
    Eigen::Map<RVector> ob(out.data() + (net.bias(l).data() - net.params().data()), net.bias(l).size());
    ow.noalias() += weighted.transpose() * cache.h[l];
    ob.noalias() += weighted.colwise().sum().transpose();
  }
}

namespace {
inline RMatrix sigmoid(const RMatrix& z) { return (1.0 + (-z.array()).exp()).inverse().matrix(); }
}  // namespace

Lstm::Lstm(int input, int hidden, int actions) : input_(input), hidden_(hidden), actions_(actions) {
  Eigen::Index off = 0;
  for (int l = 0; l < kLayers; ++l) {
    const int in = l == 0 ? input_ : hidden_;
    wx_off_[l] = off;
    off += Eigen::Index(4 * hidden_) * in;
    wh_off_[l] = off;
    off += Eigen::Index(4 * hidden_) * hidden_;
    b_off_[l] = off;
    off += 4 * hidden_;
  }
  wo_off_ = off;
  off += Eigen::Index(actions_) * hidden_;
  bo_off_ = off;
  off += actions_;
  theta_ = RVector::Zero(off);
}

struct LstmViews {
  static Eigen::Map<const RMatrix> wx(const Lstm& n, int l) {
    const int in = l == 0 ? n.input_ : n.hidden_;
    return {n.theta_.data() + n.wx_off_[l], 4 * n.hidden_, in};
  }
  static Eigen::Map<const RMatrix> wh(const Lstm& n, int l) {
    return {n.theta_.data() + n.wh_off_[l], 4 * n.hidden_, n.hidden_};
  }
  static Eigen::Map<const RVector> b(const Lstm& n, int l) {
    return {n.theta_.data() + n.b_off_[l], 4 * n.hidden_};
  }
  static Eigen::Map<const RMatrix> wo(const Lstm& n) {
    return {n.theta_.data() + n.wo_off_, n.actions_, n.hidden_};
  }
  static Eigen::Map<const RVector> bo(const Lstm& n) { return {n.theta_.data() + n.bo_off_, n.actions_}; }

  static Eigen::Map<RMatrix> wx(Lstm& n, int l) {
    const int in = l == 0 ? n.input_ : n.hidden_;
    return {n.theta_.data() + n.wx_off_[l], 4 * n.hidden_, in};
  }
  static Eigen::Map<RMatrix> wh(Lstm& n, int l) {
    return {n.theta_.data() + n.wh_off_[l], 4 * n.hidden_, n.hidden_};
  }
  static Eigen::Map<RVector> b(Lstm& n, int l) { return {n.theta_.data() + n.b_off_[l], 4 * n.hidden_}; }
  static Eigen::Map<RMatrix> wo(Lstm& n) { return {n.theta_.data() + n.wo_off_, n.actions_, n.hidden_}; }
  static Eigen::Map<RVector> bo(Lstm& n) { return {n.theta_.data() + n.bo_off_, n.actions_}; }

  // gradient views over an external flat vector
  static Eigen::Map<RMatrix> gwx(const Lstm& n, RVector& g, int l) {
    const int in = l == 0 ? n.input_ : n.hidden_;
    return {g.data() + n.wx_off_[l], 4 * n.hidden_, in};
  }
  static Eigen::Map<RMatrix> gwh(const Lstm& n, RVector& g, int l) {
    return {g.data() + n.wh_off_[l], 4 * n.hidden_, n.hidden_};
  }
  static Eigen::Map<RVector> gb(const Lstm& n, RVector& g, int l) {
    return {g.data() + n.b_off_[l], 4 * n.hidden_};
  }
  static Eigen::Map<RMatrix> gwo(const Lstm& n, RVector& g) {
    return {g.data() + n.wo_off_, n.actions_, n.hidden_};
  }
  static Eigen::Map<RVector> gbo(const Lstm& n, RVector& g) { return {g.data() + n.bo_off_, n.actions_}; }
};

void Lstm::init_weights(Rng& rng) {
  for (int l = 0; l < kLayers; ++l) {
    const int in = l == 0 ? input_ : hidden_;
    const double ax = 1.0 / std::sqrt(double(in));
    auto wx = LstmViews::wx(*this, l);
    for (Eigen::Index j = 0; j < wx.cols(); ++j)
      for (Eigen::Index i = 0; i < wx.rows(); ++i) wx(i, j) = rng.uniform_symmetric(ax);
    const double ah = 1.0 / std::sqrt(double(hidden_));
    auto wh = LstmViews::wh(*this, l);
    for (Eigen::Index j = 0; j < wh.cols(); ++j)
      for (Eigen::Index i = 0; i < wh.rows(); ++i) wh(i, j) = rng.uniform_symmetric(ah);
    auto b = LstmViews::b(*this, l);
    b.setZero();
    b.segment(hidden_, hidden_).setOnes();  // forget-gate bias
  }
  auto wo = LstmViews::wo(*this);
  const double ao = 1.0 / std::sqrt(double(hidden_));
  for (Eigen::Index j = 0; j < wo.cols(); ++j)
    for (Eigen::Index i = 0; i < wo.rows(); ++i) wo(i, j) = rng.uniform_symmetric(ao);
  LstmViews::bo(*this).setZero();
}

Lstm::StepState Lstm::initial_state() const {
  StepState st;
  for (int l = 0; l < kLayers; ++l) {
    st.h[l] = RVector::Zero(hidden_);
    st.c[l] = RVector::Zero(hidden_);
  }
  return st;
}

RVector Lstm::step_with_hidden(StepState& state, const RVector& x, double keep, RVector* hidden_out) const {
  RVector in = x;
  for (int l = 0; l < kLayers; ++l) {
    RVector z = LstmViews::wx(*this, l) * in + LstmViews::wh(*this, l) * state.h[l] + LstmViews::b(*this, l);
    const int H = hidden_;
    RVector i = (1.0 + (-z.segment(0, H).array()).exp()).inverse();
    RVector f = (1.0 + (-z.segment(H, H).array()).exp()).inverse();
    RVector g = z.segment(2 * H, H).array().tanh();
    RVector o = (1.0 + (-z.segment(3 * H, H).array()).exp()).inverse();
    state.c[l] = f.cwiseProduct(state.c[l]) + i.cwiseProduct(g);
    state.h[l] = o.cwiseProduct(state.c[l].array().tanh().matrix());
    in = keep * state.h[l];  // evaluation-mode dropout rescaling
  }
  if (hidden_out) *hidden_out = in;
  return softmax(LstmViews::wo(*this) * in + LstmViews::bo(*this));
}

RVector Lstm::step(StepState& state, const RVector& x, double keep) const {
  return step_with_hidden(state, x, keep, nullptr);
}

std::vector<RMatrix> Lstm::forward_seq(const std::vector<RMatrix>& xs,
                                       const std::vector<std::array<RMatrix, kLayers>>* masks,
                                       double keep, SeqCache* cache) const {
  const int steps = int(xs.size());
  const int batch = steps > 0 ? int(xs[0].rows()) : 0;
  const int H = hidden_;
  std::array<RMatrix, kLayers> h, c;
  for (int l = 0; l < kLayers; ++l) {
    h[l] = RMatrix::Zero(batch, H);
    c[l] = RMatrix::Zero(batch, H);
  }
  if (cache) {
    for (auto* field : {&cache->in, &cache->gi, &cache->gf, &cache->gg, &cache->go, &cache->c,
                        &cache->tanh_c, &cache->h, &cache->mask, &cache->drop})
      field->resize(steps);
    cache->probs_flat.resize(Eigen::Index(steps) * batch, actions_);
    cache->steps = steps;
    cache->batch = batch;
  }
  std::vector<RMatrix> probs(steps);
  for (int t = 0; t < steps; ++t) {
    RMatrix in = xs[t];
    for (int l = 0; l < kLayers; ++l) {
      RMatrix z = in * LstmViews::wx(*this, l).transpose() + h[l] * LstmViews::wh(*this, l).transpose();
      z.rowwise() += LstmViews::b(*this, l).transpose();
      RMatrix gi = sigmoid(z.block(0, 0, batch, H));
      RMatrix gf = sigmoid(z.block(0, H, batch, H));
      RMatrix gg = z.block(0, 2 * H, batch, H).array().tanh().matrix();
      RMatrix go = sigmoid(z.block(0, 3 * H, batch, H));
      RMatrix c_new = gf.cwiseProduct(c[l]) + gi.cwiseProduct(gg);
      RMatrix tc = c_new.array().tanh().matrix();
      RMatrix h_new = go.cwiseProduct(tc);
      RMatrix mask = masks ? (*masks)[t][l] : RMatrix::Constant(batch, H, keep);
      RMatrix dropped = h_new.cwiseProduct(mask);
      if (cache) {
        cache->in[t][l] = in;
        cache->gi[t][l] = gi;
        cache->gf[t][l] = gf;
        cache->gg[t][l] = gg;
        cache->go[t][l] = go;
        cache->c[t][l] = c_new;
        cache->tanh_c[t][l] = tc;
        cache->h[t][l] = h_new;
        cache->mask[t][l] = mask;
        cache->drop[t][l] = dropped;
      }
      c[l] = c_new;
      h[l] = h_new;
      in = dropped;
    }
    RMatrix logits = in * LstmViews::wo(*this).transpose();
    logits.rowwise() += LstmViews::bo(*this).transpose();
    softmax_rows_in_place(logits);
    probs[t] = logits;
    if (cache) cache->probs_flat.block(Eigen::Index(t) * batch, 0, batch, actions_) = logits;
  }
  return probs;
}

double Lstm::backward_cross_entropy(const SeqCache& cache, const RMatrix& teacher, RVector& grad) const {
  const int steps = cache.steps;
  const int batch = cache.batch;
  const int H = hidden_;
  if (teacher.rows() != Eigen::Index(steps) * batch)
    throw std::invalid_argument("Lstm::backward_cross_entropy: teacher row count mismatch");
  if (grad.size() != theta_.size())
    throw std::invalid_argument("Lstm::backward_cross_entropy: gradient size mismatch");
  double loss = 0.0;
  for (Eigen::Index r = 0; r < teacher.rows(); ++r)
    for (Eigen::Index a = 0; a < teacher.cols(); ++a)
      if (teacher(r, a) > 0.0) loss -= teacher(r, a) * std::log(cache.probs_flat(r, a) + 1e-12);

  std::array<RMatrix, kLayers> dh_next, dc_next;
  for (int l = 0; l < kLayers; ++l) {
    dh_next[l] = RMatrix::Zero(batch, H);
    dc_next[l] = RMatrix::Zero(batch, H);
  }
  auto gwo = LstmViews::gwo(*this, grad);
  auto gbo = LstmViews::gbo(*this, grad);
  for (int t = steps - 1; t >= 0; --t) {
    RMatrix dlogits = cache.probs_flat.block(Eigen::Index(t) * batch, 0, batch, actions_) -
                      teacher.block(Eigen::Index(t) * batch, 0, batch, actions_);
    gwo.noalias() += dlogits.transpose() * cache.drop[t][kLayers - 1];
    gbo.noalias() += dlogits.colwise().sum().transpose();
    RMatrix ddrop = dlogits * LstmViews::wo(*this);  // into drop of the top layer
    for (int l = kLayers - 1; l >= 0; --l) {
      const RMatrix& gi = cache.gi[t][l];
      const RMatrix& gf = cache.gf[t][l];
      const RMatrix& gg = cache.gg[t][l];
      const RMatrix& go = cache.go[t][l];
      const RMatrix& tc = cache.tanh_c[t][l];
      const RMatrix c_prev = t > 0 ? cache.c[t - 1][l] : RMatrix::Zero(batch, H);
      const RMatrix h_prev = t > 0 ? cache.h[t - 1][l] : RMatrix::Zero(batch, H);

      RMatrix dh = ddrop.cwiseProduct(cache.mask[t][l]) + dh_next[l];
      RMatrix dgo = dh.cwiseProduct(tc);
      RMatrix dc = dc_next[l] + dh.cwiseProduct(go).cwiseProduct((1.0 - tc.array().square()).matrix());
      RMatrix dgi = dc.cwiseProduct(gg);
      RMatrix dgf = dc.cwiseProduct(c_prev);
      RMatrix dgg = dc.cwiseProduct(gi);
      dc_next[l] = dc.cwiseProduct(gf);

      RMatrix dz(batch, 4 * H);
      dz.block(0, 0, batch, H) = dgi.cwiseProduct(gi).cwiseProduct((1.0 - gi.array()).matrix());
      dz.block(0, H, batch, H) = dgf.cwiseProduct(gf).cwiseProduct((1.0 - gf.array()).matrix());
      dz.block(0, 2 * H, batch, H) = dgg.cwiseProduct((1.0 - gg.array().square()).matrix());
      dz.block(0, 3 * H, batch, H) = dgo.cwiseProduct(go).cwiseProduct((1.0 - go.array()).matrix());

      LstmViews::gwx(*this, grad, l).noalias() += dz.transpose() * cache.in[t][l];
      LstmViews::gwh(*this, grad, l).noalias() += dz.transpose() * h_prev;
      LstmViews::gb(*this, grad, l).noalias() += dz.colwise().sum().transpose();
      dh_next[l] = dz * LstmViews::wh(*this, l);
      if (l > 0) ddrop = dz * LstmViews::wx(*this, l);  // into drop of the layer below
    }
  }
  return loss;
}

void adam_step(RVector& theta, const RVector& grad, AdamState& state) {
  if (!grad.allFinite()) throw std::runtime_error("adam_step: non-finite gradient entries");
  if (state.m.size() == 0) {
    state.m = RVector::Zero(theta.size());
    state.v = RVector::Zero(theta.size());
  }
  state.m = state.beta1 * state.m + (1.0 - state.beta1) * grad;
  state.v = state.beta2 * state.v + (1.0 - state.beta2) * grad.cwiseProduct(grad);
  state.step += 1;
  double bn = 1.0;
  if (state.bias_correction) {
    bn = std::sqrt(1.0 - std::pow(state.beta2, double(state.step))) /
         (1.0 - std::pow(state.beta1, double(state.step)));
  }
  theta += state.eta * bn * (state.m.array() / (state.v.array().sqrt() + 1e-12)).matrix();
}

CrossEntropyResult cross_entropy(const RVector& teacher_p, const RVector& student_q) {
  if (teacher_p.size() != student_q.size())
    throw std::invalid_argument("cross_entropy: distribution size mismatch");
  CrossEntropyResult r;
  for (Eigen::Index a = 0; a < teacher_p.size(); ++a) {
    if (teacher_p(a) <= 0.0) continue;
    if (student_q(a) < 1e-12) r.clamped = true;
    r.loss -= teacher_p(a) * std::log(student_q(a) + 1e-12);
  }
  r.dlogits = student_q - teacher_p;
  return r;
}

}  // namespace qfw::net
