// SPDX-License-Identifier: Apache-2.0

#include "qfw/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include "json.hpp"
#include "qfw/threadpool.hpp"

namespace qfw {

using nlohmann::json;

namespace {
constexpr int kChunks = 16;

json train_to_json(const TrainConfig& c) {
  json j;
  j["batch"] = c.batch;
  j["epochs"] = c.epochs;
  j["lambda_pol"] = c.lambda_pol;
  j["lambda_entr"] = c.lambda_entr;
  j["entropy_off_epoch"] = c.entropy_off_epoch;
  j["adam"] = {{"eta", c.eta}, {"beta1", c.beta1}, {"beta2", c.beta2}, {"bias_correction", c.bias_correction}};
  j["gamma"] = c.reward.gamma;
  j["kappa"] = c.reward.kappa;
  j["punish"] = c.reward.punish;
  j["beta_dec"] = c.reward.beta_dec;
  j["beta_corr"] = c.reward.beta_corr;
  j["rq_floor"] = c.reward.rq_floor;
  j["cg"] = {{"max_iter", c.cg.max_iter}, {"damping", c.cg.damping}, {"tol", c.cg.tol}};
  j["fisher_subsample"] = c.fisher_subsample;
  j["hidden"] = c.hidden;
  j["checkpoint_every"] = c.checkpoint_every;
  j["seed"] = c.seed;
  j["target_rq"] = c.target_rq;
  j["target_destructive_rate"] = c.target_destructive_rate;
  j["target_window"] = c.target_window;
  return j;
}
}  // namespace

std::string TrainConfig::canonical_json() const { return train_to_json(*this).dump(); }

std::uint64_t TrainConfig::content_hash() const {
  const std::string s = canonical_json();
  return fnv1a64(s.data(), s.size());
}

TrainConfig train_config_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("train config: malformed JSON: ") + e.what());
  }
  TrainConfig c;
  try {
    c.batch = j.value("batch", c.batch);
    c.epochs = j.value("epochs", c.epochs);
    c.lambda_pol = j.value("lambda_pol", c.lambda_pol);
    c.lambda_entr = j.value("lambda_entr", c.lambda_entr);
    c.entropy_off_epoch = j.value("entropy_off_epoch", c.entropy_off_epoch);
    if (j.contains("adam")) {
      const auto& a = j["adam"];
      c.eta = a.value("eta", c.eta);
      c.beta1 = a.value("beta1", c.beta1);
      c.beta2 = a.value("beta2", c.beta2);
      c.bias_correction = a.value("bias_correction", c.bias_correction);
    }
    c.reward.gamma = j.value("gamma", c.reward.gamma);
    c.reward.kappa = j.value("kappa", c.reward.kappa);
    c.reward.punish = j.value("punish", c.reward.punish);
    c.reward.beta_dec = j.value("beta_dec", c.reward.beta_dec);
    c.reward.beta_corr = j.value("beta_corr", c.reward.beta_corr);
    c.reward.rq_floor = j.value("rq_floor", c.reward.rq_floor);
    if (j.contains("cg")) {
      const auto& g = j["cg"];
      c.cg.max_iter = g.value("max_iter", c.cg.max_iter);
      c.cg.damping = g.value("damping", c.cg.damping);
      c.cg.tol = g.value("tol", c.cg.tol);
    }
    c.fisher_subsample = j.value("fisher_subsample", c.fisher_subsample);
    c.hidden = j.value("hidden", c.hidden);
    c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
    c.seed = j.value("seed", c.seed);
    c.target_rq = j.value("target_rq", c.target_rq);
    c.target_destructive_rate = j.value("target_destructive_rate", c.target_destructive_rate);
    c.target_window = j.value("target_window", c.target_window);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("train config: mistyped field: ") + e.what());
  }
  if (c.batch < 1) throw std::invalid_argument("train config: batch must be at least 1");
  if (c.lambda_pol <= 0.0) throw std::invalid_argument("train config: lambda_pol must be positive");
  if (c.fisher_subsample <= 0.0 || c.fisher_subsample > 1.0)
    throw std::invalid_argument("train config: fisher_subsample must lie in (0, 1]");
  return c;
}

TrainConfig load_train_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("train config: cannot open file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return train_config_from_json_text(ss.str());
}

std::uint64_t trajectory_seed(std::uint64_t base_seed, int index) {
  return splitmix64(base_seed ^ splitmix64(std::uint64_t(index) + 0x51ed2701));
}

namespace {

// Runs trajectories [lo, hi) in lockstep so policy evaluations batch into
// one GEMM per step.
void rollout_chunk(const Environment& env, const net::Mlp& policy, std::uint64_t base_seed, int lo,
                   int hi, const RewardConfig& reward, std::vector<Trajectory>& out) {
  const int count = hi - lo;
  const int horizon = env.spec().horizon;
  const int obs_dim = env.observation_size();
  const int n_actions = env.actions().size();
  const bool recovery = env.spec().decode_window > 0;
  const int t_signal = env.spec().t_signal();
  const int target = env.spec().data_qubit;

  std::vector<EpisodeState> states;
  states.reserve(count);
  for (int i = 0; i < count; ++i) states.push_back(env.reset(trajectory_seed(base_seed, lo + i)));
  for (int i = 0; i < count; ++i) {
    Trajectory& tr = out[lo + i];
    tr.obs.resize(horizon, obs_dim);
    tr.actions.resize(horizon);
    tr.outcomes.resize(horizon);
    tr.probs.resize(horizon);
    tr.rq.resize(horizon);
    tr.rq_expected.resize(horizon);
    tr.r1.resize(horizon);
    tr.r2.resize(horizon);
    tr.r_recov = RVector::Zero(horizon);
  }
  RMatrix step_obs(count, obs_dim);
  std::vector<LogicalFrame> recovery_frames(count);
  for (int t = 0; t < horizon; ++t) {
    for (int i = 0; i < count; ++i) {
      step_obs.row(i) = env.observe(states[i]);
      out[lo + i].obs.row(t) = step_obs.row(i);
    }
    RMatrix probs = policy.forward(step_obs);
    for (int i = 0; i < count; ++i) {
      Trajectory& tr = out[lo + i];
      RVector prow = probs.row(i);
      tr.entropy_sum += net::entropy(prow);
      const int a = states[i].rng.categorical(prow);
      const double rq_t = states[i].rq;
      const double rq_bar_t = states[i].rq_bar;
      if (recovery && t >= t_signal) recovery_frames[i] = states[i].as_dense();
      const StepOutcome so = env.apply(states[i], a);
      RewardPair rp = protection_reward(rq_t, rq_bar_t, so.rq_expected, reward);
      tr.actions[t] = a;
      tr.outcomes[t] = so.outcome;
      tr.probs(t) = so.probability;
      tr.rq(t) = so.rq;
      tr.rq_expected(t) = so.rq_expected;
      tr.r1(t) = rp.r1;
      tr.r2(t) = rp.r2;
      if (so.destructive) tr.destructive_count += 1;
      if (recovery && t >= t_signal) {
        const LogicalFrame after = states[i].as_dense();
        tr.r_recov(t) = recovery_reward(recovery_frames[i], after, t, reward, target, t_signal,
                                        horizon, rq_t, so.rq);
      }
      (void)n_actions;
    }
  }
  for (int i = 0; i < count; ++i) {
    Trajectory& tr = out[lo + i];
    tr.returns = protection_return(tr.r1 + tr.r_recov, tr.r2, reward.gamma);
    tr.rq_final = states[i].rq;
    tr.overlap_final = overlap_worst_case(states[i].as_dense(), target);
  }
}

std::vector<std::pair<int, int>> chunk_ranges(int total, int chunks) {
  std::vector<std::pair<int, int>> out;
  const int n = std::min(chunks, total);
  for (int c = 0; c < n; ++c) {
    const int lo = int(std::int64_t(total) * c / n);
    const int hi = int(std::int64_t(total) * (c + 1) / n);
    if (hi > lo) out.emplace_back(lo, hi);
  }
  return out;
}

}  // namespace

std::vector<Trajectory> rollout_batch(const Environment& env, const net::Mlp& policy, int batch,
                                      std::uint64_t base_seed, const RewardConfig& reward, int threads) {
  if (policy.input_size() != env.observation_size())
    throw std::invalid_argument("rollout_batch: policy input size does not match observation size");
  if (policy.output_size() != env.actions().size())
    throw std::invalid_argument("rollout_batch: policy output size does not match action count");
  std::vector<Trajectory> out(batch);
  const auto ranges = chunk_ranges(batch, kChunks);
  parallel_for(int(ranges.size()),
               [&](int c) { rollout_chunk(env, policy, base_seed, ranges[c].first, ranges[c].second, reward, out); },
               threads);
  return out;
}

namespace {

// Deterministic chunked gradient accumulation: per-chunk partials are reduced
// in fixed chunk order regardless of the thread count.
RVector reduce_chunks(std::vector<RVector>& partials) {
  RVector acc = RVector::Zero(partials.empty() ? 0 : partials[0].size());
  for (auto& p : partials) acc += p;
  return acc;
}

}  // namespace

RVector policy_gradient(const net::Mlp& policy, const std::vector<Trajectory>& trajectories,
                        const RVector& baseline, double lambda_pol, int threads) {
  const int batch = int(trajectories.size());
  const int horizon = batch > 0 ? int(trajectories[0].actions.size()) : 0;
  if (baseline.size() != horizon) throw std::invalid_argument("policy_gradient: baseline length mismatch");
  const auto ranges = chunk_ranges(batch, kChunks);
  std::vector<RVector> partials(ranges.size());
  parallel_for(int(ranges.size()), [&](int c) {
    RVector grad = RVector::Zero(policy.param_count());
    for (int i = ranges[c].first; i < ranges[c].second; ++i) {
      const Trajectory& tr = trajectories[i];
      net::Mlp::Cache cache;
      RMatrix probs = policy.forward(tr.obs, &cache);
      RMatrix err = RMatrix::Zero(horizon, policy.output_size());
      for (int t = 0; t < horizon; ++t) {
        const double w = lambda_pol * (tr.returns(t) - baseline(t)) / double(batch);
        if (!std::isfinite(w)) throw std::runtime_error("policy_gradient: non-finite return weight");
        err.row(t) = -w * probs.row(t);
        err(t, tr.actions[t]) += w;
      }
      policy.backward(cache, err, grad);
    }
    partials[c] = std::move(grad);
  }, threads);
  return reduce_chunks(partials);
}

RVector entropy_gradient(const net::Mlp& policy, const std::vector<Trajectory>& trajectories,
                         double lambda_entr, int threads) {
  const int batch = int(trajectories.size());
  if (lambda_entr == 0.0 || batch == 0) return RVector::Zero(policy.param_count());
  const int horizon = int(trajectories[0].actions.size());
  const double scale = lambda_entr / (double(batch) * horizon);
  const auto ranges = chunk_ranges(batch, kChunks);
  std::vector<RVector> partials(ranges.size());
  parallel_for(int(ranges.size()), [&](int c) {
    RVector grad = RVector::Zero(policy.param_count());
    for (int i = ranges[c].first; i < ranges[c].second; ++i) {
      const Trajectory& tr = trajectories[i];
      net::Mlp::Cache cache;
      RMatrix probs = policy.forward(tr.obs, &cache);
      RMatrix err(horizon, policy.output_size());
      for (int t = 0; t < horizon; ++t) {
        const RVector p = probs.row(t);
        const double h = net::entropy(p);
        // dH/dz_k = -p_k (ln p_k + H)
        for (int k = 0; k < p.size(); ++k) {
          const double lp = p(k) > 1e-300 ? std::log(p(k)) : -700.0;
          err(t, k) = -scale * p(k) * (lp + h);
        }
      }
      policy.backward(cache, err, grad);
    }
    partials[c] = std::move(grad);
  }, threads);
  return reduce_chunks(partials);
}

FisherOperator::FisherOperator(const net::Mlp& policy, const std::vector<Trajectory>& trajectories,
                               double subsample, int threads)
    : policy_(&policy), threads_(threads) {
  const int batch = int(trajectories.size());
  const int horizon = batch > 0 ? int(trajectories[0].actions.size()) : 0;
  const long total = long(batch) * horizon;
  const long stride = std::max(1L, std::lround(1.0 / subsample));
  std::vector<long> picked;
  for (long s = 0; s < total; s += stride) picked.push_back(s);
  n_samples_ = Eigen::Index(picked.size());

  const auto ranges = chunk_ranges(int(picked.size()), 8);
  chunks_.resize(ranges.size());
  parallel_for(int(ranges.size()), [&](int c) {
    const int lo = ranges[c].first, hi = ranges[c].second;
    RMatrix x(hi - lo, policy.input_size());
    std::vector<int> actions(hi - lo);
    for (int r = lo; r < hi; ++r) {
      const long sample = picked[r];
      const Trajectory& tr = trajectories[sample / horizon];
      const int t = int(sample % horizon);
      x.row(r - lo) = tr.obs.row(t);
      actions[r - lo] = tr.actions[t];
    }
    chunks_[c] = net::build_score_cache(policy, x, actions);
  }, threads_);
}

RVector FisherOperator::apply(const RVector& v) const {
  std::vector<RVector> partials(chunks_.size());
  parallel_for(int(chunks_.size()), [&](int c) {
    RVector out = RVector::Zero(policy_->param_count());
    const RVector alpha = net::score_dot(*policy_, chunks_[c], v);
    net::add_weighted_scores(*policy_, chunks_[c], alpha, out);
    partials[c] = std::move(out);
  }, threads_);
  RVector acc = reduce_chunks(partials);
  return acc / double(n_samples_);
}

CgResult conjugate_gradient(const std::function<RVector(const RVector&)>& matvec, const RVector& rhs,
                            const CgConfig& cfg) {
  CgResult res;
  res.x = RVector::Zero(rhs.size());
  RVector r = rhs;
  RVector p = r;
  double rr = r.squaredNorm();
  const double target = cfg.tol * std::sqrt(rhs.squaredNorm());
  if (std::sqrt(rr) <= target || rhs.isZero(0.0)) {
    res.converged = true;
    res.residual = std::sqrt(rr);
    return res;
  }
  for (int it = 0; it < cfg.max_iter; ++it) {
    const RVector ap = matvec(p);
    const double pap = p.dot(ap);
    if (pap <= 0.0) break;  // damped operator should be positive definite
    const double alpha = rr / pap;
    res.x += alpha * p;
    r -= alpha * ap;
    const double rr_new = r.squaredNorm();
    res.iterations = it + 1;
    if (std::sqrt(rr_new) <= target) {
      res.converged = true;
      rr = rr_new;
      break;
    }
    p = r + (rr_new / rr) * p;
    rr = rr_new;
  }
  res.residual = std::sqrt(rr);
  return res;
}

CgResult natural_gradient(const net::Mlp& policy, const RVector& vanilla,
                          const std::vector<Trajectory>& trajectories, const CgConfig& cfg,
                          double fisher_subsample, int threads) {
  if (vanilla.isZero(0.0)) {
    CgResult r;
    r.x = RVector::Zero(vanilla.size());
    r.converged = true;
    return r;
  }
  FisherOperator fisher(policy, trajectories, fisher_subsample, threads);
  auto matvec = [&](const RVector& v) { return (fisher.apply(v) + cfg.damping * v).eval(); };
  CgResult res = conjugate_gradient(matvec, vanilla, cfg);
  const double rel = res.residual / std::max(1e-300, std::sqrt(vanilla.squaredNorm()));
  if (!res.converged && rel > 0.5)
    std::cerr << "[qfw] warning: natural-gradient CG stopped at relative residual " << rel << "\n";
  return res;
}

TrainStatus train_state_aware(const Environment& env, const TrainConfig& cfg, net::Mlp& policy,
                              net::AdamState& adam, BaselineStore& baseline,
                              std::vector<EpochStats>& curve, const TrainHooks& hooks) {
  const int horizon = env.spec().horizon;
  RewardConfig reward = cfg.reward;
  reward.t_single = env.t_single();
  reward.dt = env.spec().dt;
  adam.eta = cfg.eta;
  adam.beta1 = cfg.beta1;
  adam.beta2 = cfg.beta2;
  adam.bias_correction = cfg.bias_correction;
  const auto t_start = std::chrono::steady_clock::now();
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const std::uint64_t base = splitmix64(cfg.seed) ^ splitmix64(std::uint64_t(epoch) * 0x1000003);
    const auto trajs = rollout_batch(env, policy, cfg.batch, base, reward);

    const RVector b = baseline.b.size() == horizon ? baseline.b : RVector::Zero(horizon);
    RVector g = policy_gradient(policy, trajs, b, cfg.lambda_pol);
    CgResult nat = natural_gradient(policy, g, trajs, cfg.cg, cfg.fisher_subsample);
    RVector update = nat.x;
    if (cfg.lambda_entr > 0.0 && epoch < cfg.entropy_off_epoch)
      update += entropy_gradient(policy, trajs, cfg.lambda_entr);

    if (!update.allFinite() || !policy.params().allFinite()) {
      std::cerr << "[qfw] NaN watchdog: epoch " << epoch << " |g|=" << g.norm()
                << " |update|=" << update.norm() << " |theta|=" << policy.params().norm() << "\n";
      return TrainStatus::NanAbort;
    }
    net::adam_step(policy.params(), update, adam);

    RVector mean_returns = RVector::Zero(horizon);
    EpochStats st;
    st.epoch = epoch;
    st.episodes = long(epoch + 1) * cfg.batch;
    for (const auto& tr : trajs) {
      mean_returns += tr.returns;
      st.mean_rq_final += tr.rq_final;
      st.mean_return += tr.returns.mean();
      st.destructive_rate += tr.destructive_count;
      st.entropy += tr.entropy_sum;
    }
    mean_returns /= double(cfg.batch);
    st.mean_rq_final /= double(cfg.batch);
    st.mean_return /= double(cfg.batch);
    st.destructive_rate /= double(cfg.batch) * horizon;
    st.entropy /= double(cfg.batch) * horizon;
    st.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    st.cg_converged = nat.converged;
    baseline_update(baseline, mean_returns, reward.kappa);
    curve.push_back(st);

    if (hooks.on_epoch) hooks.on_epoch(st);
    if (hooks.on_checkpoint && cfg.checkpoint_every > 0 && (epoch + 1) % cfg.checkpoint_every == 0)
      hooks.on_checkpoint(epoch, policy, adam);
    if (hooks.stop_early && hooks.stop_early(curve)) return TrainStatus::EarlyStopped;
    if (cfg.target_rq > 0.0 && int(curve.size()) >= cfg.target_window) {
      double rq_avg = 0.0, destr_avg = 0.0;
      for (int k = 0; k < cfg.target_window; ++k) {
        const auto& row = curve[curve.size() - 1 - k];
        rq_avg += row.mean_rq_final;
        destr_avg += row.destructive_rate;
      }
      rq_avg /= cfg.target_window;
      destr_avg /= cfg.target_window;
      if (rq_avg >= cfg.target_rq && destr_avg <= cfg.target_destructive_rate)
        return TrainStatus::EarlyStopped;
    }
  }
  return TrainStatus::Completed;
}

}  // namespace qfw
