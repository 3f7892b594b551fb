// SPDX-License-Identifier: Apache-2.0

#include "qfw/experiment.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "json.hpp"
#include "qfw/threadpool.hpp"

namespace qfw {

using nlohmann::json;

void write_manifest(const std::string& path, const Manifest& m) {
  json j;
  j["command"] = m.command;
  j["scenario"] = {{"path", m.scenario_path}, {"hash", m.scenario_hash}};
  if (!m.train_path.empty()) j["train_config"] = {{"path", m.train_path}, {"hash", m.train_hash}};
  j["seeds"] = m.seeds;
  j["tool_version"] = kToolVersion;
  j["start_time"] = m.start_time;
  j["end_time"] = m.end_time;
  j["outputs"] = m.outputs;
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("manifest: cannot open " + path);
  os << j.dump(2) << "\n";
}

std::string iso_utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_curve_csv(const std::string& path, const std::vector<EpochStats>& curve) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("curve: cannot open " + path);
  os << "epoch,episodes,mean_rq_final,mean_return,destructive_rate,entropy,wall_time\n";
  for (const auto& r : curve) {
    os << r.epoch << ',' << r.episodes << ',' << format_g17(r.mean_rq_final) << ','
       << format_g17(r.mean_return) << ',' << format_g17(r.destructive_rate) << ','
       << format_g17(r.entropy) << ',' << format_g17(r.wall_time) << '\n';
  }
}

std::string evaluation_report_json(const EvaluationReport& r) {
  json j;
  j["episodes"] = r.episodes;
  j["mean_rq_final"] = r.mean_rq_final;
  j["mean_rq_half"] = r.mean_rq_half;
  if (std::isfinite(r.t_eff))
    j["t_eff"] = r.t_eff;
  else
    j["t_eff"] = nullptr;
  j["t_eff_over_t_dec"] = r.t_eff_over_t_dec;
  j["overlap"] = r.mean_overlap;
  j["destructive_rate"] = r.destructive_rate;
  j["exponential_ok"] = r.exponential_ok;
  j["action_histogram"] = r.action_histogram;
  return j.dump(2);
}

namespace {

struct EvalAccum {
  double rq_sum = 0.0, rq_half_sum = 0.0, overlap_sum = 0.0;
  long destructive = 0;
  std::map<std::string, long> histogram;
};

// Streaming evaluation shared by the policy kinds: `choose` returns the
// action for (episode slot, step, observation or event context).
EvaluationReport run_evaluation(const Environment& env, long episodes, std::uint64_t seed,
                                const std::string& trajectory_path, int trajectory_episodes,
                                const std::function<void(EpisodeState&, int /*episode*/, EvalAccum&,
                                                         std::ofstream* /*traj*/)>& run_episode) {
  if (episodes < 1) throw std::invalid_argument("evaluate: need at least one episode");
  EvalAccum acc;
  std::ofstream traj;
  if (!trajectory_path.empty()) {
    traj.open(trajectory_path, std::ios::trunc);
    if (!traj) throw std::runtime_error("evaluate: cannot open " + trajectory_path);
  }
  for (long e = 0; e < episodes; ++e) {
    EpisodeState state = env.reset(trajectory_seed(seed, int(e)));
    std::ofstream* tp = (!trajectory_path.empty() && e < trajectory_episodes) ? &traj : nullptr;
    run_episode(state, int(e), acc, tp);
  }
  EvaluationReport rep;
  rep.episodes = episodes;
  rep.mean_rq_final = acc.rq_sum / double(episodes);
  rep.mean_rq_half = acc.rq_half_sum / double(episodes);
  rep.mean_overlap = acc.overlap_sum / double(episodes);
  rep.destructive_rate = double(acc.destructive) / (double(episodes) * env.spec().horizon);
  rep.action_histogram = acc.histogram;
  const double horizon_time = env.spec().horizon * env.spec().dt;
  try {
    rep.t_eff = effective_decay_time(rep.mean_rq_final, horizon_time);
  } catch (const std::domain_error&) {
    rep.t_eff = std::numeric_limits<double>::quiet_NaN();
  }
  double t_eff_half = std::numeric_limits<double>::quiet_NaN();
  try {
    t_eff_half = effective_decay_time(rep.mean_rq_half, horizon_time / 2.0);
  } catch (const std::domain_error&) {
  }
  rep.t_eff_over_t_dec = rep.t_eff / env.spec().t_dec;
  rep.exponential_ok = std::isfinite(rep.t_eff) && std::isfinite(t_eff_half) &&
                       std::abs(t_eff_half / rep.t_eff - 1.0) < 0.1;
  return rep;
}

void write_traj_row(std::ofstream& os, const Environment& env, const EpisodeState& state, int t,
                    const std::string& action_label, const StepOutcome& so, double r1, double r2,
                    double r_recov) {
  json j;
  j["t"] = t;
  j["action"] = action_label;
  j["outcome"] = so.outcome;
  j["p"] = so.probability;
  j["rq"] = so.rq;
  j["rq_expected"] = so.rq_expected;
  j["r1"] = r1;
  j["r2"] = r2;
  j["r_recov"] = r_recov;
  const LogicalFrame dense = state.as_dense();
  const MetricReport mr = metric_report(dense, env.rq_method(), env.spec().data_qubit);
  j["overlap"] = mr.overlap;
  j["qubit_flags"] = mr.qubit_flags;
  j["minimizer"] = {mr.minimizer(0), mr.minimizer(1), mr.minimizer(2)};
  os << j.dump() << "\n";
}

}  // namespace

EvaluationReport evaluate_policy(const Environment& env, const net::Mlp& policy, long episodes,
                                 std::uint64_t seed, const std::string& trajectory_path,
                                 int trajectory_episodes) {
  if (policy.input_size() != env.observation_size())
    throw std::invalid_argument("evaluate: checkpoint input size does not match the scenario");
  if (policy.output_size() != env.actions().size())
    throw std::invalid_argument("evaluate: checkpoint action count does not match the scenario");
  if (episodes < 1) throw std::invalid_argument("evaluate: need at least one episode");
  const int horizon = env.spec().horizon;
  const int half = horizon / 2;
  RewardConfig rcfg;
  rcfg.t_single = env.t_single();
  rcfg.dt = env.spec().dt;

  struct Slot {
    double rq_final = 0.0, rq_half = 0.0, overlap = 0.0;
    long destructive = 0;
    std::vector<long> hist;
  };
  std::vector<Slot> slots(episodes);
  const int n_actions = env.actions().size();
  const long traj_n = std::min<long>(trajectory_episodes, episodes);

  std::ofstream traj;
  if (!trajectory_path.empty()) {
    traj.open(trajectory_path, std::ios::trunc);
    if (!traj) throw std::runtime_error("evaluate: cannot open " + trajectory_path);
  }
  // Logged episodes run sequentially so rows stay episode-ordered.
  for (long e = 0; e < traj_n; ++e) {
    EpisodeState state = env.reset(trajectory_seed(seed, int(e)));
    Slot& slot = slots[e];
    slot.hist.assign(n_actions, 0);
    for (int t = 0; t < horizon; ++t) {
      const RVector obs = env.observe(state);
      const RVector probs = policy.forward1(obs);
      const int a = state.rng.categorical(probs);
      const double rq_t = state.rq;
      const double rq_bar_t = state.rq_bar;
      const StepOutcome so = env.apply(state, a);
      slot.hist[a] += 1;
      if (so.destructive) slot.destructive += 1;
      if (t + 1 == half) slot.rq_half = state.rq;
      if (traj.is_open()) {
        const RewardPair rp = protection_reward(rq_t, rq_bar_t, so.rq_expected, rcfg);
        write_traj_row(traj, env, state, t, env.actions()[a].label, so, rp.r1, rp.r2, 0.0);
      }
    }
    slot.rq_final = state.rq;
    slot.overlap = overlap_worst_case(state.as_dense(), env.spec().data_qubit);
  }
  // Remaining episodes in lockstep chunks; policy evaluations batch per step.
  const long rest = episodes - traj_n;
  if (rest > 0) {
    const long chunk_size = 128;
    const long n_chunks = (rest + chunk_size - 1) / chunk_size;
    parallel_for(int(n_chunks), [&](int c) {
      const long lo = traj_n + c * chunk_size;
      const long hi = std::min(episodes, lo + chunk_size);
      const int count = int(hi - lo);
      std::vector<EpisodeState> states;
      states.reserve(count);
      for (int i = 0; i < count; ++i) states.push_back(env.reset(trajectory_seed(seed, int(lo + i))));
      for (int i = 0; i < count; ++i) slots[lo + i].hist.assign(n_actions, 0);
      RMatrix obs(count, env.observation_size());
      for (int t = 0; t < horizon; ++t) {
        for (int i = 0; i < count; ++i) obs.row(i) = env.observe(states[i]);
        const RMatrix probs = policy.forward(obs);
        for (int i = 0; i < count; ++i) {
          const RVector prow = probs.row(i);
          const int a = states[i].rng.categorical(prow);
          const StepOutcome so = env.apply(states[i], a);
          slots[lo + i].hist[a] += 1;
          if (so.destructive) slots[lo + i].destructive += 1;
          if (t + 1 == half) slots[lo + i].rq_half = states[i].rq;
        }
      }
      for (int i = 0; i < count; ++i) {
        slots[lo + i].rq_final = states[i].rq;
        slots[lo + i].overlap = overlap_worst_case(states[i].as_dense(), env.spec().data_qubit);
      }
    });
  }

  EvaluationReport rep;
  rep.episodes = episodes;
  long destructive = 0;
  std::vector<long> hist(n_actions, 0);
  for (const auto& s : slots) {
    rep.mean_rq_final += s.rq_final;
    rep.mean_rq_half += s.rq_half;
    rep.mean_overlap += s.overlap;
    destructive += s.destructive;
    for (int a = 0; a < n_actions; ++a) hist[a] += s.hist[a];
  }
  rep.mean_rq_final /= double(episodes);
  rep.mean_rq_half /= double(episodes);
  rep.mean_overlap /= double(episodes);
  rep.destructive_rate = double(destructive) / (double(episodes) * horizon);
  for (int a = 0; a < n_actions; ++a) rep.action_histogram[env.actions()[a].label] = hist[a];
  const double horizon_time = horizon * env.spec().dt;
  try {
    rep.t_eff = effective_decay_time(rep.mean_rq_final, horizon_time);
  } catch (const std::domain_error&) {
    rep.t_eff = std::numeric_limits<double>::quiet_NaN();
  }
  double t_eff_half = std::numeric_limits<double>::quiet_NaN();
  try {
    t_eff_half = effective_decay_time(rep.mean_rq_half, horizon_time / 2.0);
  } catch (const std::domain_error&) {
  }
  rep.t_eff_over_t_dec = rep.t_eff / env.spec().t_dec;
  rep.exponential_ok = std::isfinite(rep.t_eff) && std::isfinite(t_eff_half) &&
                       std::abs(t_eff_half / rep.t_eff - 1.0) < 0.1;
  return rep;
}

EvaluationReport evaluate_policy(const Environment& env, const net::Lstm& policy, long episodes,
                                 std::uint64_t seed, double keep, const std::string& trajectory_path,
                                 int trajectory_episodes) {
  if (policy.input_size() != event_input_size(env.actions()))
    throw std::invalid_argument("evaluate: recurrent input size does not match the scenario");
  const int horizon = env.spec().horizon;
  const int half = horizon / 2;
  RewardConfig rcfg;
  rcfg.t_single = env.t_single();
  rcfg.dt = env.spec().dt;
  return run_evaluation(env, episodes, seed, trajectory_path, trajectory_episodes,
                        [&](EpisodeState& state, int, EvalAccum& acc, std::ofstream* traj) {
                          net::Lstm::StepState lstm = policy.initial_state();
                          int prev = -1;
                          std::string outcome;
                          for (int t = 0; t < horizon; ++t) {
                            const RVector x = encode_event(env.actions(), prev, outcome);
                            const RVector probs = policy.step(lstm, x, keep);
                            const int a = state.rng.categorical(probs);
                            const double rq_t = state.rq;
                            const double rq_bar_t = state.rq_bar;
                            const StepOutcome so = env.apply(state, a);
                            prev = a;
                            outcome = so.outcome;
                            acc.histogram[env.actions()[a].label] += 1;
                            if (so.destructive) acc.destructive += 1;
                            if (t + 1 == half) acc.rq_half_sum += state.rq;
                            if (traj) {
                              const RewardPair rp =
                                  protection_reward(rq_t, rq_bar_t, so.rq_expected, rcfg);
                              write_traj_row(*traj, env, state, t, env.actions()[a].label, so, rp.r1,
                                             rp.r2, 0.0);
                            }
                          }
                          acc.rq_sum += state.rq;
                          acc.overlap_sum += overlap_worst_case(state.as_dense(), env.spec().data_qubit);
                        });
}

EvaluationReport evaluate_scripted(const Environment& env, const ScriptedPolicy& policy, long episodes,
                                   std::uint64_t seed, const std::string& trajectory_path,
                                   int trajectory_episodes) {
  const int horizon = env.spec().horizon;
  const int half = horizon / 2;
  RewardConfig rcfg;
  rcfg.t_single = env.t_single();
  rcfg.dt = env.spec().dt;
  return run_evaluation(env, episodes, seed, trajectory_path, trajectory_episodes,
                        [&](EpisodeState& state, int, EvalAccum& acc, std::ofstream* traj) {
                          for (int t = 0; t < horizon; ++t) {
                            const int a = policy(t, state);
                            const double rq_t = state.rq;
                            const double rq_bar_t = state.rq_bar;
                            const StepOutcome so = env.apply(state, a);
                            acc.histogram[env.actions()[a].label] += 1;
                            if (so.destructive) acc.destructive += 1;
                            if (t + 1 == half) acc.rq_half_sum += state.rq;
                            if (traj) {
                              const RewardPair rp =
                                  protection_reward(rq_t, rq_bar_t, so.rq_expected, rcfg);
                              write_traj_row(*traj, env, state, t, env.actions()[a].label, so, rp.r1,
                                             rp.r2, 0.0);
                            }
                          }
                          acc.rq_sum += state.rq;
                          acc.overlap_sum += overlap_worst_case(state.as_dense(), env.spec().data_qubit);
                        });
}

namespace {

void write_activation_row(std::ofstream& os, int episode, int t, int action, const RVector& h) {
  json j;
  j["episode"] = episode;
  j["t"] = t;
  j["action"] = action;
  std::vector<double> hv(h.data(), h.data() + h.size());
  j["h"] = hv;
  os << j.dump() << "\n";
}

}  // namespace

void export_activations(const Environment& env, const net::Mlp& policy, int episodes,
                        std::uint64_t seed, const std::string& out_path) {
  std::ofstream os(out_path, std::ios::trunc);
  if (!os) throw std::runtime_error("export-activations: cannot open " + out_path);
  const int horizon = env.spec().horizon;
  for (int e = 0; e < episodes; ++e) {
    EpisodeState state = env.reset(trajectory_seed(seed, e));
    for (int t = 0; t < horizon; ++t) {
      const RVector obs = env.observe(state);
      const RVector h = policy.last_hidden(obs);
      const RVector probs = policy.forward1(obs);
      const int a = state.rng.categorical(probs);
      write_activation_row(os, e, t, a, h);
      env.apply(state, a);
    }
  }
}

void export_activations(const Environment& env, const net::Lstm& policy, int episodes,
                        std::uint64_t seed, double keep, const std::string& out_path) {
  std::ofstream os(out_path, std::ios::trunc);
  if (!os) throw std::runtime_error("export-activations: cannot open " + out_path);
  const int horizon = env.spec().horizon;
  for (int e = 0; e < episodes; ++e) {
    EpisodeState state = env.reset(trajectory_seed(seed, e));
    net::Lstm::StepState lstm = policy.initial_state();
    int prev = -1;
    std::string outcome;
    for (int t = 0; t < horizon; ++t) {
      const RVector x = encode_event(env.actions(), prev, outcome);
      RVector hidden;
      const RVector probs = policy.step_with_hidden(lstm, x, keep, &hidden);
      const int a = state.rng.categorical(probs);
      write_activation_row(os, e, t, a, hidden);
      const StepOutcome so = env.apply(state, a);
      prev = a;
      outcome = so.outcome;
    }
  }
}

}  // namespace qfw
