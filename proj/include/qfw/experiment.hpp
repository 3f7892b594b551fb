// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qfw/distill.hpp"
#include "qfw/trainer.hpp"

namespace qfw {

inline constexpr const char* kToolVersion = "qfw 1.0.0";

struct Manifest {
  std::string command;
  std::string scenario_path;
  std::uint64_t scenario_hash = 0;
  std::string train_path;
  std::uint64_t train_hash = 0;
  std::vector<std::uint64_t> seeds;
  std::string start_time;
  std::string end_time;
  std::vector<std::string> outputs;
};

// Written before heavy work starts (end_time empty) and rewritten on exit.
void write_manifest(const std::string& path, const Manifest& manifest);

std::string iso_utc_now();
std::string format_g17(double v);

void write_curve_csv(const std::string& path, const std::vector<EpochStats>& curve);

struct EvaluationReport {
  long episodes = 0;
  double mean_rq_final = 0.0;
  double mean_rq_half = 0.0;
  double t_eff = 0.0;           // NaN when undefined
  double t_eff_over_t_dec = 0.0;
  double mean_overlap = 0.0;
  double destructive_rate = 0.0;
  bool exponential_ok = true;   // half- and full-horizon extractions agree
  std::map<std::string, long> action_histogram;
};

std::string evaluation_report_json(const EvaluationReport& report);

// Scripted controller: action index from (step, state).
using ScriptedPolicy = std::function<int(int t, const EpisodeState& state)>;

EvaluationReport evaluate_policy(const Environment& env, const net::Mlp& policy, long episodes,
                                 std::uint64_t seed, const std::string& trajectory_path = "",
                                 int trajectory_episodes = 0);
EvaluationReport evaluate_policy(const Environment& env, const net::Lstm& policy, long episodes,
                                 std::uint64_t seed, double keep, const std::string& trajectory_path = "",
                                 int trajectory_episodes = 0);
EvaluationReport evaluate_scripted(const Environment& env, const ScriptedPolicy& policy, long episodes,
                                   std::uint64_t seed, const std::string& trajectory_path = "",
                                   int trajectory_episodes = 0);

// One row per visited step: last-hidden-layer activations, chosen action,
// step index and episode id.
void export_activations(const Environment& env, const net::Mlp& policy, int episodes,
                        std::uint64_t seed, const std::string& out_path);
void export_activations(const Environment& env, const net::Lstm& policy, int episodes,
                        std::uint64_t seed, double keep, const std::string& out_path);

}  // namespace qfw
