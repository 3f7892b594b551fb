// SPDX-License-Identifier: Apache-2.0

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "qfw/checkpoint.hpp"
#include "qfw/distill.hpp"
#include "qfw/experiment.hpp"
#include "qfw/oracles.hpp"
#include "qfw/trainer.hpp"

namespace fs = std::filesystem;
using namespace qfw;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitNan = 2;

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (!tok.empty()) out.push_back(std::stoull(tok));
  }
  if (out.empty()) throw std::invalid_argument("no seeds given");
  return out;
}

std::vector<double> parse_doubles(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (!tok.empty()) out.push_back(std::stod(tok));
  }
  return out;
}

ScenarioSpec load_scenario_checked(const std::string& path, const std::string& backend_override) {
  if (!fs::exists(path)) throw std::invalid_argument("scenario file not found: " + path);
  ScenarioSpec spec = load_scenario(path);
  if (backend_override == "dense") spec.backend = Backend::Dense;
  if (backend_override == "chz") spec.backend = Backend::Chz;
  spec.validate();
  return spec;
}

int cmd_train(const std::string& scenario_path, const std::string& train_path, const std::string& out_dir,
              const std::string& seeds_text, const std::string& backend_override) {
  const ScenarioSpec spec = load_scenario_checked(scenario_path, backend_override);
  if (!fs::exists(train_path)) throw std::invalid_argument("train config not found: " + train_path);
  TrainConfig cfg = load_train_config(train_path);
  const auto seeds = parse_seeds(seeds_text);
  fs::create_directories(out_dir);

  Manifest m;
  m.command = "train";
  m.scenario_path = scenario_path;
  m.scenario_hash = fnv1a64_file(scenario_path);
  m.train_path = train_path;
  m.train_hash = fnv1a64_file(train_path);
  m.seeds = seeds;
  m.start_time = iso_utc_now();
  const std::string manifest_path = out_dir + "/manifest.json";
  write_manifest(manifest_path, m);

  const Environment env(spec);
  bool nan_abort = false;
  for (std::uint64_t seed : seeds) {
    TrainConfig seed_cfg = cfg;
    seed_cfg.seed = seed;
    std::vector<int> arch = {env.observation_size()};
    for (int h : cfg.hidden) arch.push_back(h);
    arch.push_back(env.actions().size());
    net::Mlp policy(arch);
    Rng init_rng(splitmix64(seed ^ 0x11a571f5ull));
    policy.init_weights(init_rng);
    net::AdamState adam;
    BaselineStore baseline;
    std::vector<EpochStats> curve;
    const std::string curve_path = out_dir + "/curve_seed" + std::to_string(seed) + ".csv";
    const std::string ckpt_path = out_dir + "/checkpoint_seed" + std::to_string(seed) + ".ckpt";
    TrainHooks hooks;
    hooks.on_epoch = [&](const EpochStats& st) {
      if ((st.epoch + 1) % 25 == 0) write_curve_csv(curve_path, curve);
      std::cout << "seed " << seed << " epoch " << st.epoch << " rq_final " << st.mean_rq_final
                << " destructive " << st.destructive_rate << "\n";
    };
    hooks.on_checkpoint = [&](int epoch, const net::Mlp& p, const net::AdamState& a) {
      save_checkpoint(out_dir + "/checkpoint_seed" + std::to_string(seed) + "_epoch" +
                          std::to_string(epoch + 1) + ".ckpt",
                      p, a, m.scenario_hash, epoch + 1);
    };
    const TrainStatus status = train_state_aware(env, seed_cfg, policy, adam, baseline, curve, hooks);
    write_curve_csv(curve_path, curve);
    save_checkpoint(ckpt_path, policy, adam, m.scenario_hash, long(curve.size()));
    m.outputs.push_back(curve_path);
    m.outputs.push_back(ckpt_path);
    if (status == TrainStatus::NanAbort) {
      nan_abort = true;
      break;
    }
  }
  m.end_time = iso_utc_now();
  write_manifest(manifest_path, m);
  return nan_abort ? kExitNan : kExitOk;
}

int cmd_distill(const std::string& scenario_path, const std::string& teacher_path,
                const std::string& out_dir, std::uint64_t seed, int episodes,
                const std::string& backend_override) {
  const ScenarioSpec spec = load_scenario_checked(scenario_path, backend_override);
  const Environment env(spec);
  const std::uint64_t scenario_hash = fnv1a64_file(scenario_path);
  LoadedCheckpoint teacher_ckpt = load_checkpoint(teacher_path);
  if (teacher_ckpt.meta.kind != "mlp")
    throw std::invalid_argument("distill: teacher checkpoint must be a state-aware network");
  if (teacher_ckpt.meta.scenario_hash != env.spec().content_hash() &&
      teacher_ckpt.meta.scenario_hash != scenario_hash)
    throw std::invalid_argument("distill: teacher checkpoint was trained on a different scenario");
  if (teacher_ckpt.mlp.input_size() != env.observation_size())
    throw std::invalid_argument("distill: teacher input size does not match the scenario");
  fs::create_directories(out_dir);

  Manifest m;
  m.command = "distill";
  m.scenario_path = scenario_path;
  m.scenario_hash = scenario_hash;
  m.seeds = {seed};
  m.start_time = iso_utc_now();
  const std::string manifest_path = out_dir + "/manifest.json";
  write_manifest(manifest_path, m);

  const net::Mlp& teacher_net = teacher_ckpt.mlp;
  TeacherPolicy teacher = [&](const RVector& obs, int) { return teacher_net.forward1(obs); };
  const DistillDataset dataset = generate_distill_dataset(env, teacher, episodes, seed);
  DistillConfig dcfg;
  dcfg.seed = seed;
  DistillResult result = distill_recurrent(env, teacher, dataset, dcfg);

  const std::string ckpt_path = out_dir + "/student_seed" + std::to_string(seed) + ".ckpt";
  net::AdamState empty_adam;
  save_checkpoint(ckpt_path, result.student, empty_adam, env.spec().content_hash(), 0);
  const std::string curve_path = out_dir + "/distill_curve_seed" + std::to_string(seed) + ".csv";
  {
    std::ofstream os(curve_path, std::ios::trunc);
    os << "update,ce_loss,val_rq,val_overlap,val_agreement\n";
    for (const auto& r : result.curve)
      os << r.update << ',' << format_g17(r.ce_loss) << ',' << format_g17(r.val_rq) << ','
         << format_g17(r.val_overlap) << ',' << format_g17(r.val_agreement) << '\n';
  }
  std::cout << "validation rq_final " << result.final_validation.mean_rq_final << " overlap "
            << result.final_validation.mean_overlap << "\n";
  m.outputs = {ckpt_path, curve_path};
  m.end_time = iso_utc_now();
  write_manifest(manifest_path, m);
  return kExitOk;
}

int cmd_evaluate(const std::string& checkpoint_path, const std::string& scenario_path, long episodes,
                 std::uint64_t seed, const std::string& out_path, const std::string& traj_path,
                 int traj_episodes, const std::string& backend_override) {
  const ScenarioSpec spec = load_scenario_checked(scenario_path, backend_override);
  const Environment env(spec);
  LoadedCheckpoint ckpt = load_checkpoint(checkpoint_path);
  const std::uint64_t file_hash = fnv1a64_file(scenario_path);
  if (ckpt.meta.scenario_hash != 0 && ckpt.meta.scenario_hash != env.spec().content_hash() &&
      ckpt.meta.scenario_hash != file_hash)
    throw std::invalid_argument("evaluate: checkpoint/scenario hash mismatch");
  EvaluationReport rep;
  if (ckpt.meta.kind == "mlp")
    rep = evaluate_policy(env, ckpt.mlp, episodes, seed, traj_path, traj_episodes);
  else
    rep = evaluate_policy(env, ckpt.lstm, episodes, seed, 0.5, traj_path, traj_episodes);
  const std::string text = evaluation_report_json(rep);
  if (out_path.empty()) {
    std::cout << text << "\n";
  } else {
    std::ofstream os(out_path, std::ios::trunc);
    if (!os) throw std::runtime_error("evaluate: cannot open " + out_path);
    os << text << "\n";
  }
  return kExitOk;
}

int cmd_oracle_analytic(double t_triv, const std::string& ratios_text, double tau_min, double tau_max,
                        int tau_count, const std::string& out_path) {
  const auto ratios = parse_doubles(ratios_text);
  std::ofstream os(out_path, std::ios::trunc);
  if (!os) throw std::runtime_error("oracle analytic: cannot open " + out_path);
  os << "mu_ratio,tau,theta,g,t_eff,improvement\n";
  for (double ratio : ratios) {
    for (int i = 0; i < tau_count; ++i) {
      const double tau =
          tau_min * std::pow(tau_max / tau_min, tau_count == 1 ? 0.0 : double(i) / (tau_count - 1));
      const auto a = oracle::analytic_two_qubit(tau, 1.0, ratio, t_triv);
      os << format_g17(ratio) << ',' << format_g17(tau) << ',' << format_g17(a.theta) << ','
         << format_g17(a.g) << ',' << format_g17(a.t_eff) << ',' << format_g17(a.t_eff / t_triv)
         << '\n';
    }
  }
  return kExitOk;
}

int cmd_oracle_search(int depth, const std::string& moments_text, double t_dec,
                      const std::string& grid_text, int grid_size, bool fixed_first, bool refine,
                      const std::string& out_path) {
  const auto moments = parse_doubles(moments_text);
  if (moments.size() != 3)
    throw std::invalid_argument("oracle search: need exactly three moments (data + two ancillas)");
  double norm2 = 0.0;
  for (double m : moments) norm2 += m * m;
  const double t_triv = t_dec * norm2 / (moments[0] * moments[0]);
  std::vector<double> grid =
      grid_text.empty() ? oracle::default_idle_grid(t_triv, grid_size) : parse_doubles(grid_text);
  const auto res = oracle::brute_force_search(depth, grid, moments, t_dec, fixed_first, refine, true);
  std::ofstream os(out_path, std::ios::trunc);
  if (!os) throw std::runtime_error("oracle search: cannot open " + out_path);
  os << "rank,tree,t_eff,mean_duration,branch_count\n";
  for (std::size_t i = 0; i < res.ranking.size(); ++i) {
    const auto& e = res.ranking[i];
    os << i + 1 << ",\"" << e.sexp << "\"," << format_g17(e.t_eff) << ','
       << format_g17(e.mean_duration) << ',' << e.branch_count << '\n';
  }
  std::cout << "best " << oracle::strategy_to_sexp(res.best) << "\nT_eff " << format_g17(res.t_eff)
            << " (improvement " << format_g17(res.t_eff / t_triv) << ")\n";
  return kExitOk;
}

int cmd_oracle_sweep(int depth, const std::string& mu2_text, const std::string& mu3_text, double t_dec,
                     int grid_size, const std::string& out_path) {
  const auto mu2s = parse_doubles(mu2_text);
  const auto mu3s = parse_doubles(mu3_text);
  std::ofstream os(out_path, std::ios::trunc);
  if (!os) throw std::runtime_error("oracle sweep: cannot open " + out_path);
  os << "mu2,mu3,t_eff,improvement,winner\n";
  for (double mu2 : mu2s) {
    for (double mu3 : mu3s) {
      const std::vector<double> moments = {1.0, mu2, mu3};
      double norm2 = 0.0;
      for (double m : moments) norm2 += m * m;
      const double t_triv = t_dec * norm2;
      const auto grid = oracle::default_idle_grid(t_triv, grid_size);
      const auto res = oracle::brute_force_search(depth, grid, moments, t_dec, true, false, false);
      os << format_g17(mu2) << ',' << format_g17(mu3) << ',' << format_g17(res.t_eff) << ','
         << format_g17(res.t_eff / t_triv) << ",\"" << oracle::strategy_to_sexp(res.best) << "\"\n";
    }
  }
  return kExitOk;
}

int cmd_export_activations(const std::string& checkpoint_path, const std::string& scenario_path,
                           int episodes, std::uint64_t seed, const std::string& out_path,
                           const std::string& backend_override) {
  const ScenarioSpec spec = load_scenario_checked(scenario_path, backend_override);
  const Environment env(spec);
  LoadedCheckpoint ckpt = load_checkpoint(checkpoint_path);
  if (ckpt.meta.kind == "mlp")
    export_activations(env, ckpt.mlp, episodes, seed, out_path);
  else
    export_activations(env, ckpt.lstm, episodes, seed, 0.5, out_path);
  return kExitOk;
}

int cmd_validate(const std::string& scenario_path, const std::string& train_path) {
  const ScenarioSpec spec = load_scenario_checked(scenario_path, "");
  const Environment env(spec);
  std::cout << "scenario '" << spec.name << "': " << spec.n_qubits << " qubits, "
            << env.actions().size() << " actions, observation size " << env.observation_size()
            << ", hash " << spec.content_hash() << "\n";
  if (!train_path.empty()) {
    const TrainConfig cfg = load_train_config(train_path);
    std::cout << "train config: batch " << cfg.batch << ", epochs " << cfg.epochs << ", hash "
              << cfg.content_hash() << "\n";
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"quantum-feedback workbench"};
  app.require_subcommand(1);

  std::string scenario, train, out_dir = "out", seeds = "1", backend, checkpoint, out_file, traj_file;
  std::uint64_t seed = 1;
  long episodes = 10000;
  int traj_episodes = 0;

  auto* train_cmd = app.add_subcommand("train", "train a state-aware policy");
  train_cmd->add_option("--scenario", scenario)->required();
  train_cmd->add_option("--train", train)->required();
  train_cmd->add_option("--out", out_dir)->required();
  train_cmd->add_option("--seeds", seeds);
  train_cmd->add_option("--backend", backend)->check(CLI::IsMember({"dense", "chz"}));

  auto* distill_cmd = app.add_subcommand("distill", "distill a recurrent student from a teacher");
  std::string teacher;
  int distill_episodes = 1024;
  distill_cmd->add_option("--scenario", scenario)->required();
  distill_cmd->add_option("--teacher", teacher)->required();
  distill_cmd->add_option("--out", out_dir)->required();
  distill_cmd->add_option("--seed", seed);
  distill_cmd->add_option("--episodes", distill_episodes);
  distill_cmd->add_option("--backend", backend)->check(CLI::IsMember({"dense", "chz"}));

  auto* eval_cmd = app.add_subcommand("evaluate", "evaluate a checkpoint on a scenario");
  eval_cmd->add_option("--checkpoint", checkpoint)->required();
  eval_cmd->add_option("--scenario", scenario)->required();
  eval_cmd->add_option("--episodes", episodes);
  eval_cmd->add_option("--seed", seed);
  eval_cmd->add_option("--out", out_file);
  eval_cmd->add_option("--trajectories", traj_file);
  eval_cmd->add_option("--trajectory-episodes", traj_episodes);
  eval_cmd->add_option("--backend", backend)->check(CLI::IsMember({"dense", "chz"}));

  auto* oracle_cmd = app.add_subcommand("oracle", "analytic curves, counting, brute-force search");
  oracle_cmd->require_subcommand(1);
  auto* oa = oracle_cmd->add_subcommand("analytic", "closed-form T_eff(tau) curves");
  double t_triv = 500.0, tau_min = 0.0, tau_max = 0.0, t_dec = 0.0;
  std::string ratios = "1,2,4", moments_text, grid_text, mu2_text = "1,2,4", mu3_text = "1,2,4";
  int tau_count = 10, depth = 1, grid_size = 12;
  bool fixed_first = false, refine = false;
  oa->add_option("--t-triv", t_triv);
  oa->add_option("--ratios", ratios);
  oa->add_option("--tau-min", tau_min)->required();
  oa->add_option("--tau-max", tau_max)->required();
  oa->add_option("--tau-count", tau_count);
  oa->add_option("--out", out_file)->required();

  auto* oc = oracle_cmd->add_subcommand("count", "strategy-space size N_d");
  int count_n = 1;
  oc->add_option("--depth", depth)->required();
  oc->add_option("--grid-n", count_n)->required();

  auto* osr = oracle_cmd->add_subcommand("search", "brute-force decision-tree search");
  osr->add_option("--depth", depth);
  osr->add_option("--moments", moments_text)->required();
  osr->add_option("--t-dec", t_dec)->required();
  osr->add_option("--grid", grid_text);
  osr->add_option("--grid-size", grid_size);
  osr->add_flag("--fixed-first", fixed_first);
  osr->add_flag("--refine", refine);
  osr->add_option("--out", out_file)->required();

  auto* osw = oracle_cmd->add_subcommand("sweep", "phase-diagram sweep over moment ratios");
  osw->add_option("--depth", depth);
  osw->add_option("--mu2", mu2_text);
  osw->add_option("--mu3", mu3_text);
  osw->add_option("--t-dec", t_dec)->required();
  osw->add_option("--grid-size", grid_size);
  osw->add_option("--out", out_file)->required();

  auto* export_cmd = app.add_subcommand("export-activations", "dump last-hidden-layer activations");
  int export_episodes = 1;
  export_cmd->add_option("--checkpoint", checkpoint)->required();
  export_cmd->add_option("--scenario", scenario)->required();
  export_cmd->add_option("--episodes", export_episodes);
  export_cmd->add_option("--seed", seed);
  export_cmd->add_option("--out", out_file)->required();
  export_cmd->add_option("--backend", backend)->check(CLI::IsMember({"dense", "chz"}));

  auto* validate_cmd = app.add_subcommand("validate-config", "parse and validate configuration files");
  validate_cmd->add_option("--scenario", scenario)->required();
  validate_cmd->add_option("--train", train);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train_cmd) return cmd_train(scenario, train, out_dir, seeds, backend);
    if (*distill_cmd) return cmd_distill(scenario, teacher, out_dir, seed, distill_episodes, backend);
    if (*eval_cmd)
      return cmd_evaluate(checkpoint, scenario, episodes, seed, out_file, traj_file, traj_episodes,
                          backend);
    if (*oa) return cmd_oracle_analytic(t_triv, ratios, tau_min, tau_max, tau_count, out_file);
    if (*oc) {
      std::cout << oracle::strategy_count(depth, count_n) << "\n";
      return kExitOk;
    }
    if (*osr)
      return cmd_oracle_search(depth, moments_text, t_dec, grid_text, grid_size, fixed_first, refine,
                               out_file);
    if (*osw) return cmd_oracle_sweep(depth, mu2_text, mu3_text, t_dec, grid_size, out_file);
    if (*export_cmd)
      return cmd_export_activations(checkpoint, scenario, export_episodes, seed, out_file, backend);
    if (*validate_cmd) return cmd_validate(scenario, train);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitConfig;
}
