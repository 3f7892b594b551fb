// SPDX-License-Identifier: Apache-2.0

#include "qfw/scenario.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace qfw {

using nlohmann::json;

void ScenarioSpec::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("scenario: " + msg); };
  if (version != 1) fail("unsupported schema version");
  if (n_qubits < 1 || n_qubits > 10) fail("qubit count out of range");
  if (data_qubit < 0 || data_qubit >= n_qubits) fail("data qubit out of range");
  std::set<std::pair<int, int>> seen;
  for (auto [c, t] : connectivity) {
    if (c == t) fail("connectivity pair with identical endpoints");
    if (c < 0 || c >= n_qubits || t < 0 || t >= n_qubits) fail("connectivity qubit out of range");
    if (!seen.insert({c, t}).second) fail("duplicate connectivity pair");
  }
  for (int q : measurable_z)
    if (q < 0 || q >= n_qubits) fail("measurable_z qubit out of range");
  for (int q : measurable_xy)
    if (q < 0 || q >= n_qubits) fail("measurable_xy qubit out of range");
  for (int q : flips_allowed)
    if (q < 0 || q >= n_qubits) fail("flips qubit out of range");
  if (t_dec <= 0.0) fail("T_dec must be positive");
  if (noise_kind == NoiseKind::CorrelatedDephasing) {
    if (int(moments.size()) != n_qubits) fail("moments length must equal qubit count");
    if (moments[data_qubit] <= 0.0) fail("data-qubit moment must be positive");
  }
  if (msmt_error < 0.0 || msmt_error > 0.5) fail("msmt_error outside [0, 1/2]");
  if (dt <= 0.0) fail("dt must be positive");
  if (horizon < 1) fail("horizon must be at least 1");
  if (pca_components < 1) fail("pca_components must be at least 1");
  if (pca_components > (1 << n_qubits)) fail("pca_components exceeds Hilbert dimension");
  if (decode_window < 0 || decode_window > horizon) fail("decode_window out of range");
  if (backend && *backend == Backend::Chz) {
    if (noise_kind != NoiseKind::BitFlip) fail("chz backend requires bit-flip noise");
    if (!measurable_xy.empty()) fail("chz backend does not support x/y measurements");
  }
}

namespace {

json spec_to_json(const ScenarioSpec& s) {
  json j;
  j["version"] = s.version;
  j["name"] = s.name;
  j["qubits"] = s.n_qubits;
  j["data_qubit"] = s.data_qubit;
  json conn = json::array();
  for (auto [c, t] : s.connectivity) conn.push_back({c, t});
  j["connectivity"] = conn;
  j["measurements"] = {{"z", s.measurable_z}, {"xy", s.measurable_xy}};
  j["flips"] = s.flips_allowed;
  j["noise"] = {{"kind", s.noise_kind == NoiseKind::BitFlip ? "bit-flip" : "correlated-dephasing"},
                {"T_dec", s.t_dec},
                {"moments", s.moments}};
  j["msmt_error"] = s.msmt_error;
  j["horizon"] = s.horizon;
  j["dt"] = s.dt;
  j["pca_components"] = s.pca_components;
  j["decode_window"] = s.decode_window;
  if (s.backend) j["backend"] = *s.backend == Backend::Chz ? "chz" : "dense";
  return j;
}

}  // namespace

std::string ScenarioSpec::canonical_json() const { return spec_to_json(*this).dump(); }

std::uint64_t ScenarioSpec::content_hash() const {
  const std::string text = canonical_json();
  return fnv1a64(text.data(), text.size());
}

ScenarioSpec scenario_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("scenario: malformed JSON: ") + e.what());
  }
  ScenarioSpec s;
  try {
    s.version = j.at("version").get<int>();
    s.name = j.value("name", std::string("unnamed"));
    s.n_qubits = j.at("qubits").get<int>();
    s.data_qubit = j.value("data_qubit", 0);
    const auto& conn = j.at("connectivity");
    if (conn.is_string() && conn.get<std::string>() == "all") {
      for (int c = 0; c < s.n_qubits; ++c)
        for (int t = 0; t < s.n_qubits; ++t)
          if (c != t) s.connectivity.emplace_back(c, t);
    } else {
      for (const auto& p : conn) s.connectivity.emplace_back(p.at(0).get<int>(), p.at(1).get<int>());
    }
    const auto& ms = j.at("measurements");
    s.measurable_z = ms.value("z", std::vector<int>{});
    s.measurable_xy = ms.value("xy", std::vector<int>{});
    s.flips_allowed = j.value("flips", std::vector<int>{});
    const auto& noise = j.at("noise");
    const std::string kind = noise.at("kind").get<std::string>();
    if (kind == "bit-flip")
      s.noise_kind = NoiseKind::BitFlip;
    else if (kind == "correlated-dephasing")
      s.noise_kind = NoiseKind::CorrelatedDephasing;
    else
      throw std::invalid_argument("scenario: unknown noise kind '" + kind + "'");
    s.t_dec = noise.at("T_dec").get<double>();
    s.moments = noise.value("moments", std::vector<double>{});
    s.msmt_error = j.value("msmt_error", 0.0);
    s.horizon = j.at("horizon").get<int>();
    s.dt = j.value("dt", 1.0);
    s.pca_components = j.value("pca_components", 6);
    s.decode_window = j.value("decode_window", 0);
    if (j.contains("backend")) {
      const std::string b = j.at("backend").get<std::string>();
      if (b == "chz")
        s.backend = Backend::Chz;
      else if (b == "dense")
        s.backend = Backend::Dense;
      else
        throw std::invalid_argument("scenario: unknown backend '" + b + "'");
    }
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("scenario: missing or mistyped field: ") + e.what());
  }
  s.validate();
  return s;
}

ScenarioSpec load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("scenario: cannot open file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return scenario_from_json_text(ss.str());
}

std::vector<int> ActionSet::measurement_indices() const {
  std::vector<int> out;
  for (int i = 0; i < size(); ++i)
    if (actions[i].is_measurement()) out.push_back(i);
  return out;
}

ActionSet build_action_set(const ScenarioSpec& spec) {
  ActionSet set;
  std::vector<std::pair<int, int>> conn = spec.connectivity;
  std::sort(conn.begin(), conn.end());
  for (auto [c, t] : conn) {
    Action a;
    a.kind = ActionKind::Cnot;
    a.q1 = c;
    a.q2 = t;
    a.label = "CNOT(" + std::to_string(c) + "->" + std::to_string(t) + ")";
    set.actions.push_back(a);
  }
  std::vector<int> mz = spec.measurable_z;
  std::sort(mz.begin(), mz.end());
  for (int q : mz) set.actions.push_back({ActionKind::MeasureZ, q, -1, "MZ(" + std::to_string(q) + ")"});
  std::vector<int> mxy = spec.measurable_xy;
  std::sort(mxy.begin(), mxy.end());
  for (int q : mxy) {
    set.actions.push_back({ActionKind::MeasureX, q, -1, "MX(" + std::to_string(q) + ")"});
    set.actions.push_back({ActionKind::MeasureY, q, -1, "MY(" + std::to_string(q) + ")"});
  }
  std::vector<int> fl = spec.flips_allowed;
  std::sort(fl.begin(), fl.end());
  for (int q : fl) set.actions.push_back({ActionKind::Flip, q, -1, "X(" + std::to_string(q) + ")"});
  set.actions.push_back({ActionKind::Idle, -1, -1, "IDLE"});
  return set;
}

int observation_size(const ScenarioSpec& spec) {
  const int dim = 1 << spec.n_qubits;
  const int n_actions = int(spec.connectivity.size()) + int(spec.measurable_z.size()) +
                        2 * int(spec.measurable_xy.size()) + int(spec.flips_allowed.size()) + 1;
  const int n_msmt = int(spec.measurable_z.size()) + 2 * int(spec.measurable_xy.size());
  return 4 * spec.pca_components * dim * 2 + n_msmt + n_actions + spec.decode_window;
}

namespace {

using EigPair = std::pair<double, CVector>;

void phase_fix(CVector& v) {
  double best = 0.0;
  Eigen::Index best_i = -1;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double a = std::abs(v(i));
    if (a > best + 1e-12) {
      best = a;
      best_i = i;
    }
  }
  if (best_i < 0 || best < 1e-15) return;
  const Complex ph = std::conj(v(best_i)) / best;
  v *= ph;
}

bool lex_less(const CVector& a, const CVector& b) {
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (a(i).real() != b(i).real()) return a(i).real() < b(i).real();
    if (a(i).imag() != b(i).imag()) return a(i).imag() < b(i).imag();
  }
  return false;
}

void sort_pairs(std::vector<EigPair>& pairs) {
  for (auto& p : pairs) phase_fix(p.second);
  std::stable_sort(pairs.begin(), pairs.end(),
                   [](const EigPair& a, const EigPair& b) { return a.first > b.first; });
  // Degenerate eigenvalues: order each near-equal run lexicographically.
  std::size_t i = 0;
  while (i < pairs.size()) {
    std::size_t j = i + 1;
    while (j < pairs.size() && pairs[j - 1].first - pairs[j].first <= 1e-12) ++j;
    if (j - i > 1)
      std::sort(pairs.begin() + i, pairs.begin() + j,
                [](const EigPair& a, const EigPair& b) { return lex_less(a.second, b.second); });
    i = j;
  }
}

void emit_block(std::vector<EigPair>& pairs, int k, Eigen::Index dim, std::vector<double>& out) {
  sort_pairs(pairs);
  for (int c = 0; c < k; ++c) {
    if (c < int(pairs.size())) {
      const double p = std::max(0.0, pairs[c].first);
      const CVector v = std::sqrt(p) * pairs[c].second;
      for (Eigen::Index s = 0; s < dim; ++s) {
        out.push_back(v(s).real());
        out.push_back(v(s).imag());
      }
    } else {
      for (Eigen::Index s = 0; s < dim; ++s) {
        out.push_back(0.0);
        out.push_back(0.0);
      }
    }
  }
}

std::vector<EigPair> dense_eig_pairs(const Matrix& rho) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (rho + rho.adjoint()));
  std::vector<EigPair> pairs;
  pairs.reserve(rho.rows());
  for (Eigen::Index i = 0; i < rho.rows(); ++i) pairs.emplace_back(es.eigenvalues()(i), es.eigenvectors().col(i));
  return pairs;
}

// Eigen pairs of the CHZ block structure diag(d0) + offset component.
std::vector<EigPair> chz_eig_pairs(const ChzFrame& f, const CVector* offset, const RVector* diag_extra) {
  const std::size_t dim = f.dim();
  std::vector<EigPair> pairs;
  pairs.reserve(dim);
  auto unit = [&](std::size_t s) {
    CVector v = CVector::Zero(dim);
    v(s) = 1.0;
    return v;
  };
  if (offset == nullptr || f.coherence_mask == 0) {
    for (std::size_t s = 0; s < dim; ++s) {
      double lam = f.d0(s);
      if (diag_extra) lam += (*diag_extra)(s);
      if (offset) lam += (*offset)(s).real();
      pairs.emplace_back(lam, unit(s));
    }
    return pairs;
  }
  const std::size_t mask = f.coherence_mask;
  for (std::size_t s = 0; s < dim; ++s) {
    const std::size_t p = s ^ mask;
    if (p < s) continue;
    const double a = f.d0(s), b = f.d0(p);
    const Complex c = (*offset)(s);
    const double mid = 0.5 * (a + b);
    const double rad = std::sqrt(0.25 * (a - b) * (a - b) + std::norm(c));
    const double lp = mid + rad, lm = mid - rad;
    if (std::abs(c) < 1e-15) {
      pairs.emplace_back(a, unit(s));
      pairs.emplace_back(b, unit(p));
      continue;
    }
    for (double lam : {lp, lm}) {
      CVector v = CVector::Zero(dim);
      const Complex vs = c;
      const double vp = lam - a;
      const double nrm = std::sqrt(std::norm(vs) + vp * vp);
      v(s) = vs / nrm;
      v(p) = vp / nrm;
      pairs.emplace_back(lam, v);
    }
  }
  return pairs;
}

void normalize_pairs(std::vector<EigPair>& pairs) {
  double tr = 0.0;
  for (const auto& p : pairs) tr += p.first;
  if (tr < 1e-12) {
    for (auto& p : pairs) p.first = 0.0;
    return;
  }
  for (auto& p : pairs) p.first /= tr;
}

}  // namespace

void append_pca_block(const Matrix& rho, int k_components, std::vector<double>& out) {
  const double tr = rho.trace().real();
  std::vector<EigPair> pairs;
  if (tr < 1e-12) {
    pairs.assign(rho.rows(), {0.0, CVector::Zero(rho.rows())});
    for (Eigen::Index i = 0; i < rho.rows(); ++i) pairs[i].second(i) = 1.0;
  } else {
    pairs = dense_eig_pairs(rho / tr);
  }
  emit_block(pairs, k_components, rho.rows(), out);
}

Environment::Environment(ScenarioSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  actions_ = build_action_set(spec_);
  gen_ = build_generator(spec_.noise_kind, spec_.n_qubits, spec_.t_dec, spec_.moments);
  method_ = spec_.noise_kind == NoiseKind::BitFlip ? RqMethod::Axis : RqMethod::Equator;
  backend_ = spec_.effective_backend();
  if (backend_ == Backend::Chz && (!spec_.measurable_xy.empty() || spec_.noise_kind != NoiseKind::BitFlip))
    backend_ = Backend::Dense;
  obs_size_ = qfw::observation_size(spec_);
  dense_maps_.reserve(actions_.size());
  for (const auto& a : actions_.actions)
    dense_maps_.push_back(step_maps(a, gen_, spec_.dt, spec_.msmt_error));
  if (backend_ == Backend::Chz)
    chz_dis_ = ChzDissipation::bit_flip(spec_.n_qubits, spec_.t_dec, spec_.dt);
  msmt_action_ids_ = actions_.measurement_indices();
}

EpisodeState Environment::reset(std::uint64_t seed) const {
  EpisodeState s;
  s.backend = backend_;
  s.rng = Rng(seed);
  if (backend_ == Backend::Chz)
    s.chz = ChzFrame::initial(spec_.n_qubits, spec_.data_qubit);
  else
    s.dense = LogicalFrame::initial(spec_.n_qubits, spec_.data_qubit);
  s.t = 0;
  s.prev_action = -1;
  s.rq = 1.0;
  s.rq_bar = 1.0;
  return s;
}

std::vector<bool> Environment::destructive_flags(const EpisodeState& state) const {
  std::vector<bool> flags;
  flags.reserve(msmt_action_ids_.size());
  for (int id : msmt_action_ids_) {
    const Action& a = actions_[id];
    if (state.backend == Backend::Chz) {
      flags.push_back(state.chz.measurement_bias_z(a.q1).cwiseAbs().maxCoeff() > kDestructiveBiasTol);
    } else {
      flags.push_back(measurement_bias(state.dense, a).second);
    }
  }
  return flags;
}

RVector Environment::observe(const EpisodeState& state) const {
  const int k = spec_.pca_components;
  const Eigen::Index dim = Eigen::Index(1) << spec_.n_qubits;
  std::vector<double> out;
  out.reserve(std::size_t(obs_size_));
  if (state.backend == Backend::Chz) {
    const ChzFrame& f = state.chz;
    std::vector<EigPair> p0 = chz_eig_pairs(f, nullptr, nullptr);
    normalize_pairs(p0);
    emit_block(p0, k, dim, out);
    std::vector<EigPair> p1 = chz_eig_pairs(f, &f.dx, nullptr);
    normalize_pairs(p1);
    emit_block(p1, k, dim, out);
    std::vector<EigPair> p2 = chz_eig_pairs(f, &f.dy, nullptr);
    normalize_pairs(p2);
    emit_block(p2, k, dim, out);
    std::vector<EigPair> p3 = chz_eig_pairs(f, nullptr, &f.dz);
    normalize_pairs(p3);
    emit_block(p3, k, dim, out);
  } else {
    const LogicalFrame& f = state.dense;
    append_pca_block(f.rho0, k, out);
    append_pca_block(f.rho0 + f.dx, k, out);
    append_pca_block(f.rho0 + f.dy, k, out);
    append_pca_block(f.rho0 + f.dz, k, out);
  }
  for (bool fl : destructive_flags(state)) out.push_back(fl ? 1.0 : 0.0);
  for (int i = 0; i < actions_.size(); ++i) out.push_back(i == state.prev_action ? 1.0 : 0.0);
  for (int slot = 0; slot < spec_.decode_window; ++slot)
    out.push_back(state.t - spec_.t_signal() == slot ? 1.0 : 0.0);
  return Eigen::Map<RVector>(out.data(), Eigen::Index(out.size()));
}

StepOutcome Environment::apply(EpisodeState& state, int action_index) const {
  if (state.t >= spec_.horizon) throw std::runtime_error("Environment::apply: episode is terminal");
  if (action_index < 0 || action_index >= actions_.size())
    throw std::out_of_range("Environment::apply: action index out of range");
  const Action& act = actions_[action_index];

  StepOutcome out;
  if (act.is_measurement()) {
    if (state.backend == Backend::Chz)
      out.destructive = state.chz.measurement_bias_z(act.q1).cwiseAbs().maxCoeff() > kDestructiveBiasTol;
    else
      out.destructive = measurement_bias(state.dense, act).second;
  }

  struct BranchEval {
    std::string label;
    double p;
    double rq;
    LogicalFrame dense;
    ChzFrame chz;
  };
  std::vector<BranchEval> evals;
  double psum = 0.0;
  if (state.backend == Backend::Chz) {
    auto branches = chz_step(state.chz, act, chz_dis_, spec_.msmt_error);
    for (auto& b : branches) {
      psum += b.probability;
      if (b.probability < kBranchProbFloor) continue;
      BranchEval e;
      e.label = b.label;
      e.p = b.probability;
      e.rq = b.frame.rq_axis();
      e.chz = std::move(b.frame);
      evals.push_back(std::move(e));
    }
  } else {
    const auto& branches = dense_maps_[action_index];
    for (const auto& b : branches) {
      const double p = b.measurement ? b.probability(state.dense.rho0) : 1.0;
      psum += p;
      if (p < kBranchProbFloor) continue;
      BranchEval e;
      e.label = b.label;
      e.p = p;
      e.dense = evolve_frame(state.dense, b);
      e.rq = recoverable_q_info(e.dense, method_).value;
      evals.push_back(std::move(e));
    }
  }
  if (std::abs(psum - 1.0) > 1e-8)
    throw std::runtime_error("Environment::apply: branch probabilities do not sum to 1");

  double rq_expected = 0.0;
  for (const auto& e : evals) rq_expected += e.p * e.rq;

  int chosen = int(evals.size()) - 1;
  if (evals.size() > 1) {
    const double u = state.rng.uniform();
    double acc = 0.0;
    for (std::size_t i = 0; i < evals.size(); ++i) {
      acc += evals[i].p;
      if (u < acc) {
        chosen = int(i);
        break;
      }
    }
  }

  BranchEval& sel = evals[chosen];
  if (state.backend == Backend::Chz)
    state.chz = std::move(sel.chz);
  else
    state.dense = std::move(sel.dense);
  state.t += 1;
  state.prev_action = action_index;
  state.rq_bar = rq_expected;
  state.rq = sel.rq;

  out.outcome = act.is_measurement() ? sel.label : "unitary";
  out.probability = sel.p;
  out.rq = sel.rq;
  out.rq_expected = rq_expected;
  out.terminal = state.t >= spec_.horizon;
  return out;
}

}  // namespace qfw
