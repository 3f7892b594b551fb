// SPDX-License-Identifier: Apache-2.0

#include "qfw/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

#include "qfw/threadpool.hpp"

namespace qfw::oracle {

TwoQubitAnalytic analytic_two_qubit(double tau, double mu1, double mu2, double t_triv) {
  if (tau <= 0.0 || mu1 <= 0.0 || t_triv <= 0.0)
    throw std::invalid_argument("analytic_two_qubit: tau, mu1 and t_triv must be positive");
  TwoQubitAnalytic r;
  r.tau = tau;
  r.mu_ratio = mu2 / mu1;
  r.t_triv = t_triv;
  const double a = 2.0 * tau / t_triv * (mu2 / mu1) * (mu2 / mu1);
  const double b = 4.0 * tau / t_triv * (mu2 / mu1);
  // ln tan(theta) = -a + ln sinh(b), evaluated in log space to survive large b.
  const double ln_sinh = b + std::log1p(-std::exp(-2.0 * b)) - std::log(2.0);
  const double ln_tan = -a + ln_sinh;
  r.theta = std::atan(std::exp(ln_tan));
  const double lt = ln_tan > 20.0 ? 2.0 * ln_tan : std::log1p(std::exp(2.0 * ln_tan));
  const double ln_g = -2.0 * tau / t_triv + 0.5 * lt;
  r.g = std::exp(ln_g);
  r.t_eff = ln_g < 0.0 ? -2.0 * tau / ln_g : std::numeric_limits<double>::infinity();
  return r;
}

int strategy_depth(const StrategyPtr& tree) {
  if (!tree) return 0;
  int deepest = 0;
  for (const auto& c : tree->child)
    if (c.kind == StrategyChild::Kind::Subtree) deepest = std::max(deepest, strategy_depth(c.subtree));
  return 1 + deepest;
}

namespace {
const char* axis_name(PauliAxis a) { return a == PauliAxis::X ? "x" : a == PauliAxis::Y ? "y" : "z"; }
}  // namespace

std::string strategy_to_sexp(const StrategyPtr& tree) {
  if (!tree) return "()";
  std::ostringstream os;
  os << "(idle " << tree->idle << " (m " << tree->qubit << " " << axis_name(tree->axis) << ")";
  for (int s = 0; s < 2; ++s) {
    const auto& c = tree->child[s];
    os << " (" << (s == 0 ? "+" : "-") << " ";
    switch (c.kind) {
      case StrategyChild::Kind::Subtree:
        os << strategy_to_sexp(c.subtree);
        break;
      case StrategyChild::Kind::Immediate:
        os << "(m! " << c.im_qubit << " " << axis_name(c.im_axis) << ")";
        break;
      case StrategyChild::Kind::End:
        os << "end";
        break;
    }
    os << ")";
  }
  os << ")";
  return os.str();
}

StrategyPtr mirror_strategy(const StrategyPtr& tree) {
  if (!tree) return tree;
  auto node = std::make_shared<StrategyNode>(*tree);
  StrategyChild c0 = tree->child[0], c1 = tree->child[1];
  if (c0.kind == StrategyChild::Kind::Subtree) c0.subtree = mirror_strategy(c0.subtree);
  if (c1.kind == StrategyChild::Kind::Subtree) c1.subtree = mirror_strategy(c1.subtree);
  // Complex conjugation swaps the outcomes of y measurements only.
  if (tree->axis == PauliAxis::Y) {
    node->child[0] = c1;
    node->child[1] = c0;
  } else {
    node->child[0] = c0;
    node->child[1] = c1;
  }
  return node;
}

unsigned __int128 strategy_count_raw(int depth, int grid_size) {
  if (depth < 1 || grid_size < 1) throw std::invalid_argument("strategy_count: depth and n must be >= 1");
  unsigned __int128 n = (unsigned)grid_size;
  unsigned __int128 count = 16 * n;
  for (int d = 2; d <= depth; ++d) {
    unsigned __int128 base = count + 2;
    unsigned __int128 sq, total;
    if (__builtin_mul_overflow(base, base, &sq) || __builtin_mul_overflow(sq, 4 * n, &total))
      throw std::overflow_error("strategy_count: 128-bit overflow; double-exponential growth");
    count = total;
  }
  return count;
}

std::string strategy_count(int depth, int grid_size) {
  unsigned __int128 v = strategy_count_raw(depth, grid_size);
  if (v == 0) return "0";
  std::string out;
  while (v > 0) {
    out.push_back(char('0' + int(v % 10)));
    v /= 10;
  }
  std::reverse(out.begin(), out.end());
  return out;
}

namespace {

struct MeasureVar {
  int qubit;
  PauliAxis axis;
};
const MeasureVar kVars[4] = {{1, PauliAxis::X}, {1, PauliAxis::Y}, {2, PauliAxis::X}, {2, PauliAxis::Y}};

int other_ancilla(int q) { return q == 1 ? 2 : 1; }

std::vector<StrategyPtr> materialize(int depth, const std::vector<double>& grid);

// Child options of a node measuring `parent_qubit`: subtrees of the reduced
// depth plus the two immediate terminations on the other ancilla.
std::vector<StrategyChild> child_options(int sub_depth, const std::vector<double>& grid,
                                         int parent_qubit, const std::vector<StrategyPtr>& pool) {
  std::vector<StrategyChild> opts;
  for (const auto& s : pool) {
    StrategyChild c;
    c.kind = StrategyChild::Kind::Subtree;
    c.subtree = s;
    opts.push_back(c);
  }
  (void)sub_depth;
  (void)grid;
  for (PauliAxis ax : {PauliAxis::X, PauliAxis::Y}) {
    StrategyChild c;
    c.kind = StrategyChild::Kind::Immediate;
    c.im_qubit = other_ancilla(parent_qubit);
    c.im_axis = ax;
    opts.push_back(c);
  }
  return opts;
}

std::vector<StrategyPtr> materialize(int depth, const std::vector<double>& grid) {
  std::vector<StrategyPtr> out;
  const std::vector<StrategyPtr> pool = depth > 1 ? materialize(depth - 1, grid) : std::vector<StrategyPtr>{};
  for (double idle : grid) {
    for (const auto& var : kVars) {
      const auto opts = child_options(depth - 1, grid, var.qubit, pool);
      for (const auto& c0 : opts) {
        for (const auto& c1 : opts) {
          auto node = std::make_shared<StrategyNode>();
          node->idle = idle;
          node->qubit = var.qubit;
          node->axis = var.axis;
          node->child[0] = c0;
          node->child[1] = c1;
          out.push_back(node);
        }
      }
    }
  }
  return out;
}

}  // namespace

void enumerate_strategies(int depth, const std::vector<double>& idle_grid,
                          const std::function<void(const StrategyPtr&)>& sink) {
  if (depth < 1 || depth > 3) throw std::invalid_argument("enumerate_strategies: depth must be 1..3");
  if (idle_grid.empty()) throw std::invalid_argument("enumerate_strategies: idle grid is empty");
  const std::vector<StrategyPtr> pool =
      depth > 1 ? materialize(depth - 1, idle_grid) : std::vector<StrategyPtr>{};
  for (double idle : idle_grid) {
    for (const auto& var : kVars) {
      const auto opts = child_options(depth - 1, idle_grid, var.qubit, pool);
      for (const auto& c0 : opts) {
        for (const auto& c1 : opts) {
          auto node = std::make_shared<StrategyNode>();
          node->idle = idle;
          node->qubit = var.qubit;
          node->axis = var.axis;
          node->child[0] = c0;
          node->child[1] = c1;
          sink(node);
        }
      }
    }
  }
}

namespace {

// Frame with the data qubit logical and every ancilla freshly measured at +x.
LogicalFrame cycle_start_frame(int n_qubits) {
  LogicalFrame f;
  f.n_qubits = n_qubits;
  Matrix plus_x(2, 2);
  plus_x << 0.5, 0.5, 0.5, 0.5;
  auto build = [&](const Matrix& data_part) {
    Matrix m = Matrix::Identity(1, 1);
    for (int q = 0; q < n_qubits; ++q) m = kron(m, q == 0 ? data_part : plus_x);
    return m;
  };
  f.rho0 = build(0.5 * Matrix::Identity(2, 2));
  f.dx = build(0.5 * pauli(PauliAxis::X));
  f.dy = build(0.5 * pauli(PauliAxis::Y));
  f.dz = build(0.5 * pauli(PauliAxis::Z));
  return f;
}

struct EvalContext {
  int n_qubits;
  double t_dec;
  const std::vector<double>* moments;
  std::map<double, DissipationStep> idle_cache;
  StrategyEvaluation* out;

  const DissipationStep& idle_step(double tau) {
    auto it = idle_cache.find(tau);
    if (it == idle_cache.end())
      it = idle_cache.emplace(tau, DissipationStep::correlated(n_qubits, t_dec, *moments, tau)).first;
    return it->second;
  }
};

LogicalFrame idle_evolve(const LogicalFrame& f, const DissipationStep& dis) {
  LogicalFrame out = f;
  dis.apply_in_place(out.rho0);
  dis.apply_in_place(out.dx);
  dis.apply_in_place(out.dy);
  dis.apply_in_place(out.dz);
  out.evolve_count = f.evolve_count + 1;
  return out;
}

// (probability, post-measurement frame) of outcome `sign` for measuring
// `axis` on `qubit`, applied instantaneously.
std::pair<double, LogicalFrame> measure_branch(const LogicalFrame& f, int qubit, PauliAxis axis,
                                               int sign) {
  const Matrix p = projector_axis(axis, qubit, sign, f.n_qubits);
  const double prob = (p * f.rho0).trace().real();
  if (prob < kBranchProbFloor) return {prob, LogicalFrame{}};
  CPBranch b;
  b.kraus = p;
  b.povm = p;
  b.dissipation = std::make_shared<const DissipationStep>(DissipationStep::none(f.n_qubits));
  b.measurement = true;
  return {prob, evolve_frame(f, b)};
}

void record_leaf(EvalContext& ctx, const LogicalFrame& f, double p_acc, double t_acc) {
  StrategyEvaluation::Branch br;
  br.p = p_acc;
  br.duration = t_acc;
  br.retention = std::min(1.0, recoverable_q_info(f, RqMethod::Equator).value);
  ctx.out->branches.push_back(br);
}

void walk(EvalContext& ctx, const StrategyPtr& node, const LogicalFrame& f, double p_acc, double t_acc);

void descend_child(EvalContext& ctx, const StrategyChild& c, const LogicalFrame& f, double p_acc,
                   double t_acc) {
  switch (c.kind) {
    case StrategyChild::Kind::Subtree:
      walk(ctx, c.subtree, f, p_acc, t_acc);
      return;
    case StrategyChild::Kind::Immediate: {
      for (int sign : {+1, -1}) {
        auto [p, next] = measure_branch(f, c.im_qubit, c.im_axis, sign);
        const double pj = p_acc * p;
        if (pj < kBranchProbFloor) {
          ctx.out->dropped_mass += pj;
          continue;
        }
        record_leaf(ctx, next, pj, t_acc);
      }
      return;
    }
    case StrategyChild::Kind::End:
      record_leaf(ctx, f, p_acc, t_acc);
      return;
  }
}

void walk(EvalContext& ctx, const StrategyPtr& node, const LogicalFrame& f, double p_acc, double t_acc) {
  const LogicalFrame idled = idle_evolve(f, ctx.idle_step(node->idle));
  const double t_next = t_acc + node->idle;
  for (int s = 0; s < 2; ++s) {
    const int sign = s == 0 ? +1 : -1;
    auto [p, next] = measure_branch(idled, node->qubit, node->axis, sign);
    const double pj = p_acc * p;
    if (pj < kBranchProbFloor) {
      ctx.out->dropped_mass += pj;
      continue;
    }
    descend_child(ctx, node->child[s], next, pj, t_next);
  }
}

}  // namespace

namespace {

void check_tree_qubits(const StrategyPtr& node, int n_qubits) {
  if (node->qubit < 1 || node->qubit >= n_qubits)
    throw std::invalid_argument("evaluate_strategy: tree measures a qubit outside the register");
  for (const auto& c : node->child) {
    if (c.kind == StrategyChild::Kind::Subtree) check_tree_qubits(c.subtree, n_qubits);
    if (c.kind == StrategyChild::Kind::Immediate && (c.im_qubit < 1 || c.im_qubit >= n_qubits))
      throw std::invalid_argument("evaluate_strategy: terminal measures a qubit outside the register");
  }
}

}  // namespace

StrategyEvaluation evaluate_strategy(const StrategyPtr& tree, const std::vector<double>& moments,
                                     double t_dec) {
  if (!tree) throw std::invalid_argument("evaluate_strategy: empty tree");
  const int n = int(moments.size());
  check_tree_qubits(tree, n);
  StrategyEvaluation eval;
  EvalContext ctx{n, t_dec, &moments, {}, &eval};
  walk(ctx, tree, cycle_start_frame(n), 1.0, 0.0);
  if (eval.dropped_mass > 0.0) {
    const double kept = 1.0 - eval.dropped_mass;
    for (auto& b : eval.branches) b.p /= kept;
  }
  double mean_t = 0.0, mean_lng = 0.0;
  for (const auto& b : eval.branches) {
    mean_t += b.p * b.duration;
    mean_lng += b.p * std::log(std::max(b.retention, 1e-300));
  }
  eval.t_eff = mean_lng < 0.0 ? -2.0 * mean_t / mean_lng : std::numeric_limits<double>::infinity();
  return eval;
}

namespace {

StrategyPtr build_fixed_root(double idle, int qubit, PauliAxis axis, const StrategyChild& plus) {
  auto node = std::make_shared<StrategyNode>();
  node->idle = idle;
  node->qubit = qubit;
  node->axis = axis;
  node->child[0] = plus;
  StrategyChild minus = plus;
  if (plus.kind == StrategyChild::Kind::Subtree) minus.subtree = mirror_strategy(plus.subtree);
  // A y-axis root maps + to - under conjugation, so the mirrored subtree
  // hangs on the other outcome unchanged in shape.
  node->child[1] = minus;
  return node;
}

}  // namespace

SearchResult brute_force_search(int depth, const std::vector<double>& idle_grid,
                                const std::vector<double>& moments, double t_dec, bool fixed_first,
                                bool refine_idles, bool keep_ranking) {
  if (moments.size() != 3)
    throw std::invalid_argument("brute_force_search: expects one data qubit plus two ancillas");
  std::vector<StrategyPtr> candidates;
  if (fixed_first) {
    // Largest-moment ancilla, measured orthogonal to its +x start.
    const int q = moments[1] >= moments[2] ? 1 : 2;
    std::vector<StrategyPtr> pool =
        depth > 1 ? materialize(depth - 1, idle_grid) : std::vector<StrategyPtr>{};
    const auto opts = child_options(depth - 1, idle_grid, q, pool);
    for (double idle : idle_grid)
      for (const auto& plus : opts) candidates.push_back(build_fixed_root(idle, q, PauliAxis::Y, plus));
  } else {
    const unsigned __int128 total = strategy_count_raw(depth, int(idle_grid.size()));
    if (total > (unsigned __int128)5000000)
      throw std::invalid_argument(
          "brute_force_search: search space exceeds 5e6 trees (" + strategy_count(depth, int(idle_grid.size())) +
          "); reduce the depth or the idle grid, or use fixed_first");
    candidates.reserve(std::size_t(total));
    enumerate_strategies(depth, idle_grid, [&](const StrategyPtr& t) { candidates.push_back(t); });
  }

  std::vector<double> t_effs(candidates.size());
  std::vector<double> mean_ts(candidates.size());
  std::vector<int> branch_counts(candidates.size());
  parallel_for(int(candidates.size()), [&](int i) {
    const StrategyEvaluation ev = evaluate_strategy(candidates[i], moments, t_dec);
    t_effs[i] = ev.t_eff;
    double mt = 0.0;
    for (const auto& b : ev.branches) mt += b.p * b.duration;
    mean_ts[i] = mt;
    branch_counts[i] = int(ev.branches.size());
  });

  SearchResult res;
  int best = 0;
  for (int i = 1; i < int(candidates.size()); ++i)
    if (t_effs[i] > t_effs[best]) best = i;
  res.best = candidates[best];
  res.t_eff = t_effs[best];
  if (refine_idles) {
    const double lo = *std::min_element(idle_grid.begin(), idle_grid.end()) * 0.25;
    const double hi = *std::max_element(idle_grid.begin(), idle_grid.end()) * 4.0;
    res.best = refine_idle_times(res.best, moments, t_dec, lo, hi);
    res.t_eff = evaluate_strategy(res.best, moments, t_dec).t_eff;
  }
  if (keep_ranking) {
    std::vector<int> order(candidates.size());
    for (int i = 0; i < int(order.size()); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return t_effs[a] > t_effs[b]; });
    res.ranking.reserve(order.size());
    for (int i : order)
      res.ranking.push_back({strategy_to_sexp(candidates[i]), t_effs[i], mean_ts[i], branch_counts[i]});
  }
  return res;
}

namespace {

void collect_idle_slots(const StrategyPtr& tree, std::vector<const StrategyNode*>& nodes) {
  if (!tree) return;
  nodes.push_back(tree.get());
  for (const auto& c : tree->child)
    if (c.kind == StrategyChild::Kind::Subtree) collect_idle_slots(c.subtree, nodes);
}

StrategyPtr rebuild_with_idles(const StrategyPtr& tree, const std::vector<double>& idles, int& cursor) {
  auto node = std::make_shared<StrategyNode>(*tree);
  node->idle = idles[cursor++];
  for (auto& c : node->child)
    if (c.kind == StrategyChild::Kind::Subtree) c.subtree = rebuild_with_idles(c.subtree, idles, cursor);
  return node;
}

}  // namespace

StrategyPtr refine_idle_times(const StrategyPtr& tree, const std::vector<double>& moments, double t_dec,
                              double lo, double hi, int rounds) {
  std::vector<const StrategyNode*> nodes;
  collect_idle_slots(tree, nodes);
  std::vector<double> idles;
  for (const auto* n : nodes) idles.push_back(n->idle);
  auto rebuild = [&](const std::vector<double>& xs) {
    int cursor = 0;
    return rebuild_with_idles(tree, xs, cursor);
  };
  auto objective = [&](const std::vector<double>& xs) {
    return evaluate_strategy(rebuild(xs), moments, t_dec).t_eff;
  };
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  for (int round = 0; round < rounds; ++round) {
    for (std::size_t slot = 0; slot < idles.size(); ++slot) {
      double a = lo, b = hi;
      double x1 = b - invphi * (b - a), x2 = a + invphi * (b - a);
      auto eval_at = [&](double v) {
        std::vector<double> xs = idles;
        xs[slot] = v;
        return objective(xs);
      };
      double f1 = eval_at(x1), f2 = eval_at(x2);
      for (int it = 0; it < 24; ++it) {
        if (f1 > f2) {  // maximize
          b = x2;
          x2 = x1;
          f2 = f1;
          x1 = b - invphi * (b - a);
          f1 = eval_at(x1);
        } else {
          a = x1;
          x1 = x2;
          f1 = f2;
          x2 = a + invphi * (b - a);
          f2 = eval_at(x2);
        }
      }
      idles[slot] = 0.5 * (a + b);
    }
  }
  return rebuild(idles);
}

std::vector<double> default_idle_grid(double t_triv, int size) {
  std::vector<double> grid(size);
  const double lo = 0.01 * t_triv, hi = 1.0 * t_triv;
  for (int i = 0; i < size; ++i)
    grid[i] = lo * std::pow(hi / lo, size == 1 ? 0.0 : double(i) / (size - 1));
  return grid;
}

}  // namespace qfw::oracle
