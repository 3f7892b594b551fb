// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "qfw/metrics.hpp"
#include "qfw/qmem.hpp"

namespace qfw::oracle {

struct TwoQubitAnalytic {
  double tau = 0.0;
  double mu_ratio = 0.0;
  double t_triv = 0.0;
  double theta = 0.0;  // Bayesian correction angle
  double g = 0.0;      // coherence retention per cycle
  double t_eff = 0.0;
};

// Closed-form effective decay time of the alternating-axis protocol on one
// data qubit plus one ancilla under collective dephasing.
TwoQubitAnalytic analytic_two_qubit(double tau, double mu1, double mu2, double t_triv);

// Adaptive measurement decision tree. A cycle starts right after all
// ancillas were measured (convention: every ancilla at +x); each node idles,
// measures one ancilla along x or y, and branches on the outcome. A branch
// either recurses, ends the cycle with a quasi-instantaneous measurement on
// the other ancilla, or simply ends (single-ancilla protocols).
struct StrategyNode;
using StrategyPtr = std::shared_ptr<const StrategyNode>;

struct StrategyChild {
  enum class Kind { Subtree, Immediate, End } kind = Kind::End;
  StrategyPtr subtree;
  int im_qubit = -1;
  PauliAxis im_axis = PauliAxis::X;
};

struct StrategyNode {
  double idle = 0.0;
  int qubit = 1;
  PauliAxis axis = PauliAxis::X;
  StrategyChild child[2];  // outcome +, outcome -
};

int strategy_depth(const StrategyPtr& tree);
std::string strategy_to_sexp(const StrategyPtr& tree);
// Swaps the two outcome branches at every node (the reflection image).
StrategyPtr mirror_strategy(const StrategyPtr& tree);

// N_1 = 16 n, N_{d+1} = 4 n (N_d + 2)^2, as a decimal string. Throws on
// 128-bit overflow.
std::string strategy_count(int depth, int grid_size);
unsigned __int128 strategy_count_raw(int depth, int grid_size);

// Streams every decision tree of the given depth over two ancillas
// (qubits 1 and 2). The stream holds exactly strategy_count(depth, |grid|)
// trees. depth <= 3 enforced.
void enumerate_strategies(int depth, const std::vector<double>& idle_grid,
                          const std::function<void(const StrategyPtr&)>& sink);

struct StrategyEvaluation {
  struct Branch {
    double p = 0.0;
    double duration = 0.0;
    double retention = 0.0;  // G_j
  };
  std::vector<Branch> branches;
  double t_eff = 0.0;
  double dropped_mass = 0.0;
};

// Exact evaluation by frame evolution: branch probabilities, durations and
// retention factors, then T_eff = -2 <T> / <ln G>.
StrategyEvaluation evaluate_strategy(const StrategyPtr& tree, const std::vector<double>& moments,
                                     double t_dec);

struct SearchResult {
  StrategyPtr best;
  double t_eff = 0.0;
  struct Entry {
    std::string sexp;
    double t_eff;
    double mean_duration;
    int branch_count;
  };
  std::vector<Entry> ranking;  // descending T_eff
};

// Exhaustive search over the restricted space. With fixed_first the first
// measurement is pinned (largest-moment ancilla, axis orthogonal to its +x
// start) and the two outcome subtrees are searched independently, the
// losing side being the mirror image of the winner.
SearchResult brute_force_search(int depth, const std::vector<double>& idle_grid,
                                const std::vector<double>& moments, double t_dec, bool fixed_first,
                                bool refine_idles = false, bool keep_ranking = true);

// Coordinate-wise golden-section refinement of every idle slot of a tree.
StrategyPtr refine_idle_times(const StrategyPtr& tree, const std::vector<double>& moments, double t_dec,
                              double lo, double hi, int rounds = 2);

std::vector<double> default_idle_grid(double t_triv, int size = 12);

}  // namespace qfw::oracle
