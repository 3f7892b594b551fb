// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <set>

#include "doctest.h"
#include "helpers.hpp"
#include "qfw/oracles.hpp"

using namespace qfw;
using namespace qfw::oracle;
using qfw::test::idle_frame;

namespace {

// Alternating-axis cycle on one ancilla: measure y starting from +x.
StrategyPtr one_ancilla_cycle(double tau) {
  auto node = std::make_shared<StrategyNode>();
  node->idle = tau;
  node->qubit = 1;
  node->axis = PauliAxis::Y;
  node->child[0].kind = StrategyChild::Kind::End;
  node->child[1].kind = StrategyChild::Kind::End;
  return node;
}

}  // namespace

TEST_SUITE("oracle-analytic") {
  TEST_CASE("short intervals recover the trivial decay time") {
    // leading correction is 4 tau mu2^2 / (T_triv mu1^2)
    const double t_triv = 500.0;
    for (double ratio : {1.0, 2.0, 4.0}) {
      const auto a = analytic_two_qubit(5e-5 * t_triv, 1.0, ratio, t_triv);
      CHECK(std::abs(a.t_eff / t_triv - 1.0) < 5e-3);
    }
  }

  TEST_CASE("long intervals with strong ancilla coupling return to trivial") {
    const double t_triv = 500.0;
    const auto a = analytic_two_qubit(2.0 * t_triv, 1.0, 4.0, t_triv);
    CHECK(std::abs(a.t_eff / t_triv - 1.0) < 1e-6);
    CHECK(a.theta < 1e-6);
  }

  TEST_CASE("an interior optimum exists for mu2 = 4 mu1") {
    const double t_triv = 500.0;
    double best = 0.0;
    for (double tau = 0.005 * t_triv; tau < 0.5 * t_triv; tau *= 1.3)
      best = std::max(best, analytic_two_qubit(tau, 1.0, 4.0, t_triv).t_eff);
    CHECK(best > 1.2 * t_triv);
  }

  TEST_CASE("retention factor and angle stay in their ranges") {
    for (double tau : {1.0, 10.0, 100.0})
      for (double ratio : {0.5, 1.0, 3.0}) {
        const auto a = analytic_two_qubit(tau, 1.0, ratio, 500.0);
        CHECK(a.g > 0.0);
        CHECK(a.g <= 1.0 + 1e-12);
        CHECK(a.theta >= 0.0);
        CHECK(a.theta <= 1.5707963268);
        CHECK(a.t_eff >= a.t_triv - 1e-9);
      }
  }

  TEST_CASE("monte-carlo protocol simulation reproduces the closed form") {
    const double t_dec = 500.0 / 17.0;  // T_triv = 500 for moments (1, 4)
    const double t_triv = 500.0;
    const double tau = 25.0;
    const auto gen = build_generator(NoiseKind::CorrelatedDephasing, 2, t_dec, {1.0, 4.0});
    Rng rng(77);
    LogicalFrame f = LogicalFrame::initial(2, 0);
    // burn-in: first measurement throws the ancilla onto the equator
    f = idle_frame(f, gen, tau);
    auto msmt = [&](PauliAxis axis) {
      const Action a{axis == PauliAxis::X ? ActionKind::MeasureX : ActionKind::MeasureY, 1, -1, ""};
      const auto maps = step_maps(a, gen, 0.0);
      const auto [idx, p] = sample_branch(maps, f, rng);
      f = evolve_frame(f, maps[idx]);
    };
    msmt(PauliAxis::X);
    const double rq_start = recoverable_q_info(f, RqMethod::Equator).value;
    const int cycles = 40;
    for (int c = 0; c < cycles; ++c) {
      f = idle_frame(f, gen, tau);
      msmt(c % 2 == 0 ? PauliAxis::Y : PauliAxis::X);
    }
    const double rq_end = recoverable_q_info(f, RqMethod::Equator).value;
    const double t_eff_sim = -2.0 * (cycles * tau) / (std::log(rq_end) - std::log(rq_start));
    const auto a = analytic_two_qubit(tau, 1.0, 4.0, t_triv);
    CHECK(std::abs(t_eff_sim / a.t_eff - 1.0) < 0.01);
  }
}

TEST_SUITE("oracle-count") {
  TEST_CASE("base case and recursion values") {
    CHECK(strategy_count(1, 1) == "16");
    CHECK(strategy_count(2, 1) == "1296");
    CHECK(strategy_count(1, 2) == "32");
    CHECK(strategy_count(2, 2) == "9248");
    CHECK(strategy_count(1, 3) == "48");
    CHECK(strategy_count(2, 3) == "30000");
  }

  TEST_CASE("double-exponential lower bound") {
    for (int d = 1; d <= 4; ++d)
      for (int n = 1; n <= 4; ++n) {
        const unsigned __int128 count = strategy_count_raw(d, n);
        unsigned __int128 bound = 2;
        const long exponent = (1L << d) - 1;
        for (long e = 0; e < exponent; ++e) bound *= (unsigned __int128)(8 * n);
        CHECK(count >= bound);
      }
    CHECK_THROWS((void)strategy_count_raw(0, 1));
    CHECK_THROWS((void)strategy_count_raw(8, 4));  // overflows 128 bits
  }
}

TEST_SUITE("oracle-enumerate") {
  TEST_CASE("stream sizes match the recursion") {
    int count = 0;
    enumerate_strategies(1, {10.0}, [&](const StrategyPtr&) { ++count; });
    CHECK(count == 16);
    count = 0;
    enumerate_strategies(1, {5.0, 10.0}, [&](const StrategyPtr&) { ++count; });
    CHECK(count == 32);
    count = 0;
    enumerate_strategies(2, {7.0}, [&](const StrategyPtr&) { ++count; });
    CHECK(count == 1296);
  }

  TEST_CASE("every streamed tree satisfies the structural invariants") {
    int checked = 0;
    enumerate_strategies(2, {3.0}, [&](const StrategyPtr& t) {
      if (checked >= 200) return;
      CHECK(strategy_depth(t) <= 2);
      CHECK(strategy_depth(t) >= 1);
      CHECK((t->qubit == 1 || t->qubit == 2));
      for (const auto& c : t->child) {
        if (c.kind == StrategyChild::Kind::Immediate) CHECK(c.im_qubit == (t->qubit == 1 ? 2 : 1));
        CHECK(c.kind != StrategyChild::Kind::End);  // enumeration always terminates cycles
      }
      ++checked;
    });
    CHECK(checked == 200);
    CHECK_THROWS(enumerate_strategies(4, {1.0}, [](const StrategyPtr&) {}));
    CHECK_THROWS(enumerate_strategies(1, {}, [](const StrategyPtr&) {}));
  }
}

TEST_SUITE("oracle-evaluate") {
  TEST_CASE("measuring a decoupled ancilla is equivalent to idling") {
    // mu2 = 0: the ancilla carries no noise information, so any cycle built
    // on it decays at the trivial rate.
    const std::vector<double> moments = {1.0, 0.0};
    const double t_dec = 500.0;
    const auto eval = evaluate_strategy(one_ancilla_cycle(20.0), moments, t_dec);
    CHECK(std::abs(eval.t_eff / t_dec - 1.0) < 1e-9);
  }

  TEST_CASE("one-ancilla alternating cycle matches the analytic oracle") {
    const std::vector<double> moments = {1.0, 4.0};
    const double t_dec = 500.0 / 17.0;
    const double t_triv = 500.0;
    for (double tau : {5.0, 25.0, 80.0}) {
      const auto eval = evaluate_strategy(one_ancilla_cycle(tau), moments, t_dec);
      const auto a = analytic_two_qubit(tau, 1.0, 4.0, t_triv);
      CHECK(std::abs(eval.t_eff - a.t_eff) < 1e-6 * a.t_eff);
    }
  }

  TEST_CASE("branch probabilities sum to one on random depth-2 trees") {
    const std::vector<double> moments = {1.0, 3.7, 4.0};
    const double t_dec = 16.3;
    std::vector<StrategyPtr> all;
    enumerate_strategies(2, {4.0, 12.0}, [&](const StrategyPtr& t) { all.push_back(t); });
    Rng rng(3);
    for (int i = 0; i < 100; ++i) {
      const auto& tree = all[rng.next_u64() % all.size()];
      const auto eval = evaluate_strategy(tree, moments, t_dec);
      double sum = 0.0;
      for (const auto& b : eval.branches) {
        sum += b.p;
        CHECK(b.retention > 0.0);
        CHECK(b.retention <= 1.0);
      }
      CHECK(std::abs(sum - 1.0) < 1e-9);
    }
  }

  TEST_CASE("trees measuring outside the register are rejected") {
    CHECK_THROWS((void)evaluate_strategy(one_ancilla_cycle(5.0), {1.0}, 10.0));
  }

  TEST_CASE("mirrored fixed-first trees have symmetric outcome branches") {
    // root measures y; the conjugation symmetry swaps its outcomes
    auto plus_sub = std::make_shared<StrategyNode>();
    plus_sub->idle = 6.0;
    plus_sub->qubit = 2;
    plus_sub->axis = PauliAxis::Y;
    plus_sub->child[0] = {StrategyChild::Kind::Immediate, nullptr, 1, PauliAxis::X};
    plus_sub->child[1] = {StrategyChild::Kind::Immediate, nullptr, 1, PauliAxis::Y};
    auto root = std::make_shared<StrategyNode>();
    root->idle = 10.0;
    root->qubit = 1;
    root->axis = PauliAxis::Y;
    root->child[0] = {StrategyChild::Kind::Subtree, plus_sub, -1, PauliAxis::X};
    root->child[1] = {StrategyChild::Kind::Subtree, mirror_strategy(plus_sub), -1, PauliAxis::X};

    const std::vector<double> moments = {1.0, 3.8, 4.1};
    const auto eval = evaluate_strategy(StrategyPtr(root), moments, 15.0);
    // group leaf stats by outcome sign of the root: the two halves mirror
    double p_plus = 0.0, p_minus = 0.0, lng_plus = 0.0, lng_minus = 0.0;
    const std::size_t half = eval.branches.size() / 2;
    for (std::size_t i = 0; i < eval.branches.size(); ++i) {
      const auto& b = eval.branches[i];
      if (i < half) {
        p_plus += b.p;
        lng_plus += b.p * std::log(b.retention);
      } else {
        p_minus += b.p;
        lng_minus += b.p * std::log(b.retention);
      }
    }
    CHECK(std::abs(p_plus - p_minus) < 1e-9);
    CHECK(std::abs(lng_plus - lng_minus) < 1e-9);
  }
}

TEST_SUITE("oracle-search") {
  TEST_CASE("depth-1 winner sits at the grid point nearest the analytic optimum") {
    // third qubit essentially decoupled: the system reduces to 1+1
    const std::vector<double> moments = {1.0, 4.0, 1e-6};
    const double t_triv_2q = 500.0;
    const double t_dec = t_triv_2q / 17.0;
    double best_tau = 0.0, best_val = 0.0;
    for (double tau = 1.0; tau < 200.0; tau += 0.25) {
      const double v = analytic_two_qubit(tau, 1.0, 4.0, t_triv_2q).t_eff;
      if (v > best_val) {
        best_val = v;
        best_tau = tau;
      }
    }
    const std::vector<double> grid = {0.3 * best_tau, 0.7 * best_tau, 1.05 * best_tau,
                                      1.6 * best_tau, 2.4 * best_tau};
    const auto res = brute_force_search(1, grid, moments, t_dec, false, false, true);
    CHECK(res.best->idle == doctest::Approx(1.05 * best_tau));
    CHECK(res.best->qubit == 1);
    CHECK(res.t_eff > t_triv_2q);
    CHECK(res.ranking.front().t_eff == doctest::Approx(res.t_eff));
    CHECK(res.ranking.size() == 5 * 16);
    for (std::size_t i = 1; i < res.ranking.size(); ++i)
      CHECK(res.ranking[i - 1].t_eff >= res.ranking[i].t_eff);
  }

  TEST_CASE("swapping identical ancilla labels leaves the best value unchanged") {
    const double t_dec = 12.0;
    const std::vector<double> grid = {5.0, 15.0};
    const auto a = brute_force_search(1, grid, {1.0, 3.7, 4.0}, t_dec, false, false, false);
    const auto b = brute_force_search(1, grid, {1.0, 4.0, 3.7}, t_dec, false, false, false);
    CHECK(std::abs(a.t_eff - b.t_eff) < 1e-9);
  }

  TEST_CASE("degenerate single-point grid equals the best of sixteen evaluations") {
    const std::vector<double> moments = {1.0, 2.5, 3.5};
    const double t_dec = 9.0;
    const std::vector<double> grid = {11.0};
    const auto res = brute_force_search(1, grid, moments, t_dec, false, false, true);
    double best = 0.0;
    enumerate_strategies(1, grid, [&](const StrategyPtr& t) {
      best = std::max(best, evaluate_strategy(t, moments, t_dec).t_eff);
    });
    CHECK(res.t_eff == doctest::Approx(best).epsilon(1e-12));
    CHECK(res.ranking.size() == 16);
  }

  TEST_CASE("improvement over the trivial decay is never negative") {
    const std::vector<double> moments = {1.0, 1.8, 2.2};
    const double t_dec = 10.0;
    double norm2 = 0.0;
    for (double m : moments) norm2 += m * m;
    const double t_triv = t_dec * norm2;
    const auto res =
        brute_force_search(1, {0.1 * t_triv, 0.3 * t_triv}, moments, t_dec, false, false, false);
    CHECK(res.t_eff / t_triv >= 1.0 - 1e-9);
  }

  TEST_CASE("fixed-first search agrees with the exhaustive one on its subspace") {
    const std::vector<double> moments = {1.0, 4.0, 0.5};
    const double t_dec = 11.0;
    const std::vector<double> grid = {8.0, 20.0};
    const auto fixed = brute_force_search(1, grid, moments, t_dec, true, false, false);
    // exhaustive best over trees whose root measures ancilla 1 along y
    double best = 0.0;
    enumerate_strategies(1, grid, [&](const StrategyPtr& t) {
      if (t->qubit != 1 || t->axis != PauliAxis::Y) return;
      best = std::max(best, evaluate_strategy(t, moments, t_dec).t_eff);
    });
    CHECK(fixed.t_eff >= best - 1e-9);
  }

  TEST_CASE("idle refinement can only improve the winner") {
    const std::vector<double> moments = {1.0, 4.0, 1e-6};
    const double t_dec = 500.0 / 17.0;
    const std::vector<double> grid = {10.0, 40.0};
    const auto coarse = brute_force_search(1, grid, moments, t_dec, false, false, false);
    const auto refined = brute_force_search(1, grid, moments, t_dec, false, true, false);
    CHECK(refined.t_eff >= coarse.t_eff - 1e-9);
  }

  TEST_CASE("infeasible searches abort with guidance") {
    std::vector<double> grid(12);
    for (int i = 0; i < 12; ++i) grid[i] = 1.0 + i;
    CHECK_THROWS((void)brute_force_search(3, grid, {1.0, 2.0, 3.0}, 5.0, false, false, false));
  }
}
