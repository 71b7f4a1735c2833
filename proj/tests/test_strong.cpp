#include <gtest/gtest.h>

#include <vector>

#include "arctic/oracle.hpp"
#include "arctic/strong.hpp"
#include "arctic/weak.hpp"
#include "test_support.hpp"

using namespace arctic;
using arctic::test::make_instance;

namespace {

MarketState state_of(const MarketInstance& inst, std::vector<Rational> prices, std::vector<Rational> spending) {
  MarketState s = zero_state(inst);
  s.prices = std::move(prices);
  s.spending = std::move(spending);
  return s;
}

}  // namespace

TEST(Surplus, BudgetsMinusPrices) {
  auto inst = make_instance({2, 1}, {{1, 1}, {1, 0}});
  MarketState s = state_of(inst, {Rational(1, 2), Rational(1, 2)}, {Rational(0), Rational(0), Rational(0)});
  s.refunds = {Rational(0), Rational(0)};
  std::vector<std::size_t> none;
  auto singles = components_of_edges(inst, none);
  EXPECT_EQ(surplus(inst, s, singles[0]), Rational(2));        // singleton buyer: its budget
  EXPECT_EQ(surplus(inst, s, singles[2]), Rational(-1, 2));    // singleton good: minus its price
  std::vector<std::size_t> all{0, 1, 2};
  EXPECT_EQ(surplus(inst, s, components_of_edges(inst, all)[0]), Rational(2));  // 3 - 1
}

namespace {

bool has_reason(const std::vector<FertileComponent>& fertile, FertileReason reason) {
  for (const auto& f : fertile)
    if (f.reason == reason) return true;
  return false;
}

}  // namespace

TEST(Fertile, EagerSingletonBuyerNeedsRatioAboveOne) {
  auto inst = make_instance({5}, {{2}});  // n = 2, level Δ/12
  Rational delta(1);
  MarketState s = state_of(inst, {Rational(1)}, {Rational(4)});  // cash Δ, ratio 2, edge not abundant
  EXPECT_TRUE(has_reason(fertile_components(inst, s, delta), FertileReason::eager_singleton_buyer));
  s.prices = {Rational(2)};  // ratio 1 with cash 2
  s.spending = {Rational(3)};
  EXPECT_FALSE(has_reason(fertile_components(inst, s, delta), FertileReason::eager_singleton_buyer));
}

TEST(Fertile, NegativeSurplusBoundaryIsInclusive) {
  // n = 2 and Δ = 1/2: the edge with x = 3 = 3nΔ is abundant and the level
  // Δ/(3n^2) is 1/24, so the component is fertile iff p >= 3 + 1/24.
  auto inst = make_instance({3}, {{1}});
  MarketState s = state_of(inst, {Rational(3) + Rational(1, 24)}, {Rational(3)});
  Rational delta(1, 2);
  ASSERT_EQ(components_of_abundant_graph(inst, s, delta).size(), 1u);
  auto fertile = fertile_components(inst, s, delta);
  ASSERT_EQ(fertile.size(), 1u);
  EXPECT_EQ(fertile[0].reason, FertileReason::negative_surplus);
  s.prices = {Rational(3) + Rational(1, 25)};
  EXPECT_TRUE(fertile_components(inst, s, delta).empty());
}

TEST(CommitRefund, MovesCashIntoRefundsAtUnitRatio) {
  auto inst = make_instance({5}, {{2}});
  MarketState s = state_of(inst, {Rational(2)}, {Rational(2)});
  std::vector<std::size_t> support{0};
  Component h = components_of_edges(inst, support)[0];
  Rational before = surplus(inst, s, h);
  MarketState same = s;
  commit_refund(inst, same, 0, Rational(0));
  EXPECT_EQ(same, s);
  commit_refund(inst, s, 0, Rational(1));
  EXPECT_EQ(surplus(inst, s, h), before - Rational(1));
  commit_refund(inst, s, 0, effective_cash(inst, s, 0));
  EXPECT_EQ(effective_cash(inst, s, 0), Rational(0));
  EXPECT_THROW(commit_refund(inst, s, 0, Rational(1)), InvariantViolation);
  MarketState eager = state_of(inst, {Rational(1)}, {Rational(0)});
  EXPECT_THROW(commit_refund(inst, eager, 0, Rational(1)), InvariantViolation);
}

TEST(SpecialPrice, RaisesTheWholeMarketUntilTheTargetSurplus) {
  // One abundant edge, e = 3, p = 1, ratio 10: the surplus 3 - q reaches 0 at
  // q = 3, well before the buyer would become critical at q = 10.
  auto inst = make_instance({3}, {{10}});
  MarketState s = state_of(inst, {Rational(1)}, {Rational(3)});
  Rational delta(1, 2);
  auto comps = components_of_abundant_graph(inst, s, delta);
  ASSERT_EQ(comps.size(), 1u);
  SpecialPriceResult res = special_price(inst, s, delta, comps, 0, Rational(0));
  EXPECT_EQ(res.prices, (std::vector<Rational>{Rational(3)}));
  EXPECT_EQ(res.refunds, (std::vector<Rational>{Rational(0)}));
  EXPECT_TRUE(res.reached_target);
  EXPECT_FALSE(res.barrier_tight);
  EXPECT_LE(res.iterations, inst.num_nodes() + inst.num_buyers());
}

TEST(SpecialPrice, NoChangeWhenSurplusAlreadyAtTarget) {
  auto inst = make_instance({3}, {{10}});
  MarketState s = state_of(inst, {Rational(1)}, {Rational(3)});
  Rational delta(1, 2);
  auto comps = components_of_abundant_graph(inst, s, delta);
  SpecialPriceResult res = special_price(inst, s, delta, comps, 0, Rational(2));
  EXPECT_EQ(res.prices, s.prices);
  EXPECT_EQ(res.refunds, s.refunds);
  EXPECT_EQ(res.iterations, 0u);
}

TEST(SpecialPrice, CommitsRefundAtACriticalBuyer) {
  // Ratio 2 makes the buyer critical at q = 2 while the surplus is still 1;
  // the refund then absorbs the remaining surplus down to the target.
  auto inst = make_instance({3}, {{2}});
  MarketState s = state_of(inst, {Rational(1)}, {Rational(3)});
  Rational delta(1, 2);
  auto comps = components_of_abundant_graph(inst, s, delta);
  SpecialPriceResult res = special_price(inst, s, delta, comps, 0, Rational(0));
  EXPECT_EQ(res.prices, (std::vector<Rational>{Rational(2)}));
  EXPECT_EQ(res.refunds, (std::vector<Rational>{Rational(1)}));
  EXPECT_EQ(surplus(inst, res.prices, res.refunds, comps[0]), Rational(0));
}

TEST(AuxNetwork, MultipliersAlongPaths) {
  auto inst = make_instance({10}, {{2}});
  MarketState s = state_of(inst, {Rational(1)}, {Rational(9)});
  AuxNetwork aux = build_aux_network(inst, s, Rational(1));  // 3nΔ = 6 < 9
  std::size_t b = buyer_node(0), g = good_node(inst, 0);
  EXPECT_EQ(max_multiplier(aux, g, g), Rational(1));
  EXPECT_EQ(max_multiplier(aux, b, g), Rational(2));
  EXPECT_EQ(max_multiplier(aux, g, b), Rational(1, 2));
  EXPECT_FALSE(has_improving_cycle(aux));  // 2 * 1/2 = 1
}

TEST(AuxNetwork, DetectsACycleAboveOne) {
  AuxNetwork aux;
  aux.num_nodes = 2;
  aux.arcs = {{0, 1, Rational(2)}, {1, 0, Rational(3, 5)}};
  EXPECT_TRUE(has_improving_cycle(aux));
  EXPECT_THROW(max_multiplier(aux, 0, 1), InvariantViolation);
  aux.arcs[1].weight = Rational(1, 2);
  EXPECT_FALSE(has_improving_cycle(aux));
}

TEST(AuxNetwork, UnreachableNodeHasNoMultiplier) {
  auto inst = make_instance({1, 1}, {{1, 0}, {0, 1}});
  MarketState s = zero_state(inst);
  AuxNetwork aux = build_aux_network(inst, s, Rational(1));
  EXPECT_FALSE(max_multiplier(aux, buyer_node(0), good_node(inst, 1)));
}

TEST(GetParameter, SingletonBuyerContributesItsCash) {
  // n = 4, Δ = 64: b1 holds cash Δ/(4n^2) = 1 at ratio 2, below the
  // fertility level Δ/(3n^2) = 4/3.
  auto inst = make_instance({3, 1}, {{2, 0}, {0, 1}});
  MarketState s = state_of(inst, {Rational(1), Rational(1)}, {Rational(2), Rational(0)});
  Rational delta(64);
  auto comps = components_of_abundant_graph(inst, s, delta);
  ASSERT_TRUE(fertile_components(inst, s, delta, comps).empty());
  ParameterResult p = get_parameter(inst, s, delta, comps);
  EXPECT_EQ(p.per_component[0], Rational(1));  // b1: cash 1, ratio 2
  EXPECT_EQ(p.per_component[1], Rational(0));  // b2: ratio 1
  EXPECT_EQ(p.value, Rational(1));
}

TEST(GetPrices, BaselineWhenEverySurplusIsBelowTarget) {
  auto inst = make_instance({3}, {{10}});
  MarketState s = state_of(inst, {Rational(1)}, {Rational(3)});
  Rational delta(1, 2);
  auto comps = components_of_abundant_graph(inst, s, delta);
  PricesResult base = get_prices(inst, s, delta, comps, Rational(5));
  EXPECT_EQ(base.prices, s.prices);
  EXPECT_EQ(base.refunds, s.refunds);
  PricesResult raised = get_prices(inst, s, delta, comps, Rational(0));
  EXPECT_EQ(raised.prices, (std::vector<Rational>{Rational(3)}));
}

TEST(GetAllocations, SurplusGoesToTheBuyerRootAsCash) {
  auto inst = make_instance({5}, {{1, 1}});
  std::vector<std::size_t> forest{0, 1};
  auto comps = components_of_edges(inst, forest);
  std::vector<Rational> prices{Rational(2), Rational(2)}, refunds{Rational(0)};
  auto x = get_allocations(inst, prices, refunds, comps);
  EXPECT_EQ(x, (std::vector<Rational>{Rational(2), Rational(2)}));
  // Budget 7/2 leaves a deficit of 1/2 that the good root g1 absorbs.
  refunds[0] = Rational(3, 2);
  x = get_allocations(inst, prices, refunds, comps);
  EXPECT_EQ(x, (std::vector<Rational>{Rational(3, 2), Rational(2)}));
}

TEST(RunStrong, RefundSplitsBetweenCommittedAndBasic) {
  StrongResult res = run_strong(make_instance({3}, {{2}}));
  EXPECT_EQ(res.equilibrium.state, (MarketState{{Rational(2)}, {Rational(2)}, {Rational(1)}}));
}

TEST(RunStrong, MatchesWeakAndBruteForce) {
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    std::size_t buyers = 1 + seed % 3, goods = 1 + (seed / 3) % 3;
    auto inst = test::perturbed(test::random_instance(seed, buyers, goods, buyers + goods + seed % 3), seed);
    StrongResult strong = run_strong(inst);
    EXPECT_TRUE(strong.equilibrium.certificate.passed()) << "seed " << seed;
    EXPECT_EQ(strong.equilibrium.state, run_weak(inst).equilibrium.state) << "seed " << seed;
    EXPECT_EQ(strong.equilibrium.state, brute_force_equilibrium(inst).unique().state) << "seed " << seed;
    EXPECT_LE(strong.counters.abundant_discoveries, inst.num_nodes() - 1) << "seed " << seed;
    EXPECT_LE(strong.counters.phases, strong.phase_budget) << "seed " << seed;
  }
}

TEST(RunStrong, AuxiliaryNetworkHasNoImprovingCycleAtAnyRound) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto inst = test::perturbed(test::random_instance(seed, 3, 3, 7), seed);
    StrongOptions opt;
    std::size_t rounds = 0;
    opt.on_round_end = [&](const MarketInstance& in, const ScalingState& st) {
      ++rounds;
      EXPECT_FALSE(has_improving_cycle(build_aux_network(in, st.market, st.delta))) << "seed " << seed;
    };
    run_strong(inst, opt);
    EXPECT_GT(rounds, 0u);
  }
}
