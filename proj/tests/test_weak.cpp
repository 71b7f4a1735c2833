#include <gtest/gtest.h>

#include <vector>

#include "arctic/oracle.hpp"
#include "arctic/weak.hpp"
#include "test_support.hpp"

using namespace arctic;
using arctic::test::make_instance;

namespace {

// A scaling state with hand-picked prices and spending. Initial prices equal
// the given prices, so the backorder condition of feasibility is vacuous.
ScalingState state_of(const MarketInstance& inst, std::vector<Rational> prices, std::vector<Rational> spending,
                      Rational delta) {
  ScalingState st;
  st.market = zero_state(inst);
  st.market.prices = std::move(prices);
  st.market.spending = std::move(spending);
  st.delta = std::move(delta);
  st.initial_prices = st.market.prices;
  st.exempt.assign(inst.num_edges(), 0);
  return st;
}

std::vector<Rational> backorders(const MarketInstance& inst, const MarketState& s) {
  std::vector<Rational> out;
  for (std::size_t j = 0; j < inst.num_goods(); ++j) out.push_back(backorder(inst, s, j));
  return out;
}

}  // namespace

TEST(Initialize, CappedProportionalPrices) {
  // U = (2, 6), e = 4, n = 3: U_iG = 8, rho = (1/3, 1), both below U/2.
  auto inst = make_instance({4}, {{2, 6}});
  ScalingState st = initialize(inst);
  EXPECT_EQ(st.delta, Rational(4));
  EXPECT_EQ(st.market.prices, (std::vector<Rational>{Rational(1, 3), Rational(1)}));
  EXPECT_TRUE(is_delta_feasible(inst, st).ok());
  EXPECT_LE(potential(inst, st), static_cast<long>(inst.num_buyers()));
}

TEST(Initialize, SharedGoodTakesTheLargerCandidate) {
  // n = 3. b1: min(1*2/(3*1), 1/2) = 1/2. b2: min(4*3/(3*4), 2) = 1.
  auto inst = make_instance({2, 3}, {{1}, {4}});
  EXPECT_EQ(initialize(inst).market.prices[0], Rational(1));
}

TEST(Initialize, CapKeepsPricesBelowTheEquilibrium) {
  // b1 alone on g1 with e = 10, U = 1 and n = 5: the uncapped formula gives
  // p0 = 2 while the equilibrium price is 1 (b1 refunds 9).
  auto inst = make_instance({10, 1}, {{1, 0, 0}, {0, 1, 1}});
  EXPECT_LE(initialize(inst).market.prices[0], Rational(1, 2));
}

TEST(Feasibility, SpendingMustBeAMultipleOfDelta) {
  auto inst = make_instance({4}, {{1}});
  ScalingState st = state_of(inst, {Rational(1)}, {Rational(1, 2)}, Rational(1));
  FeasibilityReport rep = is_delta_feasible(inst, st);
  ASSERT_EQ(rep.violations.size(), 1u);
  EXPECT_NE(rep.violations[0].find("multiple"), std::string::npos);
}

TEST(Feasibility, NegativeBackorderAllowedAtTheInitialPrice) {
  auto inst = make_instance({4}, {{1}});
  ScalingState st = state_of(inst, {Rational(3)}, {Rational(1)}, Rational(1));
  EXPECT_TRUE(backorder(inst, st.market, 0).is_negative());
  EXPECT_TRUE(is_delta_feasible(inst, st).ok());
  st.market.prices[0] = Rational(4);
  EXPECT_FALSE(is_delta_feasible(inst, st).ok());
}

TEST(Optimality, CashBelowDeltaIsStrict) {
  auto inst = make_instance({4}, {{1}});
  Rational delta(2);
  ScalingState st = state_of(inst, {Rational(4)}, {Rational(2)}, delta);  // cash 2
  EXPECT_FALSE(is_delta_optimal(inst, st));
  st.market.spending[0] = Rational(2) + delta / Rational(2);  // cash Δ - Δ/n with n = 2
  EXPECT_TRUE(is_delta_optimal(inst, st));
  st.market.spending[0] = Rational(4);
  EXPECT_TRUE(is_delta_optimal(inst, st));
}

TEST(Potential, SumsFlooredCash) {
  // Cash (5/2, 3/10) at Δ = 1 floors to 2 + 0.
  auto inst = make_instance({3, 1}, {{1}, {1}});
  ScalingState st = state_of(inst, {Rational(1)}, {Rational(1, 2), Rational(7, 10)}, Rational(1));
  EXPECT_EQ(potential(inst, st), 2);
  st.delta = Rational(3);
  EXPECT_EQ(potential(inst, st), 0);
}

TEST(UpdatePriceStar, LoneBuyerStopsWhenCritical) {
  auto inst = make_instance({10}, {{3}});
  ScalingState st = state_of(inst, {Rational(1)}, {Rational(0)}, Rational(1));
  PriceUpdate up = update_price_star(inst, st, 0);
  EXPECT_EQ(up.event.kind, EventKind::buyer_critical);
  EXPECT_EQ(up.event.multiplier, Rational(3));
  EXPECT_EQ(up.prices[0], Rational(3));
}

TEST(UpdatePriceStar, BackorderZeroAtSpendingOverPrice) {
  // x = 2p on the active good, alpha = 3: the backorder hits zero first at q = 2.
  auto inst = make_instance({10}, {{3}});
  ScalingState st = state_of(inst, {Rational(1)}, {Rational(2)}, Rational(1));
  PriceUpdate up = update_price_star(inst, st, 0);
  EXPECT_EQ(up.event.kind, EventKind::good_backorder_zero);
  EXPECT_EQ(up.event.multiplier, Rational(2));
}

TEST(UpdatePriceStar, NewEqualityEdgeAtRatioOfRatios) {
  // b1 has ratio 3 on g1 and 2 on g2, so g2 joins at q = 3/2.
  auto inst = make_instance({10}, {{3, 2}});
  ScalingState st = state_of(inst, {Rational(1), Rational(1)}, {Rational(0), Rational(0)}, Rational(1));
  PriceUpdate up = update_price_star(inst, st, 0);
  EXPECT_EQ(up.event.kind, EventKind::new_equality_edge);
  EXPECT_EQ(up.event.multiplier, Rational(3, 2));
  EXPECT_EQ(up.prices, (std::vector<Rational>{Rational(3, 2), Rational(1)}));
}

TEST(PriceAndAugment, GoodTerminalRaisesOneBackorderByDelta) {
  auto inst = make_instance({4}, {{2, 6}});
  ScalingState st = initialize(inst);
  auto before = backorders(inst, st.market);
  long phi = potential(inst, st);
  AugmentOutcome out = price_and_augment(inst, st);
  EXPECT_FALSE(out.buyer_terminal);
  auto after = backorders(inst, st.market);
  EXPECT_EQ(after[out.terminal], before[out.terminal] + st.delta);
  for (std::size_t j = 0; j < after.size(); ++j)
    if (j != out.terminal) {
      EXPECT_EQ(after[j], before[j]);
    }
  EXPECT_EQ(potential(inst, st), phi - 1);
  EXPECT_TRUE(is_delta_feasible(inst, st).ok());
}

TEST(PriceAndAugment, BuyerTerminalMovesOnlyRootCash) {
  // b2 sits at ratio 1 with spending Δ; b1 reaches it through g1 and the
  // augmentation ends in a refund at b2.
  auto inst = make_instance({2, 1}, {{4}, {1}});
  ScalingState st = state_of(inst, {Rational(1)}, {Rational(0), Rational(1)}, Rational(1));
  auto before = backorders(inst, st.market);
  Rational cash_root = effective_cash(inst, st.market, 0), cash_other = effective_cash(inst, st.market, 1);
  long phi = potential(inst, st);
  AugmentOutcome out = price_and_augment(inst, st);
  ASSERT_TRUE(out.buyer_terminal);
  EXPECT_EQ(out.terminal, 1u);
  EXPECT_EQ(backorders(inst, st.market), before);
  EXPECT_EQ(effective_cash(inst, st.market, 0), cash_root - st.delta);
  EXPECT_EQ(effective_cash(inst, st.market, 1), cash_other);
  EXPECT_EQ(st.market.refunds[1], Rational(1));
  EXPECT_EQ(potential(inst, st), phi - 1);
}

TEST(PriceAndAugment, BackwardArcBelowDeltaIsRejected) {
  MarketState s{{Rational(1)}, {Rational(1, 2)}, {Rational(0)}};
  std::vector<Arc> path{Arc{1, 0, 0, false}};
  EXPECT_THROW(augment(s, path, Rational(1)), InvariantViolation);
}

TEST(RefundStep, ClearsExactlyDeltaOfCash) {
  auto inst = make_instance({3, 5}, {{1}, {2}});
  ScalingState st = state_of(inst, {Rational(1)}, {Rational(2), Rational(0)}, Rational(1));  // b1 at ratio 1, cash 1
  long phi = potential(inst, st);
  Rational other = effective_cash(inst, st.market, 1);
  refund_step(inst, st, 0);
  EXPECT_EQ(effective_cash(inst, st.market, 0), Rational(0));
  EXPECT_EQ(effective_cash(inst, st.market, 1), other);
  EXPECT_EQ(potential(inst, st), phi - 1);
  EXPECT_THROW(refund_step(inst, st, 1), InvariantViolation);  // ratio 2
}

TEST(HalveAndRepair, TrimsOnlyBackordersAboveTheNewDelta) {
  // g1: b = Δ is trimmed to Δ/2. g2: b = Δ/2 is left alone.
  auto inst = make_instance({10}, {{1, 1}});
  ScalingState st = state_of(inst, {Rational(1), Rational(3, 2)}, {Rational(2), Rational(2)}, Rational(1));
  std::vector<std::size_t> repaired = halve_and_repair(inst, st);
  EXPECT_EQ(st.delta, Rational(1, 2));
  EXPECT_EQ(repaired, (std::vector<std::size_t>{0}));
  EXPECT_EQ(backorder(inst, st.market, 0), Rational(1, 2));
  EXPECT_EQ(backorder(inst, st.market, 1), Rational(1, 2));
  EXPECT_EQ(st.market.spending[0], Rational(3, 2));
  EXPECT_TRUE(st.market.spending[0].is_positive());
}

TEST(RunWeak, SingleEdgeEquilibria) {
  auto spend_all = run_weak(make_instance({1}, {{2}}));
  EXPECT_EQ(spend_all.equilibrium.state, (MarketState{{Rational(1)}, {Rational(1)}, {Rational(0)}}));
  auto refund = run_weak(make_instance({3}, {{2}}));
  EXPECT_EQ(refund.equilibrium.state, (MarketState{{Rational(2)}, {Rational(2)}, {Rational(1)}}));
}

TEST(RunWeak, TwoBuyersOneGoodMatchesTheOracle) {
  auto inst = test::perturbed(make_instance({1, 1}, {{3}, {3}}), 2);
  WeakResult res = run_weak(inst);
  const Equilibrium& oracle = brute_force_equilibrium(inst).unique();
  EXPECT_EQ(res.equilibrium.state, oracle.state);
  EXPECT_EQ(res.equilibrium.state.prices[0], Rational(2));
  EXPECT_EQ(res.equilibrium.state.spending, (std::vector<Rational>{Rational(1), Rational(1)}));
}

TEST(RunWeak, AgreesWithBruteForceAndKeepsItsInvariants) {
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    std::size_t buyers = 1 + seed % 3, goods = 1 + (seed / 3) % 3;
    auto inst = test::perturbed(test::random_instance(seed, buyers, goods, buyers + goods + seed % 3), seed);
    WeakResult res = run_weak(inst);
    EXPECT_TRUE(res.equilibrium.certificate.passed()) << "seed " << seed;
    EXPECT_EQ(res.equilibrium.state, brute_force_equilibrium(inst).unique().state) << "seed " << seed;
    for (const Violation& v : res.diagnostics.violations)
      EXPECT_EQ(v.category, "phases") << "seed " << seed << ": " << v.message;
    for (const TraceRow& row : res.trace.rows)
      if (is_inner_step(row.kind)) {
        EXPECT_EQ(row.phi_after, row.phi_before - 1) << "seed " << seed;
      }
  }
}
