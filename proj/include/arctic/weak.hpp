#pragma once

// Δ-scaling solver. Spending moves in units of Δ along residual paths of the
// equality graph, prices of the active region rise until a path to a deficit
// good or an indifferent buyer opens, and Δ is halved once every buyer holds
// less than Δ of unspent cash. The inner loop here is shared with the strong
// solver, which runs it on budgets reduced by committed refunds.

#include <algorithm>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "basic_solution.hpp"
#include "graph.hpp"
#include "instance.hpp"
#include "oracle.hpp"
#include "rational.hpp"
#include "trace.hpp"

namespace arctic {

struct ScalingState {
  MarketState market;
  Rational delta;
  std::vector<Rational> initial_prices;
  // Edges whose spending need not be a multiple of Δ. The strong solver sets
  // these after rebuilding spending from a tree flow.
  std::vector<char> exempt;
};

enum class EventKind { new_equality_edge, good_backorder_zero, buyer_critical };

inline const char* to_string(EventKind k) {
  switch (k) {
    case EventKind::new_equality_edge: return "new_equality_edge";
    case EventKind::good_backorder_zero: return "good_backorder_zero";
    case EventKind::buyer_critical: return "buyer_critical";
  }
  return "unknown";
}

struct StopEvent {
  EventKind kind;
  std::size_t subject;  // edge id, good, or buyer depending on the kind
  Rational multiplier;
};

struct PriceUpdate {
  std::vector<Rational> prices;
  StopEvent event;
};

// Δ0 = e_max and p0_j = max_i min(rho_ij, U_ij / 2) with
// rho_ij = U_ij e_i / (n U_iG), no spending, no refunds.
// The cap keeps p0 below the equilibrium prices: if p*_j < min(rho_ij, U_ij)
// then buyer i has bang-per-buck above max(1, n U_iG / e_i), spends all of
// e_i, and yet its equality goods would be priced below e_i / n in total.
// Halving U_ij leaves the buyer strictly eager for the good at p0, so it is
// never refunded while the good is still unsold at its initial price.
inline ScalingState initialize(const MarketInstance& inst) {
  ScalingState st;
  st.market = zero_state(inst);
  st.delta = compute_stats(inst).e_max;
  const Rational n(static_cast<long>(inst.num_nodes()));
  std::vector<std::optional<Rational>> p0(inst.num_goods());
  for (std::size_t i = 0; i < inst.num_buyers(); ++i) {
    Rational total_utility;
    for (std::size_t e : inst.buyer_edges(i)) total_utility += inst.edge(e).utility;
    for (std::size_t e : inst.buyer_edges(i)) {
      Rational rho = min(inst.edge(e).utility * inst.budget(i) / (n * total_utility), inst.edge(e).utility / Rational(2));
      auto& slot = p0[inst.edge(e).good];
      if (!slot || rho > *slot) slot = rho;
    }
  }
  for (std::size_t j = 0; j < inst.num_goods(); ++j) st.market.prices[j] = *p0[j];
  st.initial_prices = st.market.prices;
  st.exempt.assign(inst.num_edges(), 0);
  return st;
}

struct FeasibilityReport {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

inline FeasibilityReport is_delta_feasible(const MarketInstance& inst, const ScalingState& st) {
  FeasibilityReport rep;
  const MarketState& s = st.market;
  for (std::size_t i = 0; i < inst.num_buyers(); ++i) {
    if (s.refunds[i].is_negative()) rep.violations.push_back("negative refund at " + inst.buyer_id(i));
    if (effective_cash(inst, s, i).is_negative()) rep.violations.push_back("negative cash at " + inst.buyer_id(i));
  }
  for (std::size_t j = 0; j < inst.num_goods(); ++j) {
    if (s.prices[j] <= st.initial_prices[j]) continue;
    Rational b = backorder(inst, s, j);
    if (b.is_negative() || b > st.delta) rep.violations.push_back("backorder out of range at " + inst.good_id(j));
  }
  BangPerBuck bpb = compute_bang_per_buck(inst, s.prices);
  for (std::size_t e = 0; e < inst.num_edges(); ++e) {
    const Rational& x = s.spending[e];
    std::string name = inst.buyer_id(inst.edge(e).buyer) + "/" + inst.good_id(inst.edge(e).good);
    if (x.is_negative()) rep.violations.push_back("negative spending on " + name);
    if (!x.is_positive()) continue;
    if (!bpb.equality[e]) rep.violations.push_back("spending off the equality graph on " + name);
    bool exempt = !st.exempt.empty() && st.exempt[e];
    if (!exempt && !(x / st.delta).is_integer()) rep.violations.push_back("spending not a multiple of delta on " + name);
  }
  return rep;
}

inline bool is_delta_optimal(const MarketInstance& inst, const ScalingState& st) {
  for (std::size_t i = 0; i < inst.num_buyers(); ++i)
    if (effective_cash(inst, st.market, i) >= st.delta) return false;
  return true;
}

// Sum over buyers of floor(c̄_i / Δ).
inline long potential(const MarketInstance& inst, const ScalingState& st) {
  mpz_class total = 0;
  for (std::size_t i = 0; i < inst.num_buyers(); ++i) total += (effective_cash(inst, st.market, i) / st.delta).floor();
  return total.get_si();
}

namespace detail {

// Active region of `root` in the residual network. Backward arcs need at
// least Δ of spending so that pushing Δ back never goes negative.
inline Reachability active_region(const MarketInstance& inst, const ScalingState& st, const BangPerBuck& bpb,
                                  std::size_t root) {
  return active_set(residual_network(inst, st.market, bpb, st.delta), {buyer_node(root)});
}

inline StopEvent next_price_event(const MarketInstance& inst, const MarketState& s, const BangPerBuck& bpb,
                                  const Reachability& reach) {
  std::optional<StopEvent> best;
  auto consider = [&](EventKind kind, std::size_t subject, Rational q) {
    if (!best || q < best->multiplier) best = StopEvent{kind, subject, std::move(q)};
  };
  for (std::size_t e = 0; e < inst.num_edges(); ++e) {
    const Edge& edge = inst.edge(e);
    if (reach.contains(buyer_node(edge.buyer)) && !reach.contains(good_node(inst, edge.good)))
      consider(EventKind::new_equality_edge, e, bpb.alpha[edge.buyer] * s.prices[edge.good] / edge.utility);
  }
  for (std::size_t j = 0; j < inst.num_goods(); ++j) {
    if (!reach.contains(good_node(inst, j))) continue;
    Rational q = total_received(inst, s, j) / s.prices[j];
    if (q >= Rational(1)) consider(EventKind::good_backorder_zero, j, std::move(q));
  }
  for (std::size_t i = 0; i < inst.num_buyers(); ++i)
    if (reach.contains(buyer_node(i)) && bpb.alpha[i] > Rational(1)) consider(EventKind::buyer_critical, i, bpb.alpha[i]);
  if (!best) throw InvariantViolation("price update found no event");
  return *best;
}

inline std::vector<Rational> scaled_prices(const MarketInstance& inst, const MarketState& s, const Reachability& reach,
                                           const Rational& q) {
  std::vector<Rational> prices = s.prices;
  for (std::size_t j = 0; j < inst.num_goods(); ++j)
    if (reach.contains(good_node(inst, j))) prices[j] *= q;
  return prices;
}

}  // namespace detail

// Raises the prices of the active goods of `root` by the smallest multiplier
// at which an event fires.
inline PriceUpdate update_price_star(const MarketInstance& inst, const ScalingState& st, std::size_t root) {
  BangPerBuck bpb = compute_bang_per_buck(inst, st.market.prices);
  Reachability reach = detail::active_region(inst, st, bpb, root);
  StopEvent ev = detail::next_price_event(inst, st.market, bpb, reach);
  return {detail::scaled_prices(inst, st.market, reach, ev.multiplier), ev};
}

// Shifts Δ of spending along `path`.
inline void augment(MarketState& s, const std::vector<Arc>& path, const Rational& delta) {
  for (const Arc& a : path) {
    if (a.forward) {
      s.spending[a.edge] += delta;
    } else {
      if (s.spending[a.edge] < delta) throw InvariantViolation("backward arc below delta");
      s.spending[a.edge] -= delta;
    }
  }
}

struct AugmentOutcome {
  std::size_t root = 0;
  bool buyer_terminal = false;
  std::size_t terminal = 0;  // buyer or good
  std::size_t price_updates = 0;
  std::size_t path_length = 0;
};

struct InnerLoopOptions {
  bool check_genericity = true;
};

inline AugmentOutcome price_and_augment(const MarketInstance& inst, ScalingState& st,
                                        const InnerLoopOptions& opt = {}) {
  MarketState& s = st.market;
  AugmentOutcome out;
  BangPerBuck bpb = compute_bang_per_buck(inst, s.prices);
  std::optional<std::size_t> root;
  for (std::size_t i = 0; i < inst.num_buyers() && !root; ++i)
    if (effective_cash(inst, s, i) >= st.delta && bpb.alpha[i] > Rational(1)) root = i;
  if (!root) throw InvariantViolation("price_and_augment without an eligible root");
  out.root = *root;

  while (true) {
    Reachability reach = detail::active_region(inst, st, bpb, *root);
    std::optional<std::size_t> critical, deficit;
    for (std::size_t i = 0; i < inst.num_buyers() && !critical; ++i)
      if (reach.contains(buyer_node(i)) && bpb.alpha[i] == Rational(1)) critical = i;
    if (!critical)
      for (std::size_t j = 0; j < inst.num_goods() && !deficit; ++j)
        if (reach.contains(good_node(inst, j)) && !backorder(inst, s, j).is_positive()) deficit = j;
    if (critical || deficit) {
      std::size_t target = critical ? buyer_node(*critical) : good_node(inst, *deficit);
      std::vector<Arc> path = reach.path_to(target);
      augment(s, path, st.delta);
      if (critical) s.refunds[*critical] += st.delta;
      out.buyer_terminal = critical.has_value();
      out.terminal = critical ? *critical : *deficit;
      out.path_length = path.size();
      return out;
    }
    StopEvent ev = detail::next_price_event(inst, s, bpb, reach);
    s.prices = detail::scaled_prices(inst, s, reach, ev.multiplier);
    ++out.price_updates;
    if (opt.check_genericity && !check_genericity(inst, s.prices).passed())
      throw GenericityViolation("equality graph lost genericity during a price update");
    bpb = compute_bang_per_buck(inst, s.prices);
  }
}

inline void refund_step(const MarketInstance& inst, ScalingState& st, std::size_t buyer) {
  if (bang_per_buck(inst, st.market.prices, buyer) > Rational(1) || effective_cash(inst, st.market, buyer) < st.delta)
    throw InvariantViolation("refund step precondition violated at " + inst.buyer_id(buyer));
  st.market.refunds[buyer] += st.delta;
}

// Halves Δ and trims goods whose backorder exceeds the new Δ by taking Δ/2
// from the smallest buyer spending on them. Returns the trimmed goods.
inline std::vector<std::size_t> halve_and_repair(const MarketInstance& inst, ScalingState& st) {
  st.delta /= Rational(2);
  std::vector<std::size_t> repaired;
  for (std::size_t j = 0; j < inst.num_goods(); ++j) {
    if (backorder(inst, st.market, j) <= st.delta) continue;
    std::optional<std::size_t> edge;
    for (std::size_t e : inst.good_edges(j))
      if (st.market.spending[e].is_positive()) {
        edge = e;
        break;
      }
    if (!edge || st.market.spending[*edge] < st.delta)
      throw InvariantViolation("halving found no spending to trim at " + inst.good_id(j));
    st.market.spending[*edge] -= st.delta;
    repaired.push_back(j);
  }
  return repaired;
}

inline std::string edge_name(const MarketInstance& inst, std::size_t e) {
  return inst.buyer_id(inst.edge(e).buyer) + "/" + inst.good_id(inst.edge(e).good);
}

struct ScalingCounters {
  std::size_t phases = 0;
  std::size_t augmentations = 0;
  std::size_t refund_steps = 0;
  std::size_t price_updates = 0;
};

struct InnerLoopContext {
  const MarketInstance& inst;
  ScalingState& st;
  ScalingCounters& counters;
  PhaseTrace& trace;
  Diagnostics& diagnostics;
  std::size_t phase;
  InnerLoopOptions options;
  bool check_feasibility = true;
};

// Applies refund steps (preferred) and price-and-augment steps until the
// state is Δ-optimal. Every step must lower the potential by exactly one.
inline std::size_t restore_optimality(InnerLoopContext ctx) {
  const MarketInstance& inst = ctx.inst;
  ScalingState& st = ctx.st;
  std::size_t steps = 0;
  while (true) {
    BangPerBuck bpb = compute_bang_per_buck(inst, st.market.prices);
    std::optional<std::size_t> refund_buyer;
    bool any_cash = false;
    for (std::size_t i = 0; i < inst.num_buyers(); ++i) {
      if (effective_cash(inst, st.market, i) < st.delta) continue;
      any_cash = true;
      if (bpb.alpha[i] <= Rational(1)) {
        refund_buyer = i;
        break;
      }
    }
    if (!any_cash) return steps;

    TraceRow row;
    row.phase = ctx.phase;
    row.delta = st.delta;
    row.phi_before = potential(inst, st);
    if (refund_buyer) {
      refund_step(inst, st, *refund_buyer);
      ++ctx.counters.refund_steps;
      row.kind = StepKind::refund;
      row.subject = inst.buyer_id(*refund_buyer);
    } else {
      AugmentOutcome out = price_and_augment(inst, st, ctx.options);
      ++ctx.counters.augmentations;
      ctx.counters.price_updates += out.price_updates;
      row.kind = out.buyer_terminal ? StepKind::augment_buyer : StepKind::augment_good;
      row.subject = inst.buyer_id(out.root) + "->" +
                    (out.buyer_terminal ? inst.buyer_id(out.terminal) : inst.good_id(out.terminal));
    }
    row.phi_after = potential(inst, st);
    if (row.phi_after != row.phi_before - 1)
      ctx.diagnostics.add("potential", "step " + row.subject + " changed the potential from " +
                                           std::to_string(row.phi_before) + " to " + std::to_string(row.phi_after));
    if (ctx.check_feasibility) {
      FeasibilityReport rep = is_delta_feasible(inst, st);
      for (const auto& v : rep.violations) ctx.diagnostics.add("feasibility", v);
    }
    ctx.trace.rows.push_back(std::move(row));
    ++steps;
  }
}

struct SupportRecovery {
  Rational delta;
  std::vector<std::size_t> recovered;          // {x > 4 n Δ} at the end of the phase
  std::vector<Rational> phase_start_spending;  // x at the start of the phase
};

struct WeakResult {
  Equilibrium equilibrium;
  PhaseTrace trace;
  ScalingCounters counters;
  Diagnostics diagnostics;
  std::size_t abundant_edges = 0;  // distinct edges ever abundant at a phase start
  std::optional<SupportRecovery> first_recovery;  // first phase with Δ < 1/(8nD)
  std::size_t phase_bound = 0;                    // ceil(log2(Δ0 8 n D)) + 1
};

struct WeakOptions {
  InnerLoopOptions inner;
  bool check_invariants = true;
  // Phases allowed past the 1/(8nD) threshold while the recovered support
  // still fails to certify.
  std::size_t extra_phases = 4096;
};

namespace detail {

// Smallest k with 2^k >= value, for value > 0.
inline std::size_t ceil_log2(const Rational& value) {
  std::size_t k = 0;
  Rational power(1);
  while (power < value) {
    power *= Rational(2);
    ++k;
  }
  return k;
}

}  // namespace detail

inline WeakResult run_weak(const MarketInstance& inst, const WeakOptions& opt = {}) {
  WeakResult res;
  ScalingState st = initialize(inst);
  const InstanceStats stats = compute_stats(inst);
  const std::size_t n = inst.num_nodes();
  const Rational stop_level = Rational(1) / (Rational(static_cast<long>(8 * n)) * stats.d_bound);
  res.phase_bound = detail::ceil_log2(stats.e_max / stop_level) + 1;

  std::vector<char> ever_abundant(inst.num_edges(), 0);
  std::vector<std::size_t> previous_abundant;
  for (std::size_t phase = 0;; ++phase) {
    res.counters.phases = phase + 1;
    std::vector<Rational> start_spending = st.market.spending;
    std::vector<std::size_t> abundant = abundant_edges(inst, st.market, st.delta);

    TraceRow start;
    start.phase = phase;
    start.delta = st.delta;
    start.kind = StepKind::phase_start;
    start.phi_before = start.phi_after = potential(inst, st);
    for (std::size_t e : abundant)
      if (!ever_abundant[e]) {
        ever_abundant[e] = 1;
        ++res.abundant_edges;
        start.abundant_added.push_back(edge_name(inst, e));
      }
    if (opt.check_invariants) {
      if (start.phi_before > static_cast<long>(n))
        res.diagnostics.add("potential", "phase " + std::to_string(phase) + " starts with potential " +
                                             std::to_string(start.phi_before));
      for (std::size_t e : previous_abundant)
        if (std::find(abundant.begin(), abundant.end(), e) == abundant.end())
          res.diagnostics.add("abundance", "edge " + edge_name(inst, e) + " lost abundance in phase " +
                                               std::to_string(phase));
    }
    res.trace.rows.push_back(start);

    std::size_t steps = restore_optimality({inst, st, res.counters, res.trace, res.diagnostics, phase, opt.inner,
                                            opt.check_invariants});
    if (opt.check_invariants) {
      if (steps > n) res.diagnostics.add("potential", "phase " + std::to_string(phase) + " ran " + std::to_string(steps) + " steps");
      Rational bound = Rational(static_cast<long>(n)) * st.delta;
      for (std::size_t e = 0; e < inst.num_edges(); ++e)
        if ((st.market.spending[e] - start_spending[e]).abs() > bound)
          res.diagnostics.add("drift", "edge " + edge_name(inst, e) + " drifted beyond n delta in phase " +
                                           std::to_string(phase));
    }

    if (st.delta < stop_level) {
      std::vector<std::size_t> support = recover_support(inst, st.market, st.delta);
      if (!res.first_recovery) res.first_recovery = SupportRecovery{st.delta, support, start_spending};
      std::optional<MarketState> candidate = basic_solution(inst, support);
      if (candidate && check_equilibrium(inst, *candidate).passed()) {
        TraceRow done;
        done.phase = phase;
        done.delta = st.delta;
        done.kind = StepKind::terminate;
        done.phi_before = done.phi_after = potential(inst, st);
        res.trace.rows.push_back(done);
        res.equilibrium = make_equilibrium(inst, std::move(*candidate));
        if (opt.check_invariants && res.counters.phases > res.phase_bound)
          res.diagnostics.add("phases", "run used " + std::to_string(res.counters.phases) + " phases, bound " +
                                            std::to_string(res.phase_bound));
        return res;
      }
      TraceRow unresolved;
      unresolved.phase = phase;
      unresolved.delta = st.delta;
      unresolved.kind = StepKind::unresolved_support;
      unresolved.phi_before = unresolved.phi_after = potential(inst, st);
      res.trace.rows.push_back(unresolved);
      if (phase > res.phase_bound + opt.extra_phases)
        throw InvariantViolation("recovered support never certified");
    }

    previous_abundant = abundant;
    TraceRow halve;
    halve.phase = phase;
    halve.kind = StepKind::halve;
    halve.phi_before = potential(inst, st);
    std::vector<std::size_t> repaired = halve_and_repair(inst, st);
    halve.delta = st.delta;
    halve.phi_after = potential(inst, st);
    for (std::size_t k = 0; k < repaired.size(); ++k)
      halve.subject += (k ? "," : "") + inst.good_id(repaired[k]);
    res.trace.rows.push_back(halve);
  }
}

}  // namespace arctic
