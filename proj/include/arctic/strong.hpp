#pragma once

// Strongly polynomial solver. Refunds of buyers at bang-per-buck one are
// committed permanently, the abundant graph is summarised by its components
// and their surpluses, and whenever no component is fertile the state is
// either rescheduled (delayed discovery) or rebuilt at a much smaller Δ from
// special prices and a tree flow (compressed restart).

#include <algorithm>
#include <cmath>
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
#include "weak.hpp"

namespace arctic {

// Σ_{i ∈ H} (e_i - r_i) - Σ_{j ∈ H} p_j
inline Rational surplus(const MarketInstance& inst, std::span<const Rational> prices, std::span<const Rational> refunds,
                        const Component& comp) {
  Rational s;
  for (std::size_t i : comp.buyers) s += inst.budget(i) - refunds[i];
  for (std::size_t j : comp.goods) s -= prices[j];
  return s;
}

inline Rational surplus(const MarketInstance& inst, const MarketState& st, const Component& comp) {
  return surplus(inst, st.prices, st.refunds, comp);
}

enum class FertileReason { eager_singleton_buyer, negative_surplus };

struct FertileComponent {
  Component component;
  FertileReason reason;
};

namespace detail {

inline Rational n_squared(const MarketInstance& inst) {
  long n = static_cast<long>(inst.num_nodes());
  return Rational(n * n);
}

inline Rational n_fifth(const MarketInstance& inst) {
  Rational n(static_cast<long>(inst.num_nodes()));
  return pow(n, 5);
}

}  // namespace detail

inline std::vector<FertileComponent> fertile_components(const MarketInstance& inst, const MarketState& s,
                                                        const Rational& delta,
                                                        const std::vector<Component>& components) {
  std::vector<FertileComponent> out;
  Rational level = delta / (Rational(3) * detail::n_squared(inst));
  for (const Component& h : components) {
    if (h.is_singleton_buyer()) {
      std::size_t i = h.buyers.front();
      if (bang_per_buck(inst, s.prices, i) > Rational(1) && effective_cash(inst, s, i) > level)
        out.push_back({h, FertileReason::eager_singleton_buyer});
    } else if (surplus(inst, s, h) <= -level) {
      out.push_back({h, FertileReason::negative_surplus});
    }
  }
  return out;
}

inline std::vector<FertileComponent> fertile_components(const MarketInstance& inst, const MarketState& s,
                                                        const Rational& delta) {
  return fertile_components(inst, s, delta, components_of_abundant_graph(inst, s, delta));
}

inline void commit_refund(const MarketInstance& inst, MarketState& s, std::size_t buyer, const Rational& amount) {
  if (bang_per_buck(inst, s.prices, buyer) != Rational(1))
    throw InvariantViolation("refund committed at a buyer whose bang-per-buck is not one");
  if (amount.is_negative() || amount > effective_cash(inst, s, buyer))
    throw InvariantViolation("refund commitment outside [0, cash]");
  s.refunds[buyer] += amount;
}

struct SpecialPriceResult {
  std::vector<Rational> prices;
  std::vector<Rational> refunds;
  std::size_t iterations = 0;
  bool reached_target = false;  // stopped with s(H) = t
  bool barrier_tight = false;   // stopped with s(J) = -s(H)/(2n^2) for some J
  std::vector<char> active;     // active nodes at exit
  std::size_t lost_equality_edges = 0;
  std::vector<std::string> violations;
};

// Raises the prices of the region reachable from H in the Δ-residual network
// until the surplus of H falls to t or some other component reaches the
// barrier -s(H)/(2n^2), committing refunds of active buyers that become
// indifferent on the way. Spending stays fixed throughout.
inline SpecialPriceResult special_price(const MarketInstance& inst, const MarketState& s, const Rational& delta,
                                        const std::vector<Component>& components, std::size_t h, const Rational& t) {
  const Component& H = components[h];
  const Rational k = Rational(1) / (Rational(2) * detail::n_squared(inst));
  std::vector<char> abundant(inst.num_edges(), 0);
  for (std::size_t e : abundant_edges(inst, s, delta)) abundant[e] = 1;
  std::vector<std::size_t> component_of(inst.num_nodes());
  for (std::size_t c = 0; c < components.size(); ++c) {
    for (std::size_t i : components[c].buyers) component_of[buyer_node(i)] = c;
    for (std::size_t j : components[c].goods) component_of[good_node(inst, j)] = c;
  }
  std::vector<std::size_t> roots;
  for (std::size_t i : H.buyers) roots.push_back(buyer_node(i));
  for (std::size_t j : H.goods) roots.push_back(good_node(inst, j));

  MarketState work = s;
  SpecialPriceResult res;
  // Spending is rebuilt by the tree flow afterwards, so a refund here is
  // bounded by the budget left after earlier refunds rather than by cash.
  auto unrefunded = [&](std::size_t i) { return inst.budget(i) - work.refunds[i]; };
  BangPerBuck bpb = compute_bang_per_buck(inst, work.prices);
  const std::size_t iteration_limit = inst.num_nodes() + inst.num_buyers();
  while (true) {
    Rational s_h = surplus(inst, work, H);
    if (s_h <= t) {
      res.reached_target = s_h == t;
      break;
    }
    bool tight = false;
    for (std::size_t c = 0; c < components.size() && !tight; ++c)
      if (c != h && surplus(inst, work, components[c]) <= -k * s_h) tight = true;
    if (tight) {
      res.barrier_tight = true;
      break;
    }
    if (res.iterations >= 4 * iteration_limit + 8) throw InvariantViolation("special price does not terminate");

    ResidualNetwork net(inst, bpb.equality, abundant);
    Reachability reach = active_set(net, roots);
    res.active = reach.reached;

    std::optional<Rational> q;
    auto consider = [&](Rational v) {
      if (!q || v < *q) q = std::move(v);
    };
    for (std::size_t e = 0; e < inst.num_edges(); ++e) {
      const Edge& edge = inst.edge(e);
      if (reach.contains(buyer_node(edge.buyer)) && !reach.contains(good_node(inst, edge.good)))
        consider(bpb.alpha[edge.buyer] * work.prices[edge.good] / edge.utility);
    }
    Rational budget_h, price_h;
    for (std::size_t i : H.buyers) budget_h += inst.budget(i) - work.refunds[i];
    for (std::size_t j : H.goods) price_h += work.prices[j];
    if (price_h.is_positive()) consider((budget_h - t) / price_h);
    for (std::size_t c = 0; c < components.size(); ++c) {
      if (c == h) continue;
      const Component& J = components[c];
      Rational budget_j, active_j, inactive_j;
      for (std::size_t i : J.buyers) budget_j += inst.budget(i) - work.refunds[i];
      for (std::size_t j : J.goods) (reach.contains(good_node(inst, j)) ? active_j : inactive_j) += work.prices[j];
      Rational denom = active_j + k * price_h;
      if (denom.is_positive()) consider((budget_j - inactive_j + k * budget_h) / denom);
    }
    for (std::size_t i = 0; i < inst.num_buyers(); ++i)
      if (reach.contains(buyer_node(i)) && bpb.alpha[i] >= Rational(1) && unrefunded(i).is_positive())
        consider(bpb.alpha[i]);
    if (!q) throw InvariantViolation("special price found no event");
    if (*q < Rational(1)) throw InvariantViolation("special price event below one");

    std::vector<char> was_equality = bpb.equality;
    for (std::size_t j = 0; j < inst.num_goods(); ++j)
      if (reach.contains(good_node(inst, j))) work.prices[j] *= *q;
    bpb = compute_bang_per_buck(inst, work.prices);
    for (std::size_t e = 0; e < inst.num_edges(); ++e)
      if (was_equality[e] && !bpb.equality[e]) {
        ++res.lost_equality_edges;
        if (abundant[e]) res.violations.push_back("abundant edge " + edge_name(inst, e) + " left the equality graph");
      }
    ++res.iterations;

    std::optional<std::size_t> critical;
    for (std::size_t i = 0; i < inst.num_buyers(); ++i) {
      if (!reach.contains(buyer_node(i)) || bpb.alpha[i] != Rational(1)) continue;
      if (!unrefunded(i).is_positive()) continue;
      if (critical) throw GenericityViolation("two indifferent buyers in one active region");
      critical = i;
    }
    if (critical) {
      Rational s_now = surplus(inst, work, H);
      std::size_t c = component_of[buyer_node(*critical)];
      Rational room = c == h ? s_now - t : surplus(inst, work, components[c]) + k * s_now;
      work.refunds[*critical] += min(unrefunded(*critical), max(room, Rational(0)));
    }
  }
  if (res.iterations > iteration_limit)
    res.violations.push_back("special price used " + std::to_string(res.iterations) + " iterations");
  if (res.active.empty()) res.active = active_set(ResidualNetwork(inst, bpb.equality, abundant), roots).reached;
  res.prices = std::move(work.prices);
  res.refunds = std::move(work.refunds);
  return res;
}

// Weighted digraph on buyers and goods: forward arcs (i, j) of weight U_ij for
// every positive utility and backward arcs (j, i) of weight 1/U_ij for every
// abundant edge.
struct AuxNetwork {
  struct WeightedArc {
    std::size_t from;
    std::size_t to;
    Rational weight;
  };
  std::size_t num_nodes = 0;
  std::vector<WeightedArc> arcs;
};

inline AuxNetwork build_aux_network(const MarketInstance& inst, const MarketState& s, const Rational& delta) {
  AuxNetwork aux;
  aux.num_nodes = inst.num_nodes();
  for (std::size_t e = 0; e < inst.num_edges(); ++e) {
    const Edge& edge = inst.edge(e);
    aux.arcs.push_back({buyer_node(edge.buyer), good_node(inst, edge.good), edge.utility});
  }
  for (std::size_t e : abundant_edges(inst, s, delta)) {
    const Edge& edge = inst.edge(e);
    aux.arcs.push_back({good_node(inst, edge.good), buyer_node(edge.buyer), edge.utility.inverse()});
  }
  return aux;
}

// Whether some directed cycle has weight product above one. Every node starts
// at value one and products are relaxed num_nodes times; an improvement in
// the last round can only come from such a cycle.
inline bool has_improving_cycle(const AuxNetwork& aux) {
  std::vector<Rational> best(aux.num_nodes, Rational(1));
  for (std::size_t round = 0; round < aux.num_nodes; ++round) {
    bool changed = false;
    for (const auto& a : aux.arcs) {
      Rational v = best[a.from] * a.weight;
      if (v > best[a.to]) {
        best[a.to] = std::move(v);
        changed = true;
      }
    }
    if (!changed) return false;
  }
  return true;
}

// Largest weight product over directed paths between two nodes, or nullopt
// when `to` is unreachable.
inline std::optional<Rational> max_multiplier(const AuxNetwork& aux, std::size_t from, std::size_t to) {
  std::vector<std::optional<Rational>> best(aux.num_nodes);
  best[from] = Rational(1);
  for (std::size_t round = 0; round <= aux.num_nodes; ++round) {
    bool changed = false;
    for (const auto& a : aux.arcs) {
      if (!best[a.from]) continue;
      Rational v = *best[a.from] * a.weight;
      if (!best[a.to] || v > *best[a.to]) {
        best[a.to] = std::move(v);
        changed = true;
      }
    }
    if (!changed) return best[to];
    if (round == aux.num_nodes) throw InvariantViolation("auxiliary network has a cycle of weight above one");
  }
  return best[to];
}

struct ParameterResult {
  Rational value;                        // Δ'
  std::vector<Rational> per_component;  // Δ_H
  std::size_t max_iterations = 0;
  std::vector<std::string> violations;
};

inline ParameterResult get_parameter(const MarketInstance& inst, const MarketState& s, const Rational& delta,
                                     const std::vector<Component>& components) {
  ParameterResult res;
  for (std::size_t c = 0; c < components.size(); ++c) {
    const Component& h = components[c];
    Rational value;
    if (h.is_singleton_buyer()) {
      std::size_t i = h.buyers.front();
      value = bang_per_buck(inst, s.prices, i) > Rational(1) ? effective_cash(inst, s, i) : Rational(0);
    } else {
      SpecialPriceResult run = special_price(inst, s, delta, components, c, Rational(0));
      res.max_iterations = std::max(res.max_iterations, run.iterations);
      for (auto& v : run.violations) res.violations.push_back(std::move(v));
      value = surplus(inst, run.prices, run.refunds, h);
    }
    if (c == 0 || value > res.value) res.value = value;
    res.per_component.push_back(std::move(value));
  }
  return res;
}

struct PricesResult {
  std::vector<Rational> prices;
  std::vector<Rational> refunds;
  // Surplus of each component under its own run, s(p^H, r^H, H).
  std::vector<Rational> own_surplus;
  std::size_t max_iterations = 0;
  std::vector<std::string> violations;
};

inline PricesResult get_prices(const MarketInstance& inst, const MarketState& s, const Rational& delta,
                               const std::vector<Component>& components, const Rational& target) {
  PricesResult res;
  res.prices = s.prices;
  res.refunds = s.refunds;
  for (std::size_t c = 0; c < components.size(); ++c) {
    const Component& h = components[c];
    if (h.is_singleton() || surplus(inst, s, h) <= target) {
      res.own_surplus.push_back(surplus(inst, s, h));
      continue;
    }
    SpecialPriceResult run = special_price(inst, s, delta, components, c, target);
    res.max_iterations = std::max(res.max_iterations, run.iterations);
    for (auto& v : run.violations) res.violations.push_back(std::move(v));
    res.own_surplus.push_back(surplus(inst, run.prices, run.refunds, h));
    for (std::size_t j = 0; j < inst.num_goods(); ++j) res.prices[j] = max(res.prices[j], run.prices[j]);
    for (std::size_t i = 0; i < inst.num_buyers(); ++i) res.refunds[i] = max(res.refunds[i], run.refunds[i]);
  }
  return res;
}

// Spending on the abundant forest with all surplus of a component placed at
// its buyer root (as cash) when positive or at its good root (as backorder)
// when negative.
inline std::vector<Rational> get_allocations(const MarketInstance& inst, std::span<const Rational> prices,
                                             std::span<const Rational> refunds,
                                             const std::vector<Component>& components) {
  std::vector<Rational> spending(inst.num_edges());
  std::vector<Rational> supply(inst.num_buyers()), demand(inst.num_goods());
  for (const Component& h : components) {
    if (h.edges.empty()) continue;
    Rational tau = surplus(inst, prices, refunds, h);
    for (std::size_t i : h.buyers) supply[i] = inst.budget(i) - refunds[i];
    for (std::size_t j : h.goods) demand[j] = prices[j];
    if (tau.is_positive()) supply[*h.buyer_root()] -= tau;
    if (tau.is_negative()) demand[*h.good_root()] += tau;
    std::vector<Rational> flow = tree_flow(inst, h.edges, supply, demand);
    for (std::size_t k = 0; k < h.edges.size(); ++k) {
      if (flow[k].is_negative()) throw InvariantViolation("tree flow of a restart is negative");
      spending[h.edges[k]] = flow[k];
    }
  }
  return spending;
}

enum class RestartBranch { delayed_discovery, compressed_restart, exact_restart };

inline const char* to_string(RestartBranch b) {
  switch (b) {
    case RestartBranch::delayed_discovery: return "delayed_discovery";
    case RestartBranch::compressed_restart: return "compressed_restart";
    case RestartBranch::exact_restart: return "exact_restart";
  }
  return "unknown";
}

struct CompressedState {
  ScalingState scaling;  // refunds are committed refunds
  Rational threshold;
};

struct MakeFertileOutcome {
  RestartBranch branch;
  Rational parameter;  // Δ'
  std::vector<Rational> component_surpluses;
  std::size_t special_price_max_iterations = 0;
  std::vector<std::string> violations;
  std::vector<std::size_t> old_abundant;
  bool zero_parameter_fallback = false;
};

inline MakeFertileOutcome make_fertile(const MarketInstance& inst, CompressedState& cs) {
  ScalingState& st = cs.scaling;
  const Rational n2 = detail::n_squared(inst);
  std::vector<Component> components = components_of_abundant_graph(inst, st.market, st.delta);
  MakeFertileOutcome out;
  for (const Component& h : components) out.component_surpluses.push_back(surplus(inst, st.market, h));
  ParameterResult param = get_parameter(inst, st.market, st.delta, components);
  out.parameter = param.value;
  out.special_price_max_iterations = param.max_iterations;
  out.violations = param.violations;

  if (param.value > st.delta / n2) {
    out.branch = RestartBranch::delayed_discovery;
    cs.threshold = st.delta / detail::n_fifth(inst);
    return out;
  }

  const Rational& dp = param.value;
  PricesResult prices = get_prices(inst, st.market, st.delta, components, max(dp, Rational(0)));
  out.special_price_max_iterations = std::max(out.special_price_max_iterations, prices.max_iterations);
  for (auto& v : prices.violations) out.violations.push_back(std::move(v));
  for (std::size_t c = 0; c < components.size() && dp.is_positive(); ++c) {
    const Component& h = components[c];
    Rational after = surplus(inst, prices.prices, prices.refunds, h);
    if (after < -dp / n2)
      out.violations.push_back("component " + std::to_string(c) + " has surplus below -delta'/n^2 after restart");
    if (!h.is_singleton_buyer() && prices.own_surplus[c] != min(surplus(inst, st.market, h), dp))
      out.violations.push_back("component " + std::to_string(c) + " run surplus differs from min(s, delta')");
  }
  out.old_abundant = abundant_edges(inst, st.market, st.delta);
  std::vector<Rational> spending = get_allocations(inst, prices.prices, prices.refunds, components);

  MarketState restarted{std::move(prices.prices), std::move(spending), std::move(prices.refunds)};
  if (!dp.is_positive()) {
    // A zero parameter should mean the restart lands on the equilibrium. When
    // it does not (some equilibrium edge is not yet abundant), the state is
    // kept and treated like a delayed discovery so that halving continues.
    if (check_equilibrium(inst, restarted).passed()) {
      st.market = std::move(restarted);
      out.branch = RestartBranch::exact_restart;
    } else {
      out.branch = RestartBranch::delayed_discovery;
      out.zero_parameter_fallback = true;
      cs.threshold = st.delta / detail::n_fifth(inst);
    }
    return out;
  }
  st.market = std::move(restarted);
  out.branch = RestartBranch::compressed_restart;
  Rational level = abundance_level(inst, dp);
  for (std::size_t e : out.old_abundant)
    if (!(st.market.spending[e] > level))
      out.violations.push_back("old abundant edge " + edge_name(inst, e) + " fell to 3n delta' or below");
  st.delta = dp;
  cs.threshold = dp / detail::n_fifth(inst);
  st.exempt.assign(inst.num_edges(), 0);
  for (std::size_t e : out.old_abundant) st.exempt[e] = 1;
  return out;
}

// After a compressed restart some goods may carry a negative backorder, since
// spending on edges outside the abundant forest is dropped. Each such good is
// topped up in multiples of Δ, the smallest possible number of multiples that
// clears the deficit, from the smallest buyer with bang-per-buck at least one
// and cash at least Δ that reaches it in the residual network. Returns one
// entry per augmenting path used.
inline std::vector<std::string> repair_after_restart(const MarketInstance& inst, ScalingState& st) {
  std::vector<std::string> served;
  for (std::size_t j = 0; j < inst.num_goods(); ++j) {
    if (st.market.prices[j] <= st.initial_prices[j]) continue;
    while (backorder(inst, st.market, j).is_negative()) {
      BangPerBuck bpb = compute_bang_per_buck(inst, st.market.prices);
      ResidualNetwork net = residual_network(inst, st.market, bpb, st.delta);
      bool progressed = false;
      for (std::size_t i = 0; i < inst.num_buyers() && !progressed; ++i) {
        if (bpb.alpha[i] < Rational(1) || effective_cash(inst, st.market, i) < st.delta) continue;
        Reachability reach = active_set(net, {buyer_node(i)});
        if (!reach.contains(good_node(inst, j))) continue;
        std::vector<Arc> path = reach.path_to(good_node(inst, j));
        // Number of Δ units: enough to clear the deficit, bounded by the cash
        // of the source and by the spending on backward arcs.
        mpz_class units = -((backorder(inst, st.market, j) / st.delta).floor());
        units = std::min(units, (effective_cash(inst, st.market, i) / st.delta).floor());
        for (const Arc& a : path)
          if (!a.forward) units = std::min(units, (st.market.spending[a.edge] / st.delta).floor());
        augment(st.market, path, Rational(units) * st.delta);
        served.push_back(inst.buyer_id(i) + "->" + inst.good_id(j));
        progressed = true;
      }
      if (!progressed) break;
    }
  }
  return served;
}

// Cash of buyers at bang-per-buck at most one is refunded in whole multiples
// of Δ. This is the same outcome as the run of refund steps the inner loop
// would take next, collapsed into one step per buyer. Returns the buyers.
inline std::vector<std::size_t> bulk_refund(const MarketInstance& inst, ScalingState& st) {
  std::vector<std::size_t> refunded;
  BangPerBuck bpb = compute_bang_per_buck(inst, st.market.prices);
  for (std::size_t i = 0; i < inst.num_buyers(); ++i) {
    if (bpb.alpha[i] > Rational(1)) continue;
    mpz_class chunks = (effective_cash(inst, st.market, i) / st.delta).floor();
    if (chunks == 0) continue;
    st.market.refunds[i] += Rational(chunks) * st.delta;
    refunded.push_back(i);
  }
  return refunded;
}

struct StrongCounters {
  std::size_t phases = 0;
  std::size_t rounds = 0;
  ScalingCounters inner;
  std::size_t delayed_restarts = 0;
  std::size_t compressed_restarts = 0;
  std::size_t abundant_discoveries = 0;
  std::size_t progress_events = 0;
  std::size_t max_progress_gap = 0;
  std::size_t special_price_max_iterations = 0;
  std::size_t repair_augmentations = 0;
};

struct StrongResult {
  Equilibrium equilibrium;
  PhaseTrace trace;
  StrongCounters counters;
  Diagnostics diagnostics;
  std::size_t phase_budget = 0;
};

struct StrongOptions {
  InnerLoopOptions inner;
  bool check_invariants = true;
  // Called at the end of every round once the state is Δ-optimal.
  std::function<void(const MarketInstance&, const ScalingState&)> on_round_end;
};

namespace detail {

inline std::size_t strong_phase_budget(std::size_t n) {
  double logn = std::log2(static_cast<double>(std::max<std::size_t>(n, 2)));
  return static_cast<std::size_t>(20.0 * static_cast<double>(n) * (5.0 * logn + 10.0));
}

inline std::size_t progress_gap_bound(std::size_t n) {
  double logn = std::log2(static_cast<double>(std::max<std::size_t>(n, 2)));
  return static_cast<std::size_t>(std::floor(5.0 * logn + 10.0));
}

}  // namespace detail

inline StrongResult run_strong(const MarketInstance& inst, const StrongOptions& opt = {}) {
  StrongResult res;
  CompressedState cs{initialize(inst), Rational()};
  ScalingState& st = cs.scaling;
  cs.threshold = st.delta;
  const std::size_t n = inst.num_nodes();
  res.phase_budget = detail::strong_phase_budget(n);
  const std::size_t gap_bound = detail::progress_gap_bound(n);
  auto& counters = res.counters;

  std::vector<char> ever_abundant(inst.num_edges(), 0), settled_buyer(inst.num_buyers(), 0);
  std::vector<char> was_unattractive(inst.num_buyers(), 0);
  std::vector<std::size_t> previous_abundant;
  std::optional<std::size_t> last_progress;
  std::size_t phase = 0;

  while (true) {
    ++counters.rounds;
    if (phase >= res.phase_budget) throw InvariantViolation("strong run exceeded its phase budget");
    counters.phases = phase + 1;
    std::vector<Rational> start_spending = st.market.spending;
    std::vector<std::size_t> abundant = abundant_edges(inst, st.market, st.delta);
    std::vector<Component> components = components_of_edges(inst, abundant);

    TraceRow start;
    start.phase = phase;
    start.delta = st.delta;
    start.kind = StepKind::phase_start;
    start.phi_before = start.phi_after = potential(inst, st);
    start.threshold = cs.threshold;
    for (std::size_t e : abundant)
      if (!ever_abundant[e]) {
        ever_abundant[e] = 1;
        ++counters.abundant_discoveries;
        start.abundant_added.push_back(edge_name(inst, e));
        start.progress.push_back("abundant " + edge_name(inst, e));
      }
    BangPerBuck bpb = compute_bang_per_buck(inst, st.market.prices);
    for (const Component& h : components)
      if (h.is_singleton_buyer() && !settled_buyer[h.buyers.front()] && bpb.alpha[h.buyers.front()] <= Rational(1)) {
        settled_buyer[h.buyers.front()] = 1;
        start.progress.push_back("settled " + inst.buyer_id(h.buyers.front()));
      }
    if (!start.progress.empty()) {
      counters.progress_events += start.progress.size();
      if (last_progress) counters.max_progress_gap = std::max(counters.max_progress_gap, phase - *last_progress);
      last_progress = phase;
    }
    if (opt.check_invariants) {
      if (start.phi_before > static_cast<long>(n))
        res.diagnostics.add("potential", "phase " + std::to_string(phase) + " starts with potential " +
                                             std::to_string(start.phi_before));
      for (std::size_t e : previous_abundant)
        if (std::find(abundant.begin(), abundant.end(), e) == abundant.end())
          res.diagnostics.add("abundance", "edge " + edge_name(inst, e) + " lost abundance in phase " +
                                               std::to_string(phase));
      for (std::size_t i = 0; i < inst.num_buyers(); ++i) {
        if (was_unattractive[i] && bpb.alpha[i] > Rational(1))
          res.diagnostics.add("monotonicity", "buyer " + inst.buyer_id(i) + " regained bang-per-buck above one");
        if (bpb.alpha[i] <= Rational(1)) was_unattractive[i] = 1;
      }
    }
    res.trace.rows.push_back(start);

    // Termination: the basic solution of the abundant forest under the
    // remaining budgets, plus committed refunds, must be an equilibrium.
    std::vector<Rational> remaining(inst.num_buyers());
    for (std::size_t i = 0; i < inst.num_buyers(); ++i) remaining[i] = inst.budget(i) - st.market.refunds[i];
    if (std::optional<MarketState> candidate = basic_solution(inst, abundant, remaining)) {
      MarketInstance compressed = inst.with_budgets(remaining);
      if (check_equilibrium(compressed, *candidate).passed()) {
        for (std::size_t i = 0; i < inst.num_buyers(); ++i) candidate->refunds[i] += st.market.refunds[i];
        if (check_equilibrium(inst, *candidate).passed()) {
          TraceRow done;
          done.phase = phase;
          done.delta = st.delta;
          done.kind = StepKind::terminate;
          done.phi_before = done.phi_after = start.phi_before;
          res.trace.rows.push_back(done);
          res.equilibrium = make_equilibrium(inst, std::move(*candidate));
          if (opt.check_invariants) {
            if (counters.abundant_discoveries + 1 > n)
              res.diagnostics.add("counters", std::to_string(counters.abundant_discoveries) + " abundant discoveries");
            if (counters.progress_events + 1 > 2 * n)
              res.diagnostics.add("counters", std::to_string(counters.progress_events) + " progress events");
            if (counters.max_progress_gap > gap_bound)
              res.diagnostics.add("counters", "progress gap of " + std::to_string(counters.max_progress_gap) + " phases");
          }
          return res;
        }
      }
    }

    std::size_t steps = restore_optimality({inst, st, counters.inner, res.trace, res.diagnostics, phase, opt.inner,
                                            opt.check_invariants});
    if (opt.check_invariants) {
      if (steps > n) res.diagnostics.add("potential", "phase " + std::to_string(phase) + " ran " + std::to_string(steps) + " steps");
      Rational bound = Rational(static_cast<long>(n)) * st.delta;
      for (std::size_t e = 0; e < inst.num_edges(); ++e)
        if ((st.market.spending[e] - start_spending[e]).abs() > bound)
          res.diagnostics.add("drift", "edge " + edge_name(inst, e) + " drifted beyond n delta in phase " +
                                           std::to_string(phase));
    }
    if (opt.on_round_end) opt.on_round_end(inst, st);
    previous_abundant = abundant;

    components = components_of_abundant_graph(inst, st.market, st.delta);
    bool fertile = !fertile_components(inst, st.market, st.delta, components).empty();
    if (!fertile && st.delta <= cs.threshold) {
      Rational old_delta = st.delta;
      MakeFertileOutcome mf = make_fertile(inst, cs);
      counters.special_price_max_iterations =
          std::max(counters.special_price_max_iterations, mf.special_price_max_iterations);
      for (auto& v : mf.violations) res.diagnostics.add("restart", v);
      TraceRow row;
      row.phase = phase;
      row.delta = old_delta;
      row.restart_branch = to_string(mf.branch);
      row.new_delta = mf.parameter;
      row.threshold = cs.threshold;
      row.surpluses = mf.component_surpluses;
      if (mf.branch == RestartBranch::delayed_discovery) {
        ++counters.delayed_restarts;
        if (mf.zero_parameter_fallback)
          res.diagnostics.add("zero_parameter", "parameter " + mf.parameter.str() + " at delta " + old_delta.str() +
                                                    " without an equilibrium");
        row.kind = StepKind::delayed_discovery;
        row.phi_before = row.phi_after = potential(inst, st);
        res.trace.rows.push_back(row);
        continue;
      }
      if (mf.branch == RestartBranch::exact_restart) {
        row.kind = StepKind::exact_restart;
        res.trace.rows.push_back(row);
        TraceRow done;
        done.phase = phase;
        done.delta = old_delta;
        done.kind = StepKind::terminate;
        res.trace.rows.push_back(done);
        res.equilibrium = make_equilibrium(inst, st.market);
        return res;
      }
      ++counters.compressed_restarts;
      row.kind = StepKind::compressed_restart;
      row.phi_before = row.phi_after = potential(inst, st);
      res.trace.rows.push_back(row);
      for (const std::string& served : repair_after_restart(inst, st)) {
        ++counters.repair_augmentations;
        TraceRow repair;
        repair.phase = phase + 1;
        repair.delta = st.delta;
        repair.kind = StepKind::repair_augment;
        repair.subject = served;
        repair.phi_before = repair.phi_after = potential(inst, st);
        res.trace.rows.push_back(repair);
      }
      for (std::size_t i : bulk_refund(inst, st)) {
        TraceRow refund;
        refund.phase = phase + 1;
        refund.delta = st.delta;
        refund.kind = StepKind::bulk_refund;
        refund.subject = inst.buyer_id(i);
        res.trace.rows.push_back(refund);
      }
      ++phase;
      continue;
    }

    TraceRow halve;
    halve.phase = phase;
    halve.kind = StepKind::halve;
    halve.phi_before = potential(inst, st);
    std::vector<std::size_t> repaired = halve_and_repair(inst, st);
    halve.delta = st.delta;
    halve.phi_after = potential(inst, st);
    for (std::size_t k = 0; k < repaired.size(); ++k) halve.subject += (k ? "," : "") + inst.good_id(repaired[k]);
    res.trace.rows.push_back(halve);
    ++phase;
  }
}

}  // namespace arctic
