#pragma once

// Basic solutions: the price/spending/refund triple pinned down by a
// cycle-free support together with one scale condition per component.

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "graph.hpp"
#include "instance.hpp"
#include "rational.hpp"

namespace arctic {

// Unique flow on a forest with prescribed node balances. Buyer i sends
// `buyer_supply[i]` into the forest and good j absorbs `good_demand[j]`;
// entries of nodes outside the forest are ignored. The returned flows are
// aligned with `tree_edges` and oriented buyer to good. Throws when the edges
// contain a cycle or a tree component is unbalanced.
inline std::vector<Rational> tree_flow(const MarketInstance& inst, std::span<const std::size_t> tree_edges,
                                       std::span<const Rational> buyer_supply, std::span<const Rational> good_demand) {
  const std::size_t nb = inst.num_buyers();
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> adj(inst.num_nodes());
  for (std::size_t k = 0; k < tree_edges.size(); ++k) {
    const Edge& e = inst.edge(tree_edges[k]);
    adj[buyer_node(e.buyer)].push_back({good_node(inst, e.good), k});
    adj[good_node(inst, e.good)].push_back({buyer_node(e.buyer), k});
  }
  std::vector<Rational> flow(tree_edges.size());
  std::vector<char> seen(inst.num_nodes(), 0);
  std::vector<long> parent_slot(inst.num_nodes(), -1);
  std::vector<std::size_t> parent_node(inst.num_nodes(), 0);
  std::vector<Rational> subtree(inst.num_nodes());
  for (std::size_t root = 0; root < inst.num_nodes(); ++root) {
    if (seen[root] || adj[root].empty()) continue;
    std::vector<std::size_t> order, stack{root};
    seen[root] = 1;
    while (!stack.empty()) {
      std::size_t v = stack.back();
      stack.pop_back();
      order.push_back(v);
      for (auto [w, k] : adj[v]) {
        if (static_cast<long>(k) == parent_slot[v]) continue;
        if (seen[w]) throw InvariantViolation("tree flow support contains a cycle");
        seen[w] = 1;
        parent_slot[w] = static_cast<long>(k);
        parent_node[w] = v;
        stack.push_back(w);
      }
    }
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      std::size_t v = *it;
      subtree[v] += v < nb ? buyer_supply[v] : -good_demand[v - nb];
      if (v == root) {
        if (!subtree[v].is_zero()) throw InvariantViolation("tree flow data is unbalanced");
        continue;
      }
      std::size_t k = static_cast<std::size_t>(parent_slot[v]);
      flow[k] = v < nb ? subtree[v] : -subtree[v];
      subtree[parent_node[v]] += subtree[v];
    }
  }
  return flow;
}

namespace detail {

// Prices of one tree component expressed as multiples of the price of its
// smallest good, together with each buyer's bang-per-buck at those relative
// prices (kappa), so that scaling prices by lambda gives bang-per-buck kappa/lambda.
struct RelativePrices {
  std::vector<Rational> pi;     // by good, only component goods set
  std::vector<Rational> kappa;  // by buyer, only component buyers set
};

inline RelativePrices relative_prices(const MarketInstance& inst, const Component& comp) {
  RelativePrices rel;
  rel.pi.resize(inst.num_goods());
  rel.kappa.resize(inst.num_buyers());
  std::vector<std::vector<std::size_t>> good_adj(inst.num_goods()), buyer_adj(inst.num_buyers());
  for (std::size_t e : comp.edges) {
    buyer_adj[inst.edge(e).buyer].push_back(e);
    good_adj[inst.edge(e).good].push_back(e);
  }
  std::vector<char> good_done(inst.num_goods(), 0), buyer_done(inst.num_buyers(), 0);
  std::vector<std::size_t> goods{comp.goods.front()};
  rel.pi[comp.goods.front()] = Rational(1);
  good_done[comp.goods.front()] = 1;
  while (!goods.empty()) {
    std::size_t j = goods.back();
    goods.pop_back();
    for (std::size_t e : good_adj[j]) {
      std::size_t i = inst.edge(e).buyer;
      if (buyer_done[i]) continue;
      buyer_done[i] = 1;
      rel.kappa[i] = inst.edge(e).utility / rel.pi[j];
      for (std::size_t f : buyer_adj[i]) {
        std::size_t k = inst.edge(f).good;
        if (good_done[k]) continue;
        good_done[k] = 1;
        rel.pi[k] = inst.edge(f).utility / rel.kappa[i];
        goods.push_back(k);
      }
    }
  }
  return rel;
}

}  // namespace detail

// Solves the basic solution of `support` under `effective_budgets`.
//
// Per component the scale is fixed either by budgets equalling prices (all
// refunds zero) or by an anchor buyer whose bang-per-buck on its support
// edges is exactly one and which alone may keep a refund. The budget
// condition is tried first, then anchors in buyer order. A candidate is
// accepted when spending and the anchor refund are nonnegative and every
// buyer of the component gets bang-per-buck at least one on its support
// edges; spending at a ratio below one is never optimal for a buyer, so
// rejecting it keeps the case choice consistent with equilibrium.
// Returns nullopt on a cyclic support, a good without incident support
// edges, or a component where no case is consistent.
inline std::optional<MarketState> basic_solution(const MarketInstance& inst, std::span<const std::size_t> support,
                                                 std::span<const Rational> effective_budgets) {
  if (has_cycle(inst, support)) return std::nullopt;
  MarketState out;
  out.prices.assign(inst.num_goods(), Rational(0));
  out.spending.assign(inst.num_edges(), Rational(0));
  out.refunds.assign(inst.num_buyers(), Rational(0));

  for (const Component& comp : components_of_edges(inst, support)) {
    if (comp.goods.empty()) {
      for (std::size_t i : comp.buyers) {
        if (effective_budgets[i].is_negative()) return std::nullopt;
        out.refunds[i] = effective_budgets[i];
      }
      continue;
    }
    if (comp.buyers.empty()) return std::nullopt;

    detail::RelativePrices rel = detail::relative_prices(inst, comp);
    Rational pi_sum, budget_sum;
    for (std::size_t j : comp.goods) pi_sum += rel.pi[j];
    for (std::size_t i : comp.buyers) budget_sum += effective_budgets[i];
    Rational kappa_min = rel.kappa[comp.buyers.front()];
    for (std::size_t i : comp.buyers) kappa_min = min(kappa_min, rel.kappa[i]);

    std::vector<Rational> supply(inst.num_buyers()), demand(inst.num_goods());
    auto try_scale = [&](const Rational& lambda, std::optional<std::size_t> anchor) -> bool {
      if (!lambda.is_positive() || lambda > kappa_min) return false;
      Rational price_sum = lambda * pi_sum;
      Rational others;
      for (std::size_t j : comp.goods) demand[j] = lambda * rel.pi[j];
      for (std::size_t i : comp.buyers) {
        supply[i] = effective_budgets[i];
        if (anchor != i) others += effective_budgets[i];
      }
      Rational anchor_refund;
      if (anchor) {
        supply[*anchor] = price_sum - others;
        anchor_refund = effective_budgets[*anchor] - supply[*anchor];
        if (anchor_refund.is_negative()) return false;
      }
      std::vector<Rational> flow = tree_flow(inst, comp.edges, supply, demand);
      for (const Rational& f : flow)
        if (f.is_negative()) return false;
      for (std::size_t j : comp.goods) out.prices[j] = demand[j];
      for (std::size_t k = 0; k < comp.edges.size(); ++k) out.spending[comp.edges[k]] = flow[k];
      for (std::size_t i : comp.buyers) out.refunds[i] = Rational(0);
      if (anchor) out.refunds[*anchor] = anchor_refund;
      return true;
    };

    if (try_scale(budget_sum / pi_sum, std::nullopt)) continue;
    bool solved = false;
    for (std::size_t a : comp.buyers)
      if (try_scale(rel.kappa[a], a)) {
        solved = true;
        break;
      }
    if (!solved) return std::nullopt;
  }
  return out;
}

inline std::optional<MarketState> basic_solution(const MarketInstance& inst, std::span<const std::size_t> support) {
  return basic_solution(inst, support, inst.budgets());
}

// Edges carrying spending strictly above 4 n Δ.
inline std::vector<std::size_t> recover_support(const MarketInstance& inst, const MarketState& s,
                                                const Rational& delta) {
  Rational level = Rational(static_cast<long>(4 * inst.num_nodes())) * delta;
  std::vector<std::size_t> edges;
  for (std::size_t e = 0; e < inst.num_edges(); ++e)
    if (s.spending[e] > level) edges.push_back(e);
  return edges;
}

}  // namespace arctic
