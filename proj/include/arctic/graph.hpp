#pragma once

// Market states and the graphs derived from them: bang-per-buck, equality
// graph, residual networks, breadth-first reachability, and the components of
// the abundant graph.

#include <algorithm>
#include <deque>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "instance.hpp"
#include "rational.hpp"

namespace arctic {

// Prices by good, spending by edge id, refunds by buyer.
struct MarketState {
  std::vector<Rational> prices;
  std::vector<Rational> spending;
  std::vector<Rational> refunds;

  friend bool operator==(const MarketState&, const MarketState&) = default;
};

inline MarketState zero_state(const MarketInstance& inst) {
  MarketState s;
  s.prices.assign(inst.num_goods(), Rational(1));
  s.spending.assign(inst.num_edges(), Rational(0));
  s.refunds.assign(inst.num_buyers(), Rational(0));
  return s;
}

inline Rational total_spending(const MarketInstance& inst, const MarketState& s, std::size_t buyer) {
  Rational sum;
  for (std::size_t e : inst.buyer_edges(buyer)) sum += s.spending[e];
  return sum;
}

inline Rational total_received(const MarketInstance& inst, const MarketState& s, std::size_t good) {
  Rational sum;
  for (std::size_t e : inst.good_edges(good)) sum += s.spending[e];
  return sum;
}

// c̄_i = e_i - r_i - sum_j x_ij
inline Rational effective_cash(const MarketInstance& inst, const MarketState& s, std::size_t buyer) {
  return inst.budget(buyer) - s.refunds[buyer] - total_spending(inst, s, buyer);
}

// b_j = sum_i x_ij - p_j
inline Rational backorder(const MarketInstance& inst, const MarketState& s, std::size_t good) {
  return total_received(inst, s, good) - s.prices[good];
}

inline Rational bang_per_buck(const MarketInstance& inst, std::span<const Rational> prices, std::size_t buyer) {
  auto edges = inst.buyer_edges(buyer);
  Rational best = inst.edge(edges[0]).utility / prices[inst.edge(edges[0]).good];
  for (std::size_t k = 1; k < edges.size(); ++k) {
    const Edge& e = inst.edge(edges[k]);
    Rational ratio = e.utility / prices[e.good];
    if (ratio > best) best = std::move(ratio);
  }
  return best;
}

// Bang-per-buck of every buyer together with the equality flag of every edge.
struct BangPerBuck {
  std::vector<Rational> alpha;
  std::vector<char> equality;
};

inline BangPerBuck compute_bang_per_buck(const MarketInstance& inst, std::span<const Rational> prices) {
  BangPerBuck out;
  out.alpha.resize(inst.num_buyers());
  out.equality.assign(inst.num_edges(), 0);
  std::vector<Rational> ratio(inst.num_edges());
  for (std::size_t e = 0; e < inst.num_edges(); ++e) ratio[e] = inst.edge(e).utility / prices[inst.edge(e).good];
  for (std::size_t i = 0; i < inst.num_buyers(); ++i) {
    auto edges = inst.buyer_edges(i);
    std::size_t best = edges[0];
    for (std::size_t e : edges)
      if (ratio[e] > ratio[best]) best = e;
    out.alpha[i] = ratio[best];
    for (std::size_t e : edges)
      if (ratio[e] == ratio[best]) out.equality[e] = 1;
  }
  return out;
}

inline std::vector<std::size_t> equality_graph(const MarketInstance& inst, std::span<const Rational> prices) {
  BangPerBuck bpb = compute_bang_per_buck(inst, prices);
  std::vector<std::size_t> edges;
  for (std::size_t e = 0; e < inst.num_edges(); ++e)
    if (bpb.equality[e]) edges.push_back(e);
  return edges;
}

// Graph nodes: buyers occupy [0, |B|), goods occupy [|B|, |B| + |G|).
inline std::size_t buyer_node(std::size_t buyer) { return buyer; }
inline std::size_t good_node(const MarketInstance& inst, std::size_t good) { return inst.num_buyers() + good; }

struct Arc {
  std::size_t from;
  std::size_t to;
  std::size_t edge;
  bool forward;  // buyer -> good when true, good -> buyer when false
};

class ResidualNetwork {
 public:
  ResidualNetwork(const MarketInstance& inst, const std::vector<char>& forward, const std::vector<char>& backward)
      : num_buyers_(inst.num_buyers()), out_(inst.num_nodes()) {
    for (std::size_t i = 0; i < inst.num_buyers(); ++i)
      for (std::size_t e : inst.buyer_edges(i))
        if (forward[e]) out_[buyer_node(i)].push_back({buyer_node(i), good_node(inst, inst.edge(e).good), e, true});
    for (std::size_t j = 0; j < inst.num_goods(); ++j)
      for (std::size_t e : inst.good_edges(j))
        if (backward[e]) out_[good_node(inst, j)].push_back({good_node(inst, j), buyer_node(inst.edge(e).buyer), e, false});
  }

  std::size_t num_nodes() const { return out_.size(); }
  std::size_t num_buyers() const { return num_buyers_; }
  const std::vector<Arc>& out_arcs(std::size_t node) const { return out_[node]; }

  std::vector<std::size_t> forward_arcs() const { return arcs_of_kind(true); }
  std::vector<std::size_t> backward_arcs() const { return arcs_of_kind(false); }
  std::size_t num_arcs() const {
    std::size_t k = 0;
    for (const auto& list : out_) k += list.size();
    return k;
  }

 private:
  std::vector<std::size_t> arcs_of_kind(bool forward) const {
    std::vector<std::size_t> edges;
    for (const auto& list : out_)
      for (const Arc& a : list)
        if (a.forward == forward) edges.push_back(a.edge);
    std::sort(edges.begin(), edges.end());
    return edges;
  }

  std::size_t num_buyers_;
  std::vector<std::vector<Arc>> out_;
};

// Forward arcs on equality edges; backward arcs wherever spending reaches
// `min_backward` (any positive spending when it is zero).
inline ResidualNetwork residual_network(const MarketInstance& inst, const MarketState& s, const BangPerBuck& bpb,
                                        const Rational& min_backward = Rational(0)) {
  std::vector<char> backward(inst.num_edges(), 0);
  for (std::size_t e = 0; e < inst.num_edges(); ++e)
    backward[e] = min_backward.is_zero() ? s.spending[e].is_positive() : s.spending[e] >= min_backward;
  return ResidualNetwork(inst, bpb.equality, backward);
}

inline ResidualNetwork residual_network(const MarketInstance& inst, const MarketState& s) {
  return residual_network(inst, s, compute_bang_per_buck(inst, s.prices));
}

// Spending threshold 3 n Δ at which an edge counts as abundant.
inline Rational abundance_level(const MarketInstance& inst, const Rational& delta) {
  return Rational(static_cast<long>(3 * inst.num_nodes())) * delta;
}

inline ResidualNetwork delta_residual_network(const MarketInstance& inst, const MarketState& s, const Rational& delta) {
  std::vector<char> backward(inst.num_edges(), 0);
  Rational level = abundance_level(inst, delta);
  for (std::size_t e = 0; e < inst.num_edges(); ++e) backward[e] = s.spending[e] >= level;
  return ResidualNetwork(inst, compute_bang_per_buck(inst, s.prices).equality, backward);
}

// Result of a breadth-first search; `parent` holds the arc through which each
// node was first reached.
struct Reachability {
  std::vector<char> reached;
  std::vector<std::optional<Arc>> parent;
  std::vector<std::size_t> order;

  bool contains(std::size_t node) const { return reached[node] != 0; }

  // Arcs from the root of `node`'s search tree to `node`.
  std::vector<Arc> path_to(std::size_t node) const {
    if (!contains(node)) throw InvariantViolation("path requested to an unreached node");
    std::vector<Arc> path;
    while (parent[node]) {
      path.push_back(*parent[node]);
      node = parent[node]->from;
    }
    std::reverse(path.begin(), path.end());
    return path;
  }
};

inline Reachability active_set(const ResidualNetwork& net, std::vector<std::size_t> roots) {
  Reachability r;
  r.reached.assign(net.num_nodes(), 0);
  r.parent.assign(net.num_nodes(), std::nullopt);
  std::sort(roots.begin(), roots.end());
  std::deque<std::size_t> queue;
  for (std::size_t v : roots)
    if (!r.reached[v]) {
      r.reached[v] = 1;
      queue.push_back(v);
    }
  while (!queue.empty()) {
    std::size_t v = queue.front();
    queue.pop_front();
    r.order.push_back(v);
    for (const Arc& a : net.out_arcs(v))
      if (!r.reached[a.to]) {
        r.reached[a.to] = 1;
        r.parent[a.to] = a;
        queue.push_back(a.to);
      }
  }
  return r;
}

class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n), rank_(n, 0) { std::iota(parent_.begin(), parent_.end(), 0); }

  std::size_t find(std::size_t v) {
    while (parent_[v] != v) {
      parent_[v] = parent_[parent_[v]];
      v = parent_[v];
    }
    return v;
  }

  // Returns false when both nodes were already connected.
  bool unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    if (rank_[a] < rank_[b]) std::swap(a, b);
    parent_[b] = a;
    if (rank_[a] == rank_[b]) ++rank_[a];
    return true;
  }

 private:
  std::vector<std::size_t> parent_;
  std::vector<int> rank_;
};

// A connected component of a bipartite edge set. Roots are the canonically
// smallest buyer and good; a component without goods has no good root and a
// component without buyers has no buyer root.
struct Component {
  std::vector<std::size_t> buyers;
  std::vector<std::size_t> goods;
  std::vector<std::size_t> edges;

  std::optional<std::size_t> buyer_root() const {
    return buyers.empty() ? std::nullopt : std::optional<std::size_t>(buyers.front());
  }
  std::optional<std::size_t> good_root() const {
    return goods.empty() ? std::nullopt : std::optional<std::size_t>(goods.front());
  }
  std::optional<std::size_t> root_good() const { return good_root(); }

  bool is_singleton() const { return buyers.size() + goods.size() == 1; }
  bool is_singleton_buyer() const { return buyers.size() == 1 && goods.empty(); }
  bool is_singleton_good() const { return goods.size() == 1 && buyers.empty(); }
};

// Components over all nodes, ordered by their smallest node (buyers first).
inline std::vector<Component> components_of_edges(const MarketInstance& inst, std::span<const std::size_t> edges) {
  UnionFind uf(inst.num_nodes());
  for (std::size_t e : edges) uf.unite(buyer_node(inst.edge(e).buyer), good_node(inst, inst.edge(e).good));
  std::vector<long> index(inst.num_nodes(), -1);
  std::vector<Component> out;
  auto slot = [&](std::size_t node) -> Component& {
    std::size_t root = uf.find(node);
    if (index[root] < 0) {
      index[root] = static_cast<long>(out.size());
      out.emplace_back();
    }
    return out[static_cast<std::size_t>(index[root])];
  };
  for (std::size_t i = 0; i < inst.num_buyers(); ++i) slot(buyer_node(i)).buyers.push_back(i);
  for (std::size_t j = 0; j < inst.num_goods(); ++j) slot(good_node(inst, j)).goods.push_back(j);
  std::vector<std::size_t> sorted(edges.begin(), edges.end());
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t e : sorted) slot(buyer_node(inst.edge(e).buyer)).edges.push_back(e);
  return out;
}

inline std::vector<std::size_t> abundant_edges(const MarketInstance& inst, const MarketState& s, const Rational& delta) {
  Rational level = abundance_level(inst, delta);
  std::vector<std::size_t> edges;
  for (std::size_t e = 0; e < inst.num_edges(); ++e)
    if (s.spending[e] >= level) edges.push_back(e);
  return edges;
}

inline std::vector<Component> components_of_abundant_graph(const MarketInstance& inst, const MarketState& s,
                                                           const Rational& delta) {
  return components_of_edges(inst, abundant_edges(inst, s, delta));
}

// Whether an edge set contains a cycle.
inline bool has_cycle(const MarketInstance& inst, std::span<const std::size_t> edges) {
  UnionFind uf(inst.num_nodes());
  for (std::size_t e : edges)
    if (!uf.unite(buyer_node(inst.edge(e).buyer), good_node(inst, inst.edge(e).good))) return true;
  return false;
}

}  // namespace arctic
