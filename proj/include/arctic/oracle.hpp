#pragma once

// Independent verification: exact equilibrium certificates, a brute-force
// equilibrium by support enumeration, and the runtime genericity check.

#include <bit>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "basic_solution.hpp"
#include "graph.hpp"
#include "instance.hpp"
#include "rational.hpp"

namespace arctic {

struct CheckEntry {
  std::string name;
  bool passed = true;
  std::string detail;  // first offending node or edge when failed
};

struct Certificate {
  std::vector<CheckEntry> entries;

  bool passed() const {
    for (const auto& e : entries)
      if (!e.passed) return false;
    return true;
  }
  std::vector<std::string> failures() const {
    std::vector<std::string> out;
    for (const auto& e : entries)
      if (!e.passed) out.push_back(e.name + ": " + e.detail);
    return out;
  }
};

// Checks the Arctic equilibrium conditions with budgets taken from `inst`.
inline Certificate check_equilibrium(const MarketInstance& inst, const MarketState& s) {
  Certificate cert;
  auto add = [&](std::string name) -> CheckEntry& {
    cert.entries.push_back({std::move(name), true, {}});
    return cert.entries.back();
  };
  auto fail = [](CheckEntry& entry, std::string detail) {
    if (entry.passed) entry.detail = std::move(detail);
    entry.passed = false;
  };

  CheckEntry& positive = add("positive prices and nonnegative spending");
  for (std::size_t j = 0; j < inst.num_goods(); ++j)
    if (!s.prices[j].is_positive()) fail(positive, "price of " + inst.good_id(j));
  for (std::size_t e = 0; e < inst.num_edges(); ++e)
    if (s.spending[e].is_negative())
      fail(positive, "spending " + inst.buyer_id(inst.edge(e).buyer) + "/" + inst.good_id(inst.edge(e).good));
  if (!positive.passed) return cert;

  BangPerBuck bpb = compute_bang_per_buck(inst, s.prices);
  CheckEntry& budget = add("refunds nonnegative and budgets exhausted");
  for (std::size_t i = 0; i < inst.num_buyers(); ++i)
    if (s.refunds[i].is_negative() || !effective_cash(inst, s, i).is_zero()) fail(budget, "buyer " + inst.buyer_id(i));
  CheckEntry& clearing = add("market clearing");
  for (std::size_t j = 0; j < inst.num_goods(); ++j)
    if (!backorder(inst, s, j).is_zero()) fail(clearing, "good " + inst.good_id(j));
  CheckEntry& support = add("spending only on equality edges");
  for (std::size_t e = 0; e < inst.num_edges(); ++e)
    if (s.spending[e].is_positive() && !bpb.equality[e])
      fail(support, "edge " + inst.buyer_id(inst.edge(e).buyer) + "/" + inst.good_id(inst.edge(e).good));
  CheckEntry& complementarity = add("refund complementarity");
  for (std::size_t i = 0; i < inst.num_buyers(); ++i)
    if (s.refunds[i].is_positive() && bpb.alpha[i] > Rational(1)) fail(complementarity, "buyer " + inst.buyer_id(i));
  CheckEntry& optimality = add("buyer optimality");
  for (std::size_t e = 0; e < inst.num_edges(); ++e)
    if (s.spending[e].is_positive() && bpb.alpha[inst.edge(e).buyer] < Rational(1))
      fail(optimality, "buyer " + inst.buyer_id(inst.edge(e).buyer));
  return cert;
}

// A certified equilibrium with quantities y_ij = x_ij / p_j.
struct Equilibrium {
  MarketState state;
  std::vector<Rational> quantities;  // by edge
  Certificate certificate;

  std::vector<std::size_t> support() const {
    std::vector<std::size_t> edges;
    for (std::size_t e = 0; e < state.spending.size(); ++e)
      if (state.spending[e].is_positive()) edges.push_back(e);
    return edges;
  }
};

inline Equilibrium make_equilibrium(const MarketInstance& inst, MarketState s) {
  Equilibrium eq;
  eq.quantities.resize(inst.num_edges());
  for (std::size_t e = 0; e < inst.num_edges(); ++e) eq.quantities[e] = s.spending[e] / s.prices[inst.edge(e).good];
  eq.certificate = check_equilibrium(inst, s);
  eq.state = std::move(s);
  return eq;
}

struct BruteForceResult {
  std::vector<Equilibrium> solutions;  // distinct passing solutions
  std::size_t supports_tried = 0;

  // Returned by value so that calling it on a temporary result is safe.
  Equilibrium unique() const {
    if (solutions.size() != 1)
      throw GenericityViolation("support enumeration found " + std::to_string(solutions.size()) + " equilibria");
    return solutions.front();
  }
};

inline constexpr std::size_t brute_force_max_edges = 12;
inline constexpr std::size_t brute_force_max_nodes = 8;

// Enumerates cycle-free supports by increasing size, lexicographically within
// a size, and keeps every distinct basic solution that passes the certificate.
inline BruteForceResult brute_force_equilibrium(const MarketInstance& inst) {
  const std::size_t m = inst.num_edges();
  if (m > brute_force_max_edges || inst.num_nodes() > brute_force_max_nodes)
    throw InstanceError("instance too large for support enumeration");
  std::vector<std::uint32_t> masks;
  for (std::uint32_t mask = 0; mask < (1u << m); ++mask) masks.push_back(mask);
  std::stable_sort(masks.begin(), masks.end(), [](std::uint32_t a, std::uint32_t b) {
    if (std::popcount(a) != std::popcount(b)) return std::popcount(a) < std::popcount(b);
    // lexicographic on the sorted edge lists: compare lowest differing edge
    std::uint32_t diff = a ^ b;
    std::uint32_t low = diff & (~diff + 1);
    return (a & low) != 0;
  });

  BruteForceResult result;
  std::vector<std::size_t> support;
  for (std::uint32_t mask : masks) {
    std::uint32_t goods_covered = 0;
    support.clear();
    for (std::size_t e = 0; e < m; ++e)
      if (mask >> e & 1u) {
        support.push_back(e);
        goods_covered |= 1u << inst.edge(e).good;
      }
    if (goods_covered != (1u << inst.num_goods()) - 1) continue;
    if (has_cycle(inst, support)) continue;
    ++result.supports_tried;
    std::optional<MarketState> candidate = basic_solution(inst, support);
    if (!candidate) continue;
    Certificate cert = check_equilibrium(inst, *candidate);
    if (!cert.passed()) continue;
    bool duplicate = false;
    for (const Equilibrium& known : result.solutions) duplicate = duplicate || known.state == *candidate;
    if (!duplicate) result.solutions.push_back(make_equilibrium(inst, std::move(*candidate)));
  }
  return result;
}

struct GenericityReport {
  bool is_forest = true;
  std::optional<std::vector<std::size_t>> offending_cycle;
  // Component of E(p) (identified by its smallest node) to its number of
  // buyers with bang-per-buck exactly one.
  std::map<std::size_t, std::size_t> critical_buyers_per_component;

  bool passed() const {
    if (!is_forest) return false;
    for (const auto& [component, count] : critical_buyers_per_component)
      if (count > 1) return false;
    return true;
  }
};

inline GenericityReport check_genericity(const MarketInstance& inst, std::span<const Rational> prices) {
  GenericityReport report;
  BangPerBuck bpb = compute_bang_per_buck(inst, prices);
  UnionFind uf(inst.num_nodes());
  std::vector<std::size_t> equality;
  for (std::size_t e = 0; e < inst.num_edges(); ++e) {
    if (!bpb.equality[e]) continue;
    equality.push_back(e);
    if (!uf.unite(buyer_node(inst.edge(e).buyer), good_node(inst, inst.edge(e).good)) && report.is_forest) {
      report.is_forest = false;
      // The cycle closes through e; recover it by a path search in the
      // equality edges added before e.
      std::vector<std::size_t> before(equality.begin(), equality.end() - 1);
      std::vector<char> mark(inst.num_edges(), 0);
      for (std::size_t f : before) mark[f] = 1;
      ResidualNetwork both(inst, mark, mark);
      Reachability reach = active_set(both, {buyer_node(inst.edge(e).buyer)});
      std::vector<std::size_t> cycle{e};
      for (const Arc& a : reach.path_to(good_node(inst, inst.edge(e).good))) cycle.push_back(a.edge);
      report.offending_cycle = cycle;
    }
  }
  std::vector<long> component_min(inst.num_nodes(), -1);
  for (std::size_t v = 0; v < inst.num_nodes(); ++v) {
    std::size_t root = uf.find(v);
    if (component_min[root] < 0) component_min[root] = static_cast<long>(v);
  }
  for (std::size_t i = 0; i < inst.num_buyers(); ++i)
    if (bpb.alpha[i] == Rational(1))
      ++report.critical_buyers_per_component[static_cast<std::size_t>(component_min[uf.find(buyer_node(i))])];
  return report;
}

}  // namespace arctic
