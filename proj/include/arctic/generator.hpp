#pragma once

// Random integer instances for benchmarks and tests.

#include <algorithm>
#include <cstdint>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "instance.hpp"

namespace arctic {

struct GeneratorConfig {
  std::size_t buyers = 2;
  std::size_t goods = 2;
  std::size_t edges = 4;  // clamped to [max(buyers, goods), buyers * goods]
  long max_budget = 10;
  long max_utility = 10;
};

// Draws budgets and utilities uniformly from [1, max]. Every buyer and every
// good receives at least one edge; the remaining edges are uniform among
// unused pairs. Uses only raw engine output so results are portable.
inline MarketInstance random_instance(std::uint64_t seed, const GeneratorConfig& cfg) {
  std::mt19937_64 engine(seed);
  auto draw = [&](std::uint64_t bound) { return engine() % bound; };
  const std::size_t nb = cfg.buyers, ng = cfg.goods;
  std::size_t m = std::clamp(cfg.edges, std::max(nb, ng), nb * ng);

  std::set<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < nb; ++i) pairs.insert({i, draw(ng)});
  for (std::size_t j = 0; j < ng; ++j) {
    bool covered = false;
    for (const auto& p : pairs) covered = covered || p.second == j;
    if (!covered) pairs.insert({draw(nb), j});
  }
  while (pairs.size() < m) pairs.insert({draw(nb), draw(ng)});

  std::vector<std::string> buyer_ids, good_ids;
  std::vector<Rational> budgets;
  for (std::size_t i = 0; i < nb; ++i) {
    buyer_ids.push_back("b" + std::to_string(i + 1));
    budgets.emplace_back(static_cast<long>(1 + draw(static_cast<std::uint64_t>(cfg.max_budget))));
  }
  for (std::size_t j = 0; j < ng; ++j) good_ids.push_back("g" + std::to_string(j + 1));
  std::vector<Edge> edges;
  for (const auto& [i, j] : pairs)
    edges.push_back({i, j, Rational(static_cast<long>(1 + draw(static_cast<std::uint64_t>(cfg.max_utility))))});
  return MarketInstance(std::move(buyer_ids), std::move(budgets), std::move(good_ids), std::move(edges));
}

// Instance with n nodes split evenly between buyers and goods and about two
// edges per node.
inline MarketInstance random_instance_of_size(std::uint64_t seed, std::size_t n) {
  GeneratorConfig cfg;
  cfg.buyers = std::max<std::size_t>(1, n / 2);
  cfg.goods = std::max<std::size_t>(1, n - cfg.buyers);
  cfg.edges = 2 * n;
  return random_instance(seed, cfg);
}

}  // namespace arctic
