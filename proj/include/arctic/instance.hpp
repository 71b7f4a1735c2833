#pragma once

// Market instances: buyers with budgets, goods, and sparse positive utilities.
// Buyers and goods keep their document order, which is the tie-break order
// used by every "smallest" choice in the solvers.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <json.hpp>

#include "rational.hpp"

namespace arctic {

class InstanceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised when a run meets a tie that the perturbation was supposed to rule
// out. The driver reacts by retrying with a fresh perturbation seed.
class GenericityViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised when a structural assertion of a solver fails.
class InvariantViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct Edge {
  std::size_t buyer;
  std::size_t good;
  Rational utility;
};

class MarketInstance {
 public:
  MarketInstance() = default;

  MarketInstance(std::vector<std::string> buyer_ids, std::vector<Rational> budgets,
                 std::vector<std::string> good_ids, std::vector<Edge> edges)
      : buyer_ids_(std::move(buyer_ids)),
        budgets_(std::move(budgets)),
        good_ids_(std::move(good_ids)),
        edges_(std::move(edges)) {
    if (buyer_ids_.size() != budgets_.size()) throw InstanceError("budget count differs from buyer count");
    if (buyer_ids_.empty()) throw InstanceError("instance has no buyers");
    if (good_ids_.empty()) throw InstanceError("instance has no goods");
    check_unique(buyer_ids_, "buyer");
    check_unique(good_ids_, "good");
    for (std::size_t i = 0; i < budgets_.size(); ++i)
      if (!budgets_[i].is_positive()) throw InstanceError("non-positive budget for buyer " + buyer_ids_[i]);
    std::sort(edges_.begin(), edges_.end(), [](const Edge& a, const Edge& b) {
      return a.buyer != b.buyer ? a.buyer < b.buyer : a.good < b.good;
    });
    buyer_edges_.assign(buyer_ids_.size(), {});
    good_edges_.assign(good_ids_.size(), {});
    for (std::size_t e = 0; e < edges_.size(); ++e) {
      const Edge& edge = edges_[e];
      if (edge.buyer >= buyer_ids_.size() || edge.good >= good_ids_.size())
        throw InstanceError("utility entry refers to an unknown node");
      if (!edge.utility.is_positive())
        throw InstanceError("non-positive utility for buyer " + buyer_ids_[edge.buyer] + " and good " +
                            good_ids_[edge.good]);
      if (e > 0 && edges_[e - 1].buyer == edge.buyer && edges_[e - 1].good == edge.good)
        throw InstanceError("duplicate utility entry for buyer " + buyer_ids_[edge.buyer] + " and good " +
                            good_ids_[edge.good]);
      buyer_edges_[edge.buyer].push_back(e);
      good_edges_[edge.good].push_back(e);
    }
    for (std::size_t i = 0; i < buyer_ids_.size(); ++i)
      if (buyer_edges_[i].empty()) throw InstanceError("isolated buyer " + buyer_ids_[i]);
    for (std::size_t j = 0; j < good_ids_.size(); ++j)
      if (good_edges_[j].empty()) throw InstanceError("isolated good " + good_ids_[j]);
  }

  std::size_t num_buyers() const { return buyer_ids_.size(); }
  std::size_t num_goods() const { return good_ids_.size(); }
  std::size_t num_nodes() const { return num_buyers() + num_goods(); }
  std::size_t num_edges() const { return edges_.size(); }

  const std::string& buyer_id(std::size_t i) const { return buyer_ids_[i]; }
  const std::string& good_id(std::size_t j) const { return good_ids_[j]; }
  const std::vector<std::string>& buyer_ids() const { return buyer_ids_; }
  const std::vector<std::string>& good_ids() const { return good_ids_; }
  const Rational& budget(std::size_t i) const { return budgets_[i]; }
  const std::vector<Rational>& budgets() const { return budgets_; }

  const Edge& edge(std::size_t e) const { return edges_[e]; }
  const std::vector<Edge>& edges() const { return edges_; }
  // Edge ids of a buyer sorted by good, and of a good sorted by buyer.
  std::span<const std::size_t> buyer_edges(std::size_t i) const { return buyer_edges_[i]; }
  std::span<const std::size_t> good_edges(std::size_t j) const { return good_edges_[j]; }

  std::optional<std::size_t> find_edge(std::size_t buyer, std::size_t good) const {
    for (std::size_t e : buyer_edges_[buyer])
      if (edges_[e].good == good) return e;
    return std::nullopt;
  }

  // Same buyers, goods and utilities with a different budget vector.
  MarketInstance with_budgets(std::vector<Rational> budgets) const {
    MarketInstance copy = *this;
    copy.budgets_ = std::move(budgets);
    return copy;
  }

  // Same sparsity pattern with replaced utilities, indexed by edge id.
  MarketInstance with_utilities(const std::vector<Rational>& utilities) const {
    MarketInstance copy = *this;
    for (std::size_t e = 0; e < copy.edges_.size(); ++e) copy.edges_[e].utility = utilities[e];
    return copy;
  }

 private:
  static void check_unique(const std::vector<std::string>& ids, const char* what) {
    std::unordered_set<std::string> seen;
    for (const auto& id : ids)
      if (!seen.insert(id).second) throw InstanceError(std::string("duplicate ") + what + " id " + id);
  }

  std::vector<std::string> buyer_ids_;
  std::vector<Rational> budgets_;
  std::vector<std::string> good_ids_;
  std::vector<Edge> edges_;
  std::vector<std::vector<std::size_t>> buyer_edges_;
  std::vector<std::vector<std::size_t>> good_edges_;
};

struct InstanceStats {
  std::size_t n = 0;
  std::size_t m = 0;
  Rational u_max;
  Rational e_max;
  Rational d_bound;  // n * u_max^n
};

inline InstanceStats compute_stats(const MarketInstance& inst) {
  InstanceStats s;
  s.n = inst.num_nodes();
  s.m = inst.num_edges();
  s.u_max = inst.edge(0).utility;
  for (const Edge& e : inst.edges()) s.u_max = max(s.u_max, e.utility);
  s.e_max = inst.budget(0);
  for (const Rational& b : inst.budgets()) s.e_max = max(s.e_max, b);
  s.d_bound = Rational(static_cast<long>(s.n)) * pow(s.u_max, s.n);
  return s;
}

namespace detail {

inline Rational json_number(const nlohmann::json& v, const std::string& where) {
  if (v.is_string()) {
    try {
      return Rational::parse(v.get<std::string>());
    } catch (const std::exception& e) {
      throw InstanceError(where + ": " + e.what());
    }
  }
  if (v.is_number_integer()) return Rational(v.get<long>());
  throw InstanceError(where + ": expected an integer or a \"p/q\" string");
}

}  // namespace detail

inline MarketInstance load_instance_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw InstanceError("instance document must be an object");
  for (const char* key : {"buyers", "goods", "utilities"})
    if (!doc.contains(key) || !doc.at(key).is_array())
      throw InstanceError(std::string("instance document needs an array '") + key + "'");

  std::vector<std::string> buyer_ids;
  std::vector<Rational> budgets;
  std::unordered_map<std::string, std::size_t> buyer_index, good_index;
  for (const auto& b : doc.at("buyers")) {
    if (!b.is_object() || !b.contains("id") || !b.at("id").is_string() || !b.contains("budget"))
      throw InstanceError("each buyer needs a string 'id' and a 'budget'");
    auto id = b.at("id").get<std::string>();
    if (!buyer_index.emplace(id, buyer_ids.size()).second) throw InstanceError("duplicate buyer id " + id);
    buyer_ids.push_back(id);
    budgets.push_back(detail::json_number(b.at("budget"), "budget of buyer " + id));
  }
  std::vector<std::string> good_ids;
  for (const auto& g : doc.at("goods")) {
    if (!g.is_string()) throw InstanceError("each good must be a string id");
    auto id = g.get<std::string>();
    if (!good_index.emplace(id, good_ids.size()).second) throw InstanceError("duplicate good id " + id);
    good_ids.push_back(id);
  }
  std::vector<Edge> edges;
  for (const auto& u : doc.at("utilities")) {
    if (!u.is_array() || u.size() != 3 || !u[0].is_string() || !u[1].is_string())
      throw InstanceError("each utility must be [buyer_id, good_id, value]");
    auto bid = u[0].get<std::string>();
    auto gid = u[1].get<std::string>();
    auto bi = buyer_index.find(bid);
    if (bi == buyer_index.end()) throw InstanceError("utility refers to unknown buyer " + bid);
    auto gi = good_index.find(gid);
    if (gi == good_index.end()) throw InstanceError("utility refers to unknown good " + gid);
    edges.push_back({bi->second, gi->second, detail::json_number(u[2], "utility " + bid + "/" + gid)});
  }
  return MarketInstance(std::move(buyer_ids), std::move(budgets), std::move(good_ids), std::move(edges));
}

inline MarketInstance load_instance(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw InstanceError(std::string("parse failure: ") + e.what());
  }
  return load_instance_json(doc);
}

inline nlohmann::json instance_to_json(const MarketInstance& inst) {
  nlohmann::json doc;
  doc["buyers"] = nlohmann::json::array();
  for (std::size_t i = 0; i < inst.num_buyers(); ++i)
    doc["buyers"].push_back({{"id", inst.buyer_id(i)}, {"budget", inst.budget(i).str()}});
  doc["goods"] = inst.good_ids();
  doc["utilities"] = nlohmann::json::array();
  for (const Edge& e : inst.edges())
    doc["utilities"].push_back({inst.buyer_id(e.buyer), inst.good_id(e.good), e.utility.str()});
  return doc;
}

struct PerturbationConfig {
  Rational magnitude;  // sigma
  std::uint64_t seed = 0;
  int max_retries = 8;
};

// Upper bound on sigma keeping every perturbed utility within a factor 2 of
// its original: 1 / (2 n m u_max).
inline Rational perturbation_bound(const MarketInstance& inst) {
  InstanceStats s = compute_stats(inst);
  return Rational(1) / (Rational(static_cast<long>(2 * s.n * s.m)) * s.u_max);
}

// Default sigma: 1/10^6, shrunk to half the bound when the bound is tighter.
inline Rational default_perturbation(const MarketInstance& inst) {
  Rational half_bound = perturbation_bound(inst) / Rational(2);
  return min(Rational(1, 1000000), half_bound);
}

// Each U_ij becomes U_ij (1 + sigma eps_ij) with eps_ij = k / 2^32 for
// distinct k in [1, 2^32 - 1] drawn from a 64-bit Mersenne twister. Only the
// raw engine output is used, so the draw is identical on every platform.
inline MarketInstance perturb(const MarketInstance& inst, const PerturbationConfig& cfg) {
  if (cfg.magnitude.is_zero()) return inst;
  if (cfg.magnitude.is_negative() || cfg.magnitude >= perturbation_bound(inst))
    throw InstanceError("perturbation magnitude outside (0, 1/(2 n m u_max))");
  std::mt19937_64 engine(cfg.seed);
  std::unordered_set<std::uint64_t> used;
  const mpz_class scale = mpz_class(1) << 32;
  std::vector<Rational> utilities;
  utilities.reserve(inst.num_edges());
  for (const Edge& e : inst.edges()) {
    std::uint64_t k = 0;
    while (k == 0 || !used.insert(k).second) k = engine() >> 32;
    Rational eps(mpq_class(mpz_class(static_cast<unsigned long>(k)), scale));
    utilities.push_back(e.utility * (Rational(1) + cfg.magnitude * eps));
  }
  return inst.with_utilities(utilities);
}

}  // namespace arctic
