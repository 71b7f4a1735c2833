#pragma once

// JSON documents for solutions and traces. Every rational is written as an
// integer string or "p/q", never as a float.

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "instance.hpp"
#include "oracle.hpp"
#include "solver.hpp"
#include "trace.hpp"

namespace arctic {

inline nlohmann::json equilibrium_to_json(const MarketInstance& inst, const Equilibrium& eq) {
  nlohmann::json doc;
  doc["prices"] = nlohmann::json::array();
  for (const Rational& p : eq.state.prices) doc["prices"].push_back(p.str());
  doc["spending"] = nlohmann::json::array();
  doc["quantities"] = nlohmann::json::array();
  for (std::size_t e = 0; e < inst.num_edges(); ++e) {
    if (!eq.state.spending[e].is_positive()) continue;
    const Edge& edge = inst.edge(e);
    doc["spending"].push_back({inst.buyer_id(edge.buyer), inst.good_id(edge.good), eq.state.spending[e].str()});
    doc["quantities"].push_back({inst.buyer_id(edge.buyer), inst.good_id(edge.good), eq.quantities[e].str()});
  }
  doc["refunds"] = nlohmann::json::array();
  for (const Rational& r : eq.state.refunds) doc["refunds"].push_back(r.str());
  return doc;
}

inline nlohmann::json certificate_to_json(const Certificate& cert) {
  nlohmann::json doc = nlohmann::json::array();
  for (const CheckEntry& c : cert.entries) {
    nlohmann::json entry{{"condition", c.name}, {"passed", c.passed}};
    if (!c.passed) entry["detail"] = c.detail;
    doc.push_back(entry);
  }
  return doc;
}

inline nlohmann::json stats_to_json(const RunStats& s) {
  return {{"phases", s.phases},
          {"augmentations", s.augmentations},
          {"refund_steps", s.refund_steps},
          {"restarts", s.restarts},
          {"delayed_discoveries", s.delayed_discoveries},
          {"abundant_edges", s.abundant_edges}};
}

inline nlohmann::json diagnostics_to_json(const Diagnostics& d) {
  nlohmann::json doc = nlohmann::json::array();
  for (const Violation& v : d.violations) doc.push_back({{"category", v.category}, {"message", v.message}});
  return doc;
}

// The top-level equilibrium, certificate and stats are those of the first
// run; "runs" repeats them per algorithm.
inline nlohmann::json solution_to_json(const SolveReport& report, const std::string& algorithm_label) {
  nlohmann::json doc;
  doc["algorithm"] = algorithm_label;
  doc["goods"] = report.perturbed.good_ids();
  doc["buyers"] = report.perturbed.buyer_ids();
  doc["perturbation"] = {{"sigma", report.sigma.str()}, {"seed", report.seed}, {"attempts", report.attempts}};
  doc["runs"] = nlohmann::json::object();
  for (const AlgorithmRun& run : report.runs) {
    nlohmann::json r;
    r["equilibrium"] = equilibrium_to_json(report.perturbed, run.equilibrium);
    r["certificate"] = certificate_to_json(run.equilibrium.certificate);
    r["stats"] = stats_to_json(run.stats);
    r["diagnostics"] = diagnostics_to_json(run.diagnostics);
    doc["runs"][to_string(run.algorithm)] = r;
  }
  const AlgorithmRun& first = report.runs.front();
  doc["equilibrium"] = doc["runs"][to_string(first.algorithm)]["equilibrium"];
  doc["certificate"] = doc["runs"][to_string(first.algorithm)]["certificate"];
  doc["stats"] = doc["runs"][to_string(first.algorithm)]["stats"];
  return doc;
}

inline nlohmann::json trace_row_to_json(const TraceRow& row) {
  nlohmann::json doc{{"phase", row.phase},
                     {"delta", row.delta.str()},
                     {"kind", to_string(row.kind)},
                     {"subject", row.subject},
                     {"phi_before", row.phi_before},
                     {"phi_after", row.phi_after}};
  if (!row.abundant_added.empty()) doc["abundant_added"] = row.abundant_added;
  if (row.restart_branch) doc["restart_branch"] = *row.restart_branch;
  if (row.new_delta) doc["new_delta"] = row.new_delta->str();
  if (row.threshold) doc["threshold"] = row.threshold->str();
  if (!row.surpluses.empty()) {
    doc["surpluses"] = nlohmann::json::array();
    for (const Rational& s : row.surpluses) doc["surpluses"].push_back(s.str());
  }
  if (!row.progress.empty()) doc["progress"] = row.progress;
  return doc;
}

// One JSON object per line, each tagged with the algorithm that produced it.
inline std::string trace_to_jsonl(const SolveReport& report) {
  std::string out;
  for (const AlgorithmRun& run : report.runs)
    for (const TraceRow& row : run.trace.rows) {
      nlohmann::json doc = trace_row_to_json(row);
      doc["algorithm"] = to_string(run.algorithm);
      out += doc.dump();
      out += '\n';
    }
  return out;
}

struct SolutionDocument {
  Rational sigma;
  std::uint64_t seed = 0;
  MarketState state;
};

// Reads prices, spending triples and refunds back into a state aligned with
// the instance. Throws InstanceError on malformed or inconsistent input.
inline SolutionDocument load_solution_json(const MarketInstance& inst, const nlohmann::json& doc) {
  try {
    SolutionDocument sol;
    const auto& pert = doc.at("perturbation");
    sol.sigma = Rational::parse(pert.at("sigma").get<std::string>());
    sol.seed = pert.at("seed").get<std::uint64_t>();
    const auto& eq = doc.at("equilibrium");
    sol.state = zero_state(inst);
    const auto& prices = eq.at("prices");
    const auto& refunds = eq.at("refunds");
    if (prices.size() != inst.num_goods()) throw InstanceError("price count differs from good count");
    if (refunds.size() != inst.num_buyers()) throw InstanceError("refund count differs from buyer count");
    for (std::size_t j = 0; j < inst.num_goods(); ++j) sol.state.prices[j] = detail::json_number(prices[j], "price");
    for (std::size_t i = 0; i < inst.num_buyers(); ++i) sol.state.refunds[i] = detail::json_number(refunds[i], "refund");
    for (const auto& t : eq.at("spending")) {
      std::string b = t.at(0).get<std::string>(), g = t.at(1).get<std::string>();
      std::optional<std::size_t> edge;
      for (std::size_t e = 0; e < inst.num_edges() && !edge; ++e)
        if (inst.buyer_id(inst.edge(e).buyer) == b && inst.good_id(inst.edge(e).good) == g) edge = e;
      if (!edge) throw InstanceError("spending on unknown edge " + b + "/" + g);
      sol.state.spending[*edge] = detail::json_number(t.at(2), "spending " + b + "/" + g);
    }
    return sol;
  } catch (const nlohmann::json::exception& e) {
    throw InstanceError(std::string("malformed solution: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw InstanceError(std::string("malformed solution: ") + e.what());
  }
}

}  // namespace arctic
