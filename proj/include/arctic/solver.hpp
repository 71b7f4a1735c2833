#pragma once

// Driver: perturbs an instance, runs the requested solvers on the same
// perturbed instance, and retries with a fresh seed when a run meets a tie.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "instance.hpp"
#include "oracle.hpp"
#include "strong.hpp"
#include "trace.hpp"
#include "weak.hpp"

namespace arctic {

enum class Algorithm { weak, strong };

inline const char* to_string(Algorithm a) { return a == Algorithm::weak ? "weak" : "strong"; }

inline Algorithm parse_algorithm(const std::string& name) {
  if (name == "weak") return Algorithm::weak;
  if (name == "strong") return Algorithm::strong;
  throw std::invalid_argument("unknown algorithm " + name);
}

// Every perturbation seed tried was met by a genericity violation.
class GenericityExhausted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunStats {
  std::size_t phases = 0;
  std::size_t augmentations = 0;
  std::size_t refund_steps = 0;
  std::size_t restarts = 0;  // compressed restarts; always 0 for the weak solver
  std::size_t delayed_discoveries = 0;
  std::size_t abundant_edges = 0;
};

struct AlgorithmRun {
  Algorithm algorithm;
  Equilibrium equilibrium;
  PhaseTrace trace;
  Diagnostics diagnostics;
  RunStats stats;
};

struct SolveOptions {
  std::vector<Algorithm> algorithms{Algorithm::strong};
  std::optional<Rational> sigma;  // defaults to default_perturbation(inst)
  std::uint64_t seed = 0;
  int max_retries = 8;
};

struct SolveReport {
  MarketInstance perturbed;
  Rational sigma;
  std::uint64_t seed = 0;  // seed of the successful attempt
  int attempts = 0;
  std::vector<AlgorithmRun> runs;
};

// Seed of the given attempt; attempt 0 uses the base seed itself.
inline std::uint64_t attempt_seed(std::uint64_t base, int attempt) {
  return base + static_cast<std::uint64_t>(attempt) * 0x9E3779B97F4A7C15ULL;
}

inline AlgorithmRun run_algorithm(const MarketInstance& inst, Algorithm algorithm) {
  AlgorithmRun run{algorithm, {}, {}, {}, {}};
  if (algorithm == Algorithm::weak) {
    WeakResult r = run_weak(inst);
    run.equilibrium = std::move(r.equilibrium);
    run.trace = std::move(r.trace);
    run.diagnostics = std::move(r.diagnostics);
    run.stats.phases = r.counters.phases;
    run.stats.augmentations = r.counters.augmentations;
    run.stats.refund_steps = r.counters.refund_steps;
    run.stats.abundant_edges = r.abundant_edges;
  } else {
    StrongResult r = run_strong(inst);
    run.equilibrium = std::move(r.equilibrium);
    run.trace = std::move(r.trace);
    run.diagnostics = std::move(r.diagnostics);
    run.stats.phases = r.counters.phases;
    run.stats.augmentations = r.counters.inner.augmentations + r.counters.repair_augmentations;
    run.stats.refund_steps = r.counters.inner.refund_steps;
    run.stats.restarts = r.counters.compressed_restarts;
    run.stats.delayed_discoveries = r.counters.delayed_restarts;
    run.stats.abundant_edges = r.counters.abundant_discoveries;
  }
  return run;
}

inline SolveReport solve(const MarketInstance& inst, const SolveOptions& opt) {
  SolveReport report;
  report.sigma = opt.sigma ? *opt.sigma : default_perturbation(inst);
  std::string last_error;
  for (int attempt = 0; attempt <= opt.max_retries; ++attempt) {
    std::uint64_t seed = attempt_seed(opt.seed, attempt);
    MarketInstance perturbed = perturb(inst, {report.sigma, seed, opt.max_retries});
    try {
      std::vector<AlgorithmRun> runs;
      for (Algorithm a : opt.algorithms) runs.push_back(run_algorithm(perturbed, a));
      report.perturbed = std::move(perturbed);
      report.seed = seed;
      report.attempts = attempt + 1;
      report.runs = std::move(runs);
      return report;
    } catch (const GenericityViolation& e) {
      last_error = e.what();
    }
  }
  throw GenericityExhausted("no generic perturbation after " + std::to_string(opt.max_retries + 1) +
                            " attempts: " + last_error);
}

}  // namespace arctic
