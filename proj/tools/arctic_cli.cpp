// Command-line front end: solve, verify and bench.
//
// Exit status: 0 certified equilibrium, 1 input error, 2 no generic
// perturbation within the retry budget, 3 a solver result that failed
// certification or a solver invariant failure.

#include <chrono>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "arctic/arctic.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 1;
constexpr int kExitGenericity = 2;
constexpr int kExitSolver = 3;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw arctic::InstanceError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw arctic::InstanceError("cannot write " + path);
  out << text;
}

std::vector<arctic::Algorithm> parse_algorithms(const std::string& name) {
  if (name == "both") return {arctic::Algorithm::weak, arctic::Algorithm::strong};
  return {arctic::parse_algorithm(name)};
}

struct SolveArgs {
  std::string input;
  std::string output;
  std::string trace;
  std::string algorithm = "strong";
  std::string perturb;
  std::uint64_t seed = 0;
  int max_retries = 8;
};

int cmd_solve(const SolveArgs& args) {
  arctic::MarketInstance inst;
  arctic::SolveOptions opt;
  try {
    inst = arctic::load_instance(read_file(args.input));
    opt.algorithms = parse_algorithms(args.algorithm);
    if (!args.perturb.empty()) opt.sigma = arctic::Rational::parse(args.perturb);
    opt.seed = args.seed;
    opt.max_retries = args.max_retries;
    if (opt.sigma && !opt.sigma->is_zero() && *opt.sigma >= arctic::perturbation_bound(inst))
      throw arctic::InstanceError("--perturb must be below " + arctic::perturbation_bound(inst).str());
    if (opt.sigma && opt.sigma->is_negative()) throw arctic::InstanceError("--perturb must be nonnegative");
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }

  arctic::SolveReport report;
  try {
    report = arctic::solve(inst, opt);
  } catch (const arctic::GenericityExhausted& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitGenericity;
  } catch (const arctic::InvariantViolation& e) {
    std::cerr << "error: solver invariant failed: " << e.what() << "\n";
    return kExitSolver;
  }

  bool certified = true;
  for (const auto& run : report.runs) certified = certified && run.equilibrium.certificate.passed();
  for (std::size_t k = 1; k < report.runs.size(); ++k)
    if (!(report.runs[k].equilibrium.state == report.runs[0].equilibrium.state)) {
      std::cerr << "error: " << arctic::to_string(report.runs[k].algorithm) << " and "
                << arctic::to_string(report.runs[0].algorithm) << " disagree\n";
      certified = false;
    }

  std::string doc = arctic::solution_to_json(report, args.algorithm).dump(2) + "\n";
  try {
    if (args.output.empty())
      std::cout << doc;
    else
      write_file(args.output, doc);
    if (!args.trace.empty()) write_file(args.trace, arctic::trace_to_jsonl(report));
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return certified ? kExitOk : kExitSolver;
}

int cmd_verify(const std::string& input, const std::string& solution) {
  arctic::MarketInstance perturbed;
  arctic::SolutionDocument sol;
  try {
    arctic::MarketInstance inst = arctic::load_instance(read_file(input));
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(read_file(solution));
    } catch (const nlohmann::json::parse_error& e) {
      throw arctic::InstanceError(std::string("parse failure: ") + e.what());
    }
    // The solution was computed on the perturbed instance; rebuild it first.
    arctic::SolutionDocument probe = arctic::load_solution_json(inst, doc);
    perturbed = arctic::perturb(inst, {probe.sigma, probe.seed, 0});
    sol = arctic::load_solution_json(perturbed, doc);
    for (const auto& p : sol.state.prices)
      if (!p.is_positive()) throw arctic::InstanceError("solution has a non-positive price");
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
  arctic::Certificate cert = arctic::check_equilibrium(perturbed, sol.state);
  for (const auto& c : cert.entries)
    std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << (c.passed ? "" : " (" + c.detail + ")") << "\n";
  std::cout << (cert.passed() ? "certified" : "not an equilibrium") << "\n";
  return cert.passed() ? kExitOk : kExitSolver;
}

struct BenchArgs {
  std::vector<std::size_t> sizes{6, 10};
  std::size_t trials = 3;
  std::uint64_t seed = 0;
  std::string csv;
  std::string algorithm = "both";
};

int cmd_bench(const BenchArgs& args) {
  std::vector<arctic::Algorithm> algorithms;
  try {
    algorithms = parse_algorithms(args.algorithm);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
  std::ostringstream csv;
  csv << "n,m,trial,algorithm,phases,augmentations,restarts,abundant_edges,wall_ms\n";
  int status = kExitOk;
  for (std::size_t n : args.sizes) {
    for (std::size_t trial = 0; trial < args.trials; ++trial) {
      std::uint64_t seed = args.seed + 1000003ULL * n + trial;
      arctic::MarketInstance inst = arctic::random_instance_of_size(seed, n);
      std::vector<arctic::MarketState> states;
      for (arctic::Algorithm a : algorithms) {
        arctic::SolveOptions opt;
        opt.algorithms = {a};
        opt.seed = seed;
        auto t0 = std::chrono::steady_clock::now();
        arctic::SolveReport report;
        try {
          report = arctic::solve(inst, opt);
        } catch (const std::exception& e) {
          std::cerr << "error: n=" << n << " trial=" << trial << ": " << e.what() << "\n";
          status = kExitSolver;
          continue;
        }
        double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        const arctic::AlgorithmRun& run = report.runs.front();
        if (!run.equilibrium.certificate.passed()) {
          std::cerr << "error: n=" << n << " trial=" << trial << ": uncertified result\n";
          status = kExitSolver;
        }
        if (run.stats.abundant_edges + 1 > inst.num_nodes())
          std::cerr << "warning: n=" << n << " trial=" << trial << ": " << run.stats.abundant_edges
                    << " abundant edges\n";
        states.push_back(run.equilibrium.state);
        csv << inst.num_nodes() << ',' << inst.num_edges() << ',' << trial << ',' << arctic::to_string(a) << ','
            << run.stats.phases << ',' << run.stats.augmentations << ',' << run.stats.restarts << ','
            << run.stats.abundant_edges << ',' << std::fixed << std::setprecision(3) << ms << '\n';
      }
      for (std::size_t k = 1; k < states.size(); ++k)
        if (!(states[k] == states[0])) {
          std::cerr << "error: n=" << n << " trial=" << trial << ": solvers disagree\n";
          status = kExitSolver;
        }
    }
  }
  try {
    if (args.csv.empty())
      std::cout << csv.str();
    else
      write_file(args.csv, csv.str());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return status;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Exact equilibria of the Arctic Auction"};
  app.require_subcommand(1);

  SolveArgs solve;
  auto* s = app.add_subcommand("solve", "Compute an equilibrium");
  s->add_option("--input", solve.input, "Instance JSON")->required();
  s->add_option("--output", solve.output, "Solution JSON (default: stdout)");
  s->add_option("--trace", solve.trace, "Trace as JSON lines");
  s->add_option("--algorithm", solve.algorithm, "weak, strong or both")
      ->check(CLI::IsMember({"weak", "strong", "both"}));
  s->add_option("--perturb", solve.perturb, "Perturbation magnitude as an integer or p/q");
  s->add_option("--seed", solve.seed, "Perturbation seed");
  s->add_option("--max-retries", solve.max_retries, "Fresh seeds to try after a genericity failure")
      ->check(CLI::NonNegativeNumber);

  std::string verify_input, verify_solution;
  auto* v = app.add_subcommand("verify", "Certify a solution document");
  v->add_option("--input", verify_input, "Instance JSON")->required();
  v->add_option("--solution", verify_solution, "Solution JSON written by solve")->required();

  BenchArgs bench;
  auto* b = app.add_subcommand("bench", "Run both solvers on random instances");
  b->add_option("--sizes", bench.sizes, "Node counts, comma separated")->delimiter(',');
  b->add_option("--trials", bench.trials, "Trials per size");
  b->add_option("--seed", bench.seed, "Base seed");
  b->add_option("--csv", bench.csv, "CSV output (default: stdout)");
  b->add_option("--algorithm", bench.algorithm, "weak, strong or both")
      ->check(CLI::IsMember({"weak", "strong", "both"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  if (*s) return cmd_solve(solve);
  if (*v) return cmd_verify(verify_input, verify_solution);
  return cmd_bench(bench);
}
