#pragma once

// Step-by-step log of a solver run plus the invariant violations observed.

#include <optional>
#include <string>
#include <vector>

#include "rational.hpp"

namespace arctic {

enum class StepKind {
  phase_start,
  refund,
  augment_good,
  augment_buyer,
  repair_augment,
  bulk_refund,
  halve,
  delayed_discovery,
  compressed_restart,
  exact_restart,
  unresolved_support,
  terminate,
};

inline const char* to_string(StepKind k) {
  switch (k) {
    case StepKind::phase_start: return "phase_start";
    case StepKind::refund: return "refund";
    case StepKind::augment_good: return "augment_good";
    case StepKind::augment_buyer: return "augment_buyer";
    case StepKind::repair_augment: return "repair_augment";
    case StepKind::bulk_refund: return "bulk_refund";
    case StepKind::halve: return "halve";
    case StepKind::delayed_discovery: return "delayed_discovery";
    case StepKind::compressed_restart: return "compressed_restart";
    case StepKind::exact_restart: return "exact_restart";
    case StepKind::unresolved_support: return "unresolved_support";
    case StepKind::terminate: return "terminate";
  }
  return "unknown";
}

// Inner-loop steps are the ones that must lower the potential by one.
inline bool is_inner_step(StepKind k) {
  return k == StepKind::refund || k == StepKind::augment_good || k == StepKind::augment_buyer;
}

struct TraceRow {
  std::size_t phase = 0;
  Rational delta;
  StepKind kind = StepKind::phase_start;
  std::string subject;
  long phi_before = 0;
  long phi_after = 0;
  std::vector<std::string> abundant_added;
  std::optional<std::string> restart_branch;
  std::optional<Rational> new_delta;
  std::optional<Rational> threshold;
  std::vector<Rational> surpluses;
  std::vector<std::string> progress;
};

struct PhaseTrace {
  std::vector<TraceRow> rows;
};

struct Violation {
  std::string category;
  std::string message;
};

// Invariant checks that fail during a run are recorded here instead of
// aborting, so that test harnesses can count them.
struct Diagnostics {
  std::vector<Violation> violations;

  void add(std::string category, std::string message) {
    violations.push_back({std::move(category), std::move(message)});
  }
  std::size_t count(const std::string& category) const {
    std::size_t k = 0;
    for (const auto& v : violations) k += v.category == category;
    return k;
  }
  bool empty() const { return violations.empty(); }
};

}  // namespace arctic
