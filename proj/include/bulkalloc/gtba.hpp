#pragma once

#include <span>
#include <vector>

namespace bulkalloc {

// Predicted per-resource outage risk scores, each in [0,1]; lower is safer.
using RiskVector = std::vector<double>;

struct GtbaConfig {
  double q_th = 0.4;  // gate threshold, in (0,1)
  int bulk_size = 2;  // D, required number of reliable resources

  void validate(int resources) const;
};

enum class Outcome { kSuccess, kGateFailure, kSelectionFailure };

// Result of the two-stage gate + top-D rule for one realization.
// `selected` is empty exactly when the gate fails. `good_selected_count`
// is filled in by classify_outcome and is meaningful only on gate pass.
struct GtbaDecision {
  int resources = 0;
  std::vector<int> admissible;  // {i : q_i <= q_th}, ascending index order
  std::vector<int> ranked;      // admissible sorted by ascending q, ties by index
  std::vector<int> selected;    // first D of ranked
  Outcome outcome = Outcome::kSuccess;
  int good_selected_count = 0;
};

// Indices with q_i <= q_th (inclusive comparison), ascending.
std::vector<int> admissible_set(std::span<const double> q, double q_th);

// Gate + ranking + top-D selection. Outcome is kGateFailure when fewer than
// D resources pass the gate, otherwise provisionally kSuccess until
// classify_outcome applies the labels.
GtbaDecision select_top_d(std::span<const double> q, const GtbaConfig& cfg);

// Applies the true reliability labels g to a selection-stage decision.
// Success requires at least D good resources among the selected set.
GtbaDecision classify_outcome(GtbaDecision decision, std::span<const int> g,
                              const GtbaConfig& cfg);

// Number of resources admitted by the gate.
int nar(std::span<const double> q, double q_th);

inline bool is_bulk_outage(const GtbaDecision& d) {
  return d.outcome != Outcome::kSuccess;
}

}  // namespace bulkalloc
