#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "bulkalloc/channel_sim.hpp"
#include "bulkalloc/gtba.hpp"
#include "bulkalloc/model.hpp"

namespace bulkalloc {

// Maps one realization to R risk scores in [0,1].
using Scorer = std::function<RiskVector(const ChannelRealization&)>;

// Per-realization outcome record, kept so audits can re-verify the count
// identities sample by sample.
struct SampleOutcome {
  int id = 0;
  bool gate_failure = false;
  bool selection_failure = false;  // gate passed, selected set short on good
  bool bulk_outage = false;
  bool oracle_outage = false;
  int admitted = 0;  // |{i : q_i <= q_th}|
};

struct ReliabilityCounts {
  long gate_failures = 0;
  long selection_failures = 0;  // joint event: gate pass and selection fail
  long bulk_outages = 0;
  long oracle_outages = 0;
  long nar_sum = 0;
};

// Monte Carlo estimates over one test set. Proportion standard errors use
// the normal approximation sqrt(p(1-p)/n); the admitted-count average uses
// the sample standard deviation of NAR over sqrt(n).
struct ReliabilityReport {
  int n = 0;
  int resources = 0;
  int bulk_size = 0;
  double q_th = 0.0;

  ReliabilityCounts counts;

  double gfp = 0.0;
  double gfp_se = 0.0;
  double bop = 0.0;
  double bop_se = 0.0;
  double obop = 0.0;
  double obop_se = 0.0;
  double anar = 0.0;
  double anar_se = 0.0;
  // Selection failures as a fraction of gate-pass samples (0 when none pass).
  double sel_fail_given_gate_pass = 0.0;
  double sel_fail_given_gate_pass_se = 0.0;

  std::vector<SampleOutcome> samples;
};

// True iff fewer than d resources are physically reliable: even a selector
// that knows the labels must fail. d <= 0 never fails.
bool oracle_outage(std::span<const int> g, int d);

// Scores, gates, selects and classifies every realization; tallies gate,
// selection, bulk and oracle outages plus admitted counts.
// Throws std::invalid_argument on score/label length mismatches.
ReliabilityReport evaluate(const Scorer& scorer,
                           const std::vector<ChannelRealization>& test,
                           const GtbaConfig& cfg);

// Same tally from precomputed score vectors (scores[j] belongs to test[j]).
// Lets a sweep score each model once and re-gate cheaply per (D, q_th).
ReliabilityReport evaluate_scores(const std::vector<RiskVector>& scores,
                                  const std::vector<ChannelRealization>& test,
                                  const GtbaConfig& cfg);

// Wraps a trained checkpoint as a scorer. Throws std::invalid_argument if a
// realization's resource count differs from the checkpoint's.
Scorer checkpoint_scorer(const Checkpoint& cp);
ReliabilityReport evaluate(const Checkpoint& cp,
                           const std::vector<ChannelRealization>& test,
                           const GtbaConfig& cfg);

// Pr(Binomial(resources, p_good) < d), accumulated through the term
// recurrence t_{j+1} = t_j * (R-j)/(j+1) * p/(1-p) so no large binomial
// coefficient is ever formed.
double binomial_obop(int resources, double p_good, int d);

// OBOP at fixed d and p_good for each resource count, for checking that the
// oracle outage probability vanishes as the pool grows.
std::vector<double> asymptotic_check(double p_good, int d,
                                     std::span<const int> resource_counts);

struct AuditResult {
  bool pass = true;
  std::string detail;           // human-readable reason on failure
  int first_violation_id = -1;  // realization id, -1 for count-level failures
};

// Re-verifies, from the per-sample log and the aggregate counts, that
// bulk = gate + selection exactly and that every oracle outage is also a
// bulk outage.
AuditResult decomposition_audit(const ReliabilityReport& report);

}  // namespace bulkalloc
