#include "bulkalloc/reliability.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace bulkalloc {

namespace {

double proportion_se(double p, int n) {
  if (n <= 0) return 0.0;
  return std::sqrt(std::max(0.0, p * (1.0 - p)) / static_cast<double>(n));
}

}  // namespace

bool oracle_outage(std::span<const int> g, int d) {
  if (d <= 0) return false;
  long good = 0;
  for (int v : g) good += (v != 0);
  return good < d;
}

ReliabilityReport evaluate_scores(const std::vector<RiskVector>& scores,
                                  const std::vector<ChannelRealization>& test,
                                  const GtbaConfig& cfg) {
  if (scores.size() != test.size()) {
    throw std::invalid_argument("score matrix has " + std::to_string(scores.size()) +
                                " rows for " + std::to_string(test.size()) +
                                " realizations");
  }
  ReliabilityReport rep;
  rep.n = static_cast<int>(test.size());
  rep.bulk_size = cfg.bulk_size;
  rep.q_th = cfg.q_th;
  rep.samples.reserve(test.size());

  double nar_sq_sum = 0.0;
  for (std::size_t idx = 0; idx < test.size(); ++idx) {
    const ChannelRealization& real = test[idx];
    const RiskVector& q = scores[idx];
    if (q.size() != real.good.size()) {
      throw std::invalid_argument("scorer returned " + std::to_string(q.size()) +
                                  " scores for " + std::to_string(real.good.size()) +
                                  " resources");
    }
    if (rep.resources == 0) rep.resources = static_cast<int>(q.size());
    cfg.validate(static_cast<int>(q.size()));

    GtbaDecision dec = classify_outcome(select_top_d(q, cfg), real.good, cfg);

    SampleOutcome s;
    s.id = static_cast<int>(idx);
    s.gate_failure = dec.outcome == Outcome::kGateFailure;
    s.selection_failure = dec.outcome == Outcome::kSelectionFailure;
    s.bulk_outage = is_bulk_outage(dec);
    s.oracle_outage = oracle_outage(real.good, cfg.bulk_size);
    s.admitted = static_cast<int>(dec.admissible.size());
    rep.samples.push_back(s);

    rep.counts.gate_failures += s.gate_failure;
    rep.counts.selection_failures += s.selection_failure;
    rep.counts.bulk_outages += s.bulk_outage;
    rep.counts.oracle_outages += s.oracle_outage;
    rep.counts.nar_sum += s.admitted;
    nar_sq_sum += static_cast<double>(s.admitted) * s.admitted;
  }

  if (rep.n > 0) {
    const double n = rep.n;
    rep.gfp = rep.counts.gate_failures / n;
    rep.bop = rep.counts.bulk_outages / n;
    rep.obop = rep.counts.oracle_outages / n;
    rep.anar = rep.counts.nar_sum / n;
    rep.gfp_se = proportion_se(rep.gfp, rep.n);
    rep.bop_se = proportion_se(rep.bop, rep.n);
    rep.obop_se = proportion_se(rep.obop, rep.n);
    const double var = std::max(0.0, nar_sq_sum / n - rep.anar * rep.anar);
    rep.anar_se = std::sqrt(var / n);

    const long passes = rep.n - rep.counts.gate_failures;
    if (passes > 0) {
      rep.sel_fail_given_gate_pass =
          static_cast<double>(rep.counts.selection_failures) / passes;
      rep.sel_fail_given_gate_pass_se =
          proportion_se(rep.sel_fail_given_gate_pass, static_cast<int>(passes));
    }
  }
  return rep;
}

ReliabilityReport evaluate(const Scorer& scorer,
                           const std::vector<ChannelRealization>& test,
                           const GtbaConfig& cfg) {
  std::vector<RiskVector> scores;
  scores.reserve(test.size());
  for (const ChannelRealization& real : test) scores.push_back(scorer(real));
  return evaluate_scores(scores, test, cfg);
}

Scorer checkpoint_scorer(const Checkpoint& cp) {
  // Copy the weights so the scorer owns its state.
  const ModelWeights weights = cp.weights;
  const int expect_r = cp.sim.resources;
  return [weights, expect_r](const ChannelRealization& real) {
    if (static_cast<int>(real.past.size()) != expect_r) {
      throw std::invalid_argument(
          "checkpoint was trained with " + std::to_string(expect_r) +
          " resources, realization has " + std::to_string(real.past.size()));
    }
    RiskVector q(real.past.size());
    for (std::size_t i = 0; i < real.past.size(); ++i) {
      q[i] = score_sequence(weights, real.past[i]);
    }
    return q;
  };
}

ReliabilityReport evaluate(const Checkpoint& cp,
                           const std::vector<ChannelRealization>& test,
                           const GtbaConfig& cfg) {
  return evaluate(checkpoint_scorer(cp), test, cfg);
}

double binomial_obop(int resources, double p_good, int d) {
  if (resources < 0) throw std::invalid_argument("negative resource count");
  if (p_good < 0.0 || p_good > 1.0) {
    throw std::invalid_argument("p_good outside [0,1]");
  }
  if (d <= 0) return 0.0;
  if (d > resources) return 1.0;
  if (p_good == 0.0) return 1.0;  // count is always 0 < d
  if (p_good == 1.0) return 0.0;  // count is always resources >= d

  const double ratio = p_good / (1.0 - p_good);
  double term = std::pow(1.0 - p_good, resources);  // Pr(count = 0)
  double sum = term;
  for (int j = 0; j < d - 1; ++j) {
    term *= ratio * static_cast<double>(resources - j) / (j + 1);
    sum += term;
  }
  return std::min(1.0, sum);
}

std::vector<double> asymptotic_check(double p_good, int d,
                                     std::span<const int> resource_counts) {
  std::vector<double> table;
  table.reserve(resource_counts.size());
  for (int r : resource_counts) table.push_back(binomial_obop(r, p_good, d));
  return table;
}

AuditResult decomposition_audit(const ReliabilityReport& report) {
  AuditResult res;

  long gate = 0, sel = 0, bulk = 0;
  for (const SampleOutcome& s : report.samples) {
    if (s.gate_failure && s.selection_failure) {
      return {false, "sample flags both gate and selection failure", s.id};
    }
    if (s.bulk_outage != (s.gate_failure || s.selection_failure)) {
      return {false, "bulk flag disagrees with gate/selection flags", s.id};
    }
    if (s.oracle_outage && !s.bulk_outage) {
      return {false, "oracle outage without bulk outage", s.id};
    }
    gate += s.gate_failure;
    sel += s.selection_failure;
    bulk += s.bulk_outage;
  }

  const ReliabilityCounts& c = report.counts;
  if (c.bulk_outages != c.gate_failures + c.selection_failures) {
    res.pass = false;
    res.detail = "count identity violated: bulk=" + std::to_string(c.bulk_outages) +
                 " gate=" + std::to_string(c.gate_failures) +
                 " sel=" + std::to_string(c.selection_failures) + " (discrepancy " +
                 std::to_string(c.bulk_outages - c.gate_failures - c.selection_failures) +
                 ")";
    return res;
  }
  if (!report.samples.empty() &&
      (gate != c.gate_failures || sel != c.selection_failures || bulk != c.bulk_outages)) {
    res.pass = false;
    res.detail = "aggregate counts disagree with the per-sample log";
    return res;
  }
  if (c.oracle_outages > c.bulk_outages) {
    res.pass = false;
    res.detail = "oracle outages exceed bulk outages: " +
                 std::to_string(c.oracle_outages) + " > " +
                 std::to_string(c.bulk_outages);
    return res;
  }
  res.detail = "ok";
  return res;
}

}  // namespace bulkalloc
