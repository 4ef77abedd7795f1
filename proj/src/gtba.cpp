#include "bulkalloc/gtba.hpp"

#include <algorithm>
#include <stdexcept>

namespace bulkalloc {

void GtbaConfig::validate(int resources) const {
  if (!(q_th > 0.0 && q_th < 1.0)) {
    throw std::invalid_argument("GtbaConfig: q_th must be in (0,1)");
  }
  if (bulk_size < 1 || bulk_size > resources) {
    throw std::invalid_argument("GtbaConfig: bulk_size must be in [1, resources]");
  }
}

std::vector<int> admissible_set(std::span<const double> q, double q_th) {
  std::vector<int> out;
  out.reserve(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (q[i] <= q_th) out.push_back(static_cast<int>(i));
  }
  return out;
}

GtbaDecision select_top_d(std::span<const double> q, const GtbaConfig& cfg) {
  GtbaDecision d;
  d.resources = static_cast<int>(q.size());
  d.admissible = admissible_set(q, cfg.q_th);
  d.ranked = d.admissible;
  // Stable sort of an index-ascending input: equal risks keep the lower index first.
  std::stable_sort(d.ranked.begin(), d.ranked.end(),
                   [&q](int a, int b) { return q[static_cast<std::size_t>(a)] <
                                               q[static_cast<std::size_t>(b)]; });
  if (static_cast<int>(d.admissible.size()) < cfg.bulk_size) {
    d.outcome = Outcome::kGateFailure;
  } else {
    d.outcome = Outcome::kSuccess;
    d.selected.assign(d.ranked.begin(), d.ranked.begin() + cfg.bulk_size);
  }
  return d;
}

GtbaDecision classify_outcome(GtbaDecision decision, std::span<const int> g,
                              const GtbaConfig& cfg) {
  if (static_cast<int>(g.size()) != decision.resources) {
    throw std::invalid_argument("classify_outcome: label/score length mismatch");
  }
  if (decision.outcome == Outcome::kGateFailure) return decision;
  int count = 0;
  for (int i : decision.selected) count += g[static_cast<std::size_t>(i)];
  decision.good_selected_count = count;
  decision.outcome = count >= cfg.bulk_size ? Outcome::kSuccess : Outcome::kSelectionFailure;
  return decision;
}

int nar(std::span<const double> q, double q_th) {
  int n = 0;
  for (double qi : q) n += qi <= q_th ? 1 : 0;
  return n;
}

}  // namespace bulkalloc
