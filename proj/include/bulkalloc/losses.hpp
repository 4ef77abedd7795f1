#pragma once

#include <span>
#include <string>
#include <vector>

namespace bulkalloc {

enum class LossKind { kRbol, kBce, kMse, kMae };

std::string loss_name(LossKind kind);
LossKind loss_from_name(const std::string& name);  // throws on unknown name

// Hyperparameters of the ranking-aware bulk outage loss. The tau and
// lambda_bce defaults adapt to the bulk size D; see default_hyperparams.
struct RbolConfig {
  double q_th = 0.4;
  int bulk_size = 2;        // D
  double tau = 0.15;        // soft-gate temperature
  double lambda_rank = 8.0; // weight of the cutoff ranking penalty
  double margin = 0.08;     // required score gap at the selection boundary
  double lambda_bce = 0.2;
  double eps_clip = 1e-7;   // clamp applied before logarithms

  static RbolConfig for_bulk_size(int d, double q_th = 0.4);
  void validate() const;
};

// (tau, lambda_bce) schedule: tau = 0.15 for D <= 2, max(0.08, 0.2/D)
// otherwise; lambda_bce = 0.2 for D <= 2, 0.05 otherwise.
struct RbolHyper {
  double tau;
  double lambda_bce;
};
RbolHyper default_hyperparams(int d);

// Value + analytic gradient of a loss over one realization's score vector,
// with the intermediate quantities surfaced for logging.
struct LossEval {
  double total = 0.0;
  double shortfall_term = 0.0;
  double cut_term = 0.0;  // omega-weighted softplus, before lambda_rank
  double bce_term = 0.0;
  std::vector<double> grad;  // d total / d q_i

  // diagnostics (RBOL only; zero / empty for baselines)
  std::vector<double> soft_accept;  // p_i
  double soft_good = 0.0;           // G
  double shortfall = 0.0;           // D - G
  double cutoff_weight = 0.0;       // omega
  double q_max_sel = 0.0;
  double q_min_unsel = 0.0;
};

// Numerically safe primitives.
double softplus(double x);          // max(x,0) + log1p(exp(-|x|))
double logistic(double x);          // 1 / (1 + exp(-x))

// Soft gate acceptance p_i = logistic((q_th - q_i) / tau).
double soft_acceptance(double q_i, double q_th, double tau);

// Soft count of resources that are both accepted and good:
// G = sum_i p_i * (1 - y_i).
double soft_good_count(std::span<const double> q, std::span<const int> y,
                       double q_th, double tau);

// softplus(D - G); penalizes a soft shortfall of good admitted resources.
double shortfall_loss(double soft_good, int d);

// Boundary sets for the ranking penalty. Selected = D lowest-risk admissible
// resources when the gate passes; when it does not, the D lowest-risk
// resources overall so training still receives a ranking signal. Unselected
// is everything else. Ties resolve to the lower index.
struct CutoffSets {
  std::vector<int> selected;
  std::vector<int> unselected;
  double q_max_sel = 0.0;
  double q_min_unsel = 0.0;
  int arg_max_sel = -1;
  int arg_min_unsel = -1;
};
CutoffSets cutoff_sets(std::span<const double> q, double q_th, int d);

// omega = (good fraction outside the selected set) * (bad fraction inside).
// Zero whenever either factor vanishes, so the ranking penalty only fires on
// genuinely harmful inversions.
double cutoff_weight(std::span<const int> selected, std::span<const int> unselected,
                     std::span<const int> g);

// omega * softplus(q_max_sel + margin - q_min_unsel); zero when the
// unselected set is empty (D = R).
double cutoff_loss(std::span<const double> q, std::span<const int> g,
                   const RbolConfig& cfg);

// Mean binary cross-entropy with scores clamped to [eps, 1-eps].
double bce_loss(std::span<const double> q, std::span<const int> y, double eps_clip);

// Full RBOL evaluation: total = shortfall + lambda_rank * cut + lambda_bce * bce,
// with the analytic gradient. Set memberships, omega and the achieving indices
// of the boundary max/min are treated as constants of the forward pass.
LossEval rbol(std::span<const double> q, std::span<const int> y, const RbolConfig& cfg);

// Pointwise baselines (per-resource mean reduction) with analytic gradients.
LossEval baseline_loss(LossKind kind, std::span<const double> q,
                       std::span<const int> y, double eps_clip = 1e-7);

}  // namespace bulkalloc
