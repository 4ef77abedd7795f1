#include "bulkalloc/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <cctype>

namespace bulkalloc {

std::string loss_name(LossKind kind) {
  switch (kind) {
    case LossKind::kRbol: return "RBOL";
    case LossKind::kBce: return "BCE";
    case LossKind::kMse: return "MSE";
    case LossKind::kMae: return "MAE";
  }
  return "?";
}

LossKind loss_from_name(const std::string& name) {
  std::string up(name);
  std::transform(up.begin(), up.end(), up.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  if (up == "RBOL") return LossKind::kRbol;
  if (up == "BCE") return LossKind::kBce;
  if (up == "MSE") return LossKind::kMse;
  if (up == "MAE") return LossKind::kMae;
  throw std::invalid_argument("unknown loss: " + name);
}

RbolHyper default_hyperparams(int d) {
  if (d <= 2) return {0.15, 0.2};
  return {std::max(0.08, 0.2 / d), 0.05};
}

RbolConfig RbolConfig::for_bulk_size(int d, double q_th) {
  RbolConfig cfg;
  cfg.q_th = q_th;
  cfg.bulk_size = d;
  const RbolHyper h = default_hyperparams(d);
  cfg.tau = h.tau;
  cfg.lambda_bce = h.lambda_bce;
  return cfg;
}

void RbolConfig::validate() const {
  if (!(tau > 0.0)) throw std::invalid_argument("RbolConfig: tau must be > 0");
  if (!(lambda_rank > 0.0)) throw std::invalid_argument("RbolConfig: lambda_rank must be > 0");
  if (margin < 0.0) throw std::invalid_argument("RbolConfig: margin must be >= 0");
  if (lambda_bce < 0.0) throw std::invalid_argument("RbolConfig: lambda_bce must be >= 0");
  if (bulk_size < 1) throw std::invalid_argument("RbolConfig: bulk_size must be >= 1");
  if (!(q_th > 0.0 && q_th < 1.0)) throw std::invalid_argument("RbolConfig: q_th must be in (0,1)");
  if (!(eps_clip > 0.0 && eps_clip < 0.5)) {
    throw std::invalid_argument("RbolConfig: eps_clip must be in (0, 0.5)");
  }
}

double softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double soft_acceptance(double q_i, double q_th, double tau) {
  return logistic((q_th - q_i) / tau);
}

double soft_good_count(std::span<const double> q, std::span<const int> y,
                       double q_th, double tau) {
  if (q.size() != y.size()) {
    throw std::invalid_argument("soft_good_count: length mismatch");
  }
  double g = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    g += soft_acceptance(q[i], q_th, tau) * (1 - y[i]);
  }
  return g;
}

double shortfall_loss(double soft_good, int d) {
  return softplus(static_cast<double>(d) - soft_good);
}

CutoffSets cutoff_sets(std::span<const double> q, double q_th, int d) {
  const int r = static_cast<int>(q.size());
  if (d < 0 || d > r) {
    throw std::invalid_argument("cutoff_sets: d outside [0, resources]");
  }
  std::vector<int> pool;  // candidates the selected set is drawn from
  pool.reserve(q.size());
  for (int i = 0; i < r; ++i) {
    if (q[static_cast<std::size_t>(i)] <= q_th) pool.push_back(i);
  }
  if (static_cast<int>(pool.size()) < d) {
    // Gate would fail; fall back to the unconditional top-D by risk.
    pool.resize(static_cast<std::size_t>(r));
    for (int i = 0; i < r; ++i) pool[static_cast<std::size_t>(i)] = i;
  }
  std::stable_sort(pool.begin(), pool.end(), [&q](int a, int b) {
    return q[static_cast<std::size_t>(a)] < q[static_cast<std::size_t>(b)];
  });

  CutoffSets sets;
  sets.selected.assign(pool.begin(), pool.begin() + d);
  std::vector<char> in_sel(static_cast<std::size_t>(r), 0);
  for (int i : sets.selected) in_sel[static_cast<std::size_t>(i)] = 1;
  for (int i = 0; i < r; ++i) {
    if (!in_sel[static_cast<std::size_t>(i)]) sets.unselected.push_back(i);
  }

  sets.q_max_sel = -std::numeric_limits<double>::infinity();
  for (int i : sets.selected) {
    const double qi = q[static_cast<std::size_t>(i)];
    if (qi > sets.q_max_sel) {  // strict: lower index wins ties
      sets.q_max_sel = qi;
      sets.arg_max_sel = i;
    }
  }
  sets.q_min_unsel = std::numeric_limits<double>::infinity();
  for (int i : sets.unselected) {
    const double qi = q[static_cast<std::size_t>(i)];
    if (qi < sets.q_min_unsel) {
      sets.q_min_unsel = qi;
      sets.arg_min_unsel = i;
    }
  }
  return sets;
}

double cutoff_weight(std::span<const int> selected, std::span<const int> unselected,
                     std::span<const int> g) {
  if (selected.empty() || unselected.empty()) return 0.0;
  double good_outside = 0.0;
  for (int i : unselected) good_outside += g[static_cast<std::size_t>(i)];
  good_outside /= static_cast<double>(unselected.size());
  double good_inside = 0.0;
  for (int i : selected) good_inside += g[static_cast<std::size_t>(i)];
  good_inside /= static_cast<double>(selected.size());
  return good_outside * (1.0 - good_inside);
}

double cutoff_loss(std::span<const double> q, std::span<const int> g,
                   const RbolConfig& cfg) {
  const CutoffSets sets = cutoff_sets(q, cfg.q_th, cfg.bulk_size);
  if (sets.unselected.empty()) return 0.0;
  const double omega = cutoff_weight(sets.selected, sets.unselected, g);
  return omega * softplus(sets.q_max_sel + cfg.margin - sets.q_min_unsel);
}

double bce_loss(std::span<const double> q, std::span<const int> y, double eps_clip) {
  if (q.size() != y.size()) throw std::invalid_argument("bce_loss: length mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    const double qc = std::clamp(q[i], eps_clip, 1.0 - eps_clip);
    sum += y[i] ? -std::log(qc) : -std::log1p(-qc);
  }
  return sum / static_cast<double>(q.size());
}

namespace {

// d(mean BCE)/dq_i; zero where the clamp is active.
void add_bce_grad(std::span<const double> q, std::span<const int> y,
                  double eps_clip, double weight, std::span<double> grad) {
  const double n = static_cast<double>(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (q[i] <= eps_clip || q[i] >= 1.0 - eps_clip) continue;
    const double d = y[i] ? -1.0 / q[i] : 1.0 / (1.0 - q[i]);
    grad[i] += weight * d / n;
  }
}

void check_inputs(std::span<const double> q, std::span<const int> y) {
  if (q.size() != y.size()) throw std::invalid_argument("loss: length mismatch");
  if (q.empty()) throw std::invalid_argument("loss: empty score vector");
  for (double qi : q) {
    if (!std::isfinite(qi)) throw std::invalid_argument("loss: non-finite score");
  }
}

}  // namespace

LossEval rbol(std::span<const double> q, std::span<const int> y, const RbolConfig& cfg) {
  cfg.validate();
  check_inputs(q, y);
  const std::size_t r = q.size();
  const int d = cfg.bulk_size;

  LossEval ev;
  ev.grad.assign(r, 0.0);
  ev.soft_accept.resize(r);

  // Soft gate and shortfall.
  double soft_good = 0.0;
  for (std::size_t i = 0; i < r; ++i) {
    ev.soft_accept[i] = soft_acceptance(q[i], cfg.q_th, cfg.tau);
    soft_good += ev.soft_accept[i] * (1 - y[i]);
  }
  ev.soft_good = soft_good;
  ev.shortfall = static_cast<double>(d) - soft_good;
  ev.shortfall_term = softplus(ev.shortfall);
  const double dshort = logistic(ev.shortfall);  // softplus'(D - G)
  for (std::size_t i = 0; i < r; ++i) {
    // dG/dq_i = (1-y_i) * p_i (1-p_i) * (-1/tau); shortfall gets -dG.
    const double pi = ev.soft_accept[i];
    ev.grad[i] += dshort * (1 - y[i]) * pi * (1.0 - pi) / cfg.tau;
  }

  // Cutoff ranking penalty. Membership, omega and the achieving indices are
  // constants of the forward pass; gradient flows only through the two
  // boundary scores.
  const CutoffSets sets = cutoff_sets(q, cfg.q_th, d);
  if (!sets.unselected.empty()) {
    // omega is defined on the reliability labels g = 1 - y.
    std::vector<int> g(r);
    for (std::size_t i = 0; i < r; ++i) g[i] = 1 - y[i];
    ev.cutoff_weight = cutoff_weight(sets.selected, sets.unselected, g);
    ev.q_max_sel = sets.q_max_sel;
    ev.q_min_unsel = sets.q_min_unsel;
    const double viol = sets.q_max_sel + cfg.margin - sets.q_min_unsel;
    ev.cut_term = ev.cutoff_weight * softplus(viol);
    if (ev.cutoff_weight > 0.0) {
      const double dcut = ev.cutoff_weight * logistic(viol);
      ev.grad[static_cast<std::size_t>(sets.arg_max_sel)] += cfg.lambda_rank * dcut;
      ev.grad[static_cast<std::size_t>(sets.arg_min_unsel)] -= cfg.lambda_rank * dcut;
    }
  }

  // BCE regularizer.
  ev.bce_term = bce_loss(q, y, cfg.eps_clip);
  add_bce_grad(q, y, cfg.eps_clip, cfg.lambda_bce, ev.grad);

  ev.total = ev.shortfall_term + cfg.lambda_rank * ev.cut_term + cfg.lambda_bce * ev.bce_term;
  return ev;
}

LossEval baseline_loss(LossKind kind, std::span<const double> q,
                       std::span<const int> y, double eps_clip) {
  check_inputs(q, y);
  const std::size_t r = q.size();
  const double n = static_cast<double>(r);
  LossEval ev;
  ev.grad.assign(r, 0.0);
  switch (kind) {
    case LossKind::kMae: {
      double sum = 0.0;
      for (std::size_t i = 0; i < r; ++i) {
        const double diff = q[i] - y[i];
        sum += std::abs(diff);
        // subgradient 0 at q_i == y_i
        ev.grad[i] = (diff > 0.0 ? 1.0 : diff < 0.0 ? -1.0 : 0.0) / n;
      }
      ev.total = sum / n;
      break;
    }
    case LossKind::kMse: {
      double sum = 0.0;
      for (std::size_t i = 0; i < r; ++i) {
        const double diff = q[i] - y[i];
        sum += diff * diff;
        ev.grad[i] = 2.0 * diff / n;
      }
      ev.total = sum / n;
      break;
    }
    case LossKind::kBce: {
      ev.bce_term = bce_loss(q, y, eps_clip);
      ev.total = ev.bce_term;
      add_bce_grad(q, y, eps_clip, 1.0, ev.grad);
      break;
    }
    case LossKind::kRbol:
      throw std::invalid_argument("baseline_loss: RBOL is not a baseline");
  }
  return ev;
}

}  // namespace bulkalloc
