#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "bulkalloc/channel_sim.hpp"
#include "bulkalloc/losses.hpp"
#include "bulkalloc/model.hpp"
#include "bulkalloc/reliability.hpp"

namespace bulkalloc {

// Configuration problems: bad schema, bad ranges, unknown keys. CLI exit 1.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Filesystem problems: unreadable input, unwritable output. CLI exit 3.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ExperimentKind { kDSweep, kStressSweep, kSnrSweep, kQthSweep };

std::string experiment_name(ExperimentKind kind);
ExperimentKind experiment_from_name(const std::string& name);

// One sweep run: which axis varies, the fixed nominal operating point, the
// training budget and the evaluation protocol.
struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::kDSweep;
  std::vector<LossKind> losses = {LossKind::kRbol, LossKind::kBce,
                                  LossKind::kMse, LossKind::kMae};
  std::vector<int> d_values = {2, 4, 6, 8, 10};
  std::vector<double> gamma_th_values = {1.0, 1.2, 1.4};
  std::vector<double> snr_db_values = {-6, -3, 0, 3, 6};
  std::vector<double> q_th_values = {0.1, 0.2, 0.3, 0.4, 0.5,
                                     0.6, 0.7, 0.8, 0.9};
  int nominal_d = 4;
  double nominal_gamma_th = 1.2;
  double nominal_snr_db = 0.0;
  double nominal_q_th = 0.4;
  int retrains = 3;
  int n_test = 3000;
  std::uint64_t master_seed = 1;
  std::string output_dir = "results";
  int epochs = 65;
  int batches_per_epoch = 60;
  SimConfig sim;  // gamma_th/snr_db/master_seed are overwritten per point

  std::vector<std::string> warnings;  // normalization notes (e.g. dedup)

  void validate() const;  // throws ConfigError naming the offending key
};

// Strict parse: unknown keys rejected with their path, defaults applied,
// ranges checked. Empty or whitespace-only files mean "all defaults", which
// then fails because "experiment" is required.
ExperimentConfig parse_config(const std::string& path);
ExperimentConfig parse_config_text(const std::string& text);

// One line of the results CSV. retrain is a small integer rendered in
// decimal, or the literal "mean" for the retrain-averaged row.
struct ResultRow {
  std::string experiment;
  std::string loss;
  int d = 0;
  double gamma_th = 0.0;
  double snr_db = 0.0;
  double q_th = 0.0;
  std::string retrain;
  double gfp = 0.0;
  double gfp_se = 0.0;
  double bop = 0.0;
  double bop_se = 0.0;
  double obop = 0.0;
  double anar = 0.0;
  double sel_fail_rate = 0.0;  // joint: selection failures / n
  int n_test = 0;
  std::uint64_t master_seed = 0;
};

// Shortest-round-trip decimal with at most 6 significant digits, locale
// independent; integers never grow a decimal point ("0", "-3", "1.2").
std::string format_number(double v);

std::string csv_header();
std::string to_csv_line(const ResultRow& row);

struct ExperimentOutput {
  std::vector<ResultRow> rows;
  std::vector<std::string> log_lines;        // warnings, divergences
  std::vector<std::string> fingerprint_lines;
  std::string csv_path;
  std::vector<std::string> plot_paths;
};

// Trains retrains models per (loss, sweep point) — or once per loss at the
// nominal point for the snr/qth sweeps — evaluates everything on shared test
// sets, writes <experiment>_results.csv, plots, a run log and checkpoints
// under cfg.output_dir. Worker count comes from BULKALLOC_WORKERS (default 1).
ExperimentOutput run_experiment(const ExperimentConfig& cfg);

// Writes the figure files for a sweep's rows (mean rows drive the curves):
// GFP-vs-axis, BOP-vs-axis with the oracle bound, the BOP-vs-GFP frontier,
// and ANAR-vs-q_th for the gate-threshold sweep. Returns the paths written.
std::vector<std::string> write_sweep_plots(ExperimentKind kind,
                                           const std::vector<ResultRow>& rows,
                                           const std::string& output_dir);

// Parses a results CSV produced by run_experiment (strict header check).
std::vector<ResultRow> read_results_csv(const std::string& path);

struct EvalOverrides {
  std::optional<int> d;
  std::optional<double> q_th;
  std::optional<double> snr_db;
  std::optional<double> gamma_th;
};

// Re-evaluates a stored checkpoint under a modified operating point, on a
// fresh test set drawn from the evaluation stream family of `seed`.
ResultRow evaluate_only(const std::string& checkpoint_path,
                        const EvalOverrides& overrides, int n_test,
                        std::uint64_t seed);

// Deterministic shared test set: realization j comes from the evaluation
// stream family of (cfg.master_seed, j), independent of retrain index.
std::vector<ChannelRealization> make_test_set(const SimConfig& cfg, int n_test);

}  // namespace bulkalloc
