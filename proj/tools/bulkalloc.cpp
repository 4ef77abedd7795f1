// Command-line front end: data dumps, single trainings, checkpoint
// evaluation, config-driven sweeps and CSV-to-plot reports.
//
// Exit codes: 0 success, 1 configuration error, 2 runtime/training error,
// 3 I/O error.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bulkalloc/channel_sim.hpp"
#include "bulkalloc/experiment.hpp"
#include "bulkalloc/gtba.hpp"
#include "bulkalloc/losses.hpp"
#include "bulkalloc/model.hpp"
#include "bulkalloc/reliability.hpp"

namespace {

using namespace bulkalloc;

struct SimFlags {
  std::optional<int> resources, taps, past_len, future_len, fft_size;
  std::optional<double> phase_jitter, snr_db, gamma_th;
  std::optional<std::string> rate_agg;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--resources", resources, "parallel resources R");
    cmd->add_option("--taps", taps, "delay-line taps");
    cmd->add_option("--past-len", past_len, "observed samples per resource");
    cmd->add_option("--future-len", future_len, "future samples behind the labels");
    cmd->add_option("--fft-size", fft_size, "frequency grid size");
    cmd->add_option("--phase-jitter", phase_jitter, "per-step tap phase bound (rad)");
    cmd->add_option("--snr-db", snr_db, "SNR in dB");
    cmd->add_option("--gamma-th", gamma_th, "target rate threshold (bits/s/Hz)");
    cmd->add_option("--rate-agg", rate_agg, "future-rate aggregation: mean|min")
        ->check(CLI::IsMember({"mean", "min"}));
  }

  void apply(SimConfig& sim) const {
    if (resources) sim.resources = *resources;
    if (taps) sim.taps = *taps;
    if (past_len) sim.past_len = *past_len;
    if (future_len) sim.future_len = *future_len;
    if (fft_size) sim.fft_size = *fft_size;
    if (phase_jitter) sim.phase_jitter = *phase_jitter;
    if (snr_db) sim.snr_db = *snr_db;
    if (gamma_th) sim.gamma_th = *gamma_th;
    if (rate_agg) sim.rate_agg = (*rate_agg == "min") ? RateAgg::kMin : RateAgg::kMean;
  }
};

int run_gen_data(const std::string& out_path, int count, std::uint64_t seed,
                 const SimFlags& flags) {
  SimConfig sim;
  flags.apply(sim);
  sim.master_seed = seed;
  const std::vector<ChannelRealization> data = make_test_set(sim, count);

  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw IoError("cannot write dataset CSV: " + out_path);
  out << "realization_id,resource_id,C_i,y_i\n";
  for (std::size_t j = 0; j < data.size(); ++j) {
    for (std::size_t i = 0; i < data[j].rates.size(); ++i) {
      out << j << ',' << i << ',' << format_number(data[j].rates[i]) << ','
          << data[j].outage[i] << '\n';
    }
  }
  if (!out) throw IoError("dataset CSV write failed: " + out_path);
  std::cout << "wrote " << data.size() << " realizations to " << out_path << "\n";
  return 0;
}

int run_train(const std::optional<std::string>& config_path,
              const std::optional<std::string>& loss,
              const std::optional<int>& d, const std::optional<double>& q_th,
              const std::optional<int>& epochs, const std::optional<int>& batches,
              const std::optional<int>& retrain,
              const std::optional<std::uint64_t>& seed, const SimFlags& flags,
              const std::string& out_path) {
  ExperimentConfig base;
  if (config_path) base = parse_config(*config_path);

  SimConfig sim = base.sim;
  sim.gamma_th = base.nominal_gamma_th;
  sim.snr_db = base.nominal_snr_db;
  sim.master_seed = seed.value_or(base.master_seed);
  flags.apply(sim);

  TrainConfig tc;
  tc.loss = loss ? loss_from_name(*loss) : base.losses.front();
  tc.bulk_size = d.value_or(base.nominal_d);
  tc.q_th = q_th.value_or(base.nominal_q_th);
  tc.epochs = epochs.value_or(base.epochs);
  tc.batches_per_epoch = batches.value_or(base.batches_per_epoch);
  tc.retrain_index = retrain.value_or(0);

  const TrainResult result = train(sim, tc);
  save_checkpoint(result.checkpoint, out_path);

  const TrainLog& log = result.log;
  std::cout << "trained loss=" << loss_name(tc.loss) << " D=" << tc.bulk_size
            << " q_th=" << format_number(tc.q_th) << " epochs=" << tc.epochs;
  if (!log.epochs.empty()) {
    std::cout << " final_train=" << format_number(log.epochs.back().train_loss)
              << " final_val=" << format_number(log.epochs.back().val_loss);
  }
  std::cout << " -> " << out_path << "\n";
  return 0;
}

int run_eval(const std::string& checkpoint, int n_test, std::uint64_t seed,
             const std::optional<int>& d, const std::optional<double>& q_th,
             const std::optional<double>& snr_db,
             const std::optional<double>& gamma_th,
             const std::optional<std::string>& out_path) {
  EvalOverrides ov;
  ov.d = d;
  ov.q_th = q_th;
  ov.snr_db = snr_db;
  ov.gamma_th = gamma_th;
  const ResultRow row = evaluate_only(checkpoint, ov, n_test, seed);
  const std::string text = csv_header() + "\n" + to_csv_line(row) + "\n";
  if (out_path) {
    std::ofstream out(*out_path, std::ios::binary);
    if (!out) throw IoError("cannot write evaluation CSV: " + *out_path);
    out << text;
  }
  std::cout << text;
  return 0;
}

int run_sweep(const std::string& config_path,
              const std::optional<std::string>& experiment,
              const std::vector<std::string>& losses,
              const std::optional<int>& retrains, const std::optional<int>& n_test,
              const std::optional<std::uint64_t>& seed,
              const std::optional<std::string>& out_dir,
              const std::optional<int>& epochs, const std::optional<int>& batches,
              bool paper_scale) {
  ExperimentConfig cfg = parse_config(config_path);
  if (experiment) cfg.experiment = experiment_from_name(*experiment);
  if (!losses.empty()) {
    cfg.losses.clear();
    for (const std::string& name : losses) cfg.losses.push_back(loss_from_name(name));
  }
  if (retrains) cfg.retrains = *retrains;
  if (paper_scale) cfg.retrains = 10;
  if (n_test) cfg.n_test = *n_test;
  if (seed) cfg.master_seed = *seed;
  if (out_dir) cfg.output_dir = *out_dir;
  if (epochs) cfg.epochs = *epochs;
  if (batches) cfg.batches_per_epoch = *batches;
  cfg.validate();

  const ExperimentOutput out = run_experiment(cfg);
  std::cout << "rows: " << out.rows.size() << "\ncsv: " << out.csv_path << "\n";
  for (const std::string& p : out.plot_paths) std::cout << "plot: " << p << "\n";
  for (const std::string& l : out.log_lines) std::cout << "log: " << l << "\n";
  return 0;
}

int run_report(const std::string& csv_path, const std::optional<std::string>& out_dir) {
  const std::vector<ResultRow> rows = read_results_csv(csv_path);
  if (rows.empty()) throw ConfigError("results CSV has no rows: " + csv_path);
  ExperimentKind kind;
  try {
    kind = experiment_from_name(rows.front().experiment);
  } catch (const ConfigError&) {
    throw ConfigError("CSV was not produced by a sweep (experiment column is \"" +
                      rows.front().experiment + "\")");
  }
  const std::string dir =
      out_dir.value_or(std::filesystem::path(csv_path).parent_path().string());
  const std::string target = dir.empty() ? "." : dir;
  const std::vector<std::string> plots = write_sweep_plots(kind, rows, target);
  for (const std::string& p : plots) std::cout << "plot: " << p << "\n";

  std::cout << "\nretrain-averaged summary\n";
  std::cout << "loss      D   gamma_th  snr_db  q_th   gfp        bop        obop       anar\n";
  for (const ResultRow& row : rows) {
    if (row.retrain != "mean") continue;
    char line[160];
    std::snprintf(line, sizeof(line), "%-9s %-3d %-9s %-7s %-6s %-10s %-10s %-10s %-8s",
                  row.loss.c_str(), row.d, format_number(row.gamma_th).c_str(),
                  format_number(row.snr_db).c_str(), format_number(row.q_th).c_str(),
                  format_number(row.gfp).c_str(), format_number(row.bop).c_str(),
                  format_number(row.obop).c_str(), format_number(row.anar).c_str());
    std::cout << line << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ML-assisted bulk resource allocation toolkit"};
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "dump channel realizations as CSV");
  std::string gen_out;
  int gen_count = 100;
  std::uint64_t gen_seed = 1;
  SimFlags gen_flags;
  gen->add_option("--out", gen_out, "output CSV path")->required();
  gen->add_option("--count", gen_count, "number of realizations")
      ->check(CLI::PositiveNumber);
  gen->add_option("--seed", gen_seed, "master seed");
  gen_flags.add_to(gen);

  // train
  auto* tr = app.add_subcommand("train", "train one risk predictor");
  std::optional<std::string> tr_config, tr_loss;
  std::optional<int> tr_d, tr_epochs, tr_batches, tr_retrain;
  std::optional<double> tr_qth;
  std::optional<std::uint64_t> tr_seed;
  std::string tr_out;
  SimFlags tr_flags;
  tr->add_option("--config", tr_config, "experiment config supplying defaults")
      ->check(CLI::ExistingFile);
  tr->add_option("--loss", tr_loss, "rbol|bce|mse|mae");
  tr->add_option("--d", tr_d, "bulk size D");
  tr->add_option("--q-th", tr_qth, "gate threshold");
  tr->add_option("--epochs", tr_epochs, "training epochs");
  tr->add_option("--batches", tr_batches, "batches per epoch");
  tr->add_option("--retrain", tr_retrain, "retrain index (fresh init/data streams)");
  tr->add_option("--seed", tr_seed, "master seed");
  tr_flags.add_to(tr);
  tr->add_option("--out", tr_out, "checkpoint output path")->required();

  // eval
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a fresh test set");
  std::string ev_ckpt;
  int ev_n = 3000;
  std::uint64_t ev_seed = 1;
  std::optional<int> ev_d;
  std::optional<double> ev_qth, ev_snr, ev_gamma;
  std::optional<std::string> ev_out;
  ev->add_option("--checkpoint", ev_ckpt, "checkpoint path")->required();
  ev->add_option("--n-test", ev_n, "test realizations")->check(CLI::PositiveNumber);
  ev->add_option("--seed", ev_seed, "test-set master seed");
  ev->add_option("--d", ev_d, "override bulk size D");
  ev->add_option("--q-th", ev_qth, "override gate threshold");
  ev->add_option("--snr-db", ev_snr, "override SNR");
  ev->add_option("--gamma-th", ev_gamma, "override rate threshold");
  ev->add_option("--out", ev_out, "also write the row to this CSV");

  // sweep
  auto* sw = app.add_subcommand("sweep", "run a config-driven experiment sweep");
  std::string sw_config;
  std::optional<std::string> sw_experiment, sw_outdir;
  std::vector<std::string> sw_losses;
  std::optional<int> sw_retrains, sw_ntest, sw_epochs, sw_batches;
  std::optional<std::uint64_t> sw_seed;
  bool sw_paper = false;
  sw->add_option("--config", sw_config, "experiment config (JSON)")->required();
  sw->add_option("--experiment", sw_experiment,
                 "override kind: d_sweep|stress_sweep|snr_sweep|qth_sweep");
  sw->add_option("--losses", sw_losses, "override loss list (comma separated)")
      ->delimiter(',');
  sw->add_option("--retrains", sw_retrains, "override retrain count");
  sw->add_option("--n-test", sw_ntest, "override test-set size");
  sw->add_option("--seed", sw_seed, "override master seed");
  sw->add_option("--out-dir", sw_outdir, "override output directory");
  sw->add_option("--epochs", sw_epochs, "override training epochs");
  sw->add_option("--batches", sw_batches, "override batches per epoch");
  sw->add_flag("--paper-scale", sw_paper, "use 10 retrains");

  // report
  auto* rep = app.add_subcommand("report", "summarize a results CSV and redraw plots");
  std::string rep_csv;
  std::optional<std::string> rep_outdir;
  rep->add_option("--csv", rep_csv, "results CSV path")->required();
  rep->add_option("--out-dir", rep_outdir, "plot output directory (default: CSV's)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (gen->parsed()) return run_gen_data(gen_out, gen_count, gen_seed, gen_flags);
    if (tr->parsed()) {
      return run_train(tr_config, tr_loss, tr_d, tr_qth, tr_epochs, tr_batches,
                       tr_retrain, tr_seed, tr_flags, tr_out);
    }
    if (ev->parsed()) {
      return run_eval(ev_ckpt, ev_n, ev_seed, ev_d, ev_qth, ev_snr, ev_gamma, ev_out);
    }
    if (sw->parsed()) {
      return run_sweep(sw_config, sw_experiment, sw_losses, sw_retrains, sw_ntest,
                       sw_seed, sw_outdir, sw_epochs, sw_batches, sw_paper);
    }
    if (rep->parsed()) return run_report(rep_csv, rep_outdir);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return 3;
  } catch (const TrainingDivergence& e) {
    std::cerr << "training diverged: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
