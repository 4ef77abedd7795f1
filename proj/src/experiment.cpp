#include "bulkalloc/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "bulkalloc/plot.hpp"

namespace bulkalloc {

namespace fs = std::filesystem;
using nlohmann::json;

std::string experiment_name(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::kDSweep: return "d_sweep";
    case ExperimentKind::kStressSweep: return "stress_sweep";
    case ExperimentKind::kSnrSweep: return "snr_sweep";
    case ExperimentKind::kQthSweep: return "qth_sweep";
  }
  throw std::invalid_argument("unknown experiment kind");
}

ExperimentKind experiment_from_name(const std::string& name) {
  if (name == "d_sweep") return ExperimentKind::kDSweep;
  if (name == "stress_sweep") return ExperimentKind::kStressSweep;
  if (name == "snr_sweep") return ExperimentKind::kSnrSweep;
  if (name == "qth_sweep") return ExperimentKind::kQthSweep;
  throw ConfigError("experiment: unknown kind \"" + name +
                    "\" (expected d_sweep, stress_sweep, snr_sweep or qth_sweep)");
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res =
      std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 6);
  return std::string(buf, res.ptr);
}

std::string csv_header() {
  return "experiment,loss,D,gamma_th,snr_db,q_th,retrain_index,gfp,gfp_se,"
         "bop,bop_se,obop,anar,sel_fail_rate,n_test,master_seed";
}

std::string to_csv_line(const ResultRow& r) {
  std::string line;
  line += r.experiment;
  line += ',';
  line += r.loss;
  line += ',';
  line += std::to_string(r.d);
  line += ',';
  line += format_number(r.gamma_th);
  line += ',';
  line += format_number(r.snr_db);
  line += ',';
  line += format_number(r.q_th);
  line += ',';
  line += r.retrain;
  line += ',';
  line += format_number(r.gfp);
  line += ',';
  line += format_number(r.gfp_se);
  line += ',';
  line += format_number(r.bop);
  line += ',';
  line += format_number(r.bop_se);
  line += ',';
  line += format_number(r.obop);
  line += ',';
  line += format_number(r.anar);
  line += ',';
  line += format_number(r.sel_fail_rate);
  line += ',';
  line += std::to_string(r.n_test);
  line += ',';
  line += std::to_string(r.master_seed);
  return line;
}

// ---------------------------------------------------------------------------
// Configuration parsing
// ---------------------------------------------------------------------------

namespace {

void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed,
                         const std::string& prefix) {
  for (const auto& item : obj.items()) {
    if (!allowed.count(item.key())) {
      throw ConfigError("unknown config key \"" + prefix + item.key() + "\"");
    }
  }
}

double get_double(const json& obj, const std::string& key, double fallback,
                  const std::string& prefix = "") {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number()) {
    throw ConfigError("key \"" + prefix + key + "\": expected a number");
  }
  return v.get<double>();
}

int get_int(const json& obj, const std::string& key, int fallback,
            const std::string& prefix = "") {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number_integer()) {
    throw ConfigError("key \"" + prefix + key + "\": expected an integer");
  }
  return v.get<int>();
}

std::vector<double> get_double_list(const json& obj, const std::string& key,
                                    std::vector<double> fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_array()) {
    throw ConfigError("key \"" + key + "\": expected an array of numbers");
  }
  std::vector<double> out;
  for (const json& e : v) {
    if (!e.is_number()) {
      throw ConfigError("key \"" + key + "\": expected an array of numbers");
    }
    out.push_back(e.get<double>());
  }
  return out;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (losses.empty()) throw ConfigError("losses: must not be empty");
  if (d_values.empty()) throw ConfigError("d_values: must not be empty");
  if (gamma_th_values.empty()) throw ConfigError("gamma_th_values: must not be empty");
  if (snr_db_values.empty()) throw ConfigError("snr_db_values: must not be empty");
  if (q_th_values.empty()) throw ConfigError("q_th_values: must not be empty");
  for (int d : d_values) {
    if (d < 1 || d > sim.resources) {
      throw ConfigError("d_values: entry " + std::to_string(d) +
                        " outside [1, resources=" + std::to_string(sim.resources) + "]");
    }
  }
  if (nominal_d < 1 || nominal_d > sim.resources) {
    throw ConfigError("nominal_d: outside [1, resources=" +
                      std::to_string(sim.resources) + "]");
  }
  for (double g : gamma_th_values) {
    if (!(g > 0.0)) throw ConfigError("gamma_th_values: entries must be > 0");
  }
  if (!(nominal_gamma_th > 0.0)) throw ConfigError("nominal_gamma_th: must be > 0");
  for (double q : q_th_values) {
    if (!(q > 0.0 && q < 1.0)) {
      throw ConfigError("q_th_values: entry " + format_number(q) +
                        " outside the open interval (0,1)");
    }
  }
  if (!(nominal_q_th > 0.0 && nominal_q_th < 1.0)) {
    throw ConfigError("nominal_q_th: outside the open interval (0,1)");
  }
  if (retrains < 1) throw ConfigError("retrains: must be >= 1");
  if (n_test < 1) throw ConfigError("n_test: must be >= 1");
  if (epochs < 0) throw ConfigError("epochs: must be >= 0");
  if (batches_per_epoch < 1) throw ConfigError("batches_per_epoch: must be >= 1");
  if (output_dir.empty()) throw ConfigError("output_dir: must not be empty");
  try {
    sim.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("sim: ") + e.what());
  }
}

ExperimentConfig parse_config_text(const std::string& text) {
  json j;
  const bool blank =
      std::all_of(text.begin(), text.end(), [](unsigned char c) { return std::isspace(c); });
  if (blank) {
    j = json::object();
  } else {
    try {
      j = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
  }
  if (!j.is_object()) throw ConfigError("config root must be a JSON object");

  static const std::set<std::string> kKeys = {
      "experiment",     "losses",          "d_values",       "gamma_th_values",
      "snr_db_values",  "q_th_values",     "nominal_d",      "nominal_gamma_th",
      "nominal_snr_db", "nominal_q_th",    "retrains",       "n_test",
      "master_seed",    "output_dir",      "epochs",         "batches_per_epoch",
      "sim"};
  reject_unknown_keys(j, kKeys, "");

  ExperimentConfig cfg;
  if (!j.contains("experiment")) {
    throw ConfigError("missing required key \"experiment\"");
  }
  if (!j.at("experiment").is_string()) {
    throw ConfigError("key \"experiment\": expected a string");
  }
  cfg.experiment = experiment_from_name(j.at("experiment").get<std::string>());

  if (j.contains("losses")) {
    const json& v = j.at("losses");
    if (!v.is_array()) throw ConfigError("key \"losses\": expected an array of strings");
    cfg.losses.clear();
    for (const json& e : v) {
      if (!e.is_string()) throw ConfigError("key \"losses\": expected an array of strings");
      LossKind kind;
      try {
        kind = loss_from_name(e.get<std::string>());
      } catch (const std::invalid_argument& err) {
        throw ConfigError(std::string("key \"losses\": ") + err.what());
      }
      if (std::find(cfg.losses.begin(), cfg.losses.end(), kind) != cfg.losses.end()) {
        cfg.warnings.push_back("losses: dropped duplicate entry \"" +
                               loss_name(kind) + "\"");
        continue;
      }
      cfg.losses.push_back(kind);
    }
  }

  if (j.contains("d_values")) {
    const json& v = j.at("d_values");
    if (!v.is_array()) throw ConfigError("key \"d_values\": expected an array of integers");
    cfg.d_values.clear();
    for (const json& e : v) {
      if (!e.is_number_integer()) {
        throw ConfigError("key \"d_values\": expected an array of integers");
      }
      const int d = e.get<int>();
      if (std::find(cfg.d_values.begin(), cfg.d_values.end(), d) != cfg.d_values.end()) {
        cfg.warnings.push_back("d_values: dropped duplicate entry " + std::to_string(d));
        continue;
      }
      cfg.d_values.push_back(d);
    }
  }

  cfg.gamma_th_values = get_double_list(j, "gamma_th_values", cfg.gamma_th_values);
  cfg.snr_db_values = get_double_list(j, "snr_db_values", cfg.snr_db_values);
  cfg.q_th_values = get_double_list(j, "q_th_values", cfg.q_th_values);
  cfg.nominal_d = get_int(j, "nominal_d", cfg.nominal_d);
  cfg.nominal_gamma_th = get_double(j, "nominal_gamma_th", cfg.nominal_gamma_th);
  cfg.nominal_snr_db = get_double(j, "nominal_snr_db", cfg.nominal_snr_db);
  cfg.nominal_q_th = get_double(j, "nominal_q_th", cfg.nominal_q_th);
  cfg.retrains = get_int(j, "retrains", cfg.retrains);
  cfg.n_test = get_int(j, "n_test", cfg.n_test);
  cfg.epochs = get_int(j, "epochs", cfg.epochs);
  cfg.batches_per_epoch = get_int(j, "batches_per_epoch", cfg.batches_per_epoch);
  if (j.contains("master_seed")) {
    const json& v = j.at("master_seed");
    if (!v.is_number_unsigned() && !v.is_number_integer()) {
      throw ConfigError("key \"master_seed\": expected a non-negative integer");
    }
    if (v.is_number_integer() && v.get<long long>() < 0) {
      throw ConfigError("key \"master_seed\": expected a non-negative integer");
    }
    cfg.master_seed = v.get<std::uint64_t>();
  }
  if (j.contains("output_dir")) {
    if (!j.at("output_dir").is_string()) {
      throw ConfigError("key \"output_dir\": expected a string");
    }
    cfg.output_dir = j.at("output_dir").get<std::string>();
  }

  if (j.contains("sim")) {
    const json& s = j.at("sim");
    if (!s.is_object()) throw ConfigError("key \"sim\": expected an object");
    static const std::set<std::string> kSimKeys = {
        "resources", "taps",         "past_len", "future_len",
        "fft_size",  "phase_jitter", "rate_agg"};
    reject_unknown_keys(s, kSimKeys, "sim.");
    cfg.sim.resources = get_int(s, "resources", cfg.sim.resources, "sim.");
    cfg.sim.taps = get_int(s, "taps", cfg.sim.taps, "sim.");
    cfg.sim.past_len = get_int(s, "past_len", cfg.sim.past_len, "sim.");
    cfg.sim.future_len = get_int(s, "future_len", cfg.sim.future_len, "sim.");
    cfg.sim.fft_size = get_int(s, "fft_size", cfg.sim.fft_size, "sim.");
    cfg.sim.phase_jitter = get_double(s, "phase_jitter", cfg.sim.phase_jitter, "sim.");
    if (s.contains("rate_agg")) {
      if (!s.at("rate_agg").is_string()) {
        throw ConfigError("key \"sim.rate_agg\": expected \"mean\" or \"min\"");
      }
      const std::string agg = s.at("rate_agg").get<std::string>();
      if (agg == "mean") {
        cfg.sim.rate_agg = RateAgg::kMean;
      } else if (agg == "min") {
        cfg.sim.rate_agg = RateAgg::kMin;
      } else {
        throw ConfigError("key \"sim.rate_agg\": expected \"mean\" or \"min\"");
      }
    }
  }

  cfg.validate();
  return cfg;
}

ExperimentConfig parse_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

// ---------------------------------------------------------------------------
// Test sets and single-checkpoint evaluation
// ---------------------------------------------------------------------------

std::vector<ChannelRealization> make_test_set(const SimConfig& cfg, int n_test) {
  cfg.validate();
  const std::uint64_t id = experiment_stream_id(StreamPurpose::kTest, 0);
  std::vector<ChannelRealization> out;
  out.reserve(static_cast<std::size_t>(n_test));
  for (int j = 0; j < n_test; ++j) {
    RngStream stream =
        derive_stream(cfg.master_seed, id, 0, static_cast<std::uint64_t>(j));
    out.push_back(generate_realization(cfg, stream));
  }
  return out;
}

namespace {

ResultRow report_to_row(const ReliabilityReport& rep, const std::string& experiment,
                        const std::string& loss, double gamma_th, double snr_db,
                        const std::string& retrain, std::uint64_t master_seed) {
  ResultRow row;
  row.experiment = experiment;
  row.loss = loss;
  row.d = rep.bulk_size;
  row.gamma_th = gamma_th;
  row.snr_db = snr_db;
  row.q_th = rep.q_th;
  row.retrain = retrain;
  row.gfp = rep.gfp;
  row.gfp_se = rep.gfp_se;
  row.bop = rep.bop;
  row.bop_se = rep.bop_se;
  row.obop = rep.obop;
  row.anar = rep.anar;
  row.sel_fail_rate =
      rep.n > 0 ? static_cast<double>(rep.counts.selection_failures) / rep.n : 0.0;
  row.n_test = rep.n;
  row.master_seed = master_seed;
  return row;
}

}  // namespace

ResultRow evaluate_only(const std::string& checkpoint_path,
                        const EvalOverrides& overrides, int n_test,
                        std::uint64_t seed) {
  const Checkpoint cp = load_checkpoint(checkpoint_path);
  SimConfig sim = cp.sim;
  sim.master_seed = seed;
  if (overrides.snr_db) sim.snr_db = *overrides.snr_db;
  if (overrides.gamma_th) sim.gamma_th = *overrides.gamma_th;

  GtbaConfig gate;
  gate.q_th = overrides.q_th.value_or(cp.q_th);
  gate.bulk_size = overrides.d.value_or(cp.bulk_size);
  gate.validate(sim.resources);

  const std::vector<ChannelRealization> test = make_test_set(sim, n_test);
  const ReliabilityReport rep = evaluate(cp, test, gate);
  return report_to_row(rep, "eval", loss_name(cp.loss), sim.gamma_th, sim.snr_db,
                       std::to_string(cp.retrain_index), seed);
}

// ---------------------------------------------------------------------------
// Sweep runner
// ---------------------------------------------------------------------------

namespace {

struct SweepPoint {
  double axis = 0.0;  // swept coordinate, for plots
  int d = 0;
  double gamma_th = 0.0;
  double snr_db = 0.0;
  double q_th = 0.0;
};

std::vector<SweepPoint> make_points(const ExperimentConfig& c) {
  std::vector<SweepPoint> pts;
  switch (c.experiment) {
    case ExperimentKind::kDSweep:
      for (int d : c.d_values) {
        pts.push_back({static_cast<double>(d), d, c.nominal_gamma_th,
                       c.nominal_snr_db, c.nominal_q_th});
      }
      break;
    case ExperimentKind::kStressSweep:
      for (double g : c.gamma_th_values) {
        pts.push_back({g, c.nominal_d, g, c.nominal_snr_db, c.nominal_q_th});
      }
      break;
    case ExperimentKind::kSnrSweep:
      for (double s : c.snr_db_values) {
        pts.push_back({s, c.nominal_d, c.nominal_gamma_th, s, c.nominal_q_th});
      }
      break;
    case ExperimentKind::kQthSweep:
      for (double q : c.q_th_values) {
        pts.push_back({q, c.nominal_d, c.nominal_gamma_th, c.nominal_snr_db, q});
      }
      break;
  }
  return pts;
}

// snr/qth sweeps train one model per (loss, retrain) at the nominal point and
// re-gate it across the axis; the other sweeps retrain at every point.
bool trains_per_point(ExperimentKind kind) {
  return kind == ExperimentKind::kDSweep || kind == ExperimentKind::kStressSweep;
}

std::string axis_label(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::kDSweep: return "D (required resources)";
    case ExperimentKind::kStressSweep: return "gamma_th (bits/s/Hz)";
    case ExperimentKind::kSnrSweep: return "SNR (dB)";
    case ExperimentKind::kQthSweep: return "q_th (gate threshold)";
  }
  return "axis";
}

struct TrainOutcome {
  bool ok = false;
  bool diverged = false;
  std::string detail;
  Checkpoint cp;
  std::uint64_t fingerprint = 0;
};

int worker_count(std::size_t jobs) {
  int workers = 1;
  if (const char* env = std::getenv("BULKALLOC_WORKERS")) {
    try {
      workers = std::stoi(env);
    } catch (...) {
      workers = 1;
    }
  }
  workers = std::clamp(workers, 1, 64);
  return static_cast<int>(std::min<std::size_t>(workers, std::max<std::size_t>(jobs, 1)));
}

std::string hex64(std::uint64_t v) {
  char buf[19];
  buf[0] = '0';
  buf[1] = 'x';
  static const char* digits = "0123456789abcdef";
  for (int i = 0; i < 16; ++i) {
    buf[2 + i] = digits[(v >> (60 - 4 * i)) & 0xF];
  }
  return std::string(buf, 18);
}

}  // namespace

ExperimentOutput run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  ExperimentOutput out;
  const std::string exp_name = experiment_name(cfg.experiment);
  for (const std::string& w : cfg.warnings) out.log_lines.push_back("warning: " + w);

  const fs::path out_dir(cfg.output_dir);
  const fs::path ckpt_dir = out_dir / "checkpoints";
  std::error_code ec;
  fs::create_directories(ckpt_dir, ec);
  if (ec) {
    throw IoError("cannot create output directory " + ckpt_dir.string() + ": " +
                  ec.message());
  }

  const std::vector<SweepPoint> points = make_points(cfg);
  const bool per_point = trains_per_point(cfg.experiment);
  const std::size_t n_loss = cfg.losses.size();
  const std::size_t n_train_pts = per_point ? points.size() : 1;
  const std::size_t n_jobs =
      n_loss * n_train_pts * static_cast<std::size_t>(cfg.retrains);

  const SweepPoint nominal{0.0, cfg.nominal_d, cfg.nominal_gamma_th,
                           cfg.nominal_snr_db, cfg.nominal_q_th};
  const auto train_point = [&](std::size_t tp) -> const SweepPoint& {
    return per_point ? points[tp] : nominal;
  };
  const auto job_slot = [&](std::size_t loss, std::size_t tp, int retrain) {
    return (loss * n_train_pts + tp) * static_cast<std::size_t>(cfg.retrains) +
           static_cast<std::size_t>(retrain);
  };

  // --- training: worker pool over (loss, train point, retrain) jobs --------
  std::vector<TrainOutcome> outcomes(n_jobs);
  std::atomic<std::size_t> next{0};
  std::exception_ptr fatal;
  std::mutex fatal_mu;

  const auto run_job = [&](std::size_t slot) {
    const std::size_t retrain = slot % static_cast<std::size_t>(cfg.retrains);
    const std::size_t rest = slot / static_cast<std::size_t>(cfg.retrains);
    const std::size_t tp = rest % n_train_pts;
    const std::size_t loss = rest / n_train_pts;
    const SweepPoint& pt = train_point(tp);

    SimConfig sim = cfg.sim;
    sim.gamma_th = pt.gamma_th;
    sim.snr_db = pt.snr_db;
    sim.master_seed = cfg.master_seed;

    TrainConfig tc;
    tc.loss = cfg.losses[loss];
    tc.bulk_size = pt.d;
    tc.q_th = pt.q_th;
    tc.epochs = cfg.epochs;
    tc.batches_per_epoch = cfg.batches_per_epoch;
    tc.retrain_index = static_cast<int>(retrain);

    TrainOutcome& res = outcomes[slot];
    try {
      TrainResult tr = train(sim, tc);
      res.cp = std::move(tr.checkpoint);
      res.fingerprint = tr.log.data_fingerprint;
      res.ok = true;
    } catch (const TrainingDivergence& e) {
      res.diverged = true;
      res.detail = e.what();
    }
  };

  const int workers = worker_count(n_jobs);
  out.log_lines.push_back("workers: " + std::to_string(workers));
  if (workers <= 1) {
    for (std::size_t s = 0; s < n_jobs; ++s) run_job(s);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (;;) {
          const std::size_t s = next.fetch_add(1);
          if (s >= n_jobs) return;
          try {
            run_job(s);
          } catch (...) {
            std::lock_guard<std::mutex> lock(fatal_mu);
            if (!fatal) fatal = std::current_exception();
            return;
          }
        }
      });
    }
    for (std::thread& t : pool) t.join();
    if (fatal) std::rethrow_exception(fatal);
  }

  // --- fingerprint audit: identical training data across losses ------------
  // The realization stream depends on (master seed, retrain, epoch, batch) and
  // the label parameters (gamma_th, snr_db), never on the loss or on D.
  std::map<std::string, std::uint64_t> fp_expect;
  for (std::size_t loss = 0; loss < n_loss; ++loss) {
    for (std::size_t tp = 0; tp < n_train_pts; ++tp) {
      for (int r = 0; r < cfg.retrains; ++r) {
        const TrainOutcome& res = outcomes[job_slot(loss, tp, r)];
        if (!res.ok) continue;
        const SweepPoint& pt = train_point(tp);
        const std::string key = "gamma_th=" + format_number(pt.gamma_th) +
                                " snr_db=" + format_number(pt.snr_db) +
                                " retrain=" + std::to_string(r);
        const auto [it, inserted] = fp_expect.emplace(key, res.fingerprint);
        if (!inserted && it->second != res.fingerprint) {
          throw std::runtime_error(
              "training data fingerprint mismatch at " + key + ": " +
              hex64(it->second) + " vs " + hex64(res.fingerprint) + " for loss " +
              loss_name(cfg.losses[loss]));
        }
      }
    }
  }
  for (const auto& [key, fp] : fp_expect) {
    out.fingerprint_lines.push_back(key + " fingerprint=" + hex64(fp));
  }

  // --- checkpoints ----------------------------------------------------------
  for (std::size_t loss = 0; loss < n_loss; ++loss) {
    for (std::size_t tp = 0; tp < n_train_pts; ++tp) {
      for (int r = 0; r < cfg.retrains; ++r) {
        const TrainOutcome& res = outcomes[job_slot(loss, tp, r)];
        if (!res.ok) {
          out.log_lines.push_back(
              "divergence: loss=" + loss_name(cfg.losses[loss]) +
              " gamma_th=" + format_number(train_point(tp).gamma_th) +
              " snr_db=" + format_number(train_point(tp).snr_db) +
              " D=" + std::to_string(train_point(tp).d) + " retrain=" +
              std::to_string(r) + " detail=" + res.detail);
          continue;
        }
        const SweepPoint& pt = train_point(tp);
        const std::string name =
            exp_name + "_" + loss_name(cfg.losses[loss]) + "_d" +
            std::to_string(pt.d) + "_g" + format_number(pt.gamma_th) + "_s" +
            format_number(pt.snr_db) + "_q" + format_number(pt.q_th) + "_r" +
            std::to_string(r) + ".ckpt";
        save_checkpoint(res.cp, (ckpt_dir / name).string());
      }
    }
  }

  // --- evaluation -----------------------------------------------------------
  // Shared test sets, one per (gamma_th, snr_db) label setting. The channel
  // draws depend only on the master seed and the stream index, so the past
  // magnitudes — and therefore each model's scores — are identical across
  // label settings; score matrices are cached per training job.
  std::map<std::string, std::vector<ChannelRealization>> test_cache;
  const auto test_set_for = [&](const SweepPoint& pt)
      -> const std::vector<ChannelRealization>& {
    const std::string key =
        format_number(pt.gamma_th) + "|" + format_number(pt.snr_db);
    auto it = test_cache.find(key);
    if (it == test_cache.end()) {
      SimConfig sim = cfg.sim;
      sim.gamma_th = pt.gamma_th;
      sim.snr_db = pt.snr_db;
      sim.master_seed = cfg.master_seed;
      it = test_cache.emplace(key, make_test_set(sim, cfg.n_test)).first;
    }
    return it->second;
  };

  std::map<std::size_t, std::vector<RiskVector>> score_cache;
  const auto scores_for = [&](std::size_t slot,
                              const std::vector<ChannelRealization>& test)
      -> const std::vector<RiskVector>& {
    auto it = score_cache.find(slot);
    if (it == score_cache.end()) {
      const Scorer scorer = checkpoint_scorer(outcomes[slot].cp);
      std::vector<RiskVector> scores;
      scores.reserve(test.size());
      for (const ChannelRealization& real : test) scores.push_back(scorer(real));
      it = score_cache.emplace(slot, std::move(scores)).first;
    }
    return it->second;
  };

  constexpr double kNan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t loss = 0; loss < n_loss; ++loss) {
    const std::string lname = loss_name(cfg.losses[loss]);
    for (std::size_t p = 0; p < points.size(); ++p) {
      const SweepPoint& pt = points[p];
      const std::size_t tp = per_point ? p : 0;
      const std::vector<ChannelRealization>& test = test_set_for(pt);
      GtbaConfig gate;
      gate.q_th = pt.q_th;
      gate.bulk_size = pt.d;

      std::vector<ResultRow> retrain_rows;
      for (int r = 0; r < cfg.retrains; ++r) {
        const std::size_t slot = job_slot(loss, tp, r);
        ResultRow row;
        if (outcomes[slot].ok) {
          const ReliabilityReport rep =
              evaluate_scores(scores_for(slot, test), test, gate);
          row = report_to_row(rep, exp_name, lname, pt.gamma_th, pt.snr_db,
                              std::to_string(r), cfg.master_seed);
        } else {
          row.experiment = exp_name;
          row.loss = lname;
          row.d = pt.d;
          row.gamma_th = pt.gamma_th;
          row.snr_db = pt.snr_db;
          row.q_th = pt.q_th;
          row.retrain = std::to_string(r);
          row.gfp = row.gfp_se = row.bop = row.bop_se = kNan;
          row.obop = row.anar = row.sel_fail_rate = kNan;
          row.n_test = cfg.n_test;
          row.master_seed = cfg.master_seed;
        }
        retrain_rows.push_back(row);
        out.rows.push_back(std::move(row));
      }

      // retrain-averaged row; SEs recomputed from the pooled sample count
      ResultRow mean;
      mean.experiment = exp_name;
      mean.loss = lname;
      mean.d = pt.d;
      mean.gamma_th = pt.gamma_th;
      mean.snr_db = pt.snr_db;
      mean.q_th = pt.q_th;
      mean.retrain = "mean";
      mean.n_test = cfg.n_test;
      mean.master_seed = cfg.master_seed;
      int valid = 0;
      double gfp = 0, bop = 0, obop = 0, anar = 0, sel = 0;
      for (const ResultRow& row : retrain_rows) {
        if (std::isnan(row.gfp)) continue;
        ++valid;
        gfp += row.gfp;
        bop += row.bop;
        obop += row.obop;
        anar += row.anar;
        sel += row.sel_fail_rate;
      }
      if (valid > 0) {
        const double pooled_n = static_cast<double>(valid) * cfg.n_test;
        mean.gfp = gfp / valid;
        mean.bop = bop / valid;
        mean.obop = obop / valid;
        mean.anar = anar / valid;
        mean.sel_fail_rate = sel / valid;
        mean.gfp_se = std::sqrt(std::max(0.0, mean.gfp * (1.0 - mean.gfp)) / pooled_n);
        mean.bop_se = std::sqrt(std::max(0.0, mean.bop * (1.0 - mean.bop)) / pooled_n);
      } else {
        mean.gfp = mean.gfp_se = mean.bop = mean.bop_se = kNan;
        mean.obop = mean.anar = mean.sel_fail_rate = kNan;
      }
      out.rows.push_back(std::move(mean));
    }
  }

  // --- CSV -------------------------------------------------------------------
  const fs::path csv_path = out_dir / (exp_name + "_results.csv");
  {
    std::ofstream csv(csv_path, std::ios::binary);
    if (!csv) throw IoError("cannot write results CSV: " + csv_path.string());
    csv << csv_header() << '\n';
    for (const ResultRow& row : out.rows) csv << to_csv_line(row) << '\n';
    if (!csv) throw IoError("results CSV write failed: " + csv_path.string());
  }
  out.csv_path = csv_path.string();

  out.plot_paths = write_sweep_plots(cfg.experiment, out.rows, cfg.output_dir);

  // --- run log -----------------------------------------------------------------
  {
    const fs::path log_path = out_dir / (exp_name + "_log.txt");
    std::ofstream log(log_path, std::ios::binary);
    if (!log) throw IoError("cannot write run log: " + log_path.string());
    for (const std::string& line : out.log_lines) log << line << '\n';
  }
  {
    const fs::path fp_path = out_dir / (exp_name + "_fingerprints.txt");
    std::ofstream fp(fp_path, std::ios::binary);
    if (!fp) throw IoError("cannot write fingerprint log: " + fp_path.string());
    for (const std::string& line : out.fingerprint_lines) fp << line << '\n';
  }

  return out;
}

std::vector<std::string> write_sweep_plots(ExperimentKind kind,
                                           const std::vector<ResultRow>& rows,
                                           const std::string& output_dir) {
  const std::string exp_name = experiment_name(kind);
  std::vector<std::string> losses;  // first-appearance order
  for (const ResultRow& row : rows) {
    if (std::find(losses.begin(), losses.end(), row.loss) == losses.end()) {
      losses.push_back(row.loss);
    }
  }

  std::vector<PlotSeries> gfp_series, bop_series, frontier_series, anar_series;
  for (const std::string& lname : losses) {
    PlotSeries gfp_s{lname, {}, {}};
    PlotSeries bop_s = gfp_s, frontier_s = gfp_s, anar_s = gfp_s;
    for (const ResultRow& row : rows) {
      if (row.retrain != "mean" || row.loss != lname) continue;
      double axis = 0.0;
      switch (kind) {
        case ExperimentKind::kDSweep: axis = row.d; break;
        case ExperimentKind::kStressSweep: axis = row.gamma_th; break;
        case ExperimentKind::kSnrSweep: axis = row.snr_db; break;
        case ExperimentKind::kQthSweep: axis = row.q_th; break;
      }
      gfp_s.x.push_back(axis);
      gfp_s.y.push_back(row.gfp);
      bop_s.x.push_back(axis);
      bop_s.y.push_back(row.bop);
      frontier_s.x.push_back(row.gfp);
      frontier_s.y.push_back(row.bop);
      anar_s.x.push_back(axis);
      anar_s.y.push_back(row.anar);
    }
    gfp_series.push_back(std::move(gfp_s));
    bop_series.push_back(std::move(bop_s));
    frontier_series.push_back(std::move(frontier_s));
    anar_series.push_back(std::move(anar_s));
  }
  if (!bop_series.empty() && !losses.empty()) {
    PlotSeries oracle{"oracle", bop_series[0].x, {}};
    for (const ResultRow& row : rows) {
      if (row.retrain == "mean" && row.loss == losses[0]) {
        oracle.y.push_back(row.obop);
      }
    }
    bop_series.push_back(std::move(oracle));
  }

  const std::string xl = axis_label(kind);
  std::vector<std::string> paths;
  const auto emit_plot = [&](const std::string& stem, const std::string& title,
                             const std::string& x, const std::string& y,
                             const std::vector<PlotSeries>& series) {
    const fs::path p = fs::path(output_dir) / (exp_name + "_" + stem + ".svg");
    write_line_plot(p.string(), title, x, y, series);
    paths.push_back(p.string());
  };
  emit_plot("gfp", exp_name + ": gate failure probability", xl, "GFP", gfp_series);
  emit_plot("bop", exp_name + ": bulk outage probability", xl, "BOP", bop_series);
  emit_plot("frontier", exp_name + ": BOP vs GFP", "GFP", "BOP", frontier_series);
  if (kind == ExperimentKind::kQthSweep) {
    emit_plot("anar", exp_name + ": average number of admitted resources", xl,
              "ANAR", anar_series);
  }
  return paths;
}

std::vector<ResultRow> read_results_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read results CSV: " + path);
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("results CSV is empty: " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != csv_header()) {
    throw ConfigError("unrecognized results CSV header in " + path);
  }

  const auto to_d = [&](const std::string& field) {
    if (field == "nan") return std::numeric_limits<double>::quiet_NaN();
    return std::stod(field);
  };
  std::vector<ResultRow> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
      if (i == line.size() || line[i] == ',') {
        f.push_back(line.substr(start, i - start));
        start = i + 1;
      }
    }
    if (f.size() != 16) {
      throw ConfigError("results CSV line " + std::to_string(line_no) +
                        ": expected 16 fields, found " + std::to_string(f.size()));
    }
    try {
      ResultRow row;
      row.experiment = f[0];
      row.loss = f[1];
      row.d = std::stoi(f[2]);
      row.gamma_th = to_d(f[3]);
      row.snr_db = to_d(f[4]);
      row.q_th = to_d(f[5]);
      row.retrain = f[6];
      row.gfp = to_d(f[7]);
      row.gfp_se = to_d(f[8]);
      row.bop = to_d(f[9]);
      row.bop_se = to_d(f[10]);
      row.obop = to_d(f[11]);
      row.anar = to_d(f[12]);
      row.sel_fail_rate = to_d(f[13]);
      row.n_test = std::stoi(f[14]);
      row.master_seed = std::stoull(f[15]);
      rows.push_back(std::move(row));
    } catch (const std::exception&) {
      throw ConfigError("results CSV line " + std::to_string(line_no) +
                        ": malformed numeric field");
    }
  }
  return rows;
}

}  // namespace bulkalloc
