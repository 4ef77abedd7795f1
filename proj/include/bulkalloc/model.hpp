#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "bulkalloc/channel_sim.hpp"
#include "bulkalloc/losses.hpp"
#include "bulkalloc/rng.hpp"

namespace bulkalloc {

// Risk predictor: scalar-input LSTM -> dense with per-unit PReLU -> sigmoid.
// Sizes are parameters so gradient checks can run at desk scale; the
// production configuration is hidden=16, dense=10.
struct ModelDims {
  int hidden = 16;
  int dense = 10;

  int param_count() const;
};

// All trainable parameters in one flat vector with named span views.
// LSTM gate blocks are ordered input, forget, candidate, output; recurrent
// kernels are row-major [gate][unit][prev_unit].
struct ModelWeights {
  ModelDims dims;
  std::vector<double> flat;

  explicit ModelWeights(ModelDims d = {});

  std::span<double> wx() { return view(0, 4 * dims.hidden); }
  std::span<double> wh() { return view(off_wh(), 4 * dims.hidden * dims.hidden); }
  std::span<double> bias() { return view(off_b(), 4 * dims.hidden); }
  std::span<double> w1() { return view(off_w1(), dims.hidden * dims.dense); }
  std::span<double> b1() { return view(off_b1(), dims.dense); }
  std::span<double> prelu() { return view(off_prelu(), dims.dense); }
  std::span<double> w2() { return view(off_w2(), dims.dense); }
  double& b2() { return flat[static_cast<std::size_t>(off_b2())]; }

  std::span<const double> wx() const { return view(0, 4 * dims.hidden); }
  std::span<const double> wh() const { return view(off_wh(), 4 * dims.hidden * dims.hidden); }
  std::span<const double> bias() const { return view(off_b(), 4 * dims.hidden); }
  std::span<const double> w1() const { return view(off_w1(), dims.hidden * dims.dense); }
  std::span<const double> b1() const { return view(off_b1(), dims.dense); }
  std::span<const double> prelu() const { return view(off_prelu(), dims.dense); }
  std::span<const double> w2() const { return view(off_w2(), dims.dense); }
  double b2() const { return flat[static_cast<std::size_t>(off_b2())]; }

  int off_wh() const { return 4 * dims.hidden; }
  int off_b() const { return off_wh() + 4 * dims.hidden * dims.hidden; }
  int off_w1() const { return off_b() + 4 * dims.hidden; }
  int off_b1() const { return off_w1() + dims.hidden * dims.dense; }
  int off_prelu() const { return off_b1() + dims.dense; }
  int off_w2() const { return off_prelu() + dims.dense; }
  int off_b2() const { return off_w2() + dims.dense; }

 private:
  std::span<double> view(int off, int n) {
    return {flat.data() + off, static_cast<std::size_t>(n)};
  }
  std::span<const double> view(int off, int n) const {
    return {flat.data() + off, static_cast<std::size_t>(n)};
  }
};

// Everything the backward pass needs from one sequence forward.
struct ForwardCache {
  int steps = 0;
  std::vector<double> input;      // T
  std::vector<double> gates;      // T x 4H, post-activation
  std::vector<double> cell;       // T x H
  std::vector<double> tanh_cell;  // T x H
  std::vector<double> hidden;     // T x H
  std::vector<double> dense_pre;  // P
  std::vector<double> dense_post; // P
  double logit = 0.0;
  double score = 0.0;
};

// Scaled-uniform init (bound sqrt(6/(fan_in+fan_out)) per kernel block),
// biases zero except the LSTM forget gate at 1, PReLU slopes at 0.25.
ModelWeights init_weights(ModelDims dims, RngStream& stream);

// Scores one magnitude sequence; caches activations for backward.
double forward(const ModelWeights& w, std::span<const double> sequence,
               ForwardCache& cache);

// Forward without caching, for evaluation loops.
double score_sequence(const ModelWeights& w, std::span<const double> sequence);

// Accumulates d(dscore * score)/d(theta) into grad (length param_count).
void backward(const ModelWeights& w, const ForwardCache& cache, double dscore,
              std::span<double> grad);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-7;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  long step = 0;

  explicit AdamState(int param_count = 0)
      : m(static_cast<std::size_t>(param_count), 0.0),
        v(static_cast<std::size_t>(param_count), 0.0) {}
};

// Bias-corrected Adam update. Throws on non-finite gradient entries.
void adam_step(ModelWeights& w, std::span<const double> grad, AdamState& state,
               const AdamConfig& cfg = {});

// Scales grad so its L2 norm is at most max_norm; returns the pre-clip norm.
double clip_gradient(std::span<double> grad, double max_norm);

struct TrainConfig {
  LossKind loss = LossKind::kRbol;
  int bulk_size = 4;  // D
  double q_th = 0.4;
  int epochs = 65;
  int batches_per_epoch = 60;
  int retrain_index = 0;
  double grad_clip = 5.0;
  ModelDims dims = {};
  AdamConfig adam = {};
};

struct EpochStats {
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct TrainLog {
  std::vector<EpochStats> epochs;
  // FNV-1a hash over the rates and labels of every training realization, in
  // consumption order. Two runs saw the same data iff the hashes match.
  std::uint64_t data_fingerprint = 0;
};

struct Checkpoint {
  std::uint32_t version = 1;
  ModelWeights weights;
  AdamState adam;
  LossKind loss = LossKind::kRbol;
  int bulk_size = 0;
  double q_th = 0.4;  // gate threshold the model was trained against
  int epochs_completed = 0;
  int retrain_index = 0;
  std::uint64_t master_seed = 0;
  SimConfig sim;
};

struct TrainResult {
  Checkpoint checkpoint;
  TrainLog log;
};

// Raised when a training step produces a non-finite loss or gradient.
class TrainingDivergence : public std::runtime_error {
 public:
  TrainingDivergence(int epoch, int batch, const std::string& detail);
  int epoch;
  int batch;
};

// One realization per batch, generated on the fly from streams derived off
// (sim.master_seed, purpose, retrain_index, epoch, batch). RBOL is evaluated
// set-level per system; baselines average per resource. Validation uses a
// disjoint stream family and never influences the weights.
TrainResult train(const SimConfig& sim, const TrainConfig& cfg);

void save_checkpoint(const Checkpoint& cp, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace bulkalloc
