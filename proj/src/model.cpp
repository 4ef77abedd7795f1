#include "bulkalloc/model.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

#include "bulkalloc/gtba.hpp"

namespace bulkalloc {

int ModelDims::param_count() const {
  return 4 * hidden                 // input kernel (input dim 1)
         + 4 * hidden * hidden      // recurrent kernel
         + 4 * hidden               // gate biases
         + hidden * dense + dense   // dense1 kernel + bias
         + dense                    // prelu slopes
         + dense + 1;               // dense2 kernel + bias
}

ModelWeights::ModelWeights(ModelDims d)
    : dims(d), flat(static_cast<std::size_t>(d.param_count()), 0.0) {}

namespace {

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void fill_uniform(std::span<double> dst, double bound, RngStream& stream) {
  for (double& x : dst) x = stream.uniform(-bound, bound);
}

}  // namespace

ModelWeights init_weights(ModelDims dims, RngStream& stream) {
  ModelWeights w(dims);
  const int h = dims.hidden;
  const int p = dims.dense;
  fill_uniform(w.wx(), std::sqrt(6.0 / (1.0 + h)), stream);
  fill_uniform(w.wh(), std::sqrt(6.0 / (h + h)), stream);
  // biases stay zero except the forget gate block
  auto b = w.bias();
  for (int u = 0; u < h; ++u) b[static_cast<std::size_t>(h + u)] = 1.0;
  fill_uniform(w.w1(), std::sqrt(6.0 / (h + p)), stream);
  fill_uniform(w.w2(), std::sqrt(6.0 / (p + 1.0)), stream);
  auto slopes = w.prelu();
  for (double& s : slopes) s = 0.25;
  return w;
}

double forward(const ModelWeights& w, std::span<const double> sequence,
               ForwardCache& cache) {
  const int h = w.dims.hidden;
  const int p = w.dims.dense;
  const int steps = static_cast<int>(sequence.size());
  if (steps == 0) throw std::invalid_argument("forward: empty sequence");

  cache.steps = steps;
  cache.input.assign(sequence.begin(), sequence.end());
  cache.gates.resize(static_cast<std::size_t>(steps) * 4 * h);
  cache.cell.resize(static_cast<std::size_t>(steps) * h);
  cache.tanh_cell.resize(static_cast<std::size_t>(steps) * h);
  cache.hidden.resize(static_cast<std::size_t>(steps) * h);
  cache.dense_pre.resize(static_cast<std::size_t>(p));
  cache.dense_post.resize(static_cast<std::size_t>(p));

  const double* wx = w.wx().data();
  const double* wh = w.wh().data();
  const double* bias = w.bias().data();

  std::vector<double> z(static_cast<std::size_t>(4 * h));
  const double* h_prev = nullptr;  // null on the first step (h_{-1} = 0)
  const double* c_prev = nullptr;

  for (int t = 0; t < steps; ++t) {
    const double x = sequence[static_cast<std::size_t>(t)];
    if (!std::isfinite(x)) throw std::invalid_argument("forward: non-finite input");
    for (int u = 0; u < 4 * h; ++u) {
      double acc = bias[u] + wx[u] * x;
      if (h_prev != nullptr) {
        const double* row = wh + static_cast<std::size_t>(u) * h;
        for (int j = 0; j < h; ++j) acc += row[j] * h_prev[j];
      }
      z[static_cast<std::size_t>(u)] = acc;
    }
    double* gates_t = cache.gates.data() + static_cast<std::size_t>(t) * 4 * h;
    double* cell_t = cache.cell.data() + static_cast<std::size_t>(t) * h;
    double* tanh_t = cache.tanh_cell.data() + static_cast<std::size_t>(t) * h;
    double* hid_t = cache.hidden.data() + static_cast<std::size_t>(t) * h;
    for (int u = 0; u < h; ++u) {
      const double gi = sigmoid(z[static_cast<std::size_t>(u)]);
      const double gf = sigmoid(z[static_cast<std::size_t>(h + u)]);
      const double gc = std::tanh(z[static_cast<std::size_t>(2 * h + u)]);
      const double go = sigmoid(z[static_cast<std::size_t>(3 * h + u)]);
      gates_t[u] = gi;
      gates_t[h + u] = gf;
      gates_t[2 * h + u] = gc;
      gates_t[3 * h + u] = go;
      const double c = (c_prev != nullptr ? gf * c_prev[u] : 0.0) + gi * gc;
      cell_t[u] = c;
      tanh_t[u] = std::tanh(c);
      hid_t[u] = go * tanh_t[u];
    }
    h_prev = hid_t;
    c_prev = cell_t;
  }

  // dense1 + PReLU
  const double* w1 = w.w1().data();
  const double* b1 = w.b1().data();
  const double* slopes = w.prelu().data();
  for (int j = 0; j < p; ++j) {
    double acc = b1[j];
    for (int u = 0; u < h; ++u) acc += w1[static_cast<std::size_t>(u) * p + j] * h_prev[u];
    cache.dense_pre[static_cast<std::size_t>(j)] = acc;
    cache.dense_post[static_cast<std::size_t>(j)] = acc > 0.0 ? acc : slopes[j] * acc;
  }
  // dense2 + sigmoid
  const double* w2 = w.w2().data();
  double logit = w.b2();
  for (int j = 0; j < p; ++j) logit += w2[j] * cache.dense_post[static_cast<std::size_t>(j)];
  cache.logit = logit;
  cache.score = sigmoid(logit);
  return cache.score;
}

double score_sequence(const ModelWeights& w, std::span<const double> sequence) {
  const int h = w.dims.hidden;
  const int p = w.dims.dense;
  const int steps = static_cast<int>(sequence.size());
  if (steps == 0) throw std::invalid_argument("score_sequence: empty sequence");

  const double* wx = w.wx().data();
  const double* wh = w.wh().data();
  const double* bias = w.bias().data();

  std::vector<double> hcur(static_cast<std::size_t>(h), 0.0);
  std::vector<double> ccur(static_cast<std::size_t>(h), 0.0);
  std::vector<double> z(static_cast<std::size_t>(4 * h));

  for (int t = 0; t < steps; ++t) {
    const double x = sequence[static_cast<std::size_t>(t)];
    if (!std::isfinite(x)) throw std::invalid_argument("score_sequence: non-finite input");
    for (int u = 0; u < 4 * h; ++u) {
      double acc = bias[u] + wx[u] * x;
      const double* row = wh + static_cast<std::size_t>(u) * h;
      if (t > 0) {
        for (int j = 0; j < h; ++j) acc += row[j] * hcur[static_cast<std::size_t>(j)];
      }
      z[static_cast<std::size_t>(u)] = acc;
    }
    for (int u = 0; u < h; ++u) {
      const double gi = sigmoid(z[static_cast<std::size_t>(u)]);
      const double gf = sigmoid(z[static_cast<std::size_t>(h + u)]);
      const double gc = std::tanh(z[static_cast<std::size_t>(2 * h + u)]);
      const double go = sigmoid(z[static_cast<std::size_t>(3 * h + u)]);
      const double c = (t > 0 ? gf * ccur[static_cast<std::size_t>(u)] : 0.0) + gi * gc;
      ccur[static_cast<std::size_t>(u)] = c;
      hcur[static_cast<std::size_t>(u)] = go * std::tanh(c);
    }
  }

  const double* w1 = w.w1().data();
  const double* b1 = w.b1().data();
  const double* slopes = w.prelu().data();
  const double* w2 = w.w2().data();
  double logit = w.b2();
  for (int j = 0; j < p; ++j) {
    double acc = b1[j];
    for (int u = 0; u < h; ++u) acc += w1[static_cast<std::size_t>(u) * p + j] * hcur[static_cast<std::size_t>(u)];
    const double post = acc > 0.0 ? acc : slopes[j] * acc;
    logit += w2[j] * post;
  }
  return sigmoid(logit);
}

void backward(const ModelWeights& w, const ForwardCache& cache, double dscore,
              std::span<double> grad) {
  const int h = w.dims.hidden;
  const int p = w.dims.dense;
  const int steps = cache.steps;
  if (static_cast<int>(grad.size()) != w.dims.param_count()) {
    throw std::invalid_argument("backward: gradient size mismatch");
  }

  double* g_wx = grad.data();
  double* g_wh = grad.data() + w.off_wh();
  double* g_b = grad.data() + w.off_b();
  double* g_w1 = grad.data() + w.off_w1();
  double* g_b1 = grad.data() + w.off_b1();
  double* g_prelu = grad.data() + w.off_prelu();
  double* g_w2 = grad.data() + w.off_w2();
  double* g_b2 = grad.data() + w.off_b2();

  const double* w1 = w.w1().data();
  const double* w2 = w.w2().data();
  const double* wh = w.wh().data();
  const double* slopes = w.prelu().data();

  // output sigmoid
  const double dlogit = dscore * cache.score * (1.0 - cache.score);
  *g_b2 += dlogit;

  const double* h_last = cache.hidden.data() + static_cast<std::size_t>(steps - 1) * h;
  std::vector<double> dh(static_cast<std::size_t>(h), 0.0);
  for (int j = 0; j < p; ++j) {
    const double post = cache.dense_post[static_cast<std::size_t>(j)];
    const double pre = cache.dense_pre[static_cast<std::size_t>(j)];
    g_w2[j] += post * dlogit;
    const double dpost = w2[j] * dlogit;
    const double dpre = pre > 0.0 ? dpost : dpost * slopes[j];
    if (pre <= 0.0) g_prelu[j] += dpost * pre;
    g_b1[j] += dpre;
    for (int u = 0; u < h; ++u) {
      g_w1[static_cast<std::size_t>(u) * p + j] += h_last[u] * dpre;
      dh[static_cast<std::size_t>(u)] += w1[static_cast<std::size_t>(u) * p + j] * dpre;
    }
  }

  std::vector<double> dcell(static_cast<std::size_t>(h), 0.0);
  std::vector<double> dz(static_cast<std::size_t>(4 * h));
  std::vector<double> dh_prev(static_cast<std::size_t>(h));

  for (int t = steps - 1; t >= 0; --t) {
    const double* gates_t = cache.gates.data() + static_cast<std::size_t>(t) * 4 * h;
    const double* cell_t = cache.cell.data() + static_cast<std::size_t>(t) * h;
    const double* tanh_t = cache.tanh_cell.data() + static_cast<std::size_t>(t) * h;
    const double* cell_prev = t > 0 ? cache.cell.data() + static_cast<std::size_t>(t - 1) * h : nullptr;
    const double* hid_prev = t > 0 ? cache.hidden.data() + static_cast<std::size_t>(t - 1) * h : nullptr;
    const double x = cache.input[static_cast<std::size_t>(t)];

    for (int u = 0; u < h; ++u) {
      const double gi = gates_t[u];
      const double gf = gates_t[h + u];
      const double gc = gates_t[2 * h + u];
      const double go = gates_t[3 * h + u];
      const double dhu = dh[static_cast<std::size_t>(u)];
      const double dc = dcell[static_cast<std::size_t>(u)] +
                        dhu * go * (1.0 - tanh_t[u] * tanh_t[u]);
      const double dgo = dhu * tanh_t[u];
      const double dgi = dc * gc;
      const double dgc = dc * gi;
      const double dgf = cell_prev != nullptr ? dc * cell_prev[u] : 0.0;
      dz[static_cast<std::size_t>(u)] = dgi * gi * (1.0 - gi);
      dz[static_cast<std::size_t>(h + u)] = dgf * gf * (1.0 - gf);
      dz[static_cast<std::size_t>(2 * h + u)] = dgc * (1.0 - gc * gc);
      dz[static_cast<std::size_t>(3 * h + u)] = dgo * go * (1.0 - go);
      dcell[static_cast<std::size_t>(u)] = dc * gf;  // flows to c_{t-1}
    }

    for (int u = 0; u < 4 * h; ++u) {
      const double dzu = dz[static_cast<std::size_t>(u)];
      g_wx[u] += dzu * x;
      g_b[u] += dzu;
      if (hid_prev != nullptr) {
        double* row = g_wh + static_cast<std::size_t>(u) * h;
        for (int j = 0; j < h; ++j) row[j] += dzu * hid_prev[j];
      }
    }

    if (t > 0) {
      for (int j = 0; j < h; ++j) {
        double acc = 0.0;
        for (int u = 0; u < 4 * h; ++u) {
          acc += wh[static_cast<std::size_t>(u) * h + j] * dz[static_cast<std::size_t>(u)];
        }
        dh_prev[static_cast<std::size_t>(j)] = acc;
      }
      dh.swap(dh_prev);
    }
  }
}

void adam_step(ModelWeights& w, std::span<const double> grad, AdamState& state,
               const AdamConfig& cfg) {
  const std::size_t n = w.flat.size();
  if (grad.size() != n || state.m.size() != n || state.v.size() != n) {
    throw std::invalid_argument("adam_step: size mismatch");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(grad[i])) {
      throw std::runtime_error("adam_step: non-finite gradient at parameter " +
                               std::to_string(i));
    }
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < n; ++i) {
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * grad[i];
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
    const double mhat = state.m[i] / bc1;
    const double vhat = state.v[i] / bc2;
    w.flat[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon);
  }
}

double clip_gradient(std::span<double> grad, double max_norm) {
  double sq = 0.0;
  for (double g : grad) sq += g * g;
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double scale = max_norm / norm;
    for (double& g : grad) g *= scale;
  }
  return norm;
}

TrainingDivergence::TrainingDivergence(int epoch_, int batch_, const std::string& detail)
    : std::runtime_error("training diverged at epoch " + std::to_string(epoch_) +
                         ", batch " + std::to_string(batch_) + ": " + detail),
      epoch(epoch_),
      batch(batch_) {}

namespace {

constexpr std::uint64_t kFnvOffset = 14695981039346656037ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

inline void fnv_update(std::uint64_t& h, const void* data, std::size_t len) {
  const unsigned char* b = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= b[i];
    h *= kFnvPrime;
  }
}

void fingerprint_realization(std::uint64_t& h, const ChannelRealization& real) {
  for (double c : real.rates) fnv_update(h, &c, sizeof(c));
  for (int y : real.outage) fnv_update(h, &y, sizeof(y));
}

}  // namespace

TrainResult train(const SimConfig& sim, const TrainConfig& cfg) {
  sim.validate();
  GtbaConfig{cfg.q_th, cfg.bulk_size}.validate(sim.resources);
  const int r = sim.resources;

  RngStream init_stream = derive_stream(
      sim.master_seed, experiment_stream_id(StreamPurpose::kInit, cfg.retrain_index), 0, 0);
  ModelWeights weights = init_weights(cfg.dims, init_stream);
  AdamState adam(cfg.dims.param_count());

  const RbolConfig rbol_cfg = RbolConfig::for_bulk_size(cfg.bulk_size, cfg.q_th);

  TrainResult result;
  result.log.data_fingerprint = kFnvOffset;
  result.log.epochs.reserve(static_cast<std::size_t>(cfg.epochs));

  std::vector<ForwardCache> caches(static_cast<std::size_t>(r));
  std::vector<double> q(static_cast<std::size_t>(r));
  std::vector<double> grad(static_cast<std::size_t>(cfg.dims.param_count()));

  const std::uint64_t train_id =
      experiment_stream_id(StreamPurpose::kTrain, cfg.retrain_index);
  const std::uint64_t val_id =
      experiment_stream_id(StreamPurpose::kValidation, cfg.retrain_index);

  auto eval_loss = [&](std::span<const double> scores,
                       std::span<const int> labels) -> LossEval {
    if (cfg.loss == LossKind::kRbol) return rbol(scores, labels, rbol_cfg);
    return baseline_loss(cfg.loss, scores, labels, rbol_cfg.eps_clip);
  };

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double train_sum = 0.0;
    for (int batch = 0; batch < cfg.batches_per_epoch; ++batch) {
      RngStream stream = derive_stream(sim.master_seed, train_id,
                                       static_cast<std::uint64_t>(epoch),
                                       static_cast<std::uint64_t>(batch));
      const ChannelRealization real = generate_realization(sim, stream);
      fingerprint_realization(result.log.data_fingerprint, real);

      for (int i = 0; i < r; ++i) {
        q[static_cast<std::size_t>(i)] =
            forward(weights, real.past[static_cast<std::size_t>(i)],
                    caches[static_cast<std::size_t>(i)]);
      }
      const LossEval ev = eval_loss(q, real.outage);
      if (!std::isfinite(ev.total)) {
        throw TrainingDivergence(epoch, batch, "non-finite loss");
      }
      train_sum += ev.total;

      std::fill(grad.begin(), grad.end(), 0.0);
      for (int i = 0; i < r; ++i) {
        backward(weights, caches[static_cast<std::size_t>(i)],
                 ev.grad[static_cast<std::size_t>(i)], grad);
      }
      clip_gradient(grad, cfg.grad_clip);
      try {
        adam_step(weights, grad, adam, cfg.adam);
      } catch (const std::runtime_error& e) {
        throw TrainingDivergence(epoch, batch, e.what());
      }
    }

    double val_sum = 0.0;
    for (int batch = 0; batch < cfg.batches_per_epoch; ++batch) {
      RngStream stream = derive_stream(sim.master_seed, val_id,
                                       static_cast<std::uint64_t>(epoch),
                                       static_cast<std::uint64_t>(batch));
      const ChannelRealization real = generate_realization(sim, stream);
      for (int i = 0; i < r; ++i) {
        q[static_cast<std::size_t>(i)] =
            score_sequence(weights, real.past[static_cast<std::size_t>(i)]);
      }
      val_sum += eval_loss(q, real.outage).total;
    }

    result.log.epochs.push_back(
        {train_sum / cfg.batches_per_epoch, val_sum / cfg.batches_per_epoch});
  }

  result.checkpoint.weights = std::move(weights);
  result.checkpoint.adam = std::move(adam);
  result.checkpoint.loss = cfg.loss;
  result.checkpoint.bulk_size = cfg.bulk_size;
  result.checkpoint.q_th = cfg.q_th;
  result.checkpoint.epochs_completed = cfg.epochs;
  result.checkpoint.retrain_index = cfg.retrain_index;
  result.checkpoint.master_seed = sim.master_seed;
  result.checkpoint.sim = sim;
  return result;
}

}  // namespace bulkalloc
