// Checkpoint container: little-endian binary, fixed field order, tensors
// stored as (name, dims, f64 data) records. Layout documented in README.md.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "bulkalloc/model.hpp"

namespace bulkalloc {

namespace {

constexpr char kMagic[8] = {'B', 'U', 'L', 'K', 'A', 'C', 'P', '\0'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  explicit Writer(const std::string& path) : out_(path, std::ios::binary) {
    if (!out_) throw std::runtime_error("cannot open checkpoint for writing: " + path);
  }
  void bytes(const void* p, std::size_t n) {
    out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
    if (!out_) throw std::runtime_error("checkpoint write failed");
  }
  template <typename T>
  void pod(T v) { bytes(&v, sizeof(T)); }
  void str(const std::string& s) {
    pod<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  void doubles(std::span<const double> v) {
    pod<std::uint64_t>(v.size());
    bytes(v.data(), v.size() * sizeof(double));
  }

 private:
  std::ofstream out_;
};

class Reader {
 public:
  explicit Reader(const std::string& path) : in_(path, std::ios::binary) {
    if (!in_) throw std::runtime_error("cannot open checkpoint: " + path);
  }
  void bytes(void* p, std::size_t n) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) {
      throw std::runtime_error("corrupt checkpoint: unexpected end of file");
    }
  }
  template <typename T>
  T pod() {
    T v;
    bytes(&v, sizeof(T));
    return v;
  }
  std::string str() {
    const std::uint32_t n = pod<std::uint32_t>();
    if (n > 4096) throw std::runtime_error("corrupt checkpoint: oversized string");
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }
  std::vector<double> doubles(std::uint64_t expected) {
    const std::uint64_t n = pod<std::uint64_t>();
    if (n != expected) {
      throw std::runtime_error("corrupt checkpoint: tensor shape mismatch");
    }
    std::vector<double> v(n);
    bytes(v.data(), n * sizeof(double));
    return v;
  }
  bool at_eof() {
    in_.peek();
    return in_.eof();
  }

 private:
  std::ifstream in_;
};

struct TensorRef {
  const char* name;
  std::span<const double> data;
};

std::vector<TensorRef> tensor_table(const ModelWeights& w) {
  return {
      {"lstm.wx", w.wx()},       {"lstm.wh", w.wh()},     {"lstm.b", w.bias()},
      {"dense1.w", w.w1()},      {"dense1.b", w.b1()},    {"dense1.prelu", w.prelu()},
      {"dense2.w", w.w2()},      {"dense2.b", {&w.flat[static_cast<std::size_t>(w.off_b2())], 1}},
  };
}

}  // namespace

void save_checkpoint(const Checkpoint& cp, const std::string& path) {
  Writer out(path);
  out.bytes(kMagic, sizeof(kMagic));
  out.pod<std::uint32_t>(cp.version);
  out.pod<std::uint32_t>(static_cast<std::uint32_t>(cp.loss));
  out.pod<std::int32_t>(cp.bulk_size);
  out.pod<double>(cp.q_th);
  out.pod<std::int32_t>(cp.epochs_completed);
  out.pod<std::int32_t>(cp.retrain_index);
  out.pod<std::uint64_t>(cp.master_seed);

  out.pod<std::int32_t>(cp.sim.resources);
  out.pod<std::int32_t>(cp.sim.taps);
  out.pod<std::int32_t>(cp.sim.past_len);
  out.pod<std::int32_t>(cp.sim.future_len);
  out.pod<std::int32_t>(cp.sim.fft_size);
  out.pod<double>(cp.sim.phase_jitter);
  out.pod<double>(cp.sim.snr_db);
  out.pod<double>(cp.sim.gamma_th);
  out.pod<std::uint32_t>(static_cast<std::uint32_t>(cp.sim.rate_agg));
  out.pod<std::uint64_t>(cp.sim.master_seed);

  out.pod<std::int32_t>(cp.weights.dims.hidden);
  out.pod<std::int32_t>(cp.weights.dims.dense);

  const auto tensors = tensor_table(cp.weights);
  out.pod<std::uint32_t>(static_cast<std::uint32_t>(tensors.size()));
  for (const TensorRef& t : tensors) {
    out.str(t.name);
    out.doubles(t.data);
  }

  out.pod<std::int64_t>(cp.adam.step);
  out.doubles(cp.adam.m);
  out.doubles(cp.adam.v);
}

Checkpoint load_checkpoint(const std::string& path) {
  Reader in(path);
  char magic[8];
  in.bytes(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error("corrupt checkpoint: bad magic");
  }
  Checkpoint cp;
  cp.version = in.pod<std::uint32_t>();
  if (cp.version != kVersion) {
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(cp.version));
  }
  cp.loss = static_cast<LossKind>(in.pod<std::uint32_t>());
  cp.bulk_size = in.pod<std::int32_t>();
  cp.q_th = in.pod<double>();
  cp.epochs_completed = in.pod<std::int32_t>();
  cp.retrain_index = in.pod<std::int32_t>();
  cp.master_seed = in.pod<std::uint64_t>();

  cp.sim.resources = in.pod<std::int32_t>();
  cp.sim.taps = in.pod<std::int32_t>();
  cp.sim.past_len = in.pod<std::int32_t>();
  cp.sim.future_len = in.pod<std::int32_t>();
  cp.sim.fft_size = in.pod<std::int32_t>();
  cp.sim.phase_jitter = in.pod<double>();
  cp.sim.snr_db = in.pod<double>();
  cp.sim.gamma_th = in.pod<double>();
  cp.sim.rate_agg = static_cast<RateAgg>(in.pod<std::uint32_t>());
  cp.sim.master_seed = in.pod<std::uint64_t>();

  ModelDims dims;
  dims.hidden = in.pod<std::int32_t>();
  dims.dense = in.pod<std::int32_t>();
  if (dims.hidden < 1 || dims.dense < 1) {
    throw std::runtime_error("corrupt checkpoint: bad model dims");
  }
  cp.weights = ModelWeights(dims);

  const std::uint32_t tensor_count = in.pod<std::uint32_t>();
  auto expect = tensor_table(cp.weights);
  if (tensor_count != expect.size()) {
    throw std::runtime_error("corrupt checkpoint: tensor count mismatch");
  }
  for (const TensorRef& t : expect) {
    const std::string name = in.str();
    if (name != t.name) {
      throw std::runtime_error("corrupt checkpoint: expected tensor '" +
                               std::string(t.name) + "', found '" + name + "'");
    }
    std::vector<double> data = in.doubles(t.data.size());
    std::memcpy(const_cast<double*>(t.data.data()), data.data(),
                data.size() * sizeof(double));
  }

  cp.adam = AdamState(dims.param_count());
  cp.adam.step = in.pod<std::int64_t>();
  cp.adam.m = in.doubles(cp.adam.m.size());
  cp.adam.v = in.doubles(cp.adam.v.size());
  if (!in.at_eof()) {
    throw std::runtime_error("corrupt checkpoint: trailing data");
  }
  return cp;
}

}  // namespace bulkalloc
