#pragma once

#include <cstdint>
#include <random>

namespace bulkalloc {

// Deterministic random stream. All transforms (uniform, gaussian) are
// specified here rather than delegated to std distributions, so that a given
// stream seed produces identical draws on every platform and compiler.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller; the spare draw is cached.
  double gaussian();

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// SplitMix64 finalizer; used as the stream-derivation mixing function.
std::uint64_t mix64(std::uint64_t z);

// Stream families. Streams for training, validation, testing and weight
// initialization must never collide, and retrains must get fresh train/init
// streams while sharing the test family.
enum class StreamPurpose : std::uint64_t {
  kTrain = 1,
  kValidation = 2,
  kTest = 3,
  kInit = 4,
};

// Packs (purpose, retrain index) into the experiment id consumed by
// derive_stream. The test family ignores the retrain index so every retrain
// and every loss is scored on the same test realizations.
std::uint64_t experiment_stream_id(StreamPurpose purpose, int retrain_index);

// Collision-resistant mixing of (master seed, experiment id, epoch, batch)
// into an independent stream. Identical tuples give identical streams; any
// change to one field reseeds the whole stream.
RngStream derive_stream(std::uint64_t master_seed, std::uint64_t experiment_id,
                        std::uint64_t epoch, std::uint64_t batch);

}  // namespace bulkalloc
