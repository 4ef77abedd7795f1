#include "bulkalloc/rng.hpp"

#include <cmath>

namespace bulkalloc {

double RngStream::gaussian() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // Box-Muller on (0,1] x [0,1) so the log argument is never zero.
  double u1 = 1.0 - uniform();
  double u2 = uniform();
  double r = std::sqrt(-2.0 * std::log(u1));
  double theta = 2.0 * M_PI * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t experiment_stream_id(StreamPurpose purpose, int retrain_index) {
  std::uint64_t p = static_cast<std::uint64_t>(purpose);
  std::uint64_t r =
      purpose == StreamPurpose::kTest ? 0 : static_cast<std::uint64_t>(retrain_index);
  return mix64((p << 32) ^ r);
}

RngStream derive_stream(std::uint64_t master_seed, std::uint64_t experiment_id,
                        std::uint64_t epoch, std::uint64_t batch) {
  std::uint64_t h = mix64(master_seed);
  h = mix64(h ^ experiment_id);
  h = mix64(h ^ epoch);
  h = mix64(h ^ batch);
  return RngStream(h);
}

}  // namespace bulkalloc
