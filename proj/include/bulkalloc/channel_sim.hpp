#pragma once

#include <complex>
#include <cstdint>
#include <vector>

#include "bulkalloc/rng.hpp"

namespace bulkalloc {

using cdouble = std::complex<double>;
using TapVector = std::vector<cdouble>;

enum class RateAgg { kMean, kMin };

// Fading-channel generator configuration. One realization models R parallel
// frequency-domain resources carved out of a tapped-delay-line channel.
struct SimConfig {
  int resources = 16;       // R
  int taps = 32;            // v complex Gaussian taps
  int past_len = 100;       // k observed magnitude samples per resource
  int future_len = 10;      // l future samples the labels are computed from
  int fft_size = 64;        // frequency grid; resources sit on every fft_size/R-th bin
  double phase_jitter = 0.1;  // per-tap, per-step phase bound in radians
  double snr_db = 0.0;
  double gamma_th = 1.2;    // target rate threshold, bits/s/Hz
  RateAgg rate_agg = RateAgg::kMean;
  std::uint64_t master_seed = 0;

  // Throws std::invalid_argument on any violated constraint.
  void validate() const;
};

// One system snapshot: what the predictor sees (past magnitudes), what the
// future holds (complex gains, achieved rates) and the resulting labels.
struct ChannelRealization {
  std::vector<std::vector<double>> past;          // R x k magnitudes
  std::vector<std::vector<cdouble>> future_gains; // R x l
  std::vector<double> rates;                      // C_i, bits/s/Hz
  std::vector<int> outage;                        // y_i = 1 iff C_i < gamma_th
  std::vector<int> good;                          // g_i = 1 - y_i
};

// v taps, independent circularly symmetric complex Gaussian, total average
// power 1 (each component has variance 1/(2v)).
TapVector generate_taps(const SimConfig& cfg, RngStream& stream);

// Rotates every tap by an independent Uniform[-delta, delta] phase.
// Magnitudes are preserved up to rounding of the complex multiply.
TapVector evolve_taps(const TapVector& taps, double delta, RngStream& stream);

// Bins {0, S, 2S, ...} of the fft_size-point DFT of the zero-padded taps,
// S = fft_size / resources. Evaluated directly per extracted bin.
std::vector<cdouble> frequency_response(const TapVector& taps,
                                        const SimConfig& cfg);

// log2(1 + snr * |gain|^2) with snr = 10^(snr_db/10).
double achievable_rate(cdouble gain, double snr_db);

// Full k+l step simulation from a fresh tap draw; fills past magnitudes,
// future gains, aggregated rates and outage labels.
ChannelRealization generate_realization(const SimConfig& cfg, RngStream& stream);

}  // namespace bulkalloc
