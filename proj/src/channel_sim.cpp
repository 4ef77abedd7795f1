#include "bulkalloc/channel_sim.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace bulkalloc {

void SimConfig::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("SimConfig: " + msg); };
  if (resources < 1) fail("resources must be >= 1");
  if (taps < 1) fail("taps must be >= 1");
  if (past_len < 1) fail("past_len must be >= 1");
  if (future_len < 1) fail("future_len must be >= 1");
  if (fft_size < taps) fail("fft_size must be >= taps");
  if (fft_size % resources != 0) fail("fft_size must be a multiple of resources");
  if (phase_jitter < 0.0) fail("phase_jitter must be >= 0");
  if (!(gamma_th > 0.0)) fail("gamma_th must be > 0");
}

TapVector generate_taps(const SimConfig& cfg, RngStream& stream) {
  const double sigma = std::sqrt(1.0 / (2.0 * cfg.taps));
  TapVector taps(cfg.taps);
  for (auto& h : taps) {
    double re = sigma * stream.gaussian();
    double im = sigma * stream.gaussian();
    h = cdouble(re, im);
  }
  return taps;
}

TapVector evolve_taps(const TapVector& taps, double delta, RngStream& stream) {
  TapVector out(taps.size());
  for (std::size_t m = 0; m < taps.size(); ++m) {
    double theta = stream.uniform(-delta, delta);
    out[m] = taps[m] * std::polar(1.0, theta);
  }
  return out;
}

std::vector<cdouble> frequency_response(const TapVector& taps,
                                        const SimConfig& cfg) {
  cfg.validate();
  const int stride = cfg.fft_size / cfg.resources;
  std::vector<cdouble> gains(cfg.resources);
  for (int b = 0; b < cfg.resources; ++b) {
    // H(bin) = sum_m h_m w^m with w = exp(-j 2 pi bin / N), Horner form.
    const double angle = -2.0 * M_PI * (static_cast<double>(b) * stride) / cfg.fft_size;
    const cdouble w = std::polar(1.0, angle);
    cdouble acc(0.0, 0.0);
    for (int m = static_cast<int>(taps.size()) - 1; m >= 0; --m) {
      acc = acc * w + taps[static_cast<std::size_t>(m)];
    }
    gains[b] = acc;
  }
  return gains;
}

double achievable_rate(cdouble gain, double snr_db) {
  const double snr = std::pow(10.0, snr_db / 10.0);
  return std::log2(1.0 + snr * std::norm(gain));
}

ChannelRealization generate_realization(const SimConfig& cfg, RngStream& stream) {
  cfg.validate();
  const int r = cfg.resources;
  const int steps = cfg.past_len + cfg.future_len;

  ChannelRealization out;
  out.past.assign(r, std::vector<double>(cfg.past_len));
  out.future_gains.assign(r, std::vector<cdouble>(cfg.future_len));
  out.rates.assign(r, 0.0);
  out.outage.assign(r, 0);
  out.good.assign(r, 0);

  TapVector taps = generate_taps(cfg, stream);
  for (int t = 0; t < steps; ++t) {
    if (t > 0) taps = evolve_taps(taps, cfg.phase_jitter, stream);
    const std::vector<cdouble> gains = frequency_response(taps, cfg);
    if (t < cfg.past_len) {
      for (int i = 0; i < r; ++i) out.past[i][t] = std::abs(gains[i]);
    } else {
      for (int i = 0; i < r; ++i) out.future_gains[i][t - cfg.past_len] = gains[i];
    }
  }

  for (int i = 0; i < r; ++i) {
    double agg;
    if (cfg.rate_agg == RateAgg::kMean) {
      double sum = 0.0;
      for (const cdouble& gi : out.future_gains[i]) sum += achievable_rate(gi, cfg.snr_db);
      agg = sum / cfg.future_len;
    } else {
      agg = std::numeric_limits<double>::infinity();
      for (const cdouble& gi : out.future_gains[i]) {
        agg = std::min(agg, achievable_rate(gi, cfg.snr_db));
      }
    }
    out.rates[i] = agg;
    out.outage[i] = agg < cfg.gamma_th ? 1 : 0;
    out.good[i] = 1 - out.outage[i];
  }
  return out;
}

}  // namespace bulkalloc
