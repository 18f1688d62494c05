#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "gafnet/error.hpp"
#include "gafnet/stft.hpp"
#include "gafnet/tensor.hpp"

namespace gafnet {

// Glasberg & Moore ERB-rate scale and bandwidth.
inline double erb_rate(double hz) { return 21.4 * std::log10(1.0 + 0.00437 * hz); }
inline double erb_rate_to_hz(double erb) { return (std::pow(10.0, erb / 21.4) - 1.0) / 0.00437; }
inline double erb_bandwidth(double hz) { return 24.7 * (4.37 * hz / 1000.0 + 1.0); }

// Immutable bank of 4th-order gammatone FIR filters at ERB-spaced centers.
// Filtering uses overlap-add block convolution with precomputed filter spectra.
class GammatoneBank {
 public:
  static constexpr int order = 4;

  GammatoneBank(int sample_rate, std::vector<double> centers, std::size_t taps)
      : sample_rate_(sample_rate), centers_(std::move(centers)), taps_(taps), block_fft_(2 * taps) {
    constexpr double b = 1.019;
    const double fs = sample_rate_;
    irs_.reserve(centers_.size());
    for (double fc : centers_) {
      std::vector<double> g(taps_);
      const double decay = 2.0 * std::numbers::pi * b * erb_bandwidth(fc);
      for (std::size_t n = 0; n < taps_; ++n) {
        const double t = static_cast<double>(n) / fs;
        g[n] = t * t * t * std::exp(-decay * t) * std::cos(2.0 * std::numbers::pi * fc * t);
      }
      // Unit magnitude at the center frequency, which is the pass-band peak.
      cplx h{};
      for (std::size_t n = 0; n < taps_; ++n)
        h += g[n] * std::polar(1.0, -2.0 * std::numbers::pi * fc * static_cast<double>(n) / fs);
      const double gain = std::abs(h);
      for (double& v : g) v /= gain;
      irs_.push_back(std::move(g));
    }

    Eigen::FFT<double> fft;
    fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
    std::vector<double> padded(block_fft_, 0.0);
    spectra_.resize(irs_.size(), std::vector<cplx>(block_fft_ / 2 + 1));
    for (std::size_t k = 0; k < irs_.size(); ++k) {
      std::fill(padded.begin(), padded.end(), 0.0);
      std::copy(irs_[k].begin(), irs_[k].end(), padded.begin());
      fft.fwd(spectra_[k].data(), padded.data(), static_cast<Eigen::Index>(block_fft_));
    }
  }

  int sample_rate() const noexcept { return sample_rate_; }
  std::size_t n_channels() const noexcept { return centers_.size(); }
  std::size_t taps() const noexcept { return taps_; }
  const std::vector<double>& center_freqs() const noexcept { return centers_; }
  const std::vector<std::vector<double>>& impulse_responses() const noexcept { return irs_; }

  // Causal filtering of x by every channel, each output truncated to x.size().
  std::vector<std::vector<double>> filter(std::span<const double> x) const {
    std::vector<std::vector<double>> out(n_channels());
    for_each_channel(x, [&](std::size_t k, std::vector<double>&& y) { out[k] = std::move(y); });
    return out;
  }

  // Calls sink(channel, filtered signal) once per channel.
  template <typename Sink>
  void for_each_channel(std::span<const double> x, Sink&& sink) const {
    const std::size_t n = x.size();
    const std::size_t block = taps_;
    const std::size_t n_blocks = (n + block - 1) / block;
    const std::size_t n_bins = block_fft_ / 2 + 1;

    Eigen::FFT<double> fft;
    fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
    std::vector<double> buf(block_fft_);
    std::vector<std::vector<cplx>> blocks(n_blocks, std::vector<cplx>(n_bins));
    for (std::size_t b = 0; b < n_blocks; ++b) {
      std::fill(buf.begin(), buf.end(), 0.0);
      const std::size_t s = b * block;
      const std::size_t len = std::min(block, n - s);
      std::copy(x.begin() + static_cast<std::ptrdiff_t>(s),
                x.begin() + static_cast<std::ptrdiff_t>(s + len), buf.begin());
      fft.fwd(blocks[b].data(), buf.data(), static_cast<Eigen::Index>(block_fft_));
    }

    std::vector<cplx> prod(n_bins);
    for (std::size_t k = 0; k < n_channels(); ++k) {
      std::vector<double> y(n, 0.0);
      const auto& h = spectra_[k];
      for (std::size_t b = 0; b < n_blocks; ++b) {
        for (std::size_t f = 0; f < n_bins; ++f) prod[f] = cmul(blocks[b][f], h[f]);
        fft.inv(buf.data(), prod.data(), static_cast<Eigen::Index>(block_fft_));
        const std::size_t s = b * block;
        const std::size_t len = std::min(block_fft_, n - s);
        for (std::size_t i = 0; i < len; ++i) y[s + i] += buf[i];
      }
      sink(k, std::move(y));
    }
  }

 private:
  int sample_rate_;
  std::vector<double> centers_;
  std::size_t taps_;
  std::size_t block_fft_;
  std::vector<std::vector<double>> irs_;
  std::vector<std::vector<cplx>> spectra_;
};

inline constexpr std::size_t default_gammatone_channels = 64;
inline constexpr double default_gammatone_f_lo = 50.0;
inline constexpr double default_gammatone_f_hi = 7800.0;
inline constexpr std::size_t default_gammatone_taps = 1024;

inline GammatoneBank build_gammatone_bank(const AnalysisConfig& cfg,
                                          std::size_t n_channels = default_gammatone_channels,
                                          double f_lo = default_gammatone_f_lo,
                                          double f_hi = default_gammatone_f_hi,
                                          std::size_t taps = default_gammatone_taps) {
  const double nyquist = cfg.sample_rate / 2.0;
  require(f_lo > 0.0 && f_lo < f_hi && f_hi < nyquist, Errc::invalid_band,
          "band edges must satisfy 0 < f_lo < f_hi < sample_rate/2");
  require(n_channels >= 1, Errc::invalid_argument, "need at least one gammatone channel");
  require(taps >= 16, Errc::invalid_argument, "gammatone FIR needs at least 16 taps");

  const double e_lo = erb_rate(f_lo);
  const double e_hi = erb_rate(f_hi);
  std::vector<double> centers(n_channels);
  if (n_channels == 1) {
    centers[0] = erb_rate_to_hz(0.5 * (e_lo + e_hi));
  } else {
    for (std::size_t k = 0; k < n_channels; ++k)
      centers[k] = erb_rate_to_hz(e_lo + (e_hi - e_lo) * static_cast<double>(k) /
                                             static_cast<double>(n_channels - 1));
  }
  return GammatoneBank(cfg.sample_rate, std::move(centers), taps);
}

// log(1 + energy) of each channel's output over every STFT frame span.
// Shape (channel = ear, frequency = gammatone channel, time), imaginary parts zero.
inline ComplexTensor gammatone_frames(const Waveform& w, const GammatoneBank& bank,
                                      const AnalysisConfig& cfg) {
  w.validate();
  require(w.sample_rate == cfg.sample_rate && bank.sample_rate() == cfg.sample_rate,
          Errc::invalid_argument, "gammatone bank, waveform and analysis rates differ");
  require(w.n_samples() >= cfg.fft_size, Errc::input_too_short,
          "signal of " + std::to_string(w.n_samples()) + " samples is shorter than one frame");

  const std::size_t n_frames = frame_count(w.n_samples(), cfg);
  ComplexTensor out({Axis::channel, Axis::frequency, Axis::time}, {2, bank.n_channels(), n_frames});
  for (std::size_t e = 0; e < 2; ++e) {
    bank.for_each_channel(w.ears[e], [&](std::size_t k, std::vector<double>&& y) {
      for (std::size_t t = 0; t < n_frames; ++t) {
        double energy = 0.0;
        const std::size_t s = t * cfg.hop;
        for (std::size_t n = 0; n < cfg.fft_size; ++n) energy += y[s + n] * y[s + n];
        out.at(e, k, t) = cplx(std::log1p(energy), 0.0);
      }
    });
  }
  return out;
}

}  // namespace gafnet
