#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "gafnet/error.hpp"
#include "gafnet/tensor.hpp"

namespace gafnet {

enum class Ear : std::size_t { left = 0, right = 1 };

enum class WindowKind { sqrt_hann };

struct AnalysisConfig {
  int sample_rate = 16000;
  std::size_t fft_size = 256;
  std::size_t hop = 128;
  WindowKind window = WindowKind::sqrt_hann;

  std::size_t n_freq_bins() const noexcept { return fft_size / 2 + 1; }

  void validate() const {
    require(sample_rate > 0, Errc::invalid_argument, "sample_rate must be positive");
    require(fft_size >= 4 && fft_size % 2 == 0, Errc::invalid_argument, "fft_size must be even");
    require(hop > 0 && fft_size % hop == 0 && fft_size / hop >= 2, Errc::invalid_argument,
            "hop must divide fft_size with at least 50% overlap");
  }

  bool operator==(const AnalysisConfig&) const = default;
};

// Periodic square-root Hann: w[n] = sin(pi n / N). Its square sums to one at 50% overlap.
inline std::vector<double> analysis_window(const AnalysisConfig& cfg) {
  std::vector<double> w(cfg.fft_size);
  for (std::size_t n = 0; n < cfg.fft_size; ++n)
    w[n] = std::sin(std::numbers::pi * static_cast<double>(n) / static_cast<double>(cfg.fft_size));
  return w;
}

// Frames on the grid starting at sample 0, no padding.
inline std::size_t frame_count(std::size_t n_samples, const AnalysisConfig& cfg) {
  if (n_samples < cfg.fft_size) return 0;
  return (n_samples - cfg.fft_size) / cfg.hop + 1;
}

inline std::size_t synthesis_length(std::size_t n_frames, const AnalysisConfig& cfg) {
  return n_frames == 0 ? 0 : (n_frames - 1) * cfg.hop + cfg.fft_size;
}

// Sum over frames of window^2(n - m*hop) for a signal of `n_frames` frames.
inline std::vector<double> window_power_sum(std::size_t n_frames, const AnalysisConfig& cfg) {
  const auto w = analysis_window(cfg);
  std::vector<double> acc(synthesis_length(n_frames, cfg), 0.0);
  for (std::size_t m = 0; m < n_frames; ++m)
    for (std::size_t n = 0; n < cfg.fft_size; ++n) acc[m * cfg.hop + n] += w[n] * w[n];
  return acc;
}

// Two-ear time signal (L, R).
struct Waveform {
  int sample_rate = 16000;
  std::array<std::vector<double>, 2> ears;

  Waveform() = default;
  Waveform(int rate, std::size_t n) : sample_rate(rate), ears{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)} {}
  Waveform(int rate, std::vector<double> left, std::vector<double> right)
      : sample_rate(rate), ears{std::move(left), std::move(right)} {}

  std::size_t n_samples() const noexcept { return ears[0].size(); }
  std::vector<double>& ear(Ear e) { return ears[static_cast<std::size_t>(e)]; }
  const std::vector<double>& ear(Ear e) const { return ears[static_cast<std::size_t>(e)]; }

  void validate() const {
    require(ears[0].size() == ears[1].size(), Errc::shape_mismatch, "ears have different lengths");
    for (const auto& ch : ears)
      for (double v : ch) require(std::isfinite(v), Errc::invalid_argument, "non-finite sample");
  }
};

// Per-ear complex F x T grid. bins has axes (channel = ear, frequency, time).
struct Spectrogram {
  AnalysisConfig config;
  ComplexTensor bins;

  Spectrogram() = default;
  Spectrogram(const AnalysisConfig& cfg, std::size_t n_frames)
      : config(cfg),
        bins({Axis::channel, Axis::frequency, Axis::time}, {2, cfg.n_freq_bins(), n_frames}) {}

  std::size_t n_freq() const { return bins.dim(1); }
  std::size_t n_frames() const { return bins.dim(2); }

  cplx& at(std::size_t ear, std::size_t f, std::size_t t) { return bins.at(ear, f, t); }
  const cplx& at(std::size_t ear, std::size_t f, std::size_t t) const { return bins.at(ear, f, t); }

  void validate() const {
    const std::vector<Axis> want{Axis::channel, Axis::frequency, Axis::time};
    require(bins.axes() == want, Errc::shape_mismatch, "spectrogram axes must be (channel, frequency, time)");
    require(bins.dim(0) == 2, Errc::shape_mismatch, "spectrogram must have exactly two ears");
    require(bins.dim(1) == config.n_freq_bins(), Errc::shape_mismatch,
            "spectrogram has " + std::to_string(bins.dim(1)) + " bins, config expects " +
                std::to_string(config.n_freq_bins()));
  }
};

inline Spectrogram stft(const Waveform& w, const AnalysisConfig& cfg) {
  cfg.validate();
  w.validate();
  require(w.sample_rate == cfg.sample_rate, Errc::invalid_argument,
          "waveform sample rate " + std::to_string(w.sample_rate) + " != analysis rate " +
              std::to_string(cfg.sample_rate));
  require(w.n_samples() >= cfg.fft_size, Errc::input_too_short,
          "signal of " + std::to_string(w.n_samples()) + " samples is shorter than one frame");

  const std::size_t n_frames = frame_count(w.n_samples(), cfg);
  const std::size_t n_bins = cfg.n_freq_bins();
  const auto window = analysis_window(cfg);
  Spectrogram spec(cfg, n_frames);

  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<double> frame(cfg.fft_size);
  std::vector<cplx> bins(n_bins);
  for (std::size_t e = 0; e < 2; ++e) {
    const auto& x = w.ears[e];
    for (std::size_t t = 0; t < n_frames; ++t) {
      const std::size_t start = t * cfg.hop;
      for (std::size_t n = 0; n < cfg.fft_size; ++n) frame[n] = window[n] * x[start + n];
      fft.fwd(bins.data(), frame.data(), static_cast<Eigen::Index>(cfg.fft_size));
      for (std::size_t f = 0; f < n_bins; ++f) spec.at(e, f, t) = bins[f];
    }
  }
  return spec;
}

// Weighted overlap-add with window-power compensation. Output length is
// (T - 1) * hop + fft_size; samples where no window has support come out zero.
inline Waveform istft(const Spectrogram& s) {
  s.validate();
  const auto& cfg = s.config;
  cfg.validate();
  const std::size_t n_frames = s.n_frames();
  const std::size_t n_bins = cfg.n_freq_bins();
  const auto window = analysis_window(cfg);
  const auto wsum = window_power_sum(n_frames, cfg);
  Waveform out(cfg.sample_rate, synthesis_length(n_frames, cfg));

  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<cplx> bins(n_bins);
  std::vector<double> frame(cfg.fft_size);
  for (std::size_t e = 0; e < 2; ++e) {
    auto& y = out.ears[e];
    for (std::size_t t = 0; t < n_frames; ++t) {
      for (std::size_t f = 0; f < n_bins; ++f) bins[f] = s.at(e, f, t);
      fft.inv(frame.data(), bins.data(), static_cast<Eigen::Index>(cfg.fft_size));
      const std::size_t start = t * cfg.hop;
      for (std::size_t n = 0; n < cfg.fft_size; ++n) y[start + n] += window[n] * frame[n];
    }
    for (std::size_t n = 0; n < y.size(); ++n) y[n] = wsum[n] > 1e-10 ? y[n] / wsum[n] : 0.0;
  }
  return out;
}

// Samples of an istft output of length `n` that are covered by a full window overlap.
struct SampleRange {
  std::size_t begin = 0;
  std::size_t end = 0;
};

inline SampleRange interior_region(std::size_t n, const AnalysisConfig& cfg) {
  const std::size_t edge = cfg.fft_size - cfg.hop;
  if (n <= 2 * edge) return {0, 0};
  return {edge, n - edge};
}

}  // namespace gafnet
