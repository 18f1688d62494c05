#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "gafnet/decoder_ratf.hpp"
#include "gafnet/error.hpp"
#include "gafnet/stft.hpp"

namespace gafnet {

struct LossWeights {
  double alpha = 1.0;    // SNR
  double beta = 10.0;    // STOI surrogate
  double gamma = 1.0;    // ILD
  double kappa = 10.0;   // IPD
  double lambda_s = 1e-4;
  double lambda_e = 1e-4;
  double lambda_tv = 1e-4;

  void validate() const {
    for (double w : {alpha, beta, gamma, kappa, lambda_s, lambda_e, lambda_tv})
      require(w >= 0.0 && std::isfinite(w), Errc::invalid_argument, "loss weights must be finite and >= 0");
  }
};

inline constexpr double snr_max_db = 60.0;

// Per-ear SNR of `estimate` against `reference`, capped at snr_max_db.
inline double ear_snr_db(const std::vector<double>& estimate, const std::vector<double>& reference) {
  require(estimate.size() == reference.size(), Errc::shape_mismatch, "SNR inputs differ in length");
  double sig = 0.0, err = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    sig += reference[i] * reference[i];
    const double d = estimate[i] - reference[i];
    err += d * d;
  }
  require(sig > 0.0, Errc::degenerate_reference, "reference signal has zero energy");
  if (err <= 0.0) return snr_max_db;
  return std::min(snr_max_db, 10.0 * std::log10(sig / err));
}

// Mean of the two per-ear SNRs in dB.
inline double binaural_snr_db(const Waveform& estimate, const Waveform& reference) {
  return 0.5 * (ear_snr_db(estimate.ears[0], reference.ears[0]) + ear_snr_db(estimate.ears[1], reference.ears[1]));
}

inline double snr_loss(const Waveform& s_hat, const Waveform& s) { return -binaural_snr_db(s_hat, s); }

namespace detail {

struct BandSpectra {
  std::size_t n_frames = 0;
  std::vector<std::vector<cplx>> frames;  // frame -> one-sided bins
};

inline BandSpectra short_time_spectra(const std::vector<double>& x, std::size_t n_fft, std::size_t hop) {
  BandSpectra out;
  if (x.size() < n_fft) return out;
  out.n_frames = (x.size() - n_fft) / hop + 1;
  std::vector<double> win(n_fft), buf(n_fft);
  for (std::size_t n = 0; n < n_fft; ++n)
    win[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) / static_cast<double>(n_fft));
  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  out.frames.assign(out.n_frames, std::vector<cplx>(n_fft / 2 + 1));
  for (std::size_t m = 0; m < out.n_frames; ++m) {
    for (std::size_t n = 0; n < n_fft; ++n) buf[n] = win[n] * x[m * hop + n];
    fft.fwd(out.frames[m].data(), buf.data(), static_cast<Eigen::Index>(n_fft));
  }
  return out;
}

}  // namespace detail

// Short-time band-correlation intelligibility proxy: 15 one-third-octave bands
// from 150 Hz, 512-point frames with 256 hop, 23-frame (384 ms) segments.
// Per (ear, band, segment) the normalized correlation Re<X_hat, X> / (|X_hat||X|)
// is taken over the complex bins; the result is 1 - mean correlation, so
// identical signals give 0, sign-inverted signals give 2, independent ones ~1.
// Segments where the reference band is silent are skipped; if all are, returns 1.
struct StoiSurrogateConfig {
  std::size_t n_fft = 512;
  std::size_t hop = 256;
  std::size_t segment_frames = 23;
  std::size_t n_bands = 15;
  double lowest_center_hz = 150.0;
};

inline std::size_t stoi_min_samples(const StoiSurrogateConfig& c = {}) {
  return (c.segment_frames - 1) * c.hop + c.n_fft;
}

inline double stoi_surrogate(const Waveform& s_hat, const Waveform& s, const StoiSurrogateConfig& cfg = {}) {
  require(s_hat.n_samples() == s.n_samples(), Errc::shape_mismatch, "STOI inputs differ in length");
  require(s.n_samples() >= stoi_min_samples(cfg), Errc::input_too_short,
          "STOI surrogate needs at least " + std::to_string(stoi_min_samples(cfg)) + " samples");
  const double bin_hz = static_cast<double>(s.sample_rate) / static_cast<double>(cfg.n_fft);
  const std::size_t n_bins = cfg.n_fft / 2 + 1;
  std::vector<std::pair<std::size_t, std::size_t>> bands;
  for (std::size_t k = 0; k < cfg.n_bands; ++k) {
    const double fc = cfg.lowest_center_hz * std::pow(2.0, static_cast<double>(k) / 3.0);
    auto lo = static_cast<std::size_t>(std::ceil(fc * std::pow(2.0, -1.0 / 6.0) / bin_hz));
    auto hi = static_cast<std::size_t>(std::ceil(fc * std::pow(2.0, 1.0 / 6.0) / bin_hz));
    hi = std::min(hi, n_bins);
    if (hi <= lo) {
      lo = std::min(static_cast<std::size_t>(std::lround(fc / bin_hz)), n_bins - 1);
      hi = lo + 1;
    }
    bands.emplace_back(lo, hi);
  }

  double acc = 0.0;
  std::size_t count = 0;
  for (std::size_t e = 0; e < 2; ++e) {
    const auto X = detail::short_time_spectra(s.ears[e], cfg.n_fft, cfg.hop);
    const auto Xh = detail::short_time_spectra(s_hat.ears[e], cfg.n_fft, cfg.hop);
    if (X.n_frames < cfg.segment_frames) continue;
    for (const auto& [lo, hi] : bands) {
      for (std::size_t m0 = 0; m0 + cfg.segment_frames <= X.n_frames; ++m0) {
        double cross = 0.0, e_ref = 0.0, e_est = 0.0;
        for (std::size_t m = m0; m < m0 + cfg.segment_frames; ++m)
          for (std::size_t k = lo; k < hi; ++k) {
            const cplx a = X.frames[m][k], b = Xh.frames[m][k];
            cross += a.real() * b.real() + a.imag() * b.imag();
            e_ref += std::norm(a);
            e_est += std::norm(b);
          }
        if (e_ref <= 1e-20) continue;
        acc += e_est <= 1e-20 ? 0.0 : cross / std::sqrt(e_ref * e_est);
        ++count;
      }
    }
  }
  return count == 0 ? 1.0 : 1.0 - acc / static_cast<double>(count);
}

inline double wrap_phase(double x) {
  // Into (-pi, pi].
  double w = std::remainder(x, 2.0 * std::numbers::pi);
  if (w <= -std::numbers::pi) w += 2.0 * std::numbers::pi;
  return w;
}

struct CueMaps {
  std::size_t n_freq = 0;
  std::size_t n_frames = 0;
  std::vector<double> ild;         // dB, (F, T) row-major
  std::vector<double> ipd;         // radians in (-pi, pi]
  std::vector<std::uint8_t> mask;  // both ears above the energy floor

  std::size_t active_count() const {
    return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
  }
};

inline constexpr double default_cue_floor_db = 40.0;

// ild = 20 log10(|S_L| / |S_R|), ipd = arg(S_L conj(S_R)); mask keeps bins whose
// weaker ear is within floor_db of the strongest bin power of the utterance.
inline CueMaps cue_maps(const Spectrogram& S, double floor_db = default_cue_floor_db) {
  S.validate();
  constexpr double guard = 1e-30;
  const std::size_t F = S.n_freq(), T = S.n_frames();
  CueMaps m{F, T, std::vector<double>(F * T), std::vector<double>(F * T), std::vector<std::uint8_t>(F * T)};
  double peak = 0.0;
  for (const cplx& z : S.bins.values()) peak = std::max(peak, std::norm(z));
  const double threshold = peak * std::pow(10.0, -floor_db / 10.0);
  for (std::size_t f = 0; f < F; ++f)
    for (std::size_t t = 0; t < T; ++t) {
      const cplx l = S.at(0, f, t), r = S.at(1, f, t);
      const double pl = std::norm(l), pr = std::norm(r);
      const std::size_t i = f * T + t;
      m.ild[i] = 10.0 * (std::log10(pl + guard) - std::log10(pr + guard));
      const double cross_re = l.real() * r.real() + l.imag() * r.imag();
      const double cross_im = l.imag() * r.real() - l.real() * r.imag();
      double phase = std::atan2(cross_im, cross_re);
      if (phase <= -std::numbers::pi) phase = std::numbers::pi;
      m.ipd[i] = phase;
      m.mask[i] = (peak > 0.0 && std::min(pl, pr) > threshold) ? 1 : 0;
    }
  return m;
}

struct CueLossOptions {
  double floor_db = default_cue_floor_db;
  bool masked = true;  // false: average over the full grid
};

namespace detail {

template <typename Diff>
double masked_cue_mae(const Spectrogram& clean, const Spectrogram& est, const CueLossOptions& opt, Diff diff) {
  require(clean.bins.shape() == est.bins.shape(), Errc::shape_mismatch,
          "cue loss: clean " + shape_string(clean.bins.shape()) + " vs estimate " +
              shape_string(est.bins.shape()));
  const CueMaps c = cue_maps(clean, opt.floor_db);
  const CueMaps e = cue_maps(est, opt.floor_db);
  double acc = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < c.mask.size(); ++i) {
    if (opt.masked && !c.mask[i]) continue;
    acc += diff(c, e, i);
    ++n;
  }
  require(n > 0, Errc::empty_mask, "no active time-frequency bins in the clean signal");
  return acc / static_cast<double>(n);
}

}  // namespace detail

inline double ild_loss(const Spectrogram& clean, const Spectrogram& est, const CueLossOptions& opt = {}) {
  return detail::masked_cue_mae(clean, est, opt, [](const CueMaps& c, const CueMaps& e, std::size_t i) {
    return std::abs(e.ild[i] - c.ild[i]);
  });
}

inline double ipd_loss(const Spectrogram& clean, const Spectrogram& est, const CueLossOptions& opt = {}) {
  return detail::masked_cue_mae(clean, est, opt, [](const CueMaps& c, const CueMaps& e, std::size_t i) {
    return std::abs(wrap_phase(e.ipd[i] - c.ipd[i]));
  });
}

struct RegTerms {
  double sparse = 0.0;
  double entropy = 0.0;  // negative binary entropy, in (-ln 2, 0]
  double tv = 0.0;
};

inline RegTerms reg_terms(const GateMap& g) {
  RegTerms r;
  if (g.values.empty()) return r;
  constexpr double clamp = 1e-12;
  for (double v : g.values) {
    require(v >= 0.0 && v <= 1.0, Errc::invalid_argument, "gate values must lie in [0, 1]");
    r.sparse += std::abs(v);
    r.entropy += v * std::log(std::max(v, clamp)) + (1.0 - v) * std::log(std::max(1.0 - v, clamp));
  }
  const double n = static_cast<double>(g.values.size());
  r.sparse /= n;
  r.entropy /= n;
  std::size_t n_diff = 0;
  for (std::size_t b = 0; b < g.batch; ++b)
    for (std::size_t f = 0; f + 1 < g.freq; ++f) {
      r.tv += std::abs(g.at(b, f + 1) - g.at(b, f));
      ++n_diff;
    }
  if (n_diff) r.tv /= static_cast<double>(n_diff);
  return r;
}

struct LossBreakdown {
  double snr = 0.0;
  double stoi = 0.0;
  double ild = 0.0;
  double ipd = 0.0;
  RegTerms reg;
  double task = 0.0;
  double regularization = 0.0;
  double total = 0.0;
};

inline LossBreakdown weighted_total(LossBreakdown terms, const LossWeights& w) {
  w.validate();
  terms.task = w.alpha * terms.snr + w.beta * terms.stoi + w.gamma * terms.ild + w.kappa * terms.ipd;
  terms.regularization = w.lambda_s * terms.reg.sparse + w.lambda_e * terms.reg.entropy + w.lambda_tv * terms.reg.tv;
  terms.total = terms.task + terms.regularization;
  return terms;
}

// Composite objective evaluated on time-domain estimate/reference and the DRG gate.
inline LossBreakdown total_loss(const Waveform& s_hat, const Waveform& s, const GateMap& g,
                                const AnalysisConfig& cfg, const LossWeights& w = {},
                                const CueLossOptions& cue = {}) {
  LossBreakdown terms;
  terms.snr = snr_loss(s_hat, s);
  terms.stoi = stoi_surrogate(s_hat, s);
  const Spectrogram S = stft(s, cfg);
  const Spectrogram Sh = stft(s_hat, cfg);
  terms.ild = ild_loss(S, Sh, cue);
  terms.ipd = ipd_loss(S, Sh, cue);
  terms.reg = reg_terms(g);
  return weighted_total(terms, w);
}

}  // namespace gafnet
