#pragma once

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gafnet/gafm.hpp"
#include "gafnet/model.hpp"
#include "gafnet/pipeline.hpp"

namespace gafnet {

struct ComplexityRow {
  std::string module;
  std::uint64_t params = 0;
  std::uint64_t macs = 0;
};

struct RtfStats {
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  double audio_seconds = 0.0;
  unsigned threads = 1;
  std::vector<double> samples;  // seconds per run

  double iqr() const { return q3 - q1; }
};

struct ComplexityReport {
  std::vector<ComplexityRow> rows;
  std::uint64_t n_params = 0;
  std::uint64_t macs_per_second_audio = 0;
  std::size_t frames_per_second = 0;
  std::vector<RtfStats> rtf;  // one entry per measured thread count
};

namespace detail {

inline std::uint64_t lightconv_params(std::uint64_t cin, std::uint64_t cout, std::uint64_t taps) {
  return 2 * cin * taps        // complex depthwise kernel
         + 2 * cout * cin + 2 * cout  // complex pointwise weight and bias
         + 4 * cout                   // CLN complex gamma and beta
         + cout;                      // PReLU slope
}

// Per-position MACs of one LightConv block (depthwise + pointwise).
inline std::uint64_t lightconv_macs(std::uint64_t cin, std::uint64_t cout, std::uint64_t taps) {
  return 4 * cin * taps + 4 * cout * cin;
}

}  // namespace detail

// Closed-form parameter count per module, from the architecture alone.
inline std::vector<ComplexityRow> count_params(const ArchConfig& a) {
  using detail::lightconv_params;
  const std::uint64_t C = a.channels, H = a.mlp_hidden, K = a.n_coeffs, F = a.n_freq, G = a.n_gammatone;
  const std::uint64_t t1 = a.kernel_1d, t2 = a.kernel_2d_f * a.kernel_2d_t;
  auto stack = [&](std::uint64_t layers, std::uint64_t first_in, std::uint64_t taps) {
    std::uint64_t p = 0;
    for (std::uint64_t i = 0; i < layers; ++i) p += lightconv_params(i == 0 ? first_in : C, C, taps);
    return p;
  };
  std::vector<ComplexityRow> rows;
  rows.push_back({"encoder.stft", stack(a.encoder_layers, 2, t1), 0});
  rows.push_back({"encoder.gammatone", stack(a.encoder_layers, 2, t1) + F * G, 0});
  rows.push_back({"encoder.fusion", C * C + C, 0});
  rows.push_back({"encoder.se", 2 * C * (C / a.se_reduction), 0});
  rows.push_back({"gafm", a.gafm_layers * (C * H + 2 * H + H * K + K + 1 + 2 * C * C + 2 * C + 4 * C), 0});
  rows.push_back({"decoder.speech", stack(a.decoder_layers, C, t2) + 2 * C + 2, 0});
  rows.push_back({"decoder.noise", stack(a.decoder_layers, C, t2) + 2 * C + 2, 0});
  rows.push_back({"ratf_solve", 0, 0});
  rows.push_back({"drg", C + 1 + F, 0});
  return rows;
}

// Sums every stored real scalar (complex = 2) by walking the tensors.
inline std::uint64_t count_params_walk(const ModelParams& m) {
  std::uint64_t n = 0;
  m.visit([&](const std::string&, const std::vector<std::size_t>& shape, bool is_complex, const double*) {
    std::uint64_t k = is_complex ? 2 : 1;
    for (auto d : shape) k *= d;
    n += k;
  });
  return n;
}

// Closed-form MACs per module for one utterance of `frames` frames (batch 1).
// A complex multiply is 4 real MACs, real x complex is 2; norms, sigmoids,
// magnitudes and bias additions are not counted. The analysis/synthesis
// transforms and the gammatone filterbank are frontend DSP and not counted.
inline std::vector<ComplexityRow> count_macs(const ArchConfig& a, std::size_t frames, const Ablations& ab = {}) {
  using detail::lightconv_macs;
  const std::uint64_t C = a.channels, H = a.mlp_hidden, K = a.n_coeffs, F = a.n_freq, G = a.n_gammatone;
  const std::uint64_t T = frames;
  const std::uint64_t t1 = a.kernel_1d, t2 = a.kernel_2d_f * a.kernel_2d_t;
  auto stack = [&](std::uint64_t layers, std::uint64_t first_in, std::uint64_t taps) {
    std::uint64_t p = 0;
    for (std::uint64_t i = 0; i < layers; ++i) p += lightconv_macs(i == 0 ? first_in : C, C, taps);
    return p;
  };
  std::vector<ComplexityRow> rows;
  rows.push_back({"encoder.stft", 0, stack(a.encoder_layers, 2, t1) * F * T});
  rows.push_back({"encoder.gammatone", 0,
                  ab.no_gammatone ? 0 : stack(a.encoder_layers, 2, t1) * G * T + 2 * C * F * G * T});
  rows.push_back({"encoder.fusion", 0, (ab.no_gammatone ? 0 : C * C * F * T) + 2 * C * F * T});
  rows.push_back({"encoder.se", 0, 2 * (C / a.se_reduction) * C + 2 * C * F * T});
  rows.push_back({"gafm", 0, ab.no_gafm ? 0 : a.gafm_layers * gafm_macs(1, C, F, T, H, K)});
  rows.push_back({"decoder.speech", 0, stack(a.decoder_layers, C, t2) * F * T + 4 * C * F * T});
  rows.push_back({"decoder.noise", 0, stack(a.decoder_layers, C, t2) * F * T + 4 * C * F * T});
  rows.push_back({"ratf_solve", 0, 16 * F * T});
  const bool gate_from_features = !ab.no_drg && !ab.global_drg;
  rows.push_back({"drg", 0, (gate_from_features ? C * F : 0) + (ab.no_drg ? 0 : 8 * F * T)});
  return rows;
}

// Frames covering one second of audio.
inline std::size_t frames_per_second(const AnalysisConfig& cfg) {
  return frame_count(static_cast<std::size_t>(cfg.sample_rate), cfg);
}

// MACs tallied by the kernels while running the spectral network on a random
// input of `frames` frames: the instrumented counterpart of count_macs.
inline std::uint64_t instrumented_macs(const Enhancer& enh, std::size_t frames, std::uint64_t seed = 0) {
  const RunConfig& cfg = enh.config();
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> nd;
  Spectrogram Y(cfg.analysis, frames);
  for (std::size_t i = 0; i < Y.bins.size(); ++i) Y.bins[i] = cplx(nd(gen), nd(gen));
  ComplexTensor gamma({Axis::channel, Axis::frequency, Axis::time}, {2, cfg.arch.n_gammatone, frames});
  for (std::size_t i = 0; i < gamma.size(); ++i) gamma[i] = cplx(std::abs(nd(gen)), 0.0);
  profile::ScopedMacCounter counter;
  enh.forward_spectral(Y, &gamma);
  return counter.count();
}

inline double quantile(std::vector<double> v, double q) {
  require(!v.empty(), Errc::invalid_argument, "quantile of empty sample");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

// Wall-clock seconds per run divided by audio duration; one warm-up run first.
inline RtfStats measure_rtf(const Enhancer& enh, const Waveform& audio, std::size_t repeats = 20) {
  require(repeats >= 1, Errc::invalid_argument, "repeats must be at least 1");
  RtfStats s;
  s.audio_seconds = static_cast<double>(audio.n_samples()) / audio.sample_rate;
  s.threads = enh.config().threads;
  enh.enhance(audio);
  for (std::size_t i = 0; i < repeats; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    enh.enhance(audio);
    const auto t1 = std::chrono::steady_clock::now();
    s.samples.push_back(std::chrono::duration<double>(t1 - t0).count());
  }
  std::vector<double> rtf(s.samples.size());
  std::transform(s.samples.begin(), s.samples.end(), rtf.begin(), [&](double t) { return t / s.audio_seconds; });
  s.median = quantile(rtf, 0.5);
  s.q1 = quantile(rtf, 0.25);
  s.q3 = quantile(rtf, 0.75);
  return s;
}

inline ComplexityReport complexity_report(const RunConfig& cfg) {
  ComplexityReport r;
  r.frames_per_second = frames_per_second(cfg.analysis);
  r.rows = count_params(cfg.arch);
  const auto macs = count_macs(cfg.arch, r.frames_per_second, cfg.ablations);
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    r.rows[i].macs = macs[i].macs;
    r.n_params += r.rows[i].params;
    r.macs_per_second_audio += r.rows[i].macs;
  }
  return r;
}

inline nlohmann::json to_json(const ComplexityReport& r) {
  nlohmann::json j;
  j["n_params"] = r.n_params;
  j["macs_per_second_audio"] = r.macs_per_second_audio;
  j["frames_per_second"] = r.frames_per_second;
  j["breakdown"] = nlohmann::json::array();
  for (const auto& row : r.rows) j["breakdown"].push_back({{"module", row.module}, {"params", row.params}, {"macs", row.macs}});
  j["rtf"] = nlohmann::json::array();
  for (const auto& s : r.rtf)
    j["rtf"].push_back({{"threads", s.threads},
                        {"median", s.median},
                        {"q1", s.q1},
                        {"q3", s.q3},
                        {"audio_seconds", s.audio_seconds},
                        {"runs", s.samples.size()}});
  return j;
}

// Human-readable table: # Param. | MACs | RTF.
inline std::string complexity_table(const ComplexityReport& r) {
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof line, "%-20s %12s %14s\n", "module", "params", "MACs/s");
  os << line;
  for (const auto& row : r.rows) {
    std::snprintf(line, sizeof line, "%-20s %12llu %14llu\n", row.module.c_str(),
                  static_cast<unsigned long long>(row.params), static_cast<unsigned long long>(row.macs));
    os << line;
  }
  std::snprintf(line, sizeof line, "%-20s %11.1fK %13.2fG\n", "total", r.n_params / 1e3,
                r.macs_per_second_audio / 1e9);
  os << line;
  for (const auto& s : r.rtf) {
    std::snprintf(line, sizeof line, "RTF (%u thread%s): %.3f  [IQR %.3f .. %.3f]\n", s.threads,
                  s.threads == 1 ? "" : "s", s.median, s.q1, s.q3);
    os << line;
  }
  return os.str();
}

}  // namespace gafnet
