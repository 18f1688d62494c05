#pragma once

#include <array>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "gafnet/decoder_ratf.hpp"
#include "gafnet/losses_metrics.hpp"
#include "gafnet/stft.hpp"
#include "gafnet/wav.hpp"

namespace gafnet {

// One line of the metrics report. mbstoi / delta_pesq come from an external
// scorer and stay null without one; the columns are always emitted.
struct UtteranceMetrics {
  std::string id;
  double snr_in = 0.0;
  double snr_out = 0.0;
  double ild_err = 0.0;
  double ipd_err = 0.0;
  double stoi_surrogate = 0.0;
  std::optional<double> gate_mean, gate_min, gate_max;
  std::optional<double> mbstoi;
  std::optional<double> delta_pesq;
};

inline nlohmann::json to_json(const UtteranceMetrics& m) {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  return {{"id", m.id},
          {"MBSTOI", opt(m.mbstoi)},
          {"delta_PESQ", opt(m.delta_pesq)},
          {"L_ILD", m.ild_err},
          {"L_IPD", m.ipd_err},
          {"snr_in", m.snr_in},
          {"snr_out", m.snr_out},
          {"stoi_surrogate", m.stoi_surrogate},
          {"gate_mean", opt(m.gate_mean)},
          {"gate_min", opt(m.gate_min)},
          {"gate_max", opt(m.gate_max)}};
}

// The ILD/IPD errors are the masked cue losses on the analysis grid; the
// STOI column reports the surrogate loss (lower is better).
inline UtteranceMetrics utterance_metrics(const std::string& id, const Waveform& clean, const Waveform& noisy,
                                          const Waveform& enhanced, const AnalysisConfig& cfg,
                                          const CueLossOptions& cue = {}, const GateMap* gate = nullptr) {
  require(clean.n_samples() == noisy.n_samples() && clean.n_samples() == enhanced.n_samples(),
          Errc::shape_mismatch, id + ": clean, noisy and enhanced lengths differ");
  UtteranceMetrics m;
  m.id = id;
  m.snr_in = binaural_snr_db(noisy, clean);
  m.snr_out = binaural_snr_db(enhanced, clean);
  const Spectrogram S = stft(clean, cfg);
  const Spectrogram E = stft(enhanced, cfg);
  m.ild_err = ild_loss(S, E, cue);
  m.ipd_err = ipd_loss(S, E, cue);
  m.stoi_surrogate = stoi_surrogate(enhanced, clean);
  if (gate && !gate->values.empty()) {
    double sum = 0.0, lo = 1.0, hi = 0.0;
    for (double g : gate->values) {
      sum += g;
      lo = std::min(lo, g);
      hi = std::max(hi, g);
    }
    m.gate_mean = sum / static_cast<double>(gate->values.size());
    m.gate_min = lo;
    m.gate_max = hi;
  }
  return m;
}

// Runs `<command> <clean.wav> <noisy.wav> <enhanced.wav>` and reads one JSON
// object from its stdout with keys "mbstoi", and "pesq_enhanced" plus
// "pesq_noisy" (or "delta_pesq").
struct ExternalScore {
  std::optional<double> mbstoi;
  std::optional<double> delta_pesq;
};

inline std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') out += "'\\''";
    else out += c;
  }
  return out + "'";
}

inline ExternalScore run_external_scorer(const std::string& command, const std::filesystem::path& clean,
                                         const std::filesystem::path& noisy, const std::filesystem::path& enhanced) {
  const std::string cmd = command + " " + shell_quote(clean.string()) + " " + shell_quote(noisy.string()) + " " +
                          shell_quote(enhanced.string());
  std::unique_ptr<FILE, int (*)(FILE*)> pipe(popen(cmd.c_str(), "r"), pclose);
  if (!pipe) fail(Errc::io_error, "cannot start scorer: " + command);
  std::string text;
  std::array<char, 4096> buf{};
  while (std::size_t n = std::fread(buf.data(), 1, buf.size(), pipe.get())) text.append(buf.data(), n);
  const int status = pclose(pipe.release());
  if (status != 0) fail(Errc::io_error, "scorer exited with status " + std::to_string(status));
  ExternalScore s;
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.contains("mbstoi")) s.mbstoi = j["mbstoi"].get<double>();
    if (j.contains("delta_pesq")) {
      s.delta_pesq = j["delta_pesq"].get<double>();
    } else if (j.contains("pesq_enhanced") && j.contains("pesq_noisy")) {
      s.delta_pesq = j["pesq_enhanced"].get<double>() - j["pesq_noisy"].get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::format_error, std::string("scorer output is not JSON: ") + e.what());
  }
  return s;
}

}  // namespace gafnet
