#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "gafnet/error.hpp"
#include "gafnet/stft.hpp"
#include "gafnet/wav.hpp"

namespace gafnet {

using StereoIr = std::array<std::vector<double>, 2>;

// Azimuth-indexed stereo head-related impulse responses on the horizontal plane.
struct HrirSet {
  int sample_rate = 16000;
  std::map<double, StereoIr> entries;  // azimuth in degrees, [-180, 180)

  std::vector<double> azimuths() const {
    std::vector<double> out;
    for (const auto& [az, _] : entries) out.push_back(az);
    return out;
  }

  std::size_t taps() const { return entries.empty() ? 0 : entries.begin()->second[0].size(); }

  void validate() const {
    require(!entries.empty(), Errc::invalid_argument, "HRIR set is empty");
    const std::size_t n = taps();
    for (const auto& [az, ir] : entries) {
      require(az >= -180.0 && az < 180.0, Errc::invalid_argument,
              "HRIR azimuth " + std::to_string(az) + " outside [-180, 180)");
      require(ir[0].size() == n && ir[1].size() == n && n > 0, Errc::invalid_argument,
              "HRIRs must all have the same non-zero length");
    }
  }

  // Nearest measured azimuth within `tolerance_deg` (circular distance).
  const StereoIr& nearest(double azimuth, double tolerance_deg = 1.0) const {
    const StereoIr* best = nullptr;
    double best_dist = 1e300;
    for (const auto& [az, ir] : entries) {
      double d = std::fmod(std::abs(az - azimuth), 360.0);
      d = std::min(d, 360.0 - d);
      if (d < best_dist) {
        best_dist = d;
        best = &ir;
      }
    }
    if (!best || best_dist > tolerance_deg)
      fail(Errc::azimuth_unavailable, "no HRIR within " + std::to_string(tolerance_deg) + " deg of azimuth " +
                                          std::to_string(azimuth));
    return *best;
  }
};

// Spherical-head approximation: Woodworth ITD plus a broadband head-shadow ILD.
// Used for tests and demos where no measured set is available.
inline HrirSet spherical_head_hrirs(const std::vector<double>& azimuths_deg, int sample_rate = 16000,
                                    std::size_t taps = 64) {
  constexpr double head_radius_m = 0.0875;
  constexpr double speed_of_sound = 343.0;
  HrirSet set;
  set.sample_rate = sample_rate;
  const double base = 8.0;
  for (double az : azimuths_deg) {
    const double theta = az * std::numbers::pi / 180.0;
    // Positive azimuth = source to the right: left ear lags and is shadowed.
    const double lateral = std::sin(theta);
    const double itd_s = head_radius_m / speed_of_sound * (std::asin(std::clamp(lateral, -1.0, 1.0)) + lateral);
    const double delay_l = base + std::max(0.0, itd_s) * sample_rate;
    const double delay_r = base + std::max(0.0, -itd_s) * sample_rate;
    const double gain_l = std::pow(10.0, -3.0 * std::max(0.0, lateral) / 20.0);
    const double gain_r = std::pow(10.0, -3.0 * std::max(0.0, -lateral) / 20.0);
    StereoIr ir{std::vector<double>(taps, 0.0), std::vector<double>(taps, 0.0)};
    // Fractional delay by linear interpolation between neighbouring taps.
    auto place = [&](std::vector<double>& h, double delay, double gain) {
      const auto i = static_cast<std::size_t>(std::floor(delay));
      const double frac = delay - static_cast<double>(i);
      if (i < taps) h[i] += gain * (1.0 - frac);
      if (i + 1 < taps) h[i + 1] += gain * frac;
    };
    place(ir[0], delay_l, gain_l);
    place(ir[1], delay_r, gain_r);
    set.entries[az] = std::move(ir);
  }
  return set;
}

// Directory layout: one stereo WAV per azimuth plus manifest.json
// {"sample_rate": 16000, "entries": [{"azimuth": -90, "file": "-90.wav"}, ...]}.
inline HrirSet load_hrir_set(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  std::ifstream in(manifest_path);
  if (!in) fail(Errc::io_error, "cannot open " + manifest_path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::format_error, manifest_path.string() + ": " + e.what());
  }
  HrirSet set;
  set.sample_rate = j.value("sample_rate", 16000);
  for (const auto& entry : j.at("entries")) {
    const double az = entry.at("azimuth").get<double>();
    const auto file = dir / entry.at("file").get<std::string>();
    Waveform w = read_stereo_wav(file, set.sample_rate);
    set.entries[az] = {std::move(w.ears[0]), std::move(w.ears[1])};
  }
  set.validate();
  return set;
}

inline void save_hrir_set(const std::filesystem::path& dir, const HrirSet& set) {
  set.validate();
  std::filesystem::create_directories(dir);
  nlohmann::json j;
  j["sample_rate"] = set.sample_rate;
  j["entries"] = nlohmann::json::array();
  for (const auto& [az, ir] : set.entries) {
    const std::string name = std::to_string(static_cast<long>(std::lround(az))) + ".wav";
    write_stereo_wav(dir / name, Waveform(set.sample_rate, ir[0], ir[1]));
    j["entries"].push_back({{"azimuth", az}, {"file", name}});
  }
  std::ofstream(dir / "manifest.json") << j.dump(2) << '\n';
}

// Causal convolution truncated to x.size().
inline std::vector<double> convolve_truncated(std::span<const double> x, std::span<const double> h) {
  std::vector<double> y(x.size(), 0.0);
  for (std::size_t k = 0; k < h.size(); ++k) {
    const double hk = h[k];
    if (hk == 0.0) continue;
    for (std::size_t n = k; n < x.size(); ++n) y[n] += hk * x[n - k];
  }
  return y;
}

inline Waveform spatialize(std::span<const double> mono, const HrirSet& h, double azimuth,
                           double tolerance_deg = 1.0) {
  const StereoIr& ir = h.nearest(azimuth, tolerance_deg);
  return Waveform(h.sample_rate, convolve_truncated(mono, ir[0]), convolve_truncated(mono, ir[1]));
}

inline double total_power(const Waveform& w) {
  double p = 0.0;
  for (const auto& ch : w.ears)
    for (double v : ch) p += v * v;
  return p;
}

// Every azimuth of the set receives its own non-overlapping segment of the
// source; the spatialized segments are summed and normalized to unit RMS.
// The seed selects the start offset and the segment-to-azimuth assignment.
inline Waveform make_diffuse_noise(std::span<const double> source, const HrirSet& h, std::size_t n_samples,
                                   std::uint64_t seed) {
  h.validate();
  const std::size_t n_az = h.entries.size();
  require(n_samples > 0, Errc::invalid_argument, "noise duration must be positive");
  require(source.size() >= n_az * n_samples, Errc::noise_source_too_short,
          "need " + std::to_string(n_az * n_samples) + " source samples for " + std::to_string(n_az) +
              " azimuths, have " + std::to_string(source.size()));
  std::mt19937_64 gen(seed);
  const std::size_t slack = source.size() - n_az * n_samples;
  const std::size_t offset = slack == 0 ? 0 : std::uniform_int_distribution<std::size_t>(0, slack)(gen);
  std::vector<std::size_t> order(n_az);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), gen);

  Waveform out(h.sample_rate, n_samples);
  std::size_t i = 0;
  for (const auto& [az, ir] : h.entries) {
    const auto seg = source.subspan(offset + order[i++] * n_samples, n_samples);
    for (std::size_t e = 0; e < 2; ++e) {
      const auto y = convolve_truncated(seg, ir[e]);
      for (std::size_t n = 0; n < n_samples; ++n) out.ears[e][n] += y[n];
    }
  }
  const double rms = std::sqrt(total_power(out) / static_cast<double>(2 * n_samples));
  require(rms > 0.0, Errc::degenerate_mix, "diffuse noise is silent");
  for (auto& ch : out.ears)
    for (double& v : ch) v /= rms;
  return out;
}

// 10 log10(P_speech / P_noise) with power summed over both ears.
inline double measure_snr_db(const Waveform& speech, const Waveform& noise) {
  return 10.0 * std::log10(total_power(speech) / total_power(noise));
}

struct MixResult {
  Waveform mixture;
  Waveform scaled_noise;
  double noise_scale = 0.0;
  double measured_snr_db = 0.0;
};

inline MixResult mix_at_snr(const Waveform& speech, const Waveform& noise, double snr_db) {
  require(speech.n_samples() == noise.n_samples(), Errc::shape_mismatch, "speech and noise differ in length");
  const double ps = total_power(speech), pn = total_power(noise);
  require(ps > 0.0, Errc::degenerate_mix, "speech is silent");
  require(pn > 0.0, Errc::degenerate_mix, "noise is silent");
  MixResult r;
  r.noise_scale = std::sqrt(ps / (pn * std::pow(10.0, snr_db / 10.0)));
  r.scaled_noise = noise;
  r.mixture = speech;
  for (std::size_t e = 0; e < 2; ++e)
    for (std::size_t n = 0; n < speech.n_samples(); ++n) {
      r.scaled_noise.ears[e][n] *= r.noise_scale;
      r.mixture.ears[e][n] += r.scaled_noise.ears[e][n];
    }
  r.measured_snr_db = measure_snr_db(speech, r.scaled_noise);
  return r;
}

// Fixed evaluation grid: -6 dB to 15 dB in 3 dB steps.
inline std::vector<double> test_snr_grid() { return {-6, -3, 0, 3, 6, 9, 12, 15}; }

struct MixSpec {
  std::string id;
  std::filesystem::path speech;
  std::filesystem::path noise;
  std::filesystem::path hrir_dir;
  std::optional<double> azimuth;  // drawn from [-90, 90] when absent
  std::optional<double> snr_db;   // drawn from [-7, 16] when absent
  std::string noise_kind;
  std::uint64_t seed = 0;
  double duration_s = 2.0;
};

inline MixSpec mix_spec_from_json(const nlohmann::json& j) {
  MixSpec s;
  s.id = j.at("id").get<std::string>();
  s.speech = j.at("speech").get<std::string>();
  s.noise = j.at("noise").get<std::string>();
  s.hrir_dir = j.at("hrir_dir").get<std::string>();
  if (j.contains("azimuth") && !j["azimuth"].is_null()) s.azimuth = j["azimuth"].get<double>();
  if (j.contains("snr_db") && !j["snr_db"].is_null()) s.snr_db = j["snr_db"].get<double>();
  s.noise_kind = j.value("noise_kind", std::string{});
  s.seed = j.value("seed", std::uint64_t{0});
  s.duration_s = j.value("duration_s", 2.0);
  if (s.azimuth)
    require(*s.azimuth >= -90.0 && *s.azimuth <= 90.0, Errc::invalid_argument,
            s.id + ": azimuth must lie in [-90, 90]");
  require(s.duration_s > 0.0, Errc::invalid_argument, s.id + ": duration must be positive");
  return s;
}

inline nlohmann::json mix_spec_to_json(const MixSpec& s) {
  nlohmann::json j{{"id", s.id},
                   {"speech", s.speech.string()},
                   {"noise", s.noise.string()},
                   {"hrir_dir", s.hrir_dir.string()},
                   {"noise_kind", s.noise_kind},
                   {"seed", s.seed},
                   {"duration_s", s.duration_s}};
  j["azimuth"] = s.azimuth ? nlohmann::json(*s.azimuth) : nlohmann::json(nullptr);
  j["snr_db"] = s.snr_db ? nlohmann::json(*s.snr_db) : nlohmann::json(nullptr);
  return j;
}

// Line-delimited JSON, one MixSpec per non-empty line.
inline std::vector<MixSpec> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::io_error, "cannot open manifest " + path.string());
  std::vector<MixSpec> specs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      specs.push_back(mix_spec_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      fail(Errc::format_error, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return specs;
}

inline void write_manifest(const std::filesystem::path& path, const std::vector<MixSpec>& specs) {
  std::ofstream out(path);
  if (!out) fail(Errc::io_error, "cannot create manifest " + path.string());
  for (const auto& s : specs) out << mix_spec_to_json(s).dump() << '\n';
}

// One entry per grid SNR for every base spec, ids suffixed with the SNR.
inline std::vector<MixSpec> expand_snr_grid(const std::vector<MixSpec>& base,
                                            const std::vector<double>& grid = test_snr_grid()) {
  std::vector<MixSpec> out;
  for (const auto& s : base)
    for (double snr : grid) {
      MixSpec e = s;
      e.snr_db = snr;
      e.id = s.id + "_snr" + std::to_string(static_cast<int>(std::lround(snr)));
      out.push_back(std::move(e));
    }
  return out;
}

struct SynthesizedItem {
  Waveform clean;
  Waveform noise;
  Waveform mixture;
  double azimuth = 0.0;
  double snr_db = 0.0;
  double measured_snr_db = 0.0;
  double noise_scale = 0.0;
};

// Resolves drawn parameters from the item seed and builds clean/noise/mixture.
inline SynthesizedItem synthesize_item(const MixSpec& spec, std::span<const double> speech,
                                       std::span<const double> noise_source, const HrirSet& hrirs) {
  const auto n = static_cast<std::size_t>(std::lround(spec.duration_s * hrirs.sample_rate));
  std::mt19937_64 gen(spec.seed);
  SynthesizedItem item;
  if (spec.azimuth) {
    item.azimuth = *spec.azimuth;
  } else {
    std::vector<double> frontal;
    for (double az : hrirs.azimuths())
      if (az >= -90.0 && az <= 90.0) frontal.push_back(az);
    require(!frontal.empty(), Errc::azimuth_unavailable, "HRIR set has no azimuth in [-90, 90]");
    item.azimuth = frontal[std::uniform_int_distribution<std::size_t>(0, frontal.size() - 1)(gen)];
  }
  item.snr_db = spec.snr_db ? *spec.snr_db : std::uniform_real_distribution<double>(-7.0, 16.0)(gen);

  std::vector<double> mono(n, 0.0);
  std::copy_n(speech.begin(), std::min(n, speech.size()), mono.begin());
  item.clean = spatialize(mono, hrirs, item.azimuth);
  const std::uint64_t noise_seed = std::uniform_int_distribution<std::uint64_t>()(gen);
  const Waveform diffuse = make_diffuse_noise(noise_source, hrirs, n, noise_seed);
  MixResult mix = mix_at_snr(item.clean, diffuse, item.snr_db);
  item.noise = std::move(mix.scaled_noise);
  item.mixture = std::move(mix.mixture);
  item.measured_snr_db = mix.measured_snr_db;
  item.noise_scale = mix.noise_scale;
  return item;
}

struct DatasetFailure {
  std::string id;
  std::string message;
};

struct DatasetSummary {
  std::size_t n_items = 0;
  std::size_t n_ok = 0;
  std::vector<DatasetFailure> failures;
  std::vector<nlohmann::json> records;  // manifest order, successful items only
};

// Writes <id>_clean.wav, <id>_noise.wav, <id>_mix.wav (stereo float32) and
// metadata.jsonl to out_dir. Per-item errors are collected, not thrown.
inline DatasetSummary generate_dataset(const std::vector<MixSpec>& specs, const std::filesystem::path& out_dir,
                                       unsigned threads = 1) {
  std::filesystem::create_directories(out_dir);
  DatasetSummary summary;
  summary.n_items = specs.size();
  std::vector<std::optional<nlohmann::json>> records(specs.size());
  std::vector<std::optional<std::string>> errors(specs.size());

  auto process = [&](std::size_t i) {
    const MixSpec& spec = specs[i];
    try {
      const HrirSet hrirs = load_hrir_set(spec.hrir_dir);
      const auto speech = read_mono_wav(spec.speech, hrirs.sample_rate);
      const auto noise = read_mono_wav(spec.noise, hrirs.sample_rate);
      const SynthesizedItem item = synthesize_item(spec, speech, noise, hrirs);
      const std::string clean_name = spec.id + "_clean.wav";
      const std::string noise_name = spec.id + "_noise.wav";
      const std::string mix_name = spec.id + "_mix.wav";
      write_stereo_wav(out_dir / clean_name, item.clean);
      write_stereo_wav(out_dir / noise_name, item.noise);
      write_stereo_wav(out_dir / mix_name, item.mixture);
      nlohmann::json rec = mix_spec_to_json(spec);
      rec["azimuth"] = item.azimuth;
      rec["snr_db"] = item.snr_db;
      rec["measured_snr_db"] = item.measured_snr_db;
      rec["noise_scale"] = item.noise_scale;
      rec["clean_wav"] = clean_name;
      rec["noise_wav"] = noise_name;
      rec["mix_wav"] = mix_name;
      records[i] = std::move(rec);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  };

  const unsigned n_threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(specs.size())));
  if (n_threads <= 1) {
    for (std::size_t i = 0; i < specs.size(); ++i) process(i);
  } else {
    std::vector<std::jthread> workers;
    for (unsigned w = 0; w < n_threads; ++w)
      workers.emplace_back([&, w] {
        for (std::size_t i = w; i < specs.size(); i += n_threads) process(i);
      });
  }

  std::ofstream meta(out_dir / "metadata.jsonl", std::ios::trunc);
  for (std::size_t i = 0; i < specs.size(); ++i) {
    if (records[i]) {
      meta << records[i]->dump() << '\n';
      summary.records.push_back(std::move(*records[i]));
      ++summary.n_ok;
    } else {
      summary.failures.push_back({specs[i].id, errors[i].value_or("unknown error")});
    }
  }
  return summary;
}

// Speech-like test signal: a harmonic voice with a gliding pitch, 4 Hz
// syllabic envelope and short pauses. Peak amplitude about 0.5.
inline std::vector<double> synthetic_speech(std::size_t n, int sample_rate, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double f0 = 100.0 + 120.0 * u(gen);
  const double glide = 0.2 * (u(gen) - 0.5);
  const double syll = 3.0 + 2.0 * u(gen);
  std::vector<double> amps(24), phases(24);
  for (std::size_t h = 0; h < amps.size(); ++h) {
    amps[h] = 1.0 / static_cast<double>(h + 1) * (0.5 + u(gen));
    phases[h] = 2.0 * std::numbers::pi * u(gen);
  }
  std::normal_distribution<double> nd;
  std::vector<double> x(n);
  double phase = 0.0;
  const double fs = sample_rate;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / fs;
    const double f = f0 * (1.0 + glide * std::sin(2.0 * std::numbers::pi * 0.7 * t));
    phase += 2.0 * std::numbers::pi * f / fs;
    double v = 0.0;
    for (std::size_t h = 0; h < amps.size(); ++h) {
      if (f * static_cast<double>(h + 1) >= 0.45 * fs) break;
      v += amps[h] * std::sin(static_cast<double>(h + 1) * phase + phases[h]);
    }
    const double env = std::max(0.0, std::sin(std::numbers::pi * syll * t));
    x[i] = 0.12 * env * env * v + 0.002 * nd(gen);
  }
  return x;
}

inline std::vector<double> white_noise(std::size_t n, std::uint64_t seed, double stddev = 0.1) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> nd(0.0, stddev);
  std::vector<double> x(n);
  for (double& v : x) v = nd(gen);
  return x;
}

// Writes synthetic sources for trying the pipeline without a corpus:
// speech_<i>.wav, noise.wav, a spherical-head HRIR set every 15 degrees in
// hrir/ and manifest.jsonl with `n_items` specs. Returns the manifest path.
inline std::filesystem::path write_demo_corpus(const std::filesystem::path& dir, std::size_t n_items,
                                               std::uint64_t seed, double duration_s = 2.0,
                                               int sample_rate = 16000) {
  std::filesystem::create_directories(dir);
  std::vector<double> grid;
  for (int az = -180; az < 180; az += 15) grid.push_back(az);
  save_hrir_set(dir / "hrir", spherical_head_hrirs(grid, sample_rate));
  const auto n = static_cast<std::size_t>(std::lround(duration_s * sample_rate));
  auto write_mono = [&](const std::filesystem::path& path, std::vector<double> x) {
    WavData w;
    w.sample_rate = sample_rate;
    w.format = SampleFormat::float32;
    w.channels = {std::move(x)};
    write_wav(path, w);
  };
  write_mono(dir / "noise.wav", white_noise(n * (grid.size() + 1), seed ^ 0x9e3779b97f4a7c15ull));
  std::vector<MixSpec> specs;
  for (std::size_t i = 0; i < n_items; ++i) {
    const std::string name = "speech_" + std::to_string(i) + ".wav";
    write_mono(dir / name, synthetic_speech(n, sample_rate, seed + 1000 + i));
    MixSpec s;
    s.id = "item" + std::to_string(i);
    s.speech = dir / name;
    s.noise = dir / "noise.wav";
    s.hrir_dir = dir / "hrir";
    s.noise_kind = "white";
    s.seed = seed + i;
    s.duration_s = duration_s;
    specs.push_back(std::move(s));
  }
  const auto manifest = dir / "manifest.jsonl";
  write_manifest(manifest, specs);
  return manifest;
}

}  // namespace gafnet
