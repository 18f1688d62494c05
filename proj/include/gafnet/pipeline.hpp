#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>

#include "gafnet/decoder_ratf.hpp"
#include "gafnet/encoder_fusion.hpp"
#include "gafnet/gafm.hpp"
#include "gafnet/gammatone.hpp"
#include "gafnet/model.hpp"
#include "gafnet/model_io.hpp"
#include "gafnet/stft.hpp"

namespace gafnet {

// Stage names accepted by dumps, in pipeline order.
inline const std::vector<std::string>& stage_names() {
  static const std::vector<std::string> names{
      "noisy_stft", "gammatone", "z_stft",     "z_gamma",     "z_attended", "z_recalibrated",
      "z_gafm",     "ratf_speech", "ratf_noise", "s_hat",     "gate",       "s_final"};
  return names;
}

struct EnhanceOptions {
  std::optional<double> forced_gate;  // debug hook: g fixed to this value at every frequency
  bool record_stages = false;
};

struct SpectralResult {
  Spectrogram estimate;  // S_hat, before gating
  Spectrogram final;     // after the gate
  GateMap gate;
  RatfPair ratf;
  std::map<std::string, ComplexTensor> stages;  // filled when recording
};

struct EnhanceResult {
  Waveform output;
  SpectralResult spectral;
  std::size_t pad_front = 0;
  std::size_t pad_back = 0;
};

// Gate as a (batch, frequency) tensor with zero imaginary part.
inline ComplexTensor gate_tensor(const GateMap& g) {
  ComplexTensor x({Axis::batch, Axis::frequency}, {g.batch, g.freq});
  for (std::size_t i = 0; i < g.values.size(); ++i) x[i] = g.values[i];
  return x;
}

inline GateMap gate_from_tensor(const ComplexTensor& x) {
  require(x.rank() == 2, Errc::shape_mismatch, "gate tensor must be (batch, frequency)");
  GateMap g(x.dim(0), x.dim(1));
  for (std::size_t i = 0; i < x.size(); ++i) g.values[i] = x[i].real();
  return g;
}

// Runs `fn`, prefixing any failure with the stage name.
template <typename Fn>
auto run_stage(const char* stage, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const FormatError&) {
    throw;
  } catch (const Error& e) {
    throw Error(e.code(), std::string("stage ") + stage + ": " + e.what());
  }
}

// One model plus its frontend state. Read-only after construction, so a
// single instance may serve several threads.
class Enhancer {
 public:
  Enhancer(std::shared_ptr<const ModelParams> model, RunConfig cfg)
      : model_(std::move(model)), cfg_(std::move(cfg)) {
    cfg_.validate();
    require(model_ != nullptr, Errc::invalid_argument, "no model");
    require(model_->arch == cfg_.arch, Errc::config_mismatch,
            "model architecture " + model_->arch.canonical() + " differs from configuration " +
                cfg_.arch.canonical());
    if (!cfg_.ablations.no_gammatone)
      bank_ = std::make_shared<GammatoneBank>(build_gammatone_bank(cfg_.analysis, cfg_.arch.n_gammatone,
                                                                   cfg_.gamma_f_lo, cfg_.gamma_f_hi,
                                                                   cfg_.gamma_taps));
  }

  Enhancer(const ModelParams& model, RunConfig cfg)
      : Enhancer(std::make_shared<const ModelParams>(model), std::move(cfg)) {}

  const RunConfig& config() const { return cfg_; }
  const ModelParams& model() const { return *model_; }
  const GammatoneBank* bank() const { return bank_.get(); }

  // Everything between the analysis transforms and the synthesis transform.
  // `gamma_features` may be null when the gammatone path is ablated.
  SpectralResult forward_spectral(const Spectrogram& Y, const ComplexTensor* gamma_features,
                                  const EnhanceOptions& opt = {}) const {
    const ModelParams& m = *model_;
    const Ablations& ab = cfg_.ablations;
    SpectralResult r;
    auto record = [&](const char* name, const ComplexTensor& x) {
      if (opt.record_stages) r.stages.emplace(name, x);
    };
    record("noisy_stft", Y.bins);

    ComplexTensor z_stft = run_stage("encode_stft", [&] { return encode_stft(Y, m.encoder); });
    record("z_stft", z_stft);

    ComplexTensor z_att;
    if (ab.no_gammatone) {
      z_att = run_stage("fuse", [&] { return fuse_without_gamma(z_stft, m.encoder); });
    } else {
      require(gamma_features != nullptr, Errc::invalid_argument, "gammatone features missing");
      record("gammatone", *gamma_features);
      ComplexTensor z_gamma = run_stage("encode_gamma", [&] { return encode_gamma(*gamma_features, m.encoder); });
      record("z_gamma", z_gamma);
      z_att = run_stage("fuse", [&] { return fuse(z_stft, z_gamma, m.encoder); });
    }
    record("z_attended", z_att);

    ComplexTensor z = run_stage("recalibrate", [&] { return recalibrate(z_att, m.encoder.se); });
    record("z_recalibrated", z);

    if (!ab.no_gafm) {
      z = run_stage("gafm", [&] {
        const auto basis = basis_cache_.get(z.dim(3), m.arch.n_coeffs);
        GafmOptions go;
        go.threads = cfg_.threads;
        ComplexTensor out = z;
        for (const auto& layer : m.gafm) out = gafm_block(out, layer, *basis, go);
        return out;
      });
    }
    record("z_gafm", z);

    r.ratf = run_stage("decode_heads", [&] { return decode_heads(z, m.decoder); });
    record("ratf_speech", r.ratf.speech);
    record("ratf_noise", r.ratf.noise);

    r.estimate = run_stage("ratf_solve",
                           [&] { return ratf_solve(Y, r.ratf, m.decoder.eps, cfg_.ratf_denominator); });
    record("s_hat", r.estimate.bins);

    if (opt.forced_gate) {
      require(*opt.forced_gate >= 0.0 && *opt.forced_gate <= 1.0, Errc::invalid_argument,
              "forced gate must lie in [0, 1]");
      r.gate = GateMap(1, Y.n_freq(), *opt.forced_gate);
    } else if (ab.no_drg) {
      r.gate = GateMap(1, Y.n_freq(), 1.0);
    } else if (ab.global_drg) {
      r.gate = run_stage("drg", [&] { return global_gate(m.decoder, 1); });
    } else {
      r.gate = run_stage("drg", [&] { return drg_gate(z, m.decoder); });
    }
    record("gate", gate_tensor(r.gate));

    if (ab.no_drg && !opt.forced_gate) {
      r.final = r.estimate;
    } else {
      r.final = run_stage("blend", [&] { return blend(r.estimate, Y, r.gate); });
    }
    record("s_final", r.final.bins);

    for (double g : r.gate.values)
      require(g >= 0.0 && g <= 1.0, Errc::invariant_violation, "gate value outside [0, 1]");
    require(r.final.bins.all_finite(), Errc::invariant_violation, "non-finite enhanced spectrogram");
    return r;
  }

  // Whole-utterance enhancement. The input is zero-padded so every original
  // sample lies in the fully overlapped region, then cropped back.
  EnhanceResult enhance(const Waveform& input, const EnhanceOptions& opt = {}) const {
    input.validate();
    require(input.sample_rate == cfg_.analysis.sample_rate, Errc::unsupported_format,
            "input rate " + std::to_string(input.sample_rate) + " Hz, model expects " +
                std::to_string(cfg_.analysis.sample_rate) + " Hz");
    const std::size_t n = input.n_samples();
    require(n > 0, Errc::input_too_short, "empty input");
    const auto N = static_cast<std::size_t>(cfg_.analysis.fft_size);
    const auto hop = static_cast<std::size_t>(cfg_.analysis.hop);

    EnhanceResult out;
    out.pad_front = N - hop;
    out.pad_back = N - hop + (hop - n % hop) % hop;
    Waveform padded(input.sample_rate, out.pad_front + n + out.pad_back);
    for (std::size_t e = 0; e < 2; ++e)
      std::copy(input.ears[e].begin(), input.ears[e].end(),
                padded.ears[e].begin() + static_cast<std::ptrdiff_t>(out.pad_front));

    const Spectrogram Y = run_stage("stft", [&] { return stft(padded, cfg_.analysis); });
    std::optional<ComplexTensor> gamma;
    if (!cfg_.ablations.no_gammatone)
      gamma = run_stage("gammatone", [&] { return gammatone_frames(padded, *bank_, cfg_.analysis); });

    out.spectral = forward_spectral(Y, gamma ? &*gamma : nullptr, opt);
    const Waveform full = run_stage("istft", [&] { return istft(out.spectral.final); });
    out.output = Waveform(input.sample_rate, n);
    for (std::size_t e = 0; e < 2; ++e)
      std::copy_n(full.ears[e].begin() + static_cast<std::ptrdiff_t>(out.pad_front), n, out.output.ears[e].begin());
    for (const auto& ch : out.output.ears)
      for (double v : ch) require(std::isfinite(v), Errc::invariant_violation, "non-finite output sample");
    return out;
  }

 private:
  std::shared_ptr<const ModelParams> model_;
  RunConfig cfg_;
  std::shared_ptr<const GammatoneBank> bank_;
  FourierBasisCache basis_cache_;
};

// Writes the requested stages (or all recorded ones when `which` is empty) as f64 tensors.
inline void write_stage_dump(const std::filesystem::path& path, const SpectralResult& r, std::uint64_t fingerprint,
                             const std::vector<std::string>& which = {}) {
  TensorFile file;
  file.fingerprint = fingerprint;
  if (which.empty()) {
    for (const auto& name : stage_names())
      if (auto it = r.stages.find(name); it != r.stages.end()) file.records.push_back(record_from_tensor(name, it->second));
  } else {
    for (const auto& name : which) {
      auto it = r.stages.find(name);
      require(it != r.stages.end(), Errc::invalid_argument, "stage '" + name + "' was not recorded");
      file.records.push_back(record_from_tensor(name, it->second));
    }
  }
  write_tensor_file(path, file);
}

}  // namespace gafnet
