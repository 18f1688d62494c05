#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <type_traits>
#include <vector>

#include <nlohmann/json.hpp>

#include "gafnet/complex_nn.hpp"
#include "gafnet/decoder_ratf.hpp"
#include "gafnet/encoder_fusion.hpp"
#include "gafnet/gafm.hpp"
#include "gafnet/gammatone.hpp"
#include "gafnet/losses_metrics.hpp"
#include "gafnet/stft.hpp"

namespace gafnet {

// Shape-determining hyperparameters. Defaults are the canonical profile.
struct ArchConfig {
  std::size_t channels = 78;        // C
  std::size_t encoder_layers = 2;   // M, per encoder branch
  std::size_t decoder_layers = 2;   // N, per RATF head
  std::size_t gafm_layers = 1;
  std::size_t n_coeffs = 9;         // K, odd
  std::size_t mlp_hidden = 78;      // H
  std::size_t kernel_1d = 5;
  std::size_t kernel_2d_f = 3;
  std::size_t kernel_2d_t = 3;
  std::size_t se_reduction = 2;
  std::size_t n_freq = 129;         // fft_size / 2 + 1
  std::size_t n_gammatone = 64;

  void validate() const {
    require(channels > 0 && mlp_hidden > 0, Errc::invalid_argument, "channel widths must be positive");
    require(n_coeffs % 2 == 1, Errc::invalid_argument, "n_coeffs must be odd");
    require(kernel_1d % 2 == 1 && kernel_2d_f % 2 == 1 && kernel_2d_t % 2 == 1, Errc::invalid_argument,
            "kernel lengths must be odd");
    require(se_reduction > 0 && channels % se_reduction == 0, Errc::invalid_argument,
            "se_reduction must divide channels");
    require(n_freq > 0 && n_gammatone > 0, Errc::invalid_argument, "feature sizes must be positive");
  }

  std::string canonical() const {
    return "C=" + std::to_string(channels) + ";M=" + std::to_string(encoder_layers) +
           ";N=" + std::to_string(decoder_layers) + ";L=" + std::to_string(gafm_layers) +
           ";K=" + std::to_string(n_coeffs) + ";H=" + std::to_string(mlp_hidden) +
           ";k1=" + std::to_string(kernel_1d) + ";k2=" + std::to_string(kernel_2d_f) + "x" +
           std::to_string(kernel_2d_t) + ";r=" + std::to_string(se_reduction) + ";F=" + std::to_string(n_freq) +
           ";G=" + std::to_string(n_gammatone);
  }

  // FNV-1a over the canonical string.
  std::uint64_t fingerprint() const {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : canonical()) {
      h ^= c;
      h *= 0x100000001b3ull;
    }
    return h;
  }

  bool operator==(const ArchConfig&) const = default;
};

struct Ablations {
  bool no_gammatone = false;
  bool no_gafm = false;
  bool no_drg = false;      // output S_hat directly; takes precedence over global_drg
  bool global_drg = false;  // input-independent per-frequency gate

  // Accepts "no_gammatone", "no_gafm", "no_drg", "global_drg" (dashes allowed).
  void set(std::string flag) {
    std::replace(flag.begin(), flag.end(), '-', '_');
    if (flag == "no_gammatone") no_gammatone = true;
    else if (flag == "no_gafm") no_gafm = true;
    else if (flag == "no_drg") no_drg = true;
    else if (flag == "global_drg") global_drg = true;
    else fail(Errc::invalid_argument, "unknown ablation '" + flag + "'");
  }

  bool operator==(const Ablations&) const = default;
};

struct RunConfig {
  AnalysisConfig analysis;
  ArchConfig arch;
  double gamma_f_lo = default_gammatone_f_lo;
  double gamma_f_hi = default_gammatone_f_hi;
  std::size_t gamma_taps = default_gammatone_taps;
  double tau = 1.0;  // initial value of the learnable GAFM temperature
  double eps = 1e-8;
  double cln_eps = 1e-5;
  double dropout = 0.0;
  LossWeights loss;
  double cue_floor_db = default_cue_floor_db;
  bool masked_cues = true;
  RatfDenominator ratf_denominator = RatfDenominator::squared_magnitude;
  Ablations ablations;
  unsigned threads = 1;

  void validate() const {
    analysis.validate();
    arch.validate();
    require(arch.n_freq == analysis.n_freq_bins(), Errc::invalid_argument,
            "architecture n_freq differs from fft_size / 2 + 1");
    require(gamma_f_lo > 0.0 && gamma_f_lo < gamma_f_hi && gamma_f_hi < analysis.sample_rate / 2.0,
            Errc::invalid_band, "gammatone band must satisfy 0 < f_lo < f_hi < fs/2");
    require(tau > 0.0, Errc::invalid_argument, "tau must be positive");
    require(eps >= 0.0 && cln_eps > 0.0, Errc::invalid_argument, "eps values must be non-negative");
    require(dropout >= 0.0 && dropout < 1.0, Errc::invalid_argument, "dropout must lie in [0, 1)");
    require(threads >= 1, Errc::invalid_argument, "threads must be at least 1");
    loss.validate();
  }
};

inline void to_json(nlohmann::json& j, const RunConfig& c) {
  j = nlohmann::json{
      {"analysis", {{"sample_rate", c.analysis.sample_rate}, {"fft_size", c.analysis.fft_size}, {"hop", c.analysis.hop}}},
      {"architecture",
       {{"channels", c.arch.channels},
        {"encoder_layers", c.arch.encoder_layers},
        {"decoder_layers", c.arch.decoder_layers},
        {"gafm_layers", c.arch.gafm_layers},
        {"n_coeffs", c.arch.n_coeffs},
        {"mlp_hidden", c.arch.mlp_hidden},
        {"kernel_1d", c.arch.kernel_1d},
        {"kernel_2d", {c.arch.kernel_2d_f, c.arch.kernel_2d_t}},
        {"se_reduction", c.arch.se_reduction},
        {"gammatone_channels", c.arch.n_gammatone}}},
      {"gammatone", {{"f_lo", c.gamma_f_lo}, {"f_hi", c.gamma_f_hi}, {"taps", c.gamma_taps}}},
      {"tau", c.tau},
      {"eps", c.eps},
      {"cln_eps", c.cln_eps},
      {"dropout", c.dropout},
      {"loss_weights",
       {{"alpha", c.loss.alpha},
        {"beta", c.loss.beta},
        {"gamma", c.loss.gamma},
        {"kappa", c.loss.kappa},
        {"lambda_s", c.loss.lambda_s},
        {"lambda_e", c.loss.lambda_e},
        {"lambda_tv", c.loss.lambda_tv}}},
      {"cue_floor_db", c.cue_floor_db},
      {"masked_cues", c.masked_cues},
      {"ratf_denominator",
       c.ratf_denominator == RatfDenominator::squared_magnitude ? "squared_magnitude" : "complex_square"},
      {"ablations",
       {{"no_gammatone", c.ablations.no_gammatone},
        {"no_gafm", c.ablations.no_gafm},
        {"no_drg", c.ablations.no_drg},
        {"global_drg", c.ablations.global_drg}}},
      {"threads", c.threads}};
}

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& j, std::initializer_list<const char*> known,
                                const std::string& where) {
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) fail(Errc::format_error, "unknown config key '" + where + key + "'");
  }
}

template <typename T>
void read_opt(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace detail

// Missing keys keep their defaults; unknown keys are rejected.
inline void from_json(const nlohmann::json& j, RunConfig& c) {
  using detail::read_opt;
  detail::reject_unknown_keys(j,
                              {"analysis", "architecture", "gammatone", "tau", "eps", "cln_eps", "dropout",
                               "loss_weights", "cue_floor_db", "masked_cues", "ratf_denominator", "ablations",
                               "threads"},
                              "");
  if (j.contains("analysis")) {
    const auto& a = j["analysis"];
    detail::reject_unknown_keys(a, {"sample_rate", "fft_size", "hop"}, "analysis.");
    read_opt(a, "sample_rate", c.analysis.sample_rate);
    read_opt(a, "fft_size", c.analysis.fft_size);
    read_opt(a, "hop", c.analysis.hop);
    c.arch.n_freq = c.analysis.n_freq_bins();
  }
  if (j.contains("architecture")) {
    const auto& a = j["architecture"];
    detail::reject_unknown_keys(a,
                                {"channels", "encoder_layers", "decoder_layers", "gafm_layers", "n_coeffs",
                                 "mlp_hidden", "kernel_1d", "kernel_2d", "se_reduction", "gammatone_channels"},
                                "architecture.");
    read_opt(a, "channels", c.arch.channels);
    read_opt(a, "encoder_layers", c.arch.encoder_layers);
    read_opt(a, "decoder_layers", c.arch.decoder_layers);
    read_opt(a, "gafm_layers", c.arch.gafm_layers);
    read_opt(a, "n_coeffs", c.arch.n_coeffs);
    read_opt(a, "mlp_hidden", c.arch.mlp_hidden);
    read_opt(a, "kernel_1d", c.arch.kernel_1d);
    if (a.contains("kernel_2d")) {
      const auto k = a["kernel_2d"].get<std::vector<std::size_t>>();
      require(k.size() == 2, Errc::format_error, "architecture.kernel_2d must be [kf, kt]");
      c.arch.kernel_2d_f = k[0];
      c.arch.kernel_2d_t = k[1];
    }
    read_opt(a, "se_reduction", c.arch.se_reduction);
    read_opt(a, "gammatone_channels", c.arch.n_gammatone);
  }
  if (j.contains("gammatone")) {
    const auto& g = j["gammatone"];
    detail::reject_unknown_keys(g, {"f_lo", "f_hi", "taps"}, "gammatone.");
    read_opt(g, "f_lo", c.gamma_f_lo);
    read_opt(g, "f_hi", c.gamma_f_hi);
    read_opt(g, "taps", c.gamma_taps);
  }
  read_opt(j, "tau", c.tau);
  read_opt(j, "eps", c.eps);
  read_opt(j, "cln_eps", c.cln_eps);
  read_opt(j, "dropout", c.dropout);
  if (j.contains("loss_weights")) {
    const auto& w = j["loss_weights"];
    detail::reject_unknown_keys(w, {"alpha", "beta", "gamma", "kappa", "lambda_s", "lambda_e", "lambda_tv"},
                                "loss_weights.");
    read_opt(w, "alpha", c.loss.alpha);
    read_opt(w, "beta", c.loss.beta);
    read_opt(w, "gamma", c.loss.gamma);
    read_opt(w, "kappa", c.loss.kappa);
    read_opt(w, "lambda_s", c.loss.lambda_s);
    read_opt(w, "lambda_e", c.loss.lambda_e);
    read_opt(w, "lambda_tv", c.loss.lambda_tv);
  }
  read_opt(j, "cue_floor_db", c.cue_floor_db);
  read_opt(j, "masked_cues", c.masked_cues);
  if (j.contains("ratf_denominator")) {
    const auto s = j["ratf_denominator"].get<std::string>();
    if (s == "squared_magnitude") c.ratf_denominator = RatfDenominator::squared_magnitude;
    else if (s == "complex_square") c.ratf_denominator = RatfDenominator::complex_square;
    else fail(Errc::format_error, "ratf_denominator must be squared_magnitude or complex_square");
  }
  if (j.contains("ablations")) {
    const auto& a = j["ablations"];
    detail::reject_unknown_keys(a, {"no_gammatone", "no_gafm", "no_drg", "global_drg"}, "ablations.");
    read_opt(a, "no_gammatone", c.ablations.no_gammatone);
    read_opt(a, "no_gafm", c.ablations.no_gafm);
    read_opt(a, "no_drg", c.ablations.no_drg);
    read_opt(a, "global_drg", c.ablations.global_drg);
  }
  read_opt(j, "threads", c.threads);
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::io_error, "cannot open config " + path.string());
  RunConfig c;
  try {
    c = nlohmann::json::parse(in).get<RunConfig>();
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::format_error, path.string() + ": " + e.what());
  }
  c.validate();
  return c;
}

struct ModelParams {
  ArchConfig arch;
  EncoderParams encoder;
  std::vector<GAFMParams> gafm;
  DecoderParams decoder;

  std::uint64_t fingerprint() const { return arch.fingerprint(); }

  // Calls v(name, shape, is_complex, data) for every stored tensor. Complex
  // data is interleaved (re, im), so a complex tensor spans 2 * prod(shape) doubles.
  template <typename V>
  void visit(V&& v) {
    visit_impl(*this, v);
  }
  template <typename V>
  void visit(V&& v) const {
    visit_impl(*this, v);
  }

 private:
  template <typename Self, typename V>
  static void visit_impl(Self& self, V& v) {
    using D = std::conditional_t<std::is_const_v<Self>, const double, double>;
    auto dims = [](auto& m) {
      return std::vector<std::size_t>{static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())};
    };
    auto len = [](auto& m) { return std::vector<std::size_t>{static_cast<std::size_t>(m.size())}; };
    auto cmat = [&](const std::string& n, auto& m) { v(n, dims(m), true, reinterpret_cast<D*>(m.data())); };
    auto cvec = [&](const std::string& n, auto& m) { v(n, len(m), true, reinterpret_cast<D*>(m.data())); };
    auto rmat = [&](const std::string& n, auto& m) { v(n, dims(m), false, static_cast<D*>(m.data())); };
    auto rvec = [&](const std::string& n, auto& m) { v(n, len(m), false, static_cast<D*>(m.data())); };
    auto clinear_p = [&](const std::string& n, auto& p) {
      cmat(n + ".weight", p.weight);
      cvec(n + ".bias", p.bias);
    };
    auto cln_p = [&](const std::string& n, auto& p) {
      cvec(n + ".gamma", p.gamma);
      cvec(n + ".beta", p.beta);
    };
    auto lightconv = [&](const std::string& n, auto& p) {
      cmat(n + ".depthwise", p.depthwise);
      clinear_p(n + ".pointwise", p.pointwise);
      cln_p(n + ".norm", p.norm);
      rvec(n + ".prelu", p.prelu_slope);
    };

    auto& enc = self.encoder;
    for (std::size_t i = 0; i < enc.stft_layers.size(); ++i)
      lightconv("encoder.stft." + std::to_string(i), enc.stft_layers[i]);
    for (std::size_t i = 0; i < enc.gamma_layers.size(); ++i)
      lightconv("encoder.gamma." + std::to_string(i), enc.gamma_layers[i]);
    rmat("encoder.gamma_proj", enc.gamma_proj);
    rmat("encoder.fusion.weight", enc.fusion_weight);
    rvec("encoder.fusion.bias", enc.fusion_bias);
    rmat("encoder.se.reduce", enc.se.reduce);
    rmat("encoder.se.expand", enc.se.expand);

    for (std::size_t i = 0; i < self.gafm.size(); ++i) {
      auto& g = self.gafm[i];
      const std::string n = "gafm." + std::to_string(i);
      rmat(n + ".mlp.w1", g.mlp_w1);
      rvec(n + ".mlp.b1", g.mlp_b1);
      rvec(n + ".mlp.prelu", g.mlp_slope);
      rmat(n + ".mlp.w2", g.mlp_w2);
      rvec(n + ".mlp.b2", g.mlp_b2);
      v(n + ".tau", std::vector<std::size_t>{1}, false, static_cast<D*>(&g.tau));
      clinear_p(n + ".proj", g.proj);
      cln_p(n + ".norm", g.norm);
    }

    auto& dec = self.decoder;
    for (std::size_t i = 0; i < dec.head_s.size(); ++i)
      lightconv("decoder.speech." + std::to_string(i), dec.head_s[i]);
    clinear_p("decoder.speech.out", dec.out_s);
    for (std::size_t i = 0; i < dec.head_n.size(); ++i)
      lightconv("decoder.noise." + std::to_string(i), dec.head_n[i]);
    clinear_p("decoder.noise.out", dec.out_n);
    rvec("decoder.drg.weight", dec.drg_weight);
    rvec("decoder.drg.bias", dec.drg_bias);
    rvec("decoder.global_gate", dec.global_gate_logits);
  }
};

// Zero-valued parameters with the shapes implied by `arch` (CLN gamma 1, PReLU slope 0.25, tau 1).
inline ModelParams make_model(const ArchConfig& arch) {
  arch.validate();
  const std::size_t C = arch.channels, H = arch.mlp_hidden, K = arch.n_coeffs;
  const auto Ci = static_cast<Eigen::Index>(C), Hi = static_cast<Eigen::Index>(H),
             Ki = static_cast<Eigen::Index>(K), Fi = static_cast<Eigen::Index>(arch.n_freq),
             Gi = static_cast<Eigen::Index>(arch.n_gammatone);
  ModelParams m;
  m.arch = arch;
  for (std::size_t i = 0; i < arch.encoder_layers; ++i) {
    m.encoder.stft_layers.emplace_back(i == 0 ? 2 : C, C, 1, arch.kernel_1d);
    m.encoder.gamma_layers.emplace_back(i == 0 ? 2 : C, C, 1, arch.kernel_1d);
  }
  m.encoder.gamma_proj = RMat::Zero(Fi, Gi);
  m.encoder.fusion_weight = RMat::Zero(Ci, Ci);
  m.encoder.fusion_bias = RVec::Zero(Ci);
  m.encoder.se = CSEParams(C, arch.se_reduction);

  for (std::size_t i = 0; i < arch.gafm_layers; ++i) {
    GAFMParams g;
    g.mlp_w1 = RMat::Zero(Hi, Ci);
    g.mlp_b1 = RVec::Zero(Hi);
    g.mlp_slope = RVec::Constant(Hi, 0.25);
    g.mlp_w2 = RMat::Zero(Ki, Hi);
    g.mlp_b2 = RVec::Zero(Ki);
    g.tau = 1.0;
    g.proj = CLinearParams(C, C);
    g.norm = CLayerNormParams(C);
    m.gafm.push_back(std::move(g));
  }

  for (std::size_t i = 0; i < arch.decoder_layers; ++i) {
    m.decoder.head_s.emplace_back(C, C, arch.kernel_2d_f, arch.kernel_2d_t);
    m.decoder.head_n.emplace_back(C, C, arch.kernel_2d_f, arch.kernel_2d_t);
  }
  m.decoder.out_s = CLinearParams(1, C);
  m.decoder.out_n = CLinearParams(1, C);
  m.decoder.drg_weight = RVec::Zero(Ci);
  m.decoder.drg_bias = RVec::Zero(1);
  m.decoder.global_gate_logits = RVec::Zero(Fi);
  return m;
}

// Pushes the non-stored run settings (norm eps, dropout, RATF eps) into the parameters.
inline void apply_run_settings(ModelParams& m, const RunConfig& cfg) {
  auto set_norm = [&](auto& blocks) {
    for (auto& b : blocks) b.norm.eps = cfg.cln_eps;
  };
  set_norm(m.encoder.stft_layers);
  set_norm(m.encoder.gamma_layers);
  set_norm(m.decoder.head_s);
  set_norm(m.decoder.head_n);
  for (auto& g : m.gafm) {
    g.norm.eps = cfg.cln_eps;
    g.dropout_rate = cfg.dropout;
  }
  m.decoder.eps = cfg.eps;
}

inline void round_to_f32(ModelParams& m) {
  m.visit([](const std::string&, const std::vector<std::size_t>& shape, bool is_complex, double* data) {
    std::size_t n = is_complex ? 2 : 1;
    for (auto d : shape) n *= d;
    for (std::size_t i = 0; i < n; ++i) data[i] = static_cast<double>(static_cast<float>(data[i]));
  });
}

// Seeded initialization: complex weights are circular Gaussian with
// E|w|^2 = 1/fan_in (uniform phase), real weights N(0, 1/fan_in); biases 0,
// CLN gamma 1, PReLU slopes 0.25, tau = cfg.tau. Values are rounded to f32 so
// a save/load round trip is exact.
inline ModelParams init_random(const RunConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  ModelParams m = make_model(cfg.arch);
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  auto fill_complex = [&](CMat& w, std::size_t fan_in) {
    const double s = std::sqrt(0.5 / static_cast<double>(fan_in));
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      const double re = normal(gen), im = normal(gen);
      w.data()[i] = cplx(s * re, s * im);
    }
  };
  auto fill_real = [&](auto& w, std::size_t fan_in) {
    const double s = std::sqrt(1.0 / static_cast<double>(fan_in));
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = s * normal(gen);
  };
  auto init_lightconv = [&](LightConvParams& p) {
    fill_complex(p.depthwise, p.kernel_f * p.kernel_t);
    fill_complex(p.pointwise.weight, p.in_channels());
  };

  for (auto& b : m.encoder.stft_layers) init_lightconv(b);
  for (auto& b : m.encoder.gamma_layers) init_lightconv(b);
  fill_real(m.encoder.gamma_proj, cfg.arch.n_gammatone);
  fill_real(m.encoder.fusion_weight, cfg.arch.channels);
  fill_real(m.encoder.se.reduce, cfg.arch.channels);
  fill_real(m.encoder.se.expand, cfg.arch.channels / cfg.arch.se_reduction);
  for (auto& g : m.gafm) {
    fill_real(g.mlp_w1, cfg.arch.channels);
    fill_real(g.mlp_w2, cfg.arch.mlp_hidden);
    g.tau = cfg.tau;
    fill_complex(g.proj.weight, cfg.arch.channels);
  }
  for (auto& b : m.decoder.head_s) init_lightconv(b);
  for (auto& b : m.decoder.head_n) init_lightconv(b);
  fill_complex(m.decoder.out_s.weight, cfg.arch.channels);
  fill_complex(m.decoder.out_n.weight, cfg.arch.channels);
  fill_real(m.decoder.drg_weight, cfg.arch.channels);

  round_to_f32(m);
  apply_run_settings(m, cfg);
  return m;
}

}  // namespace gafnet
