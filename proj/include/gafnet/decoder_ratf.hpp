#pragma once

#include <vector>

#include "gafnet/complex_nn.hpp"
#include "gafnet/stft.hpp"
#include "gafnet/tensor.hpp"

namespace gafnet {

struct DecoderParams {
  std::vector<LightConvParams> head_s;  // N LightConv 2D blocks, speech RATF head
  std::vector<LightConvParams> head_n;  // N LightConv 2D blocks, noise RATF head
  CLinearParams out_s;                  // C -> 1
  CLinearParams out_n;                  // C -> 1
  RVec drg_weight;                      // C, 1x1 conv over channels to a single map
  RVec drg_bias;                        // 1
  RVec global_gate_logits;              // F, input-independent gate (global DRG ablation)
  double eps = 1e-8;
};

// Relative acoustic transfer functions, each (batch, frequency, time). Reference ear is R.
struct RatfPair {
  ComplexTensor speech;
  ComplexTensor noise;
};

// Per-frequency confidence g in [0, 1], one row per batch entry.
struct GateMap {
  std::size_t batch = 0;
  std::size_t freq = 0;
  std::vector<double> values;

  GateMap() = default;
  GateMap(std::size_t b, std::size_t f, double fill = 0.0) : batch(b), freq(f), values(b * f, fill) {}

  double& at(std::size_t b, std::size_t f) { return values[b * freq + f]; }
  double at(std::size_t b, std::size_t f) const { return values[b * freq + f]; }
};

inline ComplexTensor decode_head(const ComplexTensor& z_out, const std::vector<LightConvParams>& blocks,
                                 const CLinearParams& out) {
  require_bcft(z_out, "decode_head");
  require(out.out_dim() == 1, Errc::shape_mismatch, "decoder head must project to one channel");
  ComplexTensor x = z_out;
  for (const auto& block : blocks) x = lightconv2d(x, block);
  ComplexTensor y = clinear(x, out, Axis::channel);  // (B, 1, F, T)
  ComplexTensor w({Axis::batch, Axis::frequency, Axis::time}, {y.dim(0), y.dim(2), y.dim(3)});
  std::copy(y.data(), y.data() + y.size(), w.data());
  return w;
}

inline RatfPair decode_heads(const ComplexTensor& z_out, const DecoderParams& p) {
  return {decode_head(z_out, p.head_s, p.out_s), decode_head(z_out, p.head_n, p.out_n)};
}

enum class RatfDenominator {
  squared_magnitude,  // |W_s - W_n|^2 + eps
  complex_square,     // (W_s - W_n)^2 + eps, read literally
};

// S_R = (Y_L - W_n Y_R) conj(W_s - W_n) / (|W_s - W_n|^2 + eps), S_L = W_s S_R.
// Uses batch entry `b` of the RATFs.
inline Spectrogram ratf_solve(const Spectrogram& Y, const RatfPair& r, double eps,
                              RatfDenominator mode = RatfDenominator::squared_magnitude, std::size_t b = 0) {
  Y.validate();
  const std::vector<Axis> want{Axis::batch, Axis::frequency, Axis::time};
  require(r.speech.axes() == want && r.noise.axes() == want, Errc::shape_mismatch,
          "RATFs must have axes (batch, frequency, time)");
  require(r.speech.shape() == r.noise.shape(), Errc::shape_mismatch, "speech/noise RATF shapes differ");
  require(b < r.speech.dim(0) && r.speech.dim(1) == Y.n_freq() && r.speech.dim(2) == Y.n_frames(),
          Errc::shape_mismatch,
          "RATF grid " + shape_string(r.speech.shape()) + " does not match spectrogram " +
              shape_string(Y.bins.shape()));
  require(eps >= 0.0, Errc::invalid_argument, "eps must be non-negative");

  const std::size_t F = Y.n_freq(), T = Y.n_frames();
  Spectrogram S(Y.config, T);
  for (std::size_t f = 0; f < F; ++f)
    for (std::size_t t = 0; t < T; ++t) {
      const cplx ws = r.speech.at(b, f, t);
      const cplx wn = r.noise.at(b, f, t);
      const cplx d = ws - wn;
      const cplx num = cmul(Y.at(0, f, t) - cmul(wn, Y.at(1, f, t)), std::conj(d));
      cplx s_r;
      if (mode == RatfDenominator::squared_magnitude) {
        s_r = num / (std::norm(d) + eps);
      } else {
        s_r = num / (cmul(d, d) + eps);
      }
      S.at(1, f, t) = s_r;
      S.at(0, f, t) = cmul(ws, s_r);
    }
  profile::tally(16ull * F * T);
  return S;
}

// g = sigmoid(Conv1x1(AvgPool_T(|Z_out|))), one scalar per (batch, frequency).
inline GateMap drg_gate(const ComplexTensor& z_out, const DecoderParams& p) {
  require_bcft(z_out, "drg_gate");
  const std::size_t B = z_out.dim(0), C = z_out.dim(1), F = z_out.dim(2), T = z_out.dim(3);
  require(static_cast<std::size_t>(p.drg_weight.size()) == C && p.drg_bias.size() == 1, Errc::shape_mismatch,
          "DRG conv width differs from channel count");
  GateMap g(B, F);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t f = 0; f < F; ++f) {
      double logit = p.drg_bias[0];
      for (std::size_t c = 0; c < C; ++c) {
        const cplx* row = z_out.data() + ((b * C + c) * F + f) * T;
        double pooled = 0.0;
        for (std::size_t t = 0; t < T; ++t) pooled += magnitude(row[t]);
        logit += p.drg_weight[static_cast<Eigen::Index>(c)] * (pooled / static_cast<double>(T));
      }
      g.at(b, f) = sigmoid(logit);
    }
  profile::tally(1ull * B * C * F);
  return g;
}

// Input-independent per-frequency gate.
inline GateMap global_gate(const DecoderParams& p, std::size_t batch) {
  const std::size_t F = static_cast<std::size_t>(p.global_gate_logits.size());
  GateMap g(batch, F);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t f = 0; f < F; ++f) g.at(b, f) = sigmoid(p.global_gate_logits[static_cast<Eigen::Index>(f)]);
  return g;
}

// S_final,i = g * S_hat,i + (1 - g) * Y_i, g broadcast over ears and time.
inline Spectrogram blend(const Spectrogram& s_hat, const Spectrogram& Y, const GateMap& g, std::size_t b = 0) {
  s_hat.validate();
  Y.validate();
  require(s_hat.bins.shape() == Y.bins.shape(), Errc::shape_mismatch,
          "blend: estimate " + shape_string(s_hat.bins.shape()) + " vs noisy " + shape_string(Y.bins.shape()));
  require(b < g.batch && g.freq == Y.n_freq(), Errc::shape_mismatch, "blend: gate does not cover all frequencies");
  const std::size_t F = Y.n_freq(), T = Y.n_frames();
  Spectrogram out(Y.config, T);
  for (std::size_t e = 0; e < 2; ++e)
    for (std::size_t f = 0; f < F; ++f) {
      const double gf = g.at(b, f);
      for (std::size_t t = 0; t < T; ++t) out.at(e, f, t) = gf * s_hat.at(e, f, t) + (1.0 - gf) * Y.at(e, f, t);
    }
  profile::tally(8ull * F * T);
  return out;
}

}  // namespace gafnet
