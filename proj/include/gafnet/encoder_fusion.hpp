#pragma once

#include <vector>

#include "gafnet/complex_nn.hpp"
#include "gafnet/stft.hpp"
#include "gafnet/tensor.hpp"

namespace gafnet {

struct EncoderParams {
  std::vector<LightConvParams> stft_layers;   // M blocks, 2 -> C -> ... -> C
  std::vector<LightConvParams> gamma_layers;  // M blocks, 2 -> C -> ... -> C
  RMat gamma_proj;                            // F x n_gammatone, real map along frequency
  RMat fusion_weight;                         // C x C, 1x1 conv over channels on |Z_gamma|
  RVec fusion_bias;                           // C
  CSEParams se;
};

// Ears become the channel axis of a batch-of-one tensor (1, 2, F, T).
inline ComplexTensor ears_as_channels(const ComplexTensor& per_ear) {
  const std::vector<Axis> want{Axis::channel, Axis::frequency, Axis::time};
  require(per_ear.axes() == want, Errc::shape_mismatch, "expected axes (channel, frequency, time)");
  ComplexTensor x = ComplexTensor::bcft(1, per_ear.dim(0), per_ear.dim(1), per_ear.dim(2));
  std::copy(per_ear.data(), per_ear.data() + per_ear.size(), x.data());
  return x;
}

inline ComplexTensor run_blocks_1d(ComplexTensor x, const std::vector<LightConvParams>& blocks) {
  for (const auto& block : blocks) x = lightconv1d(x, block);
  return x;
}

inline ComplexTensor encode_stft(const Spectrogram& Y, const EncoderParams& p) {
  Y.validate();
  return run_blocks_1d(ears_as_channels(Y.bins), p.stft_layers);
}

// Real linear map along the frequency axis; re and im are mapped independently.
inline ComplexTensor project_frequency(const ComplexTensor& x, const RMat& proj) {
  require_bcft(x, "project_frequency");
  const std::size_t B = x.dim(0), C = x.dim(1), G = x.dim(2), T = x.dim(3);
  require(static_cast<std::size_t>(proj.cols()) == G, Errc::shape_mismatch,
          "frequency projection expects " + std::to_string(proj.cols()) + " input rows, got " +
              std::to_string(G));
  const std::size_t F = static_cast<std::size_t>(proj.rows());
  ComplexTensor y = ComplexTensor::bcft(B, C, F, T);
  using RMapConst = Eigen::Map<const RMat>;
  using RMapMut = Eigen::Map<RMat>;
  const auto cols = static_cast<Eigen::Index>(2 * T);
  for (std::size_t bc = 0; bc < B * C; ++bc) {
    RMapConst in(reinterpret_cast<const double*>(x.data() + bc * G * T), static_cast<Eigen::Index>(G), cols);
    RMapMut out(reinterpret_cast<double*>(y.data() + bc * F * T), static_cast<Eigen::Index>(F), cols);
    out.noalias() = proj * in;
  }
  profile::tally(2ull * B * C * F * G * T);
  return y;
}

// gammatone features: (channel = ear, frequency = band, time) from gammatone_frames.
inline ComplexTensor encode_gamma(const ComplexTensor& gamma_features, const EncoderParams& p) {
  ComplexTensor z = run_blocks_1d(ears_as_channels(gamma_features), p.gamma_layers);
  return project_frequency(z, p.gamma_proj);
}

// A = sigmoid(W |Z_gamma| + b), real and strictly inside (0, 1). Same layout as Z_gamma.
inline pooled_vector<double> attention_map(const ComplexTensor& z_gamma, const EncoderParams& p) {
  require_bcft(z_gamma, "attention_map");
  const std::size_t B = z_gamma.dim(0), C = z_gamma.dim(1), P = z_gamma.dim(2) * z_gamma.dim(3);
  require(static_cast<std::size_t>(p.fusion_weight.cols()) == C &&
              static_cast<std::size_t>(p.fusion_weight.rows()) == C &&
              static_cast<std::size_t>(p.fusion_bias.size()) == C,
          Errc::shape_mismatch, "fusion conv width differs from channel count");
  pooled_vector<double> mag(z_gamma.size());
  for (std::size_t i = 0; i < mag.size(); ++i) mag[i] = magnitude(z_gamma[i]);
  pooled_vector<double> gate(z_gamma.size());
  using RMapConst = Eigen::Map<const RMat>;
  using RMapMut = Eigen::Map<RMat>;
  const auto Ci = static_cast<Eigen::Index>(C), Pi = static_cast<Eigen::Index>(P);
  for (std::size_t b = 0; b < B; ++b) {
    RMapConst in(mag.data() + b * C * P, Ci, Pi);
    RMapMut out(gate.data() + b * C * P, Ci, Pi);
    out.noalias() = p.fusion_weight * in;
    out.colwise() += p.fusion_bias;
    out = (1.0 + (-out.array()).exp()).inverse().matrix();
  }
  profile::tally(1ull * B * C * C * P);
  return gate;
}

inline ComplexTensor apply_real_gate(const ComplexTensor& z, const pooled_vector<double>& gate) {
  require(gate.size() == z.size(), Errc::shape_mismatch, "gate size differs from feature size");
  ComplexTensor y(z.axes(), z.shape());
  for (std::size_t i = 0; i < z.size(); ++i) y[i] = z[i] * gate[i];
  profile::tally(2ull * z.size());
  return y;
}

// Z_attended = Z_stft * sigmoid(Conv(|Z_gamma|)).
inline ComplexTensor fuse(const ComplexTensor& z_stft, const ComplexTensor& z_gamma, const EncoderParams& p) {
  require_bcft(z_stft, "fuse");
  require(z_stft.shape() == z_gamma.shape(), Errc::shape_mismatch,
          "fuse: Z_stft " + shape_string(z_stft.shape()) + " vs Z_gamma " + shape_string(z_gamma.shape()));
  return apply_real_gate(z_stft, attention_map(z_gamma, p));
}

// Gammatone path disabled: |Z_gamma| is taken as zero, leaving a per-channel sigmoid(bias) scale.
inline ComplexTensor fuse_without_gamma(const ComplexTensor& z_stft, const EncoderParams& p) {
  require_bcft(z_stft, "fuse");
  const std::size_t B = z_stft.dim(0), C = z_stft.dim(1), P = z_stft.dim(2) * z_stft.dim(3);
  require(static_cast<std::size_t>(p.fusion_bias.size()) == C, Errc::shape_mismatch,
          "fusion bias width differs from channel count");
  pooled_vector<double> gate(z_stft.size());
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t c = 0; c < C; ++c)
      std::fill_n(gate.begin() + static_cast<std::ptrdiff_t>((b * C + c) * P), P,
                  sigmoid(p.fusion_bias[static_cast<Eigen::Index>(c)]));
  return apply_real_gate(z_stft, gate);
}

inline ComplexTensor recalibrate(const ComplexTensor& z_attended, const CSEParams& se) {
  return cse(z_attended, se);
}

}  // namespace gafnet
