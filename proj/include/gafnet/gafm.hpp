#pragma once

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <thread>
#include <vector>

#include "gafnet/complex_nn.hpp"
#include "gafnet/tensor.hpp"

namespace gafnet {

// Fixed real basis over the frame sequence: column 0 is DC, then (cos, sin)
// pairs at harmonics 1 .. (K-1)/2 of the sequence length. Columns have unit
// norm (a sin column that vanishes at h == T/2 stays zero).
struct FourierBasis {
  std::size_t frames = 0;
  std::size_t n_coeffs = 0;
  RMat phi;  // frames x n_coeffs
};

inline FourierBasis build_fourier_basis(std::size_t frames, std::size_t n_coeffs) {
  require(frames >= 1, Errc::invalid_argument, "basis needs at least one frame");
  require(n_coeffs >= 1 && n_coeffs % 2 == 1, Errc::invalid_argument, "basis size K must be odd");
  FourierBasis basis{frames, n_coeffs, RMat::Zero(static_cast<Eigen::Index>(frames),
                                                  static_cast<Eigen::Index>(n_coeffs))};
  const double T = static_cast<double>(frames);
  for (std::size_t t = 0; t < frames; ++t) {
    const auto ti = static_cast<Eigen::Index>(t);
    basis.phi(ti, 0) = 1.0;
    for (std::size_t h = 1; 2 * h < n_coeffs + 1; ++h) {
      const double arg = 2.0 * std::numbers::pi * static_cast<double>(h * t) / T;
      basis.phi(ti, static_cast<Eigen::Index>(2 * h - 1)) = std::cos(arg);
      basis.phi(ti, static_cast<Eigen::Index>(2 * h)) = std::sin(arg);
    }
  }
  for (Eigen::Index k = 0; k < basis.phi.cols(); ++k) {
    const double n = basis.phi.col(k).norm();
    if (n > 1e-9) basis.phi.col(k) /= n;
    else basis.phi.col(k).setZero();
  }
  return basis;
}

// Bases keyed by (frames, K); safe to share between threads.
class FourierBasisCache {
 public:
  std::shared_ptr<const FourierBasis> get(std::size_t frames, std::size_t n_coeffs) const {
    std::lock_guard lock(mutex_);
    auto& slot = cache_[{frames, n_coeffs}];
    if (!slot) slot = std::make_shared<const FourierBasis>(build_fourier_basis(frames, n_coeffs));
    return slot;
  }

 private:
  mutable std::mutex mutex_;
  mutable std::map<std::pair<std::size_t, std::size_t>, std::shared_ptr<const FourierBasis>> cache_;
};

struct GAFMParams {
  RMat mlp_w1;  // H x C
  RVec mlp_b1;  // H
  RVec mlp_slope;  // H, PReLU between the two layers
  RMat mlp_w2;  // K x H
  RVec mlp_b2;  // K
  double tau = 1.0;
  CLinearParams proj;  // C -> C
  CLayerNormParams norm;
  double dropout_rate = 0.0;

  std::size_t channels() const { return static_cast<std::size_t>(mlp_w1.cols()); }
  std::size_t n_coeffs() const { return static_cast<std::size_t>(mlp_w2.rows()); }
};

// One frequency row of a (B, C, F, T) tensor as a (batch, channel, time) tensor.
inline ComplexTensor frequency_slice(const ComplexTensor& z, std::size_t f) {
  require_bcft(z, "frequency_slice");
  const std::size_t B = z.dim(0), C = z.dim(1), F = z.dim(2), T = z.dim(3);
  require(f < F, Errc::invalid_argument, "frequency index out of range");
  ComplexTensor s({Axis::batch, Axis::channel, Axis::time}, {B, C, T});
  for (std::size_t bc = 0; bc < B * C; ++bc)
    std::copy_n(z.data() + (bc * F + f) * T, T, s.data() + bc * T);
  return s;
}

inline void store_frequency_slice(ComplexTensor& z, std::size_t f, const ComplexTensor& s) {
  const std::size_t B = z.dim(0), C = z.dim(1), F = z.dim(2), T = z.dim(3);
  for (std::size_t bc = 0; bc < B * C; ++bc)
    std::copy_n(s.data() + bc * T, T, z.data() + (bc * F + f) * T);
}

// c_f = mean over time of |Z_f|, one value per (batch, channel).
inline RMat context_vector(const ComplexTensor& slice) {
  const std::vector<Axis> want{Axis::batch, Axis::channel, Axis::time};
  require(slice.axes() == want, Errc::shape_mismatch, "context_vector expects (batch, channel, time)");
  const std::size_t B = slice.dim(0), C = slice.dim(1), T = slice.dim(2);
  RMat c(static_cast<Eigen::Index>(B), static_cast<Eigen::Index>(C));
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t ch = 0; ch < C; ++ch) {
      double acc = 0.0;
      const cplx* p = slice.data() + (b * C + ch) * T;
      for (std::size_t t = 0; t < T; ++t) acc += magnitude(p[t]);
      c(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(ch)) = acc / static_cast<double>(T);
    }
  return c;
}

// a = W2 prelu(W1 c + b1) + b2, one row of K coefficients per batch entry.
inline RMat mlp_coefficients(const RMat& context, const GAFMParams& p) {
  require(context.cols() == p.mlp_w1.cols(), Errc::shape_mismatch, "context width differs from MLP input");
  RMat h = context * p.mlp_w1.transpose();
  h.rowwise() += p.mlp_b1.transpose();
  for (Eigen::Index j = 0; j < h.cols(); ++j)
    for (Eigen::Index i = 0; i < h.rows(); ++i)
      if (h(i, j) < 0.0) h(i, j) *= p.mlp_slope[j];
  RMat a = h * p.mlp_w2.transpose();
  a.rowwise() += p.mlp_b2.transpose();
  return a;
}

// G_mod = sigmoid(tau * Phi a), shape (batch x frames), values in (0, 1).
inline RMat synth_gate_from_coefficients(const RMat& coeffs, const FourierBasis& basis, double tau) {
  require(static_cast<std::size_t>(coeffs.cols()) == basis.n_coeffs, Errc::shape_mismatch,
          "coefficient count differs from basis size");
  RMat g = (tau * (coeffs * basis.phi.transpose())).unaryExpr([](double v) { return sigmoid(v); });
  return g;
}

inline RMat synth_gate(const RMat& context, const FourierBasis& basis, const GAFMParams& p) {
  require(p.tau > 0.0, Errc::invalid_argument, "tau must be positive");
  return synth_gate_from_coefficients(mlp_coefficients(context, p), basis, p.tau);
}

// Z_f * G_mod with the real gate broadcast over channels.
inline ComplexTensor modulate(const ComplexTensor& slice, const RMat& gate) {
  const std::size_t B = slice.dim(0), C = slice.dim(1), T = slice.dim(2);
  require(static_cast<std::size_t>(gate.rows()) == B && static_cast<std::size_t>(gate.cols()) == T,
          Errc::shape_mismatch, "gate shape differs from (batch, time)");
  ComplexTensor y(slice.axes(), slice.shape());
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t c = 0; c < C; ++c) {
      const cplx* src = slice.data() + (b * C + c) * T;
      cplx* dst = y.data() + (b * C + c) * T;
      for (std::size_t t = 0; t < T; ++t)
        dst[t] = src[t] * gate(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(t));
    }
  return y;
}

struct GafmOptions {
  DropoutMode mode = DropoutMode::infer;
  std::uint64_t seed = 0;
  unsigned threads = 1;  // frequencies are split across this many workers
};

// Z_out,f = CLN(Z_f + CDropout(CLinear(Z_f * G_mod(f)))) for one frequency row.
inline ComplexTensor gafm_slice(const ComplexTensor& slice, const GAFMParams& p, const FourierBasis& basis,
                                DropoutMode mode, std::uint64_t seed) {
  require(slice.dim(2) == basis.frames, Errc::shape_mismatch,
          "basis built for " + std::to_string(basis.frames) + " frames, input has " +
              std::to_string(slice.dim(2)));
  const RMat gate = synth_gate(context_vector(slice), basis, p);
  ComplexTensor mixed = clinear(modulate(slice, gate), p.proj, Axis::channel);
  mixed = cdropout(mixed, p.dropout_rate, mode, seed);
  for (std::size_t i = 0; i < mixed.size(); ++i) mixed[i] += slice[i];
  return cln(mixed, p.norm, Axis::channel);
}

inline std::uint64_t gafm_macs(std::size_t B, std::size_t C, std::size_t F, std::size_t T, std::size_t H,
                               std::size_t K) {
  const std::uint64_t per_f = 1ull * B * (C * H + H * K)  // MLP
                              + 1ull * B * T * K          // Phi a
                              + 2ull * B * C * T          // real gate on complex features
                              + 4ull * B * C * C * T;     // complex projection
  return per_f * F;
}

// Frequencies are independent; any thread count yields bit-identical output.
inline ComplexTensor gafm_block(const ComplexTensor& z, const GAFMParams& p, const FourierBasis& basis,
                                const GafmOptions& opt = {}) {
  require_bcft(z, "gafm_block");
  const std::size_t B = z.dim(0), C = z.dim(1), F = z.dim(2), T = z.dim(3);
  require(C == p.channels() && p.proj.in_dim() == C && p.proj.out_dim() == C && p.norm.dim() == C,
          Errc::shape_mismatch, "GAFM parameters built for a different channel count");
  require(basis.frames == T, Errc::shape_mismatch, "basis frame count differs from input");
  ComplexTensor out(z.axes(), z.shape());

  auto run = [&](std::size_t first, std::size_t stride) {
    profile::ScopedMacPause pause;
    for (std::size_t f = first; f < F; f += stride) {
      ComplexTensor y = gafm_slice(frequency_slice(z, f), p, basis, opt.mode, opt.seed + f);
      store_frequency_slice(out, f, y);
    }
  };
  const unsigned n_threads = std::max(1u, std::min<unsigned>(opt.threads, static_cast<unsigned>(F)));
  if (n_threads == 1) {
    run(0, 1);
  } else {
    std::vector<std::jthread> workers;
    for (unsigned w = 0; w < n_threads; ++w) workers.emplace_back(run, w, n_threads);
  }
  profile::tally(gafm_macs(B, C, F, T, static_cast<std::size_t>(p.mlp_w1.rows()), p.n_coeffs()));
  return out;
}

}  // namespace gafnet
