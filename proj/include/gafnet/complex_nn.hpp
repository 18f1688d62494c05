#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "gafnet/error.hpp"
#include "gafnet/tensor.hpp"

namespace gafnet {

struct CLinearParams {
  CMat weight;  // out_dim x in_dim
  CVec bias;    // out_dim

  CLinearParams() = default;
  CLinearParams(std::size_t out_dim, std::size_t in_dim)
      : weight(CMat::Zero(static_cast<Eigen::Index>(out_dim), static_cast<Eigen::Index>(in_dim))),
        bias(CVec::Zero(static_cast<Eigen::Index>(out_dim))) {}

  std::size_t in_dim() const { return static_cast<std::size_t>(weight.cols()); }
  std::size_t out_dim() const { return static_cast<std::size_t>(weight.rows()); }

  static CLinearParams identity(std::size_t n) {
    CLinearParams p(n, n);
    p.weight.setIdentity();
    return p;
  }
};

struct CLayerNormParams {
  CVec gamma;  // per-feature complex scale
  CVec beta;   // per-feature complex shift
  double eps = 1e-5;

  CLayerNormParams() = default;
  explicit CLayerNormParams(std::size_t n, double eps_ = 1e-5)
      : gamma(CVec::Ones(static_cast<Eigen::Index>(n))),
        beta(CVec::Zero(static_cast<Eigen::Index>(n))),
        eps(eps_) {}

  std::size_t dim() const { return static_cast<std::size_t>(gamma.size()); }
};

enum class Activation { prelu, identity };

// Depthwise complex convolution -> complex pointwise mix -> CLN -> complex PReLU
// (+ residual when channel counts match). kernel_f == 1 is the 1D (time-only) form.
struct LightConvParams {
  std::size_t kernel_f = 1;
  std::size_t kernel_t = 5;
  CMat depthwise;  // in_channels x (kernel_f * kernel_t), row-major over (kf, kt)
  CLinearParams pointwise;
  CLayerNormParams norm;
  RVec prelu_slope;  // per output channel, shared by re and im
  Activation activation = Activation::prelu;

  LightConvParams() = default;
  LightConvParams(std::size_t in_ch, std::size_t out_ch, std::size_t kf, std::size_t kt)
      : kernel_f(kf),
        kernel_t(kt),
        depthwise(CMat::Zero(static_cast<Eigen::Index>(in_ch), static_cast<Eigen::Index>(kf * kt))),
        pointwise(out_ch, in_ch),
        norm(out_ch),
        prelu_slope(RVec::Constant(static_cast<Eigen::Index>(out_ch), 0.25)) {}

  std::size_t in_channels() const { return static_cast<std::size_t>(depthwise.rows()); }
  std::size_t out_channels() const { return pointwise.out_dim(); }

  void validate() const {
    require(kernel_f % 2 == 1 && kernel_t % 2 == 1, Errc::invalid_argument, "kernel lengths must be odd");
    require(static_cast<std::size_t>(depthwise.cols()) == kernel_f * kernel_t, Errc::shape_mismatch,
            "depthwise kernel size disagrees with kernel_f * kernel_t");
    require(pointwise.in_dim() == in_channels(), Errc::shape_mismatch,
            "pointwise input width differs from depthwise channel count");
    require(norm.dim() == out_channels() && static_cast<std::size_t>(prelu_slope.size()) == out_channels(),
            Errc::shape_mismatch, "norm/activation width differs from output channel count");
  }
};

struct CSEParams {
  RMat reduce;  // (C / r) x C
  RMat expand;  // C x (C / r)

  CSEParams() = default;
  CSEParams(std::size_t channels, std::size_t reduction) {
    require(reduction > 0 && channels % reduction == 0, Errc::invalid_argument,
            "SE reduction must divide the channel count");
    const auto c = static_cast<Eigen::Index>(channels);
    const auto h = static_cast<Eigen::Index>(channels / reduction);
    reduce = RMat::Zero(h, c);
    expand = RMat::Zero(c, h);
  }

  std::size_t channels() const { return static_cast<std::size_t>(reduce.cols()); }
};

namespace detail {

// Splits a shape around `axis` into (outer, axis length, inner).
struct AxisSplit {
  std::size_t outer = 1, len = 1, inner = 1;
};

inline AxisSplit split_at(const ComplexTensor& x, std::size_t axis) {
  AxisSplit s;
  for (std::size_t i = 0; i < x.rank(); ++i) {
    if (i < axis) s.outer *= x.dim(i);
    else if (i == axis) s.len = x.dim(i);
    else s.inner *= x.dim(i);
  }
  return s;
}

using CMapConst = Eigen::Map<const CMat>;
using CMapMut = Eigen::Map<CMat>;

}  // namespace detail

// y = W x + b along `axis`; every other axis is broadcast.
// Evaluated as one real GEMM per column block: [Wr | Wi] * [X; iX] over the
// interleaved (re, im) doubles, which runs faster than a complex GEMM.
inline ComplexTensor clinear(const ComplexTensor& x, const CLinearParams& p, Axis axis = Axis::channel) {
  const std::size_t ax = x.axis_index(axis);
  require(x.dim(ax) == p.in_dim(), Errc::shape_mismatch,
          std::string("clinear: ") + axis_name(axis) + " length " + std::to_string(x.dim(ax)) +
              " != in_dim " + std::to_string(p.in_dim()));
  require(static_cast<std::size_t>(p.bias.size()) == p.out_dim(), Errc::shape_mismatch,
          "clinear: bias length differs from out_dim");
  auto shape = x.shape();
  shape[ax] = p.out_dim();
  ComplexTensor y(x.axes(), shape);
  const auto s = detail::split_at(x, ax);
  const std::size_t n_in = s.len, n_out = p.out_dim();
  const auto in_i = static_cast<Eigen::Index>(n_in), out_i = static_cast<Eigen::Index>(n_out);

  RMat wcat(out_i, 2 * in_i);
  wcat.leftCols(in_i) = p.weight.real();
  wcat.rightCols(in_i) = p.weight.imag();

  constexpr std::size_t block = 1024;  // complex columns per GEMM
  RMat stacked(2 * in_i, static_cast<Eigen::Index>(2 * std::min(block, s.inner)));
  RMat out_block(out_i, stacked.cols());
  for (std::size_t o = 0; o < s.outer; ++o) {
    const double* xd = reinterpret_cast<const double*>(x.data() + o * n_in * s.inner);
    double* yd = reinterpret_cast<double*>(y.data() + o * n_out * s.inner);
    for (std::size_t c0 = 0; c0 < s.inner; c0 += block) {
      const std::size_t w = std::min(block, s.inner - c0);
      const auto wi = static_cast<Eigen::Index>(2 * w);
      for (std::size_t r = 0; r < n_in; ++r) {
        const double* src = xd + 2 * (r * s.inner + c0);
        double* re_row = stacked.data() + r * stacked.cols();
        double* rot_row = stacked.data() + (n_in + r) * stacked.cols();
        for (std::size_t k = 0; k < w; ++k) {
          re_row[2 * k] = src[2 * k];
          re_row[2 * k + 1] = src[2 * k + 1];
          rot_row[2 * k] = -src[2 * k + 1];
          rot_row[2 * k + 1] = src[2 * k];
        }
      }
      out_block.leftCols(wi).noalias() = wcat * stacked.leftCols(wi);
      for (std::size_t r = 0; r < n_out; ++r) {
        const double br = p.bias[static_cast<Eigen::Index>(r)].real();
        const double bi = p.bias[static_cast<Eigen::Index>(r)].imag();
        const double* src = out_block.data() + r * out_block.cols();
        double* dst = yd + 2 * (r * s.inner + c0);
        for (std::size_t k = 0; k < w; ++k) {
          dst[2 * k] = src[2 * k] + br;
          dst[2 * k + 1] = src[2 * k + 1] + bi;
        }
      }
    }
  }
  profile::tally(4ull * n_out * n_in * s.inner * s.outer);
  return y;
}

// Complex layer norm along `axis`: subtract the complex mean, divide by
// sqrt(E|x - mu|^2 + eps), then apply the complex affine (gamma, beta).
inline ComplexTensor cln(const ComplexTensor& x, const CLayerNormParams& p, Axis axis = Axis::channel) {
  const std::size_t ax = x.axis_index(axis);
  require(x.dim(ax) == p.dim(), Errc::shape_mismatch, "cln: feature length differs from parameter width");
  require(p.eps > 0.0, Errc::invalid_argument, "cln: eps must be positive");
  const auto s = detail::split_at(x, ax);
  ComplexTensor y(x.axes(), x.shape());
  std::vector<cplx> mean(s.inner);
  std::vector<double> var(s.inner);
  const double inv_n = 1.0 / static_cast<double>(s.len);
  for (std::size_t o = 0; o < s.outer; ++o) {
    const cplx* xb = x.data() + o * s.len * s.inner;
    cplx* yb = y.data() + o * s.len * s.inner;
    std::fill(mean.begin(), mean.end(), cplx{});
    std::fill(var.begin(), var.end(), 0.0);
    for (std::size_t d = 0; d < s.len; ++d)
      for (std::size_t i = 0; i < s.inner; ++i) mean[i] += xb[d * s.inner + i];
    for (auto& m : mean) m *= inv_n;
    for (std::size_t d = 0; d < s.len; ++d)
      for (std::size_t i = 0; i < s.inner; ++i) var[i] += std::norm(xb[d * s.inner + i] - mean[i]);
    for (auto& v : var) v = 1.0 / std::sqrt(v * inv_n + p.eps);
    for (std::size_t d = 0; d < s.len; ++d) {
      const cplx g = p.gamma[static_cast<Eigen::Index>(d)];
      const cplx b = p.beta[static_cast<Eigen::Index>(d)];
      for (std::size_t i = 0; i < s.inner; ++i)
        yb[d * s.inner + i] = cmul(g, (xb[d * s.inner + i] - mean[i]) * var[i]) + b;
    }
  }
  return y;
}

enum class DropoutMode { train, infer };

// One real Bernoulli mask shared by re and im, scaled by 1 / (1 - rate).
inline ComplexTensor cdropout(const ComplexTensor& x, double rate, DropoutMode mode, std::uint64_t seed) {
  require(rate >= 0.0 && rate < 1.0, Errc::invalid_argument, "dropout rate must be in [0, 1)");
  if (mode == DropoutMode::infer || rate == 0.0) return x;
  ComplexTensor y = x;
  std::mt19937_64 gen(seed);
  std::bernoulli_distribution keep(1.0 - rate);
  const double scale = 1.0 / (1.0 - rate);
  for (auto& z : y.values()) z = keep(gen) ? z * scale : cplx{};
  return y;
}

// PReLU on re and im separately with one real slope per channel.
inline void cprelu_inplace(ComplexTensor& x, const RVec& slope, Axis axis = Axis::channel) {
  const std::size_t ax = x.axis_index(axis);
  require(static_cast<std::size_t>(slope.size()) == x.dim(ax), Errc::shape_mismatch,
          "cprelu: slope count differs from channel count");
  const auto s = detail::split_at(x, ax);
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t d = 0; d < s.len; ++d) {
      const double a = slope[static_cast<Eigen::Index>(d)];
      cplx* p = x.data() + (o * s.len + d) * s.inner;
      for (std::size_t i = 0; i < s.inner; ++i) {
        const double re = p[i].real(), im = p[i].imag();
        p[i] = cplx(re >= 0.0 ? re : a * re, im >= 0.0 ? im : a * im);
      }
    }
}

// Same-padded depthwise complex convolution over (frequency, time) of a
// (batch, channel, frequency, time) tensor; kernel_f == 1 convolves along time only.
inline ComplexTensor depthwise_conv(const ComplexTensor& x, const CMat& kernel, std::size_t kernel_f,
                                    std::size_t kernel_t) {
  require_bcft(x, "depthwise_conv");
  const std::size_t B = x.dim(0), C = x.dim(1), F = x.dim(2), T = x.dim(3);
  require(static_cast<std::size_t>(kernel.rows()) == C, Errc::shape_mismatch,
          "depthwise_conv: kernel has " + std::to_string(kernel.rows()) + " channels, input has " +
              std::to_string(C));
  require(static_cast<std::size_t>(kernel.cols()) == kernel_f * kernel_t, Errc::shape_mismatch,
          "depthwise_conv: kernel size mismatch");
  ComplexTensor y(x.axes(), x.shape());
  const auto half_f = static_cast<std::ptrdiff_t>(kernel_f / 2);
  const auto half_t = static_cast<std::ptrdiff_t>(kernel_t / 2);
  const auto Fi = static_cast<std::ptrdiff_t>(F), Ti = static_cast<std::ptrdiff_t>(T);
  // Each tap is k * x = kr * x + ki * (i x) on interleaved doubles: two plain axpys.
  std::vector<double> rot(2 * F * T);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t c = 0; c < C; ++c) {
      const double* xp = reinterpret_cast<const double*>(x.data() + (b * C + c) * F * T);
      double* yp = reinterpret_cast<double*>(y.data() + (b * C + c) * F * T);
      for (std::size_t k = 0; k < F * T; ++k) {
        rot[2 * k] = -xp[2 * k + 1];
        rot[2 * k + 1] = xp[2 * k];
      }
      for (std::size_t i = 0; i < kernel_f; ++i)
        for (std::size_t j = 0; j < kernel_t; ++j) {
          const cplx k = kernel(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(i * kernel_t + j));
          const double kr = k.real(), ki = k.imag();
          const std::ptrdiff_t df = static_cast<std::ptrdiff_t>(i) - half_f;
          const std::ptrdiff_t dt = static_cast<std::ptrdiff_t>(j) - half_t;
          const std::ptrdiff_t u0 = 2 * std::max<std::ptrdiff_t>(0, -dt);
          const std::ptrdiff_t u1 = 2 * std::min<std::ptrdiff_t>(Ti, Ti - dt);
          for (std::ptrdiff_t f = std::max<std::ptrdiff_t>(0, -df); f < std::min(Fi, Fi - df); ++f) {
            const double* __restrict src = xp + 2 * (f + df) * Ti;
            const double* __restrict srot = rot.data() + 2 * (f + df) * Ti;
            double* __restrict dst = yp + 2 * f * Ti;
            for (std::ptrdiff_t u = u0; u < u1; ++u) dst[u] += kr * src[u + 2 * dt] + ki * srot[u + 2 * dt];
          }
        }
    }
  profile::tally(4ull * B * C * kernel_f * kernel_t * F * T);
  return y;
}

namespace detail {

// Fused block: depthwise -> pointwise -> CLN -> PReLU (-> residual), one tile
// of frequency rows at a time so intermediates stay in cache. Same result as
// composing depthwise_conv, clinear, cln and cprelu_inplace.
inline ComplexTensor lightconv_bcft(const ComplexTensor& x, const LightConvParams& p) {
  p.validate();
  require_bcft(x, "lightconv");
  require(x.dim(1) == p.in_channels(), Errc::shape_mismatch,
          "lightconv: input has " + std::to_string(x.dim(1)) + " channels, block expects " +
              std::to_string(p.in_channels()));
  require(p.norm.eps > 0.0, Errc::invalid_argument, "cln: eps must be positive");
  const std::size_t B = x.dim(0), Cin = x.dim(1), F = x.dim(2), T = x.dim(3), Cout = p.out_channels();
  const bool residual = Cin == Cout;
  ComplexTensor y = ComplexTensor::bcft(B, Cout, F, T);

  const auto cin_i = static_cast<Eigen::Index>(Cin), cout_i = static_cast<Eigen::Index>(Cout);
  RMat wcat(cout_i, 2 * cin_i);
  wcat.leftCols(cin_i) = p.pointwise.weight.real();
  wcat.rightCols(cin_i) = p.pointwise.weight.imag();

  const std::size_t tile_rows = std::clamp<std::size_t>(1024 / std::max<std::size_t>(T, 1), 1, F);
  const std::size_t max_pos = tile_rows * T;
  RMat stacked(2 * cin_i, static_cast<Eigen::Index>(2 * max_pos));
  RMat out(cout_i, stacked.cols());
  std::vector<double> mean(2 * max_pos), inv_std(max_pos);
  const auto stride = static_cast<std::size_t>(stacked.cols());
  const auto half_f = static_cast<std::ptrdiff_t>(p.kernel_f / 2);
  const auto half_t = static_cast<std::ptrdiff_t>(p.kernel_t / 2);
  const auto Fi = static_cast<std::ptrdiff_t>(F), Ti = static_cast<std::ptrdiff_t>(T);
  const double inv_n = 1.0 / static_cast<double>(Cout);

  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t f0 = 0; f0 < F; f0 += tile_rows) {
      const std::size_t nr = std::min(tile_rows, F - f0), np = nr * T;
      const auto cols = static_cast<Eigen::Index>(2 * np);

      // Depthwise stage into the top half of `stacked`, i * result into the bottom half.
      for (std::size_t c = 0; c < Cin; ++c) {
        const double* xp = reinterpret_cast<const double*>(x.data() + (b * Cin + c) * F * T);
        double* d = stacked.data() + c * stride;
        std::fill_n(d, 2 * np, 0.0);
        for (std::size_t i = 0; i < p.kernel_f; ++i)
          for (std::size_t j = 0; j < p.kernel_t; ++j) {
            const cplx k = p.depthwise(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(i * p.kernel_t + j));
            const double kr = k.real(), ki = k.imag();
            const std::ptrdiff_t df = static_cast<std::ptrdiff_t>(i) - half_f;
            const std::ptrdiff_t dt = static_cast<std::ptrdiff_t>(j) - half_t;
            const std::ptrdiff_t t0 = std::max<std::ptrdiff_t>(0, -dt);
            const std::ptrdiff_t t1 = std::min<std::ptrdiff_t>(Ti, Ti - dt);
            for (std::size_t fr = 0; fr < nr; ++fr) {
              const std::ptrdiff_t fs = static_cast<std::ptrdiff_t>(f0 + fr) + df;
              if (fs < 0 || fs >= Fi) continue;
              const double* __restrict src = xp + 2 * fs * Ti;
              double* __restrict dst = d + 2 * fr * T;
              for (std::ptrdiff_t t = t0; t < t1; ++t) {
                const double xr = src[2 * (t + dt)], xi = src[2 * (t + dt) + 1];
                dst[2 * t] += kr * xr - ki * xi;
                dst[2 * t + 1] += kr * xi + ki * xr;
              }
            }
          }
        double* r = stacked.data() + (Cin + c) * stride;
        for (std::size_t k = 0; k < np; ++k) {
          r[2 * k] = -d[2 * k + 1];
          r[2 * k + 1] = d[2 * k];
        }
      }

      out.leftCols(cols).noalias() = wcat * stacked.leftCols(cols);

      // Bias, then channel statistics per position.
      std::fill_n(mean.begin(), 2 * np, 0.0);
      std::fill_n(inv_std.begin(), np, 0.0);
      for (std::size_t o = 0; o < Cout; ++o) {
        const cplx bias = p.pointwise.bias[static_cast<Eigen::Index>(o)];
        double* row = out.data() + o * stride;
        for (std::size_t k = 0; k < np; ++k) {
          row[2 * k] += bias.real();
          row[2 * k + 1] += bias.imag();
          mean[2 * k] += row[2 * k];
          mean[2 * k + 1] += row[2 * k + 1];
        }
      }
      for (std::size_t k = 0; k < 2 * np; ++k) mean[k] *= inv_n;
      for (std::size_t o = 0; o < Cout; ++o) {
        const double* row = out.data() + o * stride;
        for (std::size_t k = 0; k < np; ++k) {
          const double dr = row[2 * k] - mean[2 * k], di = row[2 * k + 1] - mean[2 * k + 1];
          inv_std[k] += dr * dr + di * di;
        }
      }
      for (std::size_t k = 0; k < np; ++k) inv_std[k] = 1.0 / std::sqrt(inv_std[k] * inv_n + p.norm.eps);

      for (std::size_t o = 0; o < Cout; ++o) {
        const cplx g = p.norm.gamma[static_cast<Eigen::Index>(o)];
        const cplx beta = p.norm.beta[static_cast<Eigen::Index>(o)];
        const double gr = g.real(), gi = g.imag(), br = beta.real(), bi = beta.imag();
        const double slope = p.activation == Activation::prelu ? p.prelu_slope[static_cast<Eigen::Index>(o)] : 1.0;
        const double* __restrict row = out.data() + o * stride;
        const double* __restrict mu = mean.data();
        const double* __restrict is = inv_std.data();
        double* __restrict yo = reinterpret_cast<double*>(y.data() + ((b * Cout + o) * F + f0) * T);
        const auto act = [slope](double v) { return std::max(v, 0.0) + slope * std::min(v, 0.0); };
        if (residual) {
          const double* __restrict xo = reinterpret_cast<const double*>(x.data() + ((b * Cin + o) * F + f0) * T);
          for (std::size_t k = 0; k < np; ++k) {
            const double zr = (row[2 * k] - mu[2 * k]) * is[k], zi = (row[2 * k + 1] - mu[2 * k + 1]) * is[k];
            yo[2 * k] = act(gr * zr - gi * zi + br) + xo[2 * k];
            yo[2 * k + 1] = act(gr * zi + gi * zr + bi) + xo[2 * k + 1];
          }
        } else {
          for (std::size_t k = 0; k < np; ++k) {
            const double zr = (row[2 * k] - mu[2 * k]) * is[k], zi = (row[2 * k + 1] - mu[2 * k + 1]) * is[k];
            yo[2 * k] = act(gr * zr - gi * zi + br);
            yo[2 * k + 1] = act(gr * zi + gi * zr + bi);
          }
        }
      }
    }
  profile::tally(4ull * B * Cin * p.kernel_f * p.kernel_t * F * T);
  profile::tally(4ull * B * Cout * Cin * F * T);
  return y;
}

}  // namespace detail

// Accepts (batch, channel, time) or (batch, channel, frequency, time); the
// depthwise stage runs along time independently for every frequency row.
inline ComplexTensor lightconv1d(const ComplexTensor& x, const LightConvParams& p) {
  require(p.kernel_f == 1, Errc::invalid_argument, "lightconv1d needs kernel_f == 1");
  const std::vector<Axis> three{Axis::batch, Axis::channel, Axis::time};
  if (x.axes() == three) {
    ComplexTensor x4 = ComplexTensor::bcft(x.dim(0), x.dim(1), 1, x.dim(2));
    std::copy(x.data(), x.data() + x.size(), x4.data());
    ComplexTensor y4 = detail::lightconv_bcft(x4, p);
    ComplexTensor y(three, {y4.dim(0), y4.dim(1), y4.dim(3)});
    std::copy(y4.data(), y4.data() + y4.size(), y.data());
    return y;
  }
  require_bcft(x, "lightconv1d");
  return detail::lightconv_bcft(x, p);
}

inline ComplexTensor lightconv2d(const ComplexTensor& x, const LightConvParams& p) {
  require_bcft(x, "lightconv2d");
  return detail::lightconv_bcft(x, p);
}

// Channel means of |x| over every non-batch, non-channel position.
inline RMat channel_mean_magnitude(const ComplexTensor& x) {
  require_bcft(x, "channel_mean_magnitude");
  const std::size_t B = x.dim(0), C = x.dim(1), P = x.dim(2) * x.dim(3);
  RMat s(static_cast<Eigen::Index>(B), static_cast<Eigen::Index>(C));
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t c = 0; c < C; ++c) {
      const cplx* p = x.data() + (b * C + c) * P;
      double acc = 0.0;
      for (std::size_t i = 0; i < P; ++i) acc += magnitude(p[i]);
      s(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(c)) = acc / static_cast<double>(P);
    }
  return s;
}

// Squeeze-and-excitation with real per-channel weights e in (0, 1).
// Returns the excitation (batch x channel) so callers can inspect it.
inline RMat cse_excitation(const ComplexTensor& x, const CSEParams& p) {
  require_bcft(x, "cse");
  require(p.channels() == x.dim(1), Errc::shape_mismatch, "cse: channel count mismatch");
  require(p.expand.rows() == p.reduce.cols() && p.expand.cols() == p.reduce.rows(), Errc::shape_mismatch,
          "cse: reduce/expand shapes disagree");
  const RMat s = channel_mean_magnitude(x);  // B x C
  RMat h = (s * p.reduce.transpose()).cwiseMax(0.0);
  RMat e = (h * p.expand.transpose()).unaryExpr([](double v) { return sigmoid(v); });
  profile::tally(2ull * x.dim(0) * static_cast<std::uint64_t>(p.reduce.rows() * p.reduce.cols()));
  return e;
}

inline ComplexTensor scale_channels(const ComplexTensor& x, const RMat& e) {
  const std::size_t B = x.dim(0), C = x.dim(1), P = x.dim(2) * x.dim(3);
  ComplexTensor y(x.axes(), x.shape());
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t c = 0; c < C; ++c) {
      const double g = e(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(c));
      const cplx* src = x.data() + (b * C + c) * P;
      cplx* dst = y.data() + (b * C + c) * P;
      for (std::size_t i = 0; i < P; ++i) dst[i] = src[i] * g;
    }
  profile::tally(2ull * B * C * P);
  return y;
}

inline ComplexTensor cse(const ComplexTensor& x, const CSEParams& p) {
  return scale_channels(x, cse_excitation(x, p));
}

}  // namespace gafnet
