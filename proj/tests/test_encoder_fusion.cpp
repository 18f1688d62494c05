#include <catch_amalgamated.hpp>

#include "support/oracles.hpp"
#include "support/test_util.hpp"

using namespace gafnet;

namespace {

RunConfig small_config() {
  RunConfig cfg;
  cfg.arch.channels = 8;
  cfg.arch.mlp_hidden = 8;
  return cfg;
}

ComplexTensor gamma_like(std::size_t T, std::mt19937_64& g) {
  ComplexTensor x({Axis::channel, Axis::frequency, Axis::time}, {2, 64, T});
  std::uniform_real_distribution<double> u(0.0, 3.0);
  for (auto& z : x.values()) z = {u(g), 0.0};
  return x;
}

}  // namespace

TEST_CASE("zero-weight encoders emit zeros and are deterministic") {
  const RunConfig cfg = small_config();
  const ModelParams m = make_model(cfg.arch);
  std::mt19937_64 g(1);
  const Spectrogram Y = oracle::random_spectrogram(12, g);
  const ComplexTensor z = encode_stft(Y, m.encoder);
  CHECK(z.shape() == std::vector<std::size_t>{1, 8, 129, 12});
  CHECK(oracle::max_abs(z) == 0.0);

  const ModelParams r = init_random(cfg, 5);
  const ComplexTensor a = encode_stft(Y, r.encoder), b = encode_stft(Y, r.encoder);
  CHECK(oracle::max_abs_diff(a, b) == 0.0);
}

TEST_CASE("encoders keep the frame count") {
  const RunConfig cfg = small_config();
  const ModelParams m = init_random(cfg, 2);
  std::mt19937_64 g(2);
  for (std::size_t T : {1u, 2u, 7u, 40u}) {
    CHECK(encode_stft(oracle::random_spectrogram(T, g), m.encoder).dim(3) == T);
    CHECK(encode_gamma(gamma_like(T, g), m.encoder).shape() == std::vector<std::size_t>{1, 8, 129, T});
  }
}

TEST_CASE("stft encoder equals its blocks applied one at a time") {
  const RunConfig cfg = small_config();
  const ModelParams m = init_random(cfg, 3);
  std::mt19937_64 g(3);
  const Spectrogram Y = oracle::random_spectrogram(9, g);
  ComplexTensor ref = ComplexTensor::bcft(1, 2, 129, 9);
  for (std::size_t e = 0; e < 2; ++e)
    for (std::size_t f = 0; f < 129; ++f)
      for (std::size_t t = 0; t < 9; ++t) ref.at(0, e, f, t) = Y.at(e, f, t);
  for (const auto& block : m.encoder.stft_layers) ref = oracle::lightconv(ref, block);
  CHECK(oracle::rel_max_err(encode_stft(Y, m.encoder), ref) < 1e-12);
}

TEST_CASE("gammatone encoder equals blocks plus a frequency projection") {
  const RunConfig cfg = small_config();
  const ModelParams m = init_random(cfg, 4);
  std::mt19937_64 g(4);
  const ComplexTensor G = gamma_like(6, g);
  ComplexTensor x = ComplexTensor::bcft(1, 2, 64, 6);
  std::copy(G.data(), G.data() + G.size(), x.data());
  for (const auto& block : m.encoder.gamma_layers) x = oracle::lightconv(x, block);
  ComplexTensor ref = ComplexTensor::bcft(1, 8, 129, 6);
  for (std::size_t c = 0; c < 8; ++c)
    for (std::size_t f = 0; f < 129; ++f)
      for (std::size_t t = 0; t < 6; ++t) {
        cplx acc{};
        for (std::size_t k = 0; k < 64; ++k)
          acc += m.encoder.gamma_proj(static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(k)) * x.at(0, c, k, t);
        ref.at(0, c, f, t) = acc;
      }
  CHECK(oracle::rel_max_err(encode_gamma(G, m.encoder), ref) < 1e-12);
}

TEST_CASE("fuse matches the gate definition and preserves phase") {
  const RunConfig cfg = small_config();
  const ModelParams m = init_random(cfg, 5);
  std::mt19937_64 g(5);
  const ComplexTensor zs = oracle::random_bcft(1, 8, 10, 4, g);
  const ComplexTensor zg = oracle::random_bcft(1, 8, 10, 4, g);
  const ComplexTensor out = fuse(zs, zg, m.encoder);
  for (std::size_t c = 0; c < 8; ++c)
    for (std::size_t f = 0; f < 10; ++f)
      for (std::size_t t = 0; t < 4; ++t) {
        double a = m.encoder.fusion_bias[static_cast<Eigen::Index>(c)];
        for (std::size_t k = 0; k < 8; ++k)
          a += m.encoder.fusion_weight(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(k)) *
               std::abs(zg.at(0, k, f, t));
        const cplx ref = zs.at(0, c, f, t) * oracle::sigmoid(a);
        REQUIRE(std::abs(out.at(0, c, f, t) - ref) <= 1e-12 * (1.0 + std::abs(ref)));
        REQUIRE(oracle::phase_deviation(out.at(0, c, f, t), zs.at(0, c, f, t)) < 1e-12);
      }
}

TEST_CASE("zero gammatone features with zero bias halve Z_stft") {
  const RunConfig cfg = small_config();
  ModelParams m = init_random(cfg, 6);
  m.encoder.fusion_bias.setZero();
  std::mt19937_64 g(6);
  const ComplexTensor zs = oracle::random_bcft(1, 8, 5, 5, g);
  const ComplexTensor out = fuse(zs, ComplexTensor::bcft(1, 8, 5, 5), m.encoder);
  for (std::size_t i = 0; i < zs.size(); ++i) REQUIRE(out[i] == zs[i] * 0.5);
}

TEST_CASE("a large fusion bias saturates the gate to pass-through") {
  const RunConfig cfg = small_config();
  ModelParams m = init_random(cfg, 7);
  m.encoder.fusion_weight.setZero();
  m.encoder.fusion_bias.setConstant(30.0);
  std::mt19937_64 g(7);
  const ComplexTensor zs = oracle::random_bcft(1, 8, 5, 5, g);
  const ComplexTensor zg = oracle::random_bcft(1, 8, 5, 5, g);
  CHECK(oracle::rel_max_err(fuse(zs, zg, m.encoder), zs) < 1e-12);
}

TEST_CASE("attention map lies strictly inside (0, 1)") {
  const RunConfig cfg = small_config();
  const ModelParams m = init_random(cfg, 8);
  std::mt19937_64 g(8);
  for (int draw = 0; draw < 20; ++draw) {
    const ComplexTensor zg = oracle::random_bcft(1, 8, 6, 6, g, 2.0);
    for (double a : attention_map(zg, m.encoder)) {
      REQUIRE(a > 0.0);
      REQUIRE(a < 1.0);
    }
  }
}

TEST_CASE("disabled gammatone path equals fusing with zero features") {
  const RunConfig cfg = small_config();
  const ModelParams m = init_random(cfg, 9);
  std::mt19937_64 g(9);
  const ComplexTensor zs = oracle::random_bcft(1, 8, 7, 3, g);
  CHECK(oracle::max_abs_diff(fuse_without_gamma(zs, m.encoder), fuse(zs, ComplexTensor::bcft(1, 8, 7, 3), m.encoder)) ==
        0.0);
}

TEST_CASE("fusion rejects mismatched shapes") {
  const RunConfig cfg = small_config();
  const ModelParams m = init_random(cfg, 10);
  std::mt19937_64 g(10);
  const ComplexTensor a = oracle::random_bcft(1, 8, 7, 3, g);
  const ComplexTensor b = oracle::random_bcft(1, 8, 7, 4, g);
  CHECK(test_util::error_code([&] { fuse(a, b, m.encoder); }) == Errc::shape_mismatch);
  const ComplexTensor wrong_g = oracle::random_bcft(1, 2, 50, 3, g);
  CHECK(test_util::error_code([&] { project_frequency(wrong_g, m.encoder.gamma_proj); }) == Errc::shape_mismatch);
}

TEST_CASE("recalibration preserves phase") {
  const RunConfig cfg = small_config();
  const ModelParams m = init_random(cfg, 11);
  std::mt19937_64 g(11);
  const ComplexTensor z = oracle::random_bcft(1, 8, 9, 5, g);
  const ComplexTensor r = recalibrate(z, m.encoder.se);
  CHECK(oracle::rel_max_err(r, oracle::cse(z, m.encoder.se)) < 1e-13);
  for (std::size_t i = 0; i < z.size(); ++i) REQUIRE(oracle::phase_deviation(r[i], z[i]) < 1e-12);
}
