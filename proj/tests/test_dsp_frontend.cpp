#include <catch_amalgamated.hpp>

#include "support/oracles.hpp"
#include "support/test_util.hpp"

using namespace gafnet;

TEST_CASE("stft frame count follows the closed form") {
  const AnalysisConfig cfg;
  const Waveform w(16000, 32000);
  const Spectrogram S = stft(w, cfg);
  CHECK(S.n_frames() == 249);
  CHECK(S.n_freq() == 129);
  CHECK(frames_per_second(cfg) == 124);
}

TEST_CASE("frame count formula for every length in [256, 48000]") {
  const AnalysisConfig cfg;
  for (std::size_t n = 256; n <= 48000; ++n) {
    std::size_t expect = 0;
    for (std::size_t start = 0; start + 256 <= n; start += 128) ++expect;
    REQUIRE(frame_count(n, cfg) == expect);
  }
  // Spot-check against the transform itself.
  for (std::size_t n : {256u, 383u, 384u, 1000u, 16001u}) {
    const Spectrogram S = stft(Waveform(16000, n), cfg);
    CHECK(S.n_frames() == frame_count(n, cfg));
    CHECK(istft(S).n_samples() == synthesis_length(S.n_frames(), cfg));
  }
}

TEST_CASE("stft of silence is silent and istft of zeros is zeros") {
  const AnalysisConfig cfg;
  const Spectrogram S = stft(Waveform(16000, 4000), cfg);
  CHECK(oracle::max_abs(S.bins) == 0.0);
  const Waveform w = istft(Spectrogram(cfg, 10));
  for (const auto& ch : w.ears)
    for (double v : ch) REQUIRE(v == 0.0);
}

TEST_CASE("1 kHz tone peaks at bin 16 and matches a direct DFT") {
  const AnalysisConfig cfg;
  Waveform w(16000, 2048);
  for (std::size_t n = 0; n < w.n_samples(); ++n)
    w.ears[0][n] = w.ears[1][n] = std::sin(2.0 * std::numbers::pi * 1000.0 * static_cast<double>(n) / 16000.0);
  const Spectrogram S = stft(w, cfg);
  const std::size_t t = 3;
  std::size_t peak = 0;
  for (std::size_t f = 0; f < S.n_freq(); ++f)
    if (std::abs(S.at(0, f, t)) > std::abs(S.at(0, peak, t))) peak = f;
  CHECK(peak == 16);

  const auto win = analysis_window(cfg);
  std::vector<double> frame(256);
  for (std::size_t n = 0; n < 256; ++n) frame[n] = win[n] * w.ears[0][t * 128 + n];
  const auto X = oracle::naive_dft(frame);
  double worst = 0.0;
  for (std::size_t f = 0; f < X.size(); ++f) worst = std::max(worst, std::abs(X[f] - S.at(0, f, t)));
  CHECK(worst < 1e-9);
}

TEST_CASE("round trip on the interior for random waveforms") {
  const AnalysisConfig cfg;
  for (int seed = 0; seed < 100; ++seed) {
    std::mt19937_64 g(seed);
    std::uniform_int_distribution<std::size_t> len(2000, 20000);
    const Waveform w = oracle::random_waveform(len(g), g);
    const Waveform back = istft(stft(w, cfg));
    const auto r = interior_region(back.n_samples(), cfg);
    for (std::size_t e = 0; e < 2; ++e) REQUIRE(oracle::rel_l2(back.ears[e], w.ears[e], r.begin, r.end) < 1e-6);
  }
}

TEST_CASE("single nonzero frame synthesizes only on its window span") {
  const AnalysisConfig cfg;
  std::mt19937_64 g(1);
  Spectrogram S(cfg, 9);
  for (std::size_t f = 0; f < S.n_freq(); ++f) {
    S.at(0, f, 4) = oracle::rand_c(g);
    S.at(1, f, 4) = oracle::rand_c(g);
  }
  // DC and Nyquist bins of a real signal are real.
  for (std::size_t e = 0; e < 2; ++e) {
    S.at(e, 0, 4).imag(0.0);
    S.at(e, 128, 4).imag(0.0);
  }
  const Waveform w = istft(S);
  bool inside_nonzero = false;
  for (std::size_t n = 0; n < w.n_samples(); ++n)
    for (std::size_t e = 0; e < 2; ++e) {
      const bool inside = n >= 4 * 128 && n < 4 * 128 + 256;
      if (!inside) REQUIRE(w.ears[e][n] == 0.0);
      else inside_nonzero = inside_nonzero || w.ears[e][n] != 0.0;
    }
  CHECK(inside_nonzero);
}

TEST_CASE("COLA: squared window sums to a constant on the interior") {
  const AnalysisConfig cfg;
  const auto s = window_power_sum(50, cfg);
  const auto r = interior_region(s.size(), cfg);
  for (std::size_t n = r.begin; n < r.end; ++n) REQUIRE(std::abs(s[n] - 1.0) < 1e-10);
}

TEST_CASE("Parseval per frame through the one-sided layout") {
  const AnalysisConfig cfg;
  std::mt19937_64 g(8);
  const Waveform w = oracle::random_waveform(2048, g);
  const Spectrogram S = stft(w, cfg);
  const auto win = analysis_window(cfg);
  for (std::size_t t = 0; t < S.n_frames(); ++t) {
    double time_energy = 0.0;
    for (std::size_t n = 0; n < 256; ++n) time_energy += std::pow(win[n] * w.ears[1][t * 128 + n], 2);
    // Interior bins stand for a conjugate pair; DC and Nyquist appear once.
    double freq_energy = std::norm(S.at(1, 0, t)) + std::norm(S.at(1, 128, t));
    for (std::size_t f = 1; f < 128; ++f) freq_energy += 2.0 * std::norm(S.at(1, f, t));
    REQUIRE(std::abs(time_energy - freq_energy / 256.0) <= 1e-8 * time_energy);
  }
}

TEST_CASE("stft rejects short input and mismatched rates") {
  const AnalysisConfig cfg;
  CHECK(test_util::error_code([&] { stft(Waveform(16000, 255), cfg); }) == Errc::input_too_short);
  CHECK(test_util::error_code([&] { stft(Waveform(8000, 1000), cfg); }) == Errc::invalid_argument);
  Spectrogram bad(cfg, 4);
  bad.bins = ComplexTensor({Axis::channel, Axis::frequency, Axis::time}, {2, 100, 4});
  CHECK(test_util::error_code([&] { istft(bad); }) == Errc::shape_mismatch);
}

TEST_CASE("gammatone centers are ERB spaced and increasing") {
  const AnalysisConfig cfg;
  const GammatoneBank bank = build_gammatone_bank(cfg, 64, 50.0, 7800.0, 1024);
  const auto& fc = bank.center_freqs();
  REQUIRE(fc.size() == 64);
  CHECK(fc.front() == Catch::Approx(50.0).epsilon(1e-9));
  CHECK(fc.back() == Catch::Approx(7800.0).epsilon(1e-9));
  for (std::size_t k = 1; k < fc.size(); ++k) REQUIRE(fc[k] > fc[k - 1]);
  for (std::size_t k = 2; k < fc.size(); ++k)
    REQUIRE(erb_rate(fc[k]) - erb_rate(fc[k - 1]) == Catch::Approx(erb_rate(fc[1]) - erb_rate(fc[0])).epsilon(1e-9));

  const GammatoneBank one = build_gammatone_bank(cfg, 1, 50.0, 7800.0, 1024);
  CHECK(one.center_freqs()[0] == Catch::Approx(erb_rate_to_hz(0.5 * (erb_rate(50.0) + erb_rate(7800.0)))));
}

TEST_CASE("gammatone magnitude response is 1 at each center frequency") {
  const AnalysisConfig cfg;
  const GammatoneBank bank = build_gammatone_bank(cfg);
  for (std::size_t k = 0; k < bank.n_channels(); ++k) {
    const auto& h = bank.impulse_responses()[k];
    const double fc = bank.center_freqs()[k];
    cplx H{};
    for (std::size_t n = 0; n < h.size(); ++n)
      H += h[n] * cplx(std::cos(2.0 * std::numbers::pi * fc * n / 16000.0),
                       -std::sin(2.0 * std::numbers::pi * fc * n / 16000.0));
    REQUIRE(std::abs(std::abs(H) - 1.0) <= 0.01);
  }
}

TEST_CASE("gammatone filtering matches direct convolution") {
  const AnalysisConfig cfg;
  const GammatoneBank bank = build_gammatone_bank(cfg, 8, 100.0, 6000.0, 128);
  std::mt19937_64 g(2);
  const Waveform w = oracle::random_waveform(1500, g);
  const auto y = bank.filter(w.ears[0]);
  for (std::size_t k = 0; k < bank.n_channels(); ++k) {
    const auto ref = oracle::direct_convolution(w.ears[0], bank.impulse_responses()[k]);
    double worst = 0.0, scale = 0.0;
    for (std::size_t n = 0; n < ref.size(); ++n) {
      worst = std::max(worst, std::abs(y[k][n] - ref[n]));
      scale = std::max(scale, std::abs(ref[n]));
    }
    REQUIRE(worst <= 1e-10 * scale);
  }
}

TEST_CASE("gammatone frames share the STFT grid and behave on silence and noise") {
  const AnalysisConfig cfg;
  const GammatoneBank bank = build_gammatone_bank(cfg);
  const ComplexTensor zero = gammatone_frames(Waveform(16000, 5000), bank, cfg);
  CHECK(zero.dim(2) == stft(Waveform(16000, 5000), cfg).n_frames());
  CHECK(oracle::max_abs(zero) == 0.0);
  for (int seed = 0; seed < 10; ++seed) {
    std::mt19937_64 g(100 + seed);
    const Waveform w = oracle::random_waveform(4000, g);
    const ComplexTensor G = gammatone_frames(w, bank, cfg);
    REQUIRE(G.shape() == std::vector<std::size_t>{2, 64, frame_count(4000, cfg)});
    for (const auto& z : G.values()) {
      REQUIRE(z.real() > 0.0);
      REQUIRE(z.imag() == 0.0);
    }
  }
}

TEST_CASE("gammatone frame feature is log(1 + frame energy)") {
  const AnalysisConfig cfg;
  const GammatoneBank bank = build_gammatone_bank(cfg, 4, 200.0, 4000.0, 64);
  std::mt19937_64 g(6);
  const Waveform w = oracle::random_waveform(1024, g);
  const ComplexTensor G = gammatone_frames(w, bank, cfg);
  for (std::size_t e = 0; e < 2; ++e)
    for (std::size_t k = 0; k < 4; ++k) {
      const auto y = oracle::direct_convolution(w.ears[e], bank.impulse_responses()[k]);
      for (std::size_t t = 0; t < G.dim(2); ++t) {
        double energy = 0.0;
        for (std::size_t n = 0; n < 256; ++n) energy += y[t * 128 + n] * y[t * 128 + n];
        REQUIRE(G.at(e, k, t).real() == Catch::Approx(std::log1p(energy)).epsilon(1e-9));
      }
    }
}

TEST_CASE("invalid gammatone band edges") {
  const AnalysisConfig cfg;
  CHECK(test_util::error_code([&] { build_gammatone_bank(cfg, 64, 0.0, 7000.0); }) == Errc::invalid_band);
  CHECK(test_util::error_code([&] { build_gammatone_bank(cfg, 64, 500.0, 400.0); }) == Errc::invalid_band);
  CHECK(test_util::error_code([&] { build_gammatone_bank(cfg, 64, 50.0, 8000.0); }) == Errc::invalid_band);
}

TEST_CASE("wav round trip in float32 and pcm16") {
  std::mt19937_64 g(4);
  Waveform w = oracle::random_waveform(777, g, 0.2);
  test_util::TempDir dir;
  write_stereo_wav(dir.path / "f.wav", w, SampleFormat::float32);
  const Waveform f = read_stereo_wav(dir.path / "f.wav");
  for (std::size_t e = 0; e < 2; ++e)
    for (std::size_t n = 0; n < w.n_samples(); ++n)
      REQUIRE(f.ears[e][n] == static_cast<double>(static_cast<float>(w.ears[e][n])));
  write_stereo_wav(dir.path / "p.wav", w, SampleFormat::pcm16);
  const Waveform p = read_stereo_wav(dir.path / "p.wav");
  for (std::size_t e = 0; e < 2; ++e)
    for (std::size_t n = 0; n < w.n_samples(); ++n) REQUIRE(std::abs(p.ears[e][n] - w.ears[e][n]) <= 1.0 / 32768.0);
}

TEST_CASE("wav reader rejects unsupported formats") {
  test_util::TempDir dir;
  WavData mono;
  mono.sample_rate = 16000;
  mono.channels = {std::vector<double>(100, 0.1)};
  write_wav(dir.path / "mono.wav", mono);
  CHECK(test_util::error_code([&] { read_stereo_wav(dir.path / "mono.wav"); }) == Errc::unsupported_format);
  WavData fast;
  fast.sample_rate = 44100;
  fast.channels = {std::vector<double>(100, 0.1), std::vector<double>(100, 0.1)};
  write_wav(dir.path / "fast.wav", fast);
  CHECK(test_util::error_code([&] { read_stereo_wav(dir.path / "fast.wav"); }) == Errc::unsupported_format);
  std::vector<unsigned char> junk{'R', 'I', 'F', 'F', 0, 0};
  CHECK(test_util::error_code([&] { decode_wav(junk); }) != std::nullopt);
}
