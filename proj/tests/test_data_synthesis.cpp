#include <catch_amalgamated.hpp>

#include <fstream>

#include "support/oracles.hpp"
#include "support/test_util.hpp"

using namespace gafnet;

namespace {

std::vector<double> random_mono(std::size_t n, std::mt19937_64& g) {
  std::normal_distribution<double> nd(0.0, 0.3);
  std::vector<double> x(n);
  for (double& v : x) v = nd(g);
  return x;
}

HrirSet single_entry(double az, StereoIr ir) {
  HrirSet set;
  set.entries[az] = std::move(ir);
  return set;
}

double energy(const std::vector<double>& x) {
  double e = 0.0;
  for (double v : x) e += v * v;
  return e;
}

}  // namespace

TEST_CASE("unit impulse HRIRs pass the source through") {
  std::mt19937_64 g(1);
  const auto x = random_mono(500, g);
  StereoIr ir{std::vector<double>(16, 0.0), std::vector<double>(16, 0.0)};
  ir[0][0] = ir[1][0] = 1.0;
  const Waveform w = spatialize(x, single_entry(0.0, ir), 0.0);
  CHECK(w.ears[0] == x);
  CHECK(w.ears[1] == x);
}

TEST_CASE("level and delay of the HRIR show up as ILD and lag") {
  std::mt19937_64 g(2);
  const auto x = random_mono(4000, g);
  StereoIr ir{std::vector<double>(32, 0.0), std::vector<double>(32, 0.0)};
  ir[0][0] = 1.0;
  ir[1][8] = 0.5;
  const Waveform w = spatialize(x, single_entry(30.0, ir), 30.0);
  // Compare over the part both ears cover.
  const std::vector<double> l(w.ears[0].begin() + 8, w.ears[0].end() - 8);
  const std::vector<double> r(w.ears[1].begin() + 8, w.ears[1].end() - 8);
  CHECK(10.0 * std::log10(energy(l) / energy(r)) == Catch::Approx(6.0206).margin(0.05));
  int best_lag = 0;
  double best = -1e300;
  for (int lag = -20; lag <= 20; ++lag) {
    double c = 0.0;
    for (std::size_t n = 40; n + 40 < x.size(); ++n) c += w.ears[0][n] * w.ears[1][static_cast<std::size_t>(static_cast<int>(n) + lag)];
    if (c > best) {
      best = c;
      best_lag = lag;
    }
  }
  CHECK(best_lag == 8);
}

TEST_CASE("silent source spatializes to silence") {
  const HrirSet set = spherical_head_hrirs({-45.0, 0.0, 45.0});
  const Waveform w = spatialize(std::vector<double>(300, 0.0), set, 45.0);
  CHECK(total_power(w) == 0.0);
}

TEST_CASE("spatialization is linear") {
  std::mt19937_64 g(3);
  const HrirSet set = spherical_head_hrirs({-60.0, 20.0});
  const auto x = random_mono(1000, g), y = random_mono(1000, g);
  std::vector<double> mix(1000);
  for (std::size_t n = 0; n < 1000; ++n) mix[n] = 0.7 * x[n] - 1.9 * y[n];
  const Waveform a = spatialize(mix, set, 20.0), wx = spatialize(x, set, 20.0), wy = spatialize(y, set, 20.0);
  for (std::size_t e = 0; e < 2; ++e)
    for (std::size_t n = 0; n < 1000; ++n) REQUIRE(std::abs(a.ears[e][n] - (0.7 * wx.ears[e][n] - 1.9 * wy.ears[e][n])) < 1e-12);
}

TEST_CASE("mirrored azimuths swap ear levels") {
  const HrirSet set = spherical_head_hrirs({-60.0, -30.0, 30.0, 60.0});
  for (int seed = 0; seed < 10; ++seed) {
    std::mt19937_64 g(50 + seed);
    const auto x = random_mono(8000, g);
    for (double az : {30.0, 60.0}) {
      const Waveform right = spatialize(x, set, az), left = spatialize(x, set, -az);
      const double ild_r = 10.0 * std::log10(energy(right.ears[0]) / energy(right.ears[1]));
      const double ild_l = 10.0 * std::log10(energy(left.ears[0]) / energy(left.ears[1]));
      REQUIRE(ild_r < 0.0);
      REQUIRE(std::abs(ild_r + ild_l) < 1.0);
    }
  }
}

TEST_CASE("spherical head sets are symmetric at the front") {
  const HrirSet set = spherical_head_hrirs({0.0});
  const auto& ir = set.nearest(0.0);
  CHECK(ir[0] == ir[1]);
  CHECK(test_util::error_code([&] { set.nearest(10.0); }) == Errc::azimuth_unavailable);
  CHECK(&set.nearest(0.5) == &ir);
}

TEST_CASE("hrir sets survive a save and load") {
  test_util::TempDir dir;
  const HrirSet set = spherical_head_hrirs({-90.0, -15.0, 0.0, 45.0});
  save_hrir_set(dir.path / "h", set);
  const HrirSet back = load_hrir_set(dir.path / "h");
  CHECK(back.azimuths() == set.azimuths());
  for (const auto& [az, ir] : set.entries)
    for (std::size_t e = 0; e < 2; ++e)
      for (std::size_t n = 0; n < ir[e].size(); ++n)
        REQUIRE(back.entries.at(az)[e][n] == static_cast<double>(static_cast<float>(ir[e][n])));
}

TEST_CASE("diffuse noise is unit RMS, seeded and needs enough source") {
  const HrirSet set = spherical_head_hrirs({-90.0, 0.0, 90.0, 180.0 - 15.0});
  std::mt19937_64 g(4);
  const auto src = random_mono(5000, g);
  const Waveform a = make_diffuse_noise(src, set, 1000, 7), b = make_diffuse_noise(src, set, 1000, 7);
  CHECK(a.ears == b.ears);
  CHECK(total_power(a) / 2000.0 == Catch::Approx(1.0).epsilon(1e-12));
  CHECK(make_diffuse_noise(src, set, 1000, 8).ears != a.ears);
  CHECK(test_util::error_code([&] { make_diffuse_noise(src, set, 1300, 7); }) == Errc::noise_source_too_short);

  const HrirSet one = spherical_head_hrirs({0.0});
  CHECK(make_diffuse_noise(src, one, 5000, 1).n_samples() == 5000);
  CHECK(test_util::error_code([&] { make_diffuse_noise(std::vector<double>(1000, 0.0), one, 1000, 1); }) ==
        Errc::degenerate_mix);
}

TEST_CASE("mixing hits the requested SNR") {
  std::mt19937_64 g(5);
  const Waveform s = oracle::random_waveform(3000, g), n = oracle::random_waveform(3000, g, 2.0);
  for (double snr : {-20.0, -6.0, 0.0, 7.5, 120.0}) {
    const MixResult m = mix_at_snr(s, n, snr);
    REQUIRE(m.measured_snr_db == Catch::Approx(snr).margin(1e-9));
    for (std::size_t e = 0; e < 2; ++e)
      for (std::size_t i = 0; i < 3000; ++i) REQUIRE(m.mixture.ears[e][i] == s.ears[e][i] + m.scaled_noise.ears[e][i]);
  }
  CHECK(test_util::error_code([&] { mix_at_snr(Waveform(16000, 3000), n, 0.0); }) == Errc::degenerate_mix);
  CHECK(test_util::error_code([&] { mix_at_snr(s, Waveform(16000, 3000), 0.0); }) == Errc::degenerate_mix);
  CHECK(test_util::error_code([&] { mix_at_snr(s, Waveform(16000, 10), 0.0); }) == Errc::shape_mismatch);
}

TEST_CASE("item synthesis is deterministic in the seed") {
  const HrirSet set = spherical_head_hrirs({-90.0, -45.0, 0.0, 45.0, 90.0, 135.0});
  const auto speech = synthetic_speech(16000, 16000, 1);
  const auto noise = white_noise(16000 * 7, 2);
  MixSpec spec;
  spec.id = "a";
  spec.seed = 99;
  spec.duration_s = 0.5;
  const SynthesizedItem a = synthesize_item(spec, speech, noise, set), b = synthesize_item(spec, speech, noise, set);
  CHECK(a.mixture.ears == b.mixture.ears);
  CHECK(a.azimuth == b.azimuth);
  CHECK(a.azimuth >= -90.0);
  CHECK(a.azimuth <= 90.0);
  CHECK(a.snr_db >= -7.0);
  CHECK(a.snr_db <= 16.0);
  CHECK(a.measured_snr_db == Catch::Approx(a.snr_db).margin(1e-9));
  CHECK(a.clean.n_samples() == 8000);
  spec.seed = 100;
  CHECK(synthesize_item(spec, speech, noise, set).mixture.ears != a.mixture.ears);
}

TEST_CASE("manifests round trip and expand over the SNR grid") {
  test_util::TempDir dir;
  CHECK(test_snr_grid() == std::vector<double>{-6, -3, 0, 3, 6, 9, 12, 15});
  MixSpec s;
  s.id = "x";
  s.speech = "s.wav";
  s.noise = "n.wav";
  s.hrir_dir = "h";
  s.azimuth = -30.0;
  s.seed = 5;
  write_manifest(dir.path / "one.jsonl", {s});
  const auto back = read_manifest(dir.path / "one.jsonl");
  REQUIRE(back.size() == 1);
  CHECK(mix_spec_to_json(back[0]) == mix_spec_to_json(s));

  write_manifest(dir.path / "none.jsonl", {});
  CHECK(read_manifest(dir.path / "none.jsonl").empty());

  const auto grid = expand_snr_grid({s});
  REQUIRE(grid.size() == 8);
  CHECK(grid.front().id == "x_snr-6");
  CHECK(grid.back().id == "x_snr15");
  CHECK(*grid[2].snr_db == 0.0);
}

TEST_CASE("malformed manifests are rejected") {
  test_util::TempDir dir;
  std::ofstream(dir.path / "bad.jsonl") << "{\"id\": \"a\"\n";
  CHECK(test_util::error_code([&] { read_manifest(dir.path / "bad.jsonl"); }) == Errc::format_error);
  std::ofstream(dir.path / "az.jsonl")
      << R"({"id":"a","speech":"s","noise":"n","hrir_dir":"h","azimuth":120})" << '\n';
  CHECK(test_util::error_code([&] { read_manifest(dir.path / "az.jsonl"); }) == Errc::invalid_argument);
  CHECK(test_util::error_code([&] { read_manifest(dir.path / "missing.jsonl"); }) == Errc::io_error);
}

TEST_CASE("dataset generation writes items and collects failures") {
  test_util::TempDir dir;
  const auto manifest = write_demo_corpus(dir.path / "corpus", 2, 3, 0.5);
  auto specs = read_manifest(manifest);
  REQUIRE(specs.size() == 2);
  MixSpec broken = specs[0];
  broken.id = "broken";
  broken.speech = dir.path / "nope.wav";
  specs.push_back(broken);

  const DatasetSummary sum = generate_dataset(specs, dir.path / "out", 2);
  CHECK(sum.n_items == 3);
  CHECK(sum.n_ok == 2);
  REQUIRE(sum.failures.size() == 1);
  CHECK(sum.failures[0].id == "broken");
  for (const auto& rec : sum.records) {
    const Waveform mix = read_stereo_wav(dir.path / "out" / rec["mix_wav"].get<std::string>());
    const Waveform clean = read_stereo_wav(dir.path / "out" / rec["clean_wav"].get<std::string>());
    const Waveform noise = read_stereo_wav(dir.path / "out" / rec["noise_wav"].get<std::string>());
    CHECK(mix.n_samples() == 8000);
    CHECK(measure_snr_db(clean, noise) == Catch::Approx(rec["snr_db"].get<double>()).margin(0.01));
  }
  std::ifstream meta(dir.path / "out" / "metadata.jsonl");
  std::size_t lines = 0;
  for (std::string line; std::getline(meta, line);) ++lines;
  CHECK(lines == 2);

  const DatasetSummary empty = generate_dataset({}, dir.path / "empty");
  CHECK(empty.n_items == 0);
  CHECK(std::filesystem::file_size(dir.path / "empty" / "metadata.jsonl") == 0);
}

TEST_CASE("synthetic signals are seeded and bounded") {
  const auto a = synthetic_speech(8000, 16000, 1), b = synthetic_speech(8000, 16000, 1);
  CHECK(a == b);
  CHECK(synthetic_speech(8000, 16000, 2) != a);
  double peak = 0.0;
  for (double v : a) peak = std::max(peak, std::abs(v));
  CHECK(peak > 0.1);
  CHECK(peak < 1.0);
  const auto n = white_noise(10000, 3);
  CHECK(std::sqrt(energy(n) / 10000.0) == Catch::Approx(0.1).epsilon(0.05));
}
