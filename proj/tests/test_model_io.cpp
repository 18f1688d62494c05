#include <catch_amalgamated.hpp>

#include <fstream>

#include "support/oracles.hpp"
#include "support/test_util.hpp"

using namespace gafnet;

namespace {

RunConfig small_config() {
  RunConfig cfg;
  cfg.arch.channels = 4;
  cfg.arch.mlp_hidden = 4;
  return cfg;
}

std::optional<std::uint64_t> format_offset(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const FormatError& e) {
    return e.offset();
  }
  return std::nullopt;
}

void write_bytes(const std::filesystem::path& p, const std::vector<unsigned char>& b) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
}

TensorFile mixed_file() {
  std::mt19937_64 g(1);
  TensorFile f;
  f.fingerprint = 0x1234;
  f.records.push_back(record_from_tensor("a", oracle::random_bcft(1, 2, 3, 4, g)));
  f.records.push_back(record_from_tensor("b", oracle::random_bcft(1, 1, 2, 2, g), false));
  TensorRecord r;
  r.name = "scalar";
  r.shape = {1};
  r.values = {2.5};
  f.records.push_back(r);
  return f;
}

}  // namespace

TEST_CASE("weights survive a save and load bit for bit") {
  const RunConfig cfg = small_config();
  const ModelParams m = init_random(cfg, 7);
  test_util::TempDir dir;
  save_weights(dir.path / "w.gafn", m);
  const ModelParams back = load_weights(dir.path / "w.gafn", cfg);
  const TensorFile a = weights_to_tensor_file(m), b = weights_to_tensor_file(back);
  REQUIRE(a.records.size() == b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    REQUIRE(a.records[i].name == b.records[i].name);
    REQUIRE(a.records[i].values == b.records[i].values);
  }
}

TEST_CASE("file writer and in-memory encoder agree byte for byte") {
  const TensorFile f = mixed_file();
  test_util::TempDir dir;
  write_tensor_file(dir.path / "t.gafn", f);
  std::ifstream in(dir.path / "t.gafn", std::ios::binary);
  const std::vector<unsigned char> disk{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  CHECK(disk == encode_tensor_file(f));

  const TensorFile back = read_tensor_file(dir.path / "t.gafn");
  CHECK(back.fingerprint == 0x1234);
  REQUIRE(back.records.size() == 3);
  CHECK(back.records[0].values == f.records[0].values);
  CHECK(back.records[0].axes == "bcft");
  for (std::size_t i = 0; i < f.records[1].values.size(); ++i)
    REQUIRE(back.records[1].values[i] == static_cast<double>(static_cast<float>(f.records[1].values[i])));
  CHECK(back.records[2].values == std::vector<double>{2.5});
  CHECK(oracle::max_abs_diff(tensor_from_record(back.records[0]), tensor_from_record(f.records[0])) == 0.0);
}

TEST_CASE("every truncation is a format error at a consistent offset") {
  const std::vector<unsigned char> bytes = encode_tensor_file(mixed_file());
  test_util::TempDir dir;
  for (std::size_t n = 0; n < bytes.size(); ++n) {
    const std::vector<unsigned char> cut(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(n));
    const auto mem = format_offset([&] { decode_tensor_file(cut); });
    REQUIRE(mem.has_value());
    REQUIRE(*mem <= n);
    write_bytes(dir.path / "cut.gafn", cut);
    REQUIRE(format_offset([&] { read_tensor_file(dir.path / "cut.gafn"); }) == mem);
  }
}

TEST_CASE("corrupt headers are located") {
  std::vector<unsigned char> bytes = encode_tensor_file(mixed_file());
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK(format_offset([&] { decode_tensor_file(bad_magic); }) == 0);
  auto bad_version = bytes;
  bad_version[4] = 9;
  CHECK(format_offset([&] { decode_tensor_file(bad_version); }) == 4);
  auto trailing = bytes;
  trailing.push_back(0);
  CHECK(format_offset([&] { decode_tensor_file(trailing); }) == bytes.size());
  // dtype byte of the first record follows magic, version, fingerprint, count, name length and name "a".
  auto bad_dtype = bytes;
  bad_dtype[4 + 4 + 8 + 4 + 2 + 1] = 7;
  CHECK(format_offset([&] { decode_tensor_file(bad_dtype); }) == 23);
}

TEST_CASE("architecture changes are refused at load") {
  RunConfig cfg = small_config();
  const ModelParams m = init_random(cfg, 1);
  test_util::TempDir dir;
  save_weights(dir.path / "w.gafn", m);
  RunConfig other = cfg;
  other.arch.n_coeffs = 7;
  CHECK(test_util::error_code([&] { load_weights(dir.path / "w.gafn", other); }) == Errc::config_mismatch);
  CHECK(exit_code_for(Errc::config_mismatch) == 3);
}

TEST_CASE("weight files with missing, extra or non-finite tensors are rejected") {
  const RunConfig cfg = small_config();
  TensorFile f = weights_to_tensor_file(init_random(cfg, 2));
  TensorFile missing = f;
  missing.records.pop_back();
  CHECK(test_util::error_code([&] { weights_from_tensor_file(missing, cfg); }) == Errc::format_error);
  TensorFile extra = f;
  extra.records.push_back(extra.records.front());
  extra.records.back().name = "stray";
  CHECK(test_util::error_code([&] { weights_from_tensor_file(extra, cfg); }) == Errc::format_error);
  TensorFile nan = f;
  nan.records[0].values[0] = std::nan("");
  CHECK(test_util::error_code([&] { weights_from_tensor_file(nan, cfg); }) == Errc::format_error);
  TensorFile reshaped = f;
  reshaped.records[0].shape.push_back(1);
  CHECK(test_util::error_code([&] { weights_from_tensor_file(reshaped, cfg); }) == Errc::format_error);
}

TEST_CASE("random initialization is seeded") {
  const RunConfig cfg = small_config();
  const TensorFile a = weights_to_tensor_file(init_random(cfg, 3));
  const TensorFile b = weights_to_tensor_file(init_random(cfg, 3));
  const TensorFile c = weights_to_tensor_file(init_random(cfg, 4));
  bool same = true, differs = false;
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    same = same && a.records[i].values == b.records[i].values;
    differs = differs || a.records[i].values != c.records[i].values;
  }
  CHECK(same);
  CHECK(differs);
}

TEST_CASE("initial weight scale follows the fan-in") {
  const RunConfig cfg;
  const ModelParams m = init_random(cfg, 5);
  auto rms = [](const auto& w) { return std::sqrt(w.cwiseAbs2().sum() / static_cast<double>(w.size())); };
  const double c = static_cast<double>(cfg.arch.channels);
  CHECK(rms(m.encoder.stft_layers[1].pointwise.weight) == Catch::Approx(1.0 / std::sqrt(c)).epsilon(0.2));
  CHECK(rms(m.decoder.head_s[0].depthwise) == Catch::Approx(1.0 / 3.0).epsilon(0.2));
  CHECK(rms(m.encoder.gamma_proj) == Catch::Approx(1.0 / 8.0).epsilon(0.2));
  CHECK(rms(m.gafm[0].mlp_w2) == Catch::Approx(1.0 / std::sqrt(c)).epsilon(0.2));
  CHECK(m.gafm[0].tau == cfg.tau);
  CHECK(m.decoder.out_s.bias.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("run configuration JSON round trip and strictness") {
  RunConfig c;
  c.arch.n_coeffs = 7;
  c.eps = 1e-6;
  c.ablations.global_drg = true;
  c.ratf_denominator = RatfDenominator::complex_square;
  c.loss.kappa = 3.0;
  const nlohmann::json j = c;
  const RunConfig back = j.get<RunConfig>();
  CHECK(nlohmann::json(back) == j);
  CHECK(back.arch.fingerprint() == c.arch.fingerprint());

  CHECK(test_util::error_code([] { nlohmann::json{{"tua", 1.0}}.get<RunConfig>(); }) == Errc::format_error);
  CHECK(test_util::error_code([] {
          nlohmann::json{{"architecture", {{"chanels", 4}}}}.get<RunConfig>();
        }) == Errc::format_error);
  CHECK(test_util::error_code([] { nlohmann::json{{"ratf_denominator", "odd"}}.get<RunConfig>(); }) ==
        Errc::format_error);

  test_util::TempDir dir;
  std::ofstream(dir.path / "c.json") << R"({"tau": 0.0})";
  CHECK(test_util::error_code([&] { load_run_config(dir.path / "c.json"); }) == Errc::invalid_argument);
  std::ofstream(dir.path / "broken.json") << "{";
  CHECK(test_util::error_code([&] { load_run_config(dir.path / "broken.json"); }) == Errc::format_error);
  std::ofstream(dir.path / "ok.json") << R"({"architecture": {"n_coeffs": 5}, "threads": 2})";
  const RunConfig ok = load_run_config(dir.path / "ok.json");
  CHECK(ok.arch.n_coeffs == 5);
  CHECK(ok.threads == 2);
}

TEST_CASE("fingerprint tracks architecture only") {
  ArchConfig a, b;
  CHECK(a.fingerprint() == b.fingerprint());
  b.kernel_2d_t = 5;
  CHECK(a.fingerprint() != b.fingerprint());
  RunConfig r1, r2;
  r2.eps = 1e-3;
  CHECK(init_random(r1, 1).fingerprint() == init_random(r2, 1).fingerprint());
}

TEST_CASE("error codes map to process exit codes") {
  CHECK(exit_code_for(Errc::input_too_short) == 2);
  CHECK(exit_code_for(Errc::io_error) == 2);
  CHECK(exit_code_for(Errc::format_error) == 3);
  CHECK(exit_code_for(Errc::invariant_violation) == 4);
  CHECK(errc_name(Errc::shape_mismatch) == "ShapeMismatch");
}
