// gafnet command-line tool: enhance, synth, metrics, bench, init, selftest.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "gafnet/gafnet.hpp"
#include "support/acceptance.hpp"

namespace fs = std::filesystem;
using namespace gafnet;

namespace {

// Flags shared by every subcommand that builds a model.
struct ModelFlags {
  std::string model;
  std::string config;
  std::uint64_t seed = 0;
  std::vector<std::string> ablate;
  unsigned threads = 1;

  void attach(CLI::App* app) {
    app->add_option("--model", model, "weight file; random weights from --seed when absent");
    app->add_option("--config", config, "run configuration JSON; built-in defaults when absent");
    app->add_option("--seed", seed, "seed for random weights")->capture_default_str();
    app->add_option("--ablate", ablate, "no_gammatone | no_gafm | no_drg | global_drg (repeatable)");
    app->add_option("--threads", threads, "worker threads for the frequency-parallel stages")->capture_default_str();
  }

  RunConfig run_config() const {
    RunConfig cfg = config.empty() ? RunConfig{} : load_run_config(config);
    for (const auto& a : ablate) cfg.ablations.set(a);
    cfg.threads = threads;
    cfg.validate();
    return cfg;
  }

  std::unique_ptr<Enhancer> enhancer() const {
    const RunConfig cfg = run_config();
    ModelParams m = model.empty() ? init_random(cfg, seed) : load_weights(model, cfg);
    return std::make_unique<Enhancer>(std::move(m), cfg);
  }
};

void write_json_file(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) fail(Errc::io_error, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

nlohmann::json gate_stats(const GateMap& g) {
  double sum = 0.0, lo = 1.0, hi = 0.0;
  for (double v : g.values) {
    sum += v;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  return {{"mean", sum / static_cast<double>(g.values.size())}, {"min", lo}, {"max", hi}};
}

int run_enhance(const ModelFlags& mf, const std::string& in, const std::string& out,
                const std::vector<std::string>& dump, std::string dump_path, std::optional<double> gate,
                const std::string& report) {
  const auto enh = mf.enhancer();
  const Waveform x = read_stereo_wav(in, enh->config().analysis.sample_rate);
  EnhanceOptions opt;
  opt.forced_gate = gate;
  opt.record_stages = !dump.empty();
  const EnhanceResult r = enh->enhance(x, opt);
  write_stereo_wav(out, r.output);
  if (!dump.empty()) {
    if (dump_path.empty()) dump_path = out + ".stages.gafn";
    const bool all = std::find(dump.begin(), dump.end(), "all") != dump.end();
    write_stage_dump(dump_path, r.spectral, enh->model().fingerprint(), all ? std::vector<std::string>{} : dump);
  }
  if (!report.empty()) {
    write_json_file(report, {{"input", in},
                             {"output", out},
                             {"samples", x.n_samples()},
                             {"fingerprint", enh->model().fingerprint()},
                             {"gate", gate_stats(r.spectral.gate)}});
  }
  return 0;
}

int run_synth(const std::string& manifest, std::size_t demo, const std::string& out, std::uint64_t seed,
              std::optional<double> snr, std::optional<double> azimuth, bool grid, double duration,
              unsigned threads) {
  std::vector<MixSpec> specs;
  if (demo > 0) {
    specs = read_manifest(write_demo_corpus(fs::path(out) / "sources", demo, seed, duration));
  } else {
    require(!manifest.empty(), Errc::invalid_argument, "synth needs --manifest or --demo");
    specs = read_manifest(manifest);
  }
  for (auto& s : specs) {
    if (snr) s.snr_db = *snr;
    if (azimuth) s.azimuth = *azimuth;
  }
  if (grid) specs = expand_snr_grid(specs);
  const DatasetSummary summary = generate_dataset(specs, out, threads);
  for (const auto& f : summary.failures) std::cerr << "synth: " << f.id << ": " << f.message << '\n';
  std::cout << summary.n_ok << "/" << summary.n_items << " items written to " << out << '\n';
  return summary.failures.empty() ? 0 : 2;
}

int run_metrics(const ModelFlags& mf, const std::string& data, const std::string& report,
                const std::string& scorer, std::string enhanced_dir) {
  const auto enh = mf.enhancer();
  const fs::path dir(data);
  const fs::path meta = fs::is_directory(dir) ? dir / "metadata.jsonl" : dir;
  std::ifstream in(meta);
  if (!in) fail(Errc::io_error, "cannot open " + meta.string());
  if (enhanced_dir.empty() && !scorer.empty()) enhanced_dir = (meta.parent_path() / "enhanced").string();
  if (!enhanced_dir.empty()) fs::create_directories(enhanced_dir);

  std::ofstream report_file;
  if (!report.empty()) {
    report_file.open(report);
    if (!report_file) fail(Errc::io_error, "cannot write " + report);
  }
  std::ostream& os = report.empty() ? std::cout : report_file;
  CueLossOptions cue;
  cue.floor_db = enh->config().cue_floor_db;
  cue.masked = enh->config().masked_cues;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      fail(Errc::format_error, meta.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    const std::string id = rec.at("id").get<std::string>();
    const fs::path clean_path = meta.parent_path() / rec.at("clean_wav").get<std::string>();
    const fs::path mix_path = meta.parent_path() / rec.at("mix_wav").get<std::string>();
    const int rate = enh->config().analysis.sample_rate;
    const Waveform clean = read_stereo_wav(clean_path, rate);
    const Waveform noisy = read_stereo_wav(mix_path, rate);
    const EnhanceResult r = enh->enhance(noisy);
    UtteranceMetrics m = utterance_metrics(id, clean, noisy, r.output, enh->config().analysis, cue, &r.spectral.gate);
    if (!enhanced_dir.empty()) {
      const fs::path enhanced_path = fs::path(enhanced_dir) / (id + "_enhanced.wav");
      write_stereo_wav(enhanced_path, r.output);
      if (!scorer.empty()) {
        const ExternalScore s = run_external_scorer(scorer, clean_path, mix_path, enhanced_path);
        m.mbstoi = s.mbstoi;
        m.delta_pesq = s.delta_pesq;
      }
    }
    os << to_json(m).dump() << '\n';
  }
  return 0;
}

int run_bench(const ModelFlags& mf, bool rtf, std::size_t repeats, std::vector<unsigned> thread_counts,
              const std::string& report, bool table) {
  const RunConfig cfg = mf.run_config();
  ComplexityReport r = complexity_report(cfg);
  if (rtf) {
    if (thread_counts.empty()) thread_counts = {cfg.threads};
    const ModelParams m = mf.model.empty() ? init_random(cfg, mf.seed) : load_weights(mf.model, cfg);
    const auto shared = std::make_shared<const ModelParams>(m);
    std::mt19937_64 gen(mf.seed);
    std::normal_distribution<double> nd(0.0, 0.1);
    Waveform audio(cfg.analysis.sample_rate, 2 * static_cast<std::size_t>(cfg.analysis.sample_rate));
    for (auto& ch : audio.ears)
      for (double& v : ch) v = nd(gen);
    for (unsigned t : thread_counts) {
      RunConfig c = cfg;
      c.threads = t;
      const Enhancer enh(shared, c);
      r.rtf.push_back(measure_rtf(enh, audio, repeats));
    }
  }
  if (!report.empty()) write_json_file(report, to_json(r));
  if (table) std::cout << complexity_table(r);
  else if (report.empty()) std::cout << to_json(r).dump(2) << '\n';
  return 0;
}

int run_init(const ModelFlags& mf, const std::string& out) {
  const RunConfig cfg = mf.run_config();
  const ModelParams m = init_random(cfg, mf.seed);
  save_weights(out, m);
  std::cout << "wrote " << out << " (" << count_params_walk(m) << " parameters, fingerprint " << std::hex
            << m.fingerprint() << std::dec << ")\n";
  return 0;
}

int run_selftest(const std::vector<int>& only) {
  const auto results = acceptance::run_all(only);
  std::size_t passed = 0;
  for (const auto& r : results) passed += r.passed ? 1 : 0;
  std::printf("%zu/%zu checks passed\n", passed, results.size());
  return passed == results.size() ? 0 : 4;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Binaural speech enhancement inference and verification"};
  app.require_subcommand(1);

  ModelFlags mf;

  auto* enhance = app.add_subcommand("enhance", "enhance a stereo 16 kHz WAV file");
  std::string in_wav, out_wav, dump_path, enhance_report;
  std::vector<std::string> dump;
  std::optional<double> gate;
  mf.attach(enhance);
  enhance->add_option("input", in_wav, "noisy stereo WAV")->required()->check(CLI::ExistingFile);
  enhance->add_option("-o,--output", out_wav, "enhanced WAV (float32)")->required();
  enhance->add_option("--dump", dump, "stage to dump, or 'all' (repeatable)");
  enhance->add_option("--dump-file", dump_path, "dump destination; default <output>.stages.gafn");
  enhance->add_option("--gate", gate, "force the refinement gate to this value in [0, 1]");
  enhance->add_option("--report", enhance_report, "write a JSON summary here");

  auto* synth = app.add_subcommand("synth", "synthesize binaural mixtures from a manifest");
  std::string manifest, synth_out;
  std::size_t demo = 0;
  std::uint64_t synth_seed = 0;
  std::optional<double> snr, azimuth;
  bool grid = false;
  double duration = 2.0;
  unsigned synth_threads = 1;
  synth->add_option("--manifest", manifest, "JSON-lines mixture specs")->check(CLI::ExistingFile);
  synth->add_option("--demo", demo, "write N synthetic source items and use them instead of a manifest");
  synth->add_option("-o,--out", synth_out, "output directory")->required();
  synth->add_option("--seed", synth_seed, "seed for --demo sources")->capture_default_str();
  synth->add_option("--snr", snr, "override every item's SNR in dB");
  synth->add_option("--azimuth", azimuth, "override every item's azimuth in degrees");
  synth->add_flag("--grid", grid, "expand each item over the -6..15 dB test grid");
  synth->add_option("--duration", duration, "seconds per --demo item")->capture_default_str();
  synth->add_option("--threads", synth_threads, "worker threads")->capture_default_str();

  auto* metrics = app.add_subcommand("metrics", "enhance a synthesized dataset and score each item");
  std::string data, metrics_report, scorer, enhanced_dir;
  mf.attach(metrics);
  metrics->add_option("data", data, "dataset directory or its metadata.jsonl")->required()->check(CLI::ExistingPath);
  metrics->add_option("--report", metrics_report, "JSON-lines output; stdout when absent");
  metrics->add_option("--scorer", scorer, "external MBSTOI/PESQ command, called as CMD clean noisy enhanced");
  metrics->add_option("--enhanced-dir", enhanced_dir, "keep enhanced WAVs here");

  auto* bench = app.add_subcommand("bench", "parameter, MAC and real-time-factor report");
  bool rtf = false, table = false;
  std::size_t repeats = 20;
  std::vector<unsigned> thread_counts;
  std::string bench_report;
  mf.attach(bench);
  bench->add_flag("--rtf", rtf, "measure real-time factor on 2 s of audio");
  bench->add_option("--repeats", repeats, "timed runs per thread count")->capture_default_str();
  bench->add_option("--rtf-threads", thread_counts, "thread counts to time (repeatable)");
  bench->add_option("--report", bench_report, "write the JSON report here");
  bench->add_flag("--table", table, "print a human-readable table");

  auto* init = app.add_subcommand("init", "write randomly initialized weights");
  std::string init_out;
  mf.attach(init);
  init->add_option("-o,--output", init_out, "weight file")->required();

  auto* selftest = app.add_subcommand("selftest", "run the acceptance checks");
  std::vector<int> only;
  selftest->add_option("checks", only, "check numbers to run; all when absent");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*enhance) return run_enhance(mf, in_wav, out_wav, dump, dump_path, gate, enhance_report);
    if (*synth) return run_synth(manifest, demo, synth_out, synth_seed, snr, azimuth, grid, duration, synth_threads);
    if (*metrics) return run_metrics(mf, data, metrics_report, scorer, enhanced_dir);
    if (*bench) return run_bench(mf, rtf, repeats, thread_counts, bench_report, table);
    if (*init) return run_init(mf, init_out);
    if (*selftest) return run_selftest(only);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: FormatError: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  }
  return 0;
}
