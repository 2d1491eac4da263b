#include "eplse/cli.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include "CLI11.hpp"

#include "eplse/json_util.hpp"

namespace eplse::cli {

std::string to_string(SweepVariable v) {
  switch (v) {
    case SweepVariable::kSnr: return "snr";
    case SweepVariable::kM: return "m";
    case SweepVariable::kK: return "k";
    case SweepVariable::kBits: return "bits";
  }
  return "snr";
}

SweepVariable parse_sweep_variable(const std::string& name) {
  std::string lower = name;
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "snr") return SweepVariable::kSnr;
  if (lower == "m") return SweepVariable::kM;
  if (lower == "k") return SweepVariable::kK;
  if (lower == "bits") return SweepVariable::kBits;
  throw InputError("unknown sweep variable '" + name + "' (expected snr, m, k or bits)");
}

std::string to_string(ChannelKind kind) {
  return kind == ChannelKind::kAwgn ? "awgn" : "quantized";
}

ChannelKind parse_channel(const std::string& name) {
  if (name == "awgn") return ChannelKind::kAwgn;
  if (name == "quantized") return ChannelKind::kQuantized;
  throw InputError("unknown channel '" + name + "' (expected awgn or quantized)");
}

int resolve_components(int N, int M_full) { return N > 0 ? N : M_full; }

TrialReport make_report(const Scene& scene, const RunResult& run) {
  const Estimate& est = run.estimate;
  TrialReport report;
  report.nmse_db = nmse_db(est.z_hat, scene.z);
  report.dnmse_db = dnmse_db(est.z_hat, scene.z);
  report.K_hat = est.K_hat;
  report.order_correct = est.K_hat == scene.theta_true.size();
  if (report.order_correct) report.freq_err_db = freq_error_db(est.active_theta(), scene.theta_true);
  report.iterations = run.iterations;
  report.converged = run.converged;
  report.sigma_w2_hat = est.sigma_w2_hat;
  return report;
}

TrialOutcome run_on_scene(const Scene& scene, int N, const EngineConfig& engine) {
  const int components = resolve_components(N, static_cast<int>(scene.z.size()));
  const Channel channel = receiver_channel(scene);
  TrialOutcome out;
  out.scene = scene;
  out.init = init_periodogram(scene.y, components, channel);
  out.run = run_eplse(scene.y, channel, engine, out.init, &scene.z);
  out.report = make_report(scene, out.run);
  return out;
}

TrialOutcome run_trial(const SceneConfig& scene, int N, const EngineConfig& engine) {
  return run_on_scene(generate_scene(scene), N, engine);
}

void SweepSpec::validate() const {
  if (values.empty()) throw InputError("sweep: values must be nonempty");
  if (trials < 1) throw InputError("sweep: trials must be >= 1");
  engine.validate();
  for (const double v : values) {
    if (!std::isfinite(v) && variable != SweepVariable::kSnr)
      throw InputError("sweep: non-finite value for " + to_string(variable));
    const SceneConfig cfg = scene_for(v, 0);
    if (cfg.M_full < 2) throw InputError("sweep: M must be >= 2");
    if (cfg.K < 0) throw InputError("sweep: K must be >= 0");
    if (cfg.subset_size < 0 || cfg.subset_size > cfg.M_full)
      throw InputError("sweep: subset size must lie in [0, M]");
    if (cfg.channel == ChannelKind::kQuantized && (cfg.bits < 1 || cfg.bits > 16))
      throw InputError("sweep: bits must lie in [1, 16]");
  }
}

SceneConfig SweepSpec::scene_for(double value, int trial) const {
  SceneConfig cfg = fixed;
  switch (variable) {
    case SweepVariable::kSnr: cfg.snr_db = value; break;
    case SweepVariable::kM: cfg.M_full = static_cast<int>(std::lround(value)); break;
    case SweepVariable::kK: cfg.K = static_cast<int>(std::lround(value)); break;
    case SweepVariable::kBits:
      cfg.channel = ChannelKind::kQuantized;
      cfg.bits = static_cast<int>(std::lround(value));
      break;
  }
  cfg.seed = seed_base + static_cast<std::uint64_t>(trial);
  return cfg;
}

std::vector<SweepRow> run_sweep(const SweepSpec& spec, int jobs,
                                const std::function<void(const SweepRow&)>& on_row) {
  spec.validate();
  const std::size_t cells = spec.values.size() * static_cast<std::size_t>(spec.trials);
  std::vector<SweepRow> rows(cells);
  std::atomic<std::size_t> next{0};
  std::mutex lock;
  std::exception_ptr failure;

  auto worker = [&]() {
    for (;;) {
      const std::size_t cell = next.fetch_add(1);
      if (cell >= cells) return;
      const double value = spec.values[cell / static_cast<std::size_t>(spec.trials)];
      const int trial = static_cast<int>(cell % static_cast<std::size_t>(spec.trials));
      try {
        const SceneConfig cfg = spec.scene_for(value, trial);
        const TrialOutcome outcome = run_trial(cfg, spec.N, spec.engine);
        SweepRow row{value, trial, cfg.seed, outcome.report};
        rows[cell] = row;
        if (on_row) {
          std::lock_guard<std::mutex> guard(lock);
          on_row(row);
        }
      } catch (...) {
        std::lock_guard<std::mutex> guard(lock);
        if (!failure) failure = std::current_exception();
        next.store(cells);
        return;
      }
    }
  };

  const int threads = std::max(1, std::min<int>(jobs, static_cast<int>(cells)));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);
  return rows;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << kSweepCsvHeader << "\r\n";
  for (const SweepRow& r : rows) {
    out << format_double(r.value) << ',' << r.trial << ',' << r.seed << ','
        << format_double(r.report.nmse_db) << ',' << format_double(r.report.dnmse_db) << ','
        << (r.report.order_correct ? 1 : 0) << ','
        << (r.report.freq_err_db ? format_double(*r.report.freq_err_db) : std::string()) << ','
        << r.report.iterations << ',' << format_double(r.report.sigma_w2_hat) << "\r\n";
  }
}

std::vector<SummaryRow> summarize(const std::vector<SweepRow>& rows) {
  struct Acc {
    SummaryRow row;
    double freq_sum = 0.0;
    int freq_count = 0;
  };
  std::vector<Acc> acc;
  for (const SweepRow& r : rows) {
    auto it = std::find_if(acc.begin(), acc.end(),
                           [&](const Acc& a) { return a.row.value == r.value; });
    if (it == acc.end()) {
      acc.push_back(Acc{});
      it = acc.end() - 1;
      it->row.value = r.value;
    }
    SummaryRow& s = it->row;
    ++s.trials;
    s.mean_nmse_db += r.report.nmse_db;
    s.mean_dnmse_db += r.report.dnmse_db;
    s.success_rate += r.report.order_correct ? 1.0 : 0.0;
    s.mean_iterations += r.report.iterations;
    s.mean_sigma_w2_hat += r.report.sigma_w2_hat;
    if (r.report.freq_err_db) {
      it->freq_sum += *r.report.freq_err_db;
      ++it->freq_count;
    }
  }
  std::vector<SummaryRow> out;
  out.reserve(acc.size());
  for (Acc& a : acc) {
    SummaryRow s = a.row;
    const double n = s.trials;
    s.mean_nmse_db /= n;
    s.mean_dnmse_db /= n;
    s.success_rate /= n;
    s.mean_iterations /= n;
    s.mean_sigma_w2_hat /= n;
    if (a.freq_count > 0) s.mean_freq_err_db = a.freq_sum / a.freq_count;
    out.push_back(s);
  }
  return out;
}

void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows) {
  out << kSummaryCsvHeader << "\r\n";
  for (const SummaryRow& s : rows) {
    out << format_double(s.value) << ',' << s.trials << ',' << format_double(s.mean_nmse_db) << ','
        << format_double(s.mean_dnmse_db) << ',' << format_double(s.success_rate) << ','
        << (s.mean_freq_err_db ? format_double(*s.mean_freq_err_db) : std::string()) << ','
        << format_double(s.mean_iterations) << ','
        << format_double(s.mean_sigma_w2_hat) << "\r\n";
  }
}

std::string summary_path(const std::string& output_path) {
  const std::filesystem::path p(output_path);
  std::filesystem::path out = p.parent_path() / (p.stem().string() + "_summary");
  out += p.has_extension() ? p.extension() : std::filesystem::path(".csv");
  return out.string();
}

std::vector<PresetInfo> preset_list() {
  return {
      {"fig8", "SNR 0..30 dB in 1 dB steps, M=21, K=5", 500},
      {"fig9", "M in {11,16,...,41}, K=3, SNR 20 dB", 1000},
      {"fig10", "K in 1..7, M=21, SNR 20 dB", 1000},
      {"fig11", "bits in {1,2,3} at SNR 10, 20 and 30 dB, N=M=41, K=3", 20},
  };
}

std::vector<SweepSpec> preset(const std::string& name, int trials, std::uint64_t seed_base) {
  const auto list = preset_list();
  const auto info = std::find_if(list.begin(), list.end(),
                                 [&](const PresetInfo& p) { return p.name == name; });
  if (info == list.end()) throw InputError("unknown preset '" + name + "'");
  SweepSpec base;
  base.name = name;
  base.trials = trials > 0 ? trials : info->default_trials;
  base.seed_base = seed_base;

  std::vector<SweepSpec> specs;
  if (name == "fig8") {
    base.variable = SweepVariable::kSnr;
    for (int s = 0; s <= 30; ++s) base.values.push_back(s);
    base.fixed.M_full = 21;
    base.fixed.K = 5;
    specs.push_back(base);
  } else if (name == "fig9") {
    base.variable = SweepVariable::kM;
    base.values = {11, 16, 21, 26, 31, 36, 41};
    base.fixed.K = 3;
    base.fixed.snr_db = 20.0;
    specs.push_back(base);
  } else if (name == "fig10") {
    base.variable = SweepVariable::kK;
    base.values = {1, 2, 3, 4, 5, 6, 7};
    base.fixed.M_full = 21;
    base.fixed.snr_db = 20.0;
    specs.push_back(base);
  } else {
    base.variable = SweepVariable::kBits;
    base.values = {1, 2, 3};
    base.fixed.M_full = 41;
    base.fixed.N = 41;
    base.N = 41;
    base.fixed.K = 3;
    base.fixed.channel = ChannelKind::kQuantized;
    for (const int snr : {10, 20, 30}) {
      SweepSpec s = base;
      s.name = name + "_snr" + std::to_string(snr);
      s.fixed.snr_db = snr;
      specs.push_back(s);
    }
  }
  return specs;
}

nlohmann::json engine_config_to_json(const EngineConfig& c) {
  return {{"max_outer_iters", c.max_outer_iters},
          {"inner_iters", c.inner_iters},
          {"conv_tol", json_number(c.conv_tol)},
          {"gamma", json_number(c.gamma)},
          {"pi_min", json_number(c.pi_min)},
          {"inner_stop_tol", json_number(c.inner_stop_tol)},
          {"lambda_floor", json_number(c.lambda_floor)},
          {"projection_newton_steps", c.projection_newton_steps},
          {"learn_prior", c.learn_prior}};
}

nlohmann::json scene_config_to_json(const SceneConfig& c) {
  return {{"M_full", c.M_full},       {"K", c.K},
          {"N", c.N},                 {"snr_db", json_number(c.snr_db)},
          {"subset_size", c.subset_size}, {"channel", to_string(c.channel)},
          {"bits", c.bits},           {"seed", c.seed}};
}

nlohmann::json report_to_json(const TrialReport& r) {
  nlohmann::json j = {{"nmse_db", json_number(r.nmse_db)},
                      {"dnmse_db", json_number(r.dnmse_db)},
                      {"order_correct", r.order_correct},
                      {"freq_err_db", nullptr},
                      {"iterations", r.iterations},
                      {"converged", r.converged},
                      {"K_hat", r.K_hat},
                      {"sigma_w2_hat", json_number(r.sigma_w2_hat)}};
  if (r.freq_err_db) j["freq_err_db"] = json_number(*r.freq_err_db);
  return j;
}

nlohmann::json estimate_to_json(const Estimate& e) {
  return {{"K_hat", e.K_hat},
          {"active_set", e.active_set},
          {"theta_hat", to_json_array(e.theta_hat)},
          {"x_hat", to_json_array(e.x_hat)},
          {"lambda", to_json_array(e.lambda)},
          {"pi", to_json_array(e.pi)},
          {"z_hat", to_json_array(e.z_hat)},
          {"sigma_w2_hat", json_number(e.sigma_w2_hat)}};
}

nlohmann::json trace_to_json(const std::vector<TraceRecord>& trace) {
  nlohmann::json out = nlohmann::json::array();
  for (const TraceRecord& t : trace) {
    out.push_back({{"iteration", t.iteration},
                   {"rel_change", json_number(t.rel_change)},
                   {"nmse_db", t.nmse_db ? json_number(*t.nmse_db) : nlohmann::json(nullptr)},
                   {"K_hat", t.K_hat},
                   {"sigma_w2", json_number(t.sigma_w2)},
                   {"inner_sweeps", t.inner_sweeps}});
  }
  return out;
}

nlohmann::json run_record(const TrialOutcome& outcome, const EngineConfig& engine,
                          const std::optional<SceneConfig>& scene_config) {
  nlohmann::json j;
  j["scene_config"] = scene_config ? scene_config_to_json(*scene_config) : nlohmann::json(nullptr);
  j["engine_config"] = engine_config_to_json(engine);
  j["scene"] = scene_to_json(outcome.scene);
  j["init"] = {{"detected", outcome.init.detected},
               {"sigma_w2_0", json_number(outcome.init.sigma_w2_0)}};
  j["estimate"] = estimate_to_json(outcome.run.estimate);
  j["report"] = report_to_json(outcome.report);
  j["trace"] = trace_to_json(outcome.run.trace);
  return j;
}

namespace {

struct SceneFlags {
  int M = 0;
  int K = -1;
  int N = 0;
  int subset = 0;
  double snr = 20.0;
  std::string channel = "awgn";
  int bits = 1;
};

void add_engine_flags(CLI::App& cmd, EngineConfig& engine) {
  cmd.add_option("--max-iters", engine.max_outer_iters, "Outer iteration cap")
      ->check(CLI::PositiveNumber);
  cmd.add_option("--inner-iters", engine.inner_iters,
                 "Inner sweeps per outer iteration (0: 1 for awgn, 30 for quantized)");
  cmd.add_option("--conv-tol", engine.conv_tol, "Relative-change stopping tolerance");
  cmd.add_option("--gamma", engine.gamma, "Activation threshold on pi");
  cmd.add_option("--inner-stop-tol", engine.inner_stop_tol, "Inner loop lambda tolerance");
  cmd.add_flag("!--no-learn-prior", engine.learn_prior, "Keep the prior hyperparameters fixed");
}

void add_scene_flags(CLI::App& cmd, SceneFlags& flags) {
  cmd.add_option("-M,--M", flags.M, "Full grid length");
  cmd.add_option("-K,--K", flags.K, "Number of sinusoids");
  cmd.add_option("-N,--N", flags.N, "Candidate components (0: N = M)");
  cmd.add_option("--subset", flags.subset, "Observed rows (0: all)");
  cmd.add_option("--snr", flags.snr, "SNR in dB");
  cmd.add_option("--channel", flags.channel, "awgn or quantized")
      ->check(CLI::IsMember({"awgn", "quantized"}));
  cmd.add_option("--bits", flags.bits, "Quantizer bit depth")->check(CLI::Range(1, 16));
}

SceneConfig scene_config_from(const SceneFlags& f, std::uint64_t seed) {
  SceneConfig cfg;
  cfg.M_full = f.M;
  cfg.K = f.K;
  cfg.N = f.N;
  cfg.subset_size = f.subset;
  cfg.snr_db = f.snr;
  cfg.channel = parse_channel(f.channel);
  cfg.bits = f.bits;
  cfg.seed = seed;
  return cfg;
}

std::vector<double> parse_values(const std::string& text) {
  // "a:b:step" range or comma list
  std::vector<double> out;
  auto to_number = [](const std::string& s) {
    double v = 0.0;
    const char* begin = s.data();
    const char* end = s.data() + s.size();
    while (begin < end && *begin == ' ') ++begin;
    if (begin < end && *begin == '+') ++begin;
    const auto res = std::from_chars(begin, end, v);
    if (res.ec != std::errc() || res.ptr != end) throw InputError("bad number '" + s + "'");
    return v;
  };
  if (text.find(':') != std::string::npos) {
    std::vector<double> parts;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ':')) parts.push_back(to_number(item));
    if (parts.size() != 3 || !(parts[2] > 0.0) || parts[1] < parts[0])
      throw InputError("range must be start:stop:step with step > 0");
    const auto count = static_cast<long>(std::floor((parts[1] - parts[0]) / parts[2] + 1e-9));
    for (long i = 0; i <= count; ++i) out.push_back(parts[0] + static_cast<double>(i) * parts[2]);
  } else {
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(to_number(item));
  }
  if (out.empty()) throw InputError("empty value list");
  return out;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << content;
  out.flush();
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

std::string output_for(const std::string& base, const SweepSpec& spec, bool several) {
  if (!several) return base;
  const std::filesystem::path p(base);
  std::filesystem::path out = p.parent_path() / (p.stem().string() + "_" + spec.name);
  out += p.has_extension() ? p.extension() : std::filesystem::path(".csv");
  return out.string();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Line spectral estimation by expectation propagation"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML/INI file with option defaults; flags override it");

  // run
  CLI::App* run = app.add_subcommand("run", "Estimate one scene and write a JSON record");
  SceneFlags run_scene;
  EngineConfig run_engine;
  std::uint64_t run_seed = 0;
  std::string scene_file;
  std::string run_output;
  bool no_trace = false;
  add_scene_flags(*run, run_scene);
  add_engine_flags(*run, run_engine);
  run->add_option("--seed", run_seed, "Scene seed")->envname("EPLSE_SEED");
  run->add_option("--scene", scene_file, "Scene JSON file instead of generated parameters")
      ->check(CLI::ExistingFile);
  run->add_option("-o,--output", run_output, "Output JSON file")->required();
  run->add_flag("--no-trace", no_trace, "Omit the per-iteration trace");

  // sweep
  CLI::App* sweep = app.add_subcommand("sweep", "Monte-Carlo sweep written as CSV");
  SceneFlags sweep_scene;
  sweep_scene.M = 21;
  sweep_scene.K = 3;
  EngineConfig sweep_engine;
  std::string preset_name;
  std::string variable = "snr";
  std::string values_text;
  int trials = 0;
  int jobs = 1;
  std::uint64_t seed_base = 0;
  std::string sweep_output;
  bool quiet = false;
  add_scene_flags(*sweep, sweep_scene);
  add_engine_flags(*sweep, sweep_engine);
  auto* preset_opt = sweep->add_option("--preset", preset_name, "Named preset (see 'presets')");
  sweep->add_option("--variable", variable, "snr, m, k or bits")->excludes(preset_opt);
  sweep->add_option("--values", values_text, "Comma list or start:stop:step")
      ->excludes(preset_opt);
  sweep->add_option("--trials", trials, "Trials per value (presets: overrides the default)");
  sweep->add_option("--jobs,-j", jobs, "Concurrent trials")->check(CLI::PositiveNumber);
  sweep->add_option("--seed,--seed-base", seed_base, "Seed of trial 0")->envname("EPLSE_SEED");
  sweep->add_option("-o,--output", sweep_output, "Output CSV file")->required();
  sweep->add_flag("-q,--quiet", quiet, "No progress on stderr");

  // presets
  CLI::App* presets = app.add_subcommand("presets", "Preset sweeps");
  presets->require_subcommand(1);
  presets->add_subcommand("list", "List the presets");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*run) {
      std::optional<SceneConfig> cfg;
      Scene scene;
      if (!scene_file.empty()) {
        std::ifstream in(scene_file);
        scene = scene_from_json(nlohmann::json::parse(in));
      } else {
        if (run_scene.M <= 0 || run_scene.K < 0)
          throw InputError("run: --M and --K are required unless --scene is given");
        cfg = scene_config_from(run_scene, run_seed);
        if (cfg->subset_size > cfg->M_full) throw InputError("run: --subset exceeds --M");
        scene = generate_scene(*cfg);
      }
      run_engine.validate();
      const TrialOutcome outcome = run_on_scene(scene, run_scene.N, run_engine);
      nlohmann::json record = run_record(outcome, run_engine, cfg);
      if (no_trace) record.erase("trace");
      write_text_file(run_output, record.dump(2) + "\n");
      return 0;
    }

    if (*sweep) {
      std::vector<SweepSpec> specs;
      if (!preset_name.empty()) {
        specs = preset(preset_name, trials, seed_base);
      } else {
        if (values_text.empty()) throw InputError("sweep: --values or --preset is required");
        SweepSpec spec;
        spec.variable = parse_sweep_variable(variable);
        spec.values = parse_values(values_text);
        spec.trials = trials > 0 ? trials : 1;
        spec.fixed = scene_config_from(sweep_scene, seed_base);
        spec.N = sweep_scene.N;
        spec.seed_base = seed_base;
        specs.push_back(spec);
      }
      for (SweepSpec& s : specs) {
        s.engine = sweep_engine;
        s.output_path = output_for(sweep_output, s, specs.size() > 1);
        s.validate();
      }
      for (const SweepSpec& s : specs) {
        std::size_t done = 0;
        const std::size_t total = s.values.size() * static_cast<std::size_t>(s.trials);
        auto progress = [&](const SweepRow&) {
          ++done;
          if (!quiet && (done == total || done % 10 == 0))
            std::cerr << s.name << ": " << done << "/" << total << "\n";
        };
        const std::vector<SweepRow> rows = run_sweep(s, jobs, progress);
        std::ostringstream csv;
        write_sweep_csv(csv, rows);
        write_text_file(s.output_path, csv.str());
        std::ostringstream summary;
        write_summary_csv(summary, summarize(rows));
        write_text_file(summary_path(s.output_path), summary.str());
      }
      return 0;
    }

    for (const PresetInfo& p : preset_list())
      std::cout << p.name << "\t" << p.default_trials << " trials\t" << p.description << "\n";
    return 0;
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: malformed JSON: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace eplse::cli
