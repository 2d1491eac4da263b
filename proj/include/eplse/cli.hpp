#pragma once

// Trial runner, Monte-Carlo sweeps, presets and the CSV / JSON writers used
// by the command-line front end.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "eplse/engine.hpp"
#include "eplse/init.hpp"
#include "eplse/metrics.hpp"
#include "eplse/scene.hpp"

namespace eplse::cli {

enum class SweepVariable { kSnr, kM, kK, kBits };

std::string to_string(SweepVariable v);
SweepVariable parse_sweep_variable(const std::string& name);
std::string to_string(ChannelKind kind);
ChannelKind parse_channel(const std::string& name);

struct TrialOutcome {
  Scene scene;
  InitResult init;
  RunResult run;
  TrialReport report;
};

/// Number of candidate components: N if positive, else the full grid length.
int resolve_components(int N, int M_full);

TrialReport make_report(const Scene& scene, const RunResult& run);

/// Initializes and runs the estimator on an existing scene.
TrialOutcome run_on_scene(const Scene& scene, int N, const EngineConfig& engine);
TrialOutcome run_trial(const SceneConfig& scene, int N, const EngineConfig& engine);

struct SweepSpec {
  std::string name = "sweep";
  SweepVariable variable = SweepVariable::kSnr;
  std::vector<double> values;
  int trials = 1;
  SceneConfig fixed;
  int N = 0;  // 0: N = M_full of each scene
  std::uint64_t seed_base = 0;
  std::string output_path;
  EngineConfig engine;

  void validate() const;
  /// Scene parameters of one (value, trial) cell; the seed is seed_base + trial.
  SceneConfig scene_for(double value, int trial) const;
};

struct SweepRow {
  double value = 0.0;
  int trial = 0;
  std::uint64_t seed = 0;
  TrialReport report;
};

/// Runs every (value, trial) cell, `jobs` at a time. Rows come back in
/// (value, trial) order whatever the completion order. `on_row` is called
/// from worker threads under a lock.
std::vector<SweepRow> run_sweep(const SweepSpec& spec, int jobs = 1,
                                const std::function<void(const SweepRow&)>& on_row = {});

inline constexpr const char* kSweepCsvHeader =
    "sweep_value,trial,seed,nmse_db,dnmse_db,order_correct,freq_err_db,iterations,sigma_w2_hat";
inline constexpr const char* kSummaryCsvHeader =
    "sweep_value,trials,mean_nmse_db,mean_dnmse_db,success_rate,mean_freq_err_db,mean_iterations,"
    "mean_sigma_w2_hat";

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);

struct SummaryRow {
  double value = 0.0;
  int trials = 0;
  double mean_nmse_db = 0.0;
  double mean_dnmse_db = 0.0;
  double success_rate = 0.0;
  std::optional<double> mean_freq_err_db;  // over order-correct trials only
  double mean_iterations = 0.0;
  double mean_sigma_w2_hat = 0.0;
};

/// Per-value means and rates, in order of first appearance.
std::vector<SummaryRow> summarize(const std::vector<SweepRow>& rows);
void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows);

/// `data.csv` -> `data_summary.csv`.
std::string summary_path(const std::string& output_path);

struct PresetInfo {
  std::string name;
  std::string description;
  int default_trials = 0;
};
std::vector<PresetInfo> preset_list();
/// Sweep specs of a preset; trials <= 0 keeps the default count.
std::vector<SweepSpec> preset(const std::string& name, int trials = 0,
                              std::uint64_t seed_base = 0);

/// Locale-independent shortest round-trip text for a double; inf/nan spelled out.
std::string format_double(double v);

nlohmann::json engine_config_to_json(const EngineConfig& config);
nlohmann::json scene_config_to_json(const SceneConfig& config);
nlohmann::json report_to_json(const TrialReport& report);
nlohmann::json estimate_to_json(const Estimate& estimate);
nlohmann::json trace_to_json(const std::vector<TraceRecord>& trace);
nlohmann::json run_record(const TrialOutcome& outcome, const EngineConfig& engine,
                          const std::optional<SceneConfig>& scene_config);

/// Entry point of the command-line tool; returns the process exit code.
int main(int argc, char** argv);

}  // namespace eplse::cli
