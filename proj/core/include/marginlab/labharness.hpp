#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "marginlab/linear_margin.hpp"
#include "marginlab/opt_chain.hpp"
#include "marginlab/synthdata.hpp"
#include "marginlab/xor_net.hpp"

namespace marginlab {

struct ExperimentConfig {
  Problem problem = Problem::kLinear;
  int n = 32;
  int d = 1024;
  std::optional<double> sigma;
  std::optional<double> kappa;
  double h = 1.5;
  int m = 64;
  std::vector<std::uint64_t> seeds{0};
  int mc_samples = 10000;
  double epsilon = 0.01;        // linear certification slack
  double gram_constant = 1.0;   // only scales displayed bounds
  bool train = true;            // run the XOR trainer
  bool force = false;           // demos outside their regime band
  int workers = 0;              // 0: MARGINLAB_WORKERS or 1
  SolverOptions solver;
  TrainerOptions trainer;

  double sigma_value() const;
  double kappa_value() const;
  void validate() const;
  LinearSpec linear_spec() const;
  XorSpec xor_spec() const;
};

using Overrides = std::vector<std::pair<std::string, std::string>>;

/// Parses a JSON config and applies `--key=value` style overrides; dotted keys
/// reach nested objects (e.g. "trainer.iterations"). Values are parsed as JSON
/// when possible and taken as strings otherwise.
ExperimentConfig load_config(const std::string& json_text, const Overrides& overrides = {});
std::string config_to_json(const ExperimentConfig& cfg);

struct TrialRecord {
  Problem problem = Problem::kLinear;
  int n = 0;
  int d = 0;
  double sigma = 0.0;
  double kappa = 0.0;
  double h = 0.0;
  int m = 0;
  std::uint64_t seed = 0;
  std::string region;
  double gamma_star;
  double margin_trained;
  double margin_good;
  double margin_bad;
  double margin_constructed;
  double train_err;
  double test_err;
  double err_psi_S;
  double err_psibar_S;
  double err_psi_D;
  double q_ratio;
  double cross_mass_D;
  std::string status = "ok";
  double wall_time_ms = 0.0;
  int cell = 0;
  std::map<std::string, double> extras;

  TrialRecord();
  bool ok() const { return status == "ok" || status == "soft_fail"; }
  double extra(const std::string& key) const;
};

/// Runs one trial; failures are captured in `status`, never thrown.
TrialRecord run_trial(const ExperimentConfig& cfg, std::uint64_t seed);

/// Number of concurrent workers: cfg.workers, else MARGINLAB_WORKERS, else 1.
int resolve_workers(int configured);

/// Runs jobs[i] for every i on a small thread pool; results keep job order.
std::vector<TrialRecord> run_parallel(const std::vector<std::function<TrialRecord()>>& jobs,
                                      int workers);

struct SweepGrid {
  std::vector<double> kappas;
  std::vector<double> d_over_n;
  std::vector<double> hs;  // XOR only; empty means cfg.h
};

struct SweepResult {
  std::vector<TrialRecord> records;  // sorted by (cell, seed)
  double failed_fraction = 0.0;
  bool aborted = false;
  std::string caveat;
};

SweepResult phase_sweep(const SweepGrid& grid, const ExperimentConfig& cfg);

struct UcDemoRecord {
  TrialRecord trial;
  bool in_band = false;
  double train_err = 0.0;
  double accuracy_psi_S = 0.0;
  double err_psibar_S = 0.0;  // linear
  double err_psi_D = 0.0;     // xor
  double test_err = 0.0;
  /// Population loss minus empirical loss on the opposite sample.
  double witness = 0.0;
};

/// Throws ValidationError outside (kappa_gen, kappa_uc) unless cfg.force.
UcDemoRecord uc_failure_demo(const ExperimentConfig& cfg, std::uint64_t seed);
/// The demo quantities derived from an already computed trial.
UcDemoRecord summarize_uc_demo(TrialRecord trial, bool in_band);

struct VacuityRecord {
  TrialRecord trial;
  double margin_ratio = 0.0;  // gamma(bad classifier) / gamma*(S)
  double test_err = 0.0;      // error of that classifier on its ground truth
};

VacuityRecord margin_vacuity_demo(const ExperimentConfig& cfg, std::uint64_t seed);
VacuityRecord summarize_vacuity(TrialRecord trial);

// ---- emission ----

extern const std::vector<std::string> kCsvHeader;

std::string problem_name(Problem p);
Problem parse_problem(const std::string& s);

/// %.17g, with "nan", "inf", "-inf" for non-finite values.
std::string format_double(double v);
double parse_double(const std::string& s);

std::string records_to_csv(const std::vector<TrialRecord>& records);
std::vector<TrialRecord> records_from_csv(const std::string& text);
std::string records_to_json(const std::vector<TrialRecord>& records);
std::vector<TrialRecord> records_from_json(const std::string& text);

enum class EmitFormat { kCsv, kJson };
/// Writes the records; throws std::runtime_error on I/O failure.
void emit(const std::vector<TrialRecord>& records, EmitFormat format, const std::string& path);

/// FNV-1a 64 over the given CSV texts with the wall_time_ms column removed.
std::uint64_t determinism_hash(const std::vector<std::string>& csv_texts);
std::string hash_hex(std::uint64_t h);

void sort_records(std::vector<TrialRecord>& records);

}  // namespace marginlab
