#include "marginlab/labharness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "marginlab/errors.hpp"
#include "marginlab/linalg.hpp"

namespace marginlab {

using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// ---- config (de)serialization ----

template <typename T>
void read_field(const json& j, const char* key, T& out) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config field '") + key + "': " + e.what());
  }
}

void reject_unknown(const json& j, const std::vector<std::string>& known, const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(known.begin(), known.end(), it.key()) == known.end()) {
      throw ValidationError("unknown config key '" + where + it.key() + "'");
    }
  }
}

void set_path(json& root, const std::string& dotted, const json& value) {
  json* node = &root;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = dotted.find('.', start);
    const std::string part = dotted.substr(start, dot == std::string::npos ? std::string::npos
                                                                           : dot - start);
    if (part.empty()) throw ValidationError("malformed override key '" + dotted + "'");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    json& child = (*node)[part];
    if (child.is_null()) child = json::object();
    if (!child.is_object()) throw ValidationError("override '" + dotted + "' descends into a scalar");
    node = &child;
    start = dot + 1;
  }
}

json override_value(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception&) {
    return json(text);
  }
}

std::string sanitize(std::string s) {
  for (char& c : s)
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  return s;
}

double elapsed_ms(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

double min_noise_margin(const LinearModel& model, const Dataset& ds) {
  return (ds.noise.transpose() * model.w).cwiseProduct(ds.y).minCoeff();
}

// ---- trials ----

void run_linear(const ExperimentConfig& cfg, std::uint64_t seed, TrialRecord& rec) {
  const LinearSpec spec = cfg.linear_spec();
  const Dataset ds = sample_linear(spec, seed);

  SolverOptions so = cfg.solver;
  so.seed = seed;
  const SolverResult sol = solve_max_margin(ds, so);
  rec.gamma_star = sol.gamma_star;
  rec.margin_trained = sol.report.normalized_margin;

  const LinearModel good = construct_good(spec);
  const LinearModel bad = construct_bad(ds, spec);
  rec.margin_good = linear_margin_report(good, ds).normalized_margin;
  rec.margin_bad = linear_margin_report(bad, ds).normalized_margin;
  const MixtureOptimum mix =
      optimal_mixture(std::max(0.0, rec.margin_good), std::max(0.0, min_noise_margin(bad, ds)));
  const LinearModel mixed = construct_mixture(mix.alpha, mix.beta, good, bad);
  rec.margin_constructed = linear_margin_report(mixed, ds).normalized_margin;

  rec.train_err = empirical_error(sol.model, ds);
  const LinearTestError te = test_error(sol.model, spec, cfg.mc_samples, seed);
  rec.test_err = te.empirical;
  rec.err_psi_S = empirical_error(sol.model, opposite_linear(ds, spec, LinearOpposite::kPsi));
  rec.err_psibar_S = empirical_error(sol.model, opposite_linear(ds, spec, LinearOpposite::kPsiBar));

  const TechLemmaRecord tech = tech_lemma_diagnostics(sol.model, ds, spec);
  rec.q_ratio = tech.q_over_sqrt_kappa.value;

  const GramDeviation gd = gram_deviation(ds.noise, spec.sigma, spec.d - 1, cfg.gram_constant);
  const SpanBoundRecord sb = span_bound(ds, sol.span_coef, spec);
  const double kappa = spec.kappa();

  rec.extras["duality_gap"] = sol.duality_gap;
  rec.extras["kkt_residual"] = sol.kkt_residual;
  rec.extras["gamma_dual"] = sol.gamma_dual;
  rec.extras["solver_epochs"] = sol.epochs;
  rec.extras["gram_dev"] = gd.spectral_norm_dev;
  rec.extras["gram_ratio"] = gd.ratio;
  rec.extras["gram_bound_rhs"] = gd.bound_rhs;
  rec.extras["gamma_lower_bound"] = (1.0 - gd.spectral_norm_dev) * std::sqrt(1.0 + 1.0 / kappa);
  rec.extras["certified"] =
      certify_eps_optimal(rec.margin_trained, rec.gamma_star, cfg.epsilon) ? 1.0 : 0.0;
  rec.extras["noise_signal_ratio"] = tech.noise_signal_ratio;
  rec.extras["w_dot_mu"] = tech.w_dot_mu;
  rec.extras["test_bound"] = te.analytic_bound;
  rec.extras["bad_test_err"] = test_error(bad, spec, cfg.mc_samples, seed).empirical;
  rec.extras["bad_margin_ratio"] = rec.margin_bad / rec.gamma_star;
  rec.extras["mixture_alpha"] = mix.alpha;
  rec.extras["mixture_beta"] = mix.beta;
  rec.extras["span_mu_lower"] = sb.mu_dot_lower_bound;
  rec.extras["span_mu_measured"] = sb.mu_dot_measured;
  rec.extras["span_avg_margin"] = sb.avg_margin;
  rec.extras["span_loss_bound"] = sb.loss_bound;
}

void run_xor(const ExperimentConfig& cfg, std::uint64_t seed, TrialRecord& rec) {
  const XorSpec spec = cfg.xor_spec();
  const Dataset ds = sample_xor(spec, seed);

  const Construction opt = construct_network(ds, spec, ConstructMode::optimal());
  const Construction nog = construct_network(ds, spec, ConstructMode::no_gen());
  const TwoLayerNet sig = construct_signal_net(spec);
  const MarginReport opt_rep = normalized_margin(opt.net, ds);
  rec.margin_constructed = opt_rep.normalized_margin;
  rec.margin_bad = normalized_margin(nog.net, ds).normalized_margin;
  rec.margin_good = normalized_margin(sig, ds).normalized_margin;
  const double reference = std::max({rec.margin_constructed, rec.margin_bad, rec.margin_good});

  TwoLayerNet net = opt.net;
  if (cfg.train) {
    TrainerOptions to = cfg.trainer;
    to.seed = seed;
    to.reference_margin = reference;
    const TrainResult tr = train_max_margin(ds, spec, to);
    net = tr.net;
    rec.margin_trained = tr.report.normalized_margin;
    if (tr.soft_failure) rec.status = "soft_fail";
    rec.extras["trainer_best_restart"] = tr.best_restart;
    rec.extras["trained_over_reference"] = rec.margin_trained / reference;
    rec.extras["trained_over_constructed"] = rec.margin_trained / rec.margin_constructed;
  }
  rec.gamma_star = cfg.train ? std::max(reference, rec.margin_trained) : reference;

  rec.train_err = empirical_error(net, ds);
  rec.test_err = xor_test_error(net, spec, cfg.mc_samples, seed);
  const OppositeAudit audit = opposite_margin_audit(net, ds, spec, cfg.mc_samples, seed);
  rec.err_psi_S = audit.error_psi_s;
  rec.err_psi_D = audit.error_psi_d;
  rec.q_ratio = audit.margin_psi_s / rec.gamma_star;
  const NetDecomposition dec = decompose_net(net, ds, spec);
  rec.cross_mass_D = cross_mass_diagnostic(dec, ds).total;

  const SignalPresence sp = signal_presence(net, spec);
  const double margin_used = normalized_margin(net, ds).normalized_margin;
  rec.extras["sp_plus_mu1"] = sp.plus_mu1;
  rec.extras["sp_minus_mu1"] = sp.minus_mu1;
  rec.extras["sp_plus_mu2"] = sp.plus_mu2;
  rec.extras["sp_minus_mu2"] = sp.minus_mu2;
  rec.extras["sp_min_over_margin"] = sp.min() / margin_used;
  rec.extras["u_norm"] = dec.u_norm;
  rec.extras["v_norm"] = dec.v_norm;

  const NetDecomposition nog_dec = decompose_net(nog.net, ds, spec);
  rec.extras["nog_u_norm"] = nog_dec.u_norm;
  rec.extras["nog_u_max_abs"] = nog_dec.u.cwiseAbs().maxCoeff();
  rec.extras["nog_test_err"] = xor_test_error(nog.net, spec, cfg.mc_samples, seed);
  rec.extras["nog_margin_over_trained"] =
      cfg.train ? rec.margin_bad / rec.margin_trained : kNaN;
  const OppositeAudit nog_audit = opposite_margin_audit(nog.net, ds, spec, 1, seed);
  rec.extras["nog_margin_ratio_psi"] = nog_audit.margin_ratio;

  const OppositeAudit con_audit = opposite_margin_audit(opt.net, ds, spec, cfg.mc_samples, seed);
  rec.extras["con_test_err"] = xor_test_error(opt.net, spec, cfg.mc_samples, seed);
  rec.extras["con_err_psi_S"] = con_audit.error_psi_s;
  rec.extras["con_err_psi_D"] = con_audit.error_psi_d;
  rec.extras["con_q_ratio"] = con_audit.margin_psi_s / rec.gamma_star;
  rec.extras["con_cross_mass"] =
      cross_mass_diagnostic(decompose_net(opt.net, ds, spec), ds).total;
  rec.extras["con_margin_spread"] =
      (opt_rep.per_sample.maxCoeff() - opt_rep.per_sample.minCoeff()) /
      std::abs(opt_rep.per_sample.maxCoeff());
  rec.extras["con_b"] = opt.point.b;
  rec.extras["con_objective"] = opt.point.objective;
  rec.extras["kappa_hat"] = opt.kappa_hat;
  rec.extras["n_min"] = opt.n_min;
  rec.extras["gram_condition"] = opt.gram_condition;
  rec.extras["ill_conditioned"] = opt.ill_conditioned ? 1.0 : 0.0;
  rec.extras["kappa_gen"] = kappa_gen_xor(spec.h);
}

TrialRecord base_record(const ExperimentConfig& cfg, std::uint64_t seed) {
  TrialRecord rec;
  rec.problem = cfg.problem;
  rec.n = cfg.n;
  rec.d = cfg.d;
  rec.h = cfg.problem == Problem::kXor ? cfg.h : kNaN;
  rec.m = cfg.problem == Problem::kXor ? cfg.m : 0;
  rec.seed = seed;
  try {
    rec.sigma = cfg.sigma_value();
    rec.kappa = cfg.kappa_value();
    rec.region = region_name(classify_region(cfg.problem, rec.kappa, cfg.h));
  } catch (const std::exception&) {
    rec.sigma = kNaN;
    rec.kappa = kNaN;
    rec.region = "unknown";
  }
  return rec;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

json number_or_tag(double v) {
  if (std::isfinite(v)) return v;
  return format_double(v);
}

double from_number_or_tag(const json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) return parse_double(j.get<std::string>());
  if (j.is_null()) return kNaN;
  throw ValidationError("expected a number in record JSON");
}

}  // namespace

// ---- ExperimentConfig ----

double ExperimentConfig::sigma_value() const {
  if (sigma && kappa) throw ValidationError("config sets both sigma and kappa; give exactly one");
  if (sigma) return *sigma;
  if (kappa) {
    if (!(*kappa > 0.0)) throw ValidationError("kappa must be > 0");
    return std::sqrt(static_cast<double>(n) / (d * *kappa));
  }
  throw ValidationError("config must set sigma or kappa");
}

double ExperimentConfig::kappa_value() const {
  const double s = sigma_value();
  return n / (d * s * s);
}

void ExperimentConfig::validate() const {
  if (n < 1) throw ValidationError("n must be >= 1");
  if (d < (problem == Problem::kXor ? 3 : 2)) throw ValidationError("d is too small");
  const double s = sigma_value();
  if (!(s > 0.0) || !std::isfinite(s)) throw ValidationError("sigma must be > 0");
  if (seeds.empty()) throw ValidationError("trials: seed list is empty");
  if (mc_samples < 1) throw ValidationError("mc_samples must be >= 1");
  if (!(epsilon >= 0.0 && epsilon < 1.0)) throw ValidationError("epsilon must lie in [0, 1)");
  if (problem == Problem::kXor) {
    if (!(h >= 1.0 && h < 2.0)) throw ValidationError("h must lie in [1, 2)");
    if (m <= 0 || m % 4 != 0) throw ValidationError("m must be a positive multiple of 4");
  }
}

LinearSpec ExperimentConfig::linear_spec() const {
  validate();
  return LinearSpec::canonical(d, n, sigma_value());
}

XorSpec ExperimentConfig::xor_spec() const {
  validate();
  return XorSpec::canonical(d, n, sigma_value(), h, m);
}

ExperimentConfig load_config(const std::string& json_text, const Overrides& overrides) {
  json root;
  try {
    root = json_text.empty() ? json::object() : json::parse(json_text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!root.is_object()) throw ValidationError("config must be a JSON object");
  for (const auto& [key, value] : overrides) set_path(root, key, override_value(value));

  reject_unknown(root,
                 {"problem", "n", "d", "sigma", "kappa", "h", "m", "seeds", "mc_samples", "epsilon",
                  "gram_constant", "train", "force", "workers", "solver", "trainer"},
                 "");
  ExperimentConfig cfg;
  if (root.contains("problem") && !root["problem"].is_null()) {
    cfg.problem = parse_problem(root["problem"].get<std::string>());
  }
  read_field(root, "n", cfg.n);
  read_field(root, "d", cfg.d);
  if (root.contains("sigma") && !root["sigma"].is_null()) cfg.sigma = root["sigma"].get<double>();
  if (root.contains("kappa") && !root["kappa"].is_null()) cfg.kappa = root["kappa"].get<double>();
  read_field(root, "h", cfg.h);
  read_field(root, "m", cfg.m);
  if (root.contains("seeds")) {
    const json& s = root["seeds"];
    cfg.seeds.clear();
    if (s.is_number_unsigned() || s.is_number_integer()) {
      // A bare count means seeds 0..count-1.
      for (std::uint64_t i = 0; i < s.get<std::uint64_t>(); ++i) cfg.seeds.push_back(i);
    } else {
      cfg.seeds = s.get<std::vector<std::uint64_t>>();
    }
  }
  read_field(root, "mc_samples", cfg.mc_samples);
  read_field(root, "epsilon", cfg.epsilon);
  read_field(root, "gram_constant", cfg.gram_constant);
  read_field(root, "train", cfg.train);
  read_field(root, "force", cfg.force);
  read_field(root, "workers", cfg.workers);
  if (root.contains("solver")) {
    const json& s = root["solver"];
    reject_unknown(s, {"gap_tol", "max_epochs"}, "solver.");
    read_field(s, "gap_tol", cfg.solver.gap_tol);
    read_field(s, "max_epochs", cfg.solver.max_epochs);
  }
  if (root.contains("trainer")) {
    const json& t = root["trainer"];
    reject_unknown(t,
                   {"iterations", "restarts", "step", "step_growth", "max_halvings", "tau_decay",
                    "plateau_window", "plateau_tol", "tau_floor", "trace_every", "epsilon"},
                   "trainer.");
    TrainerOptions& o = cfg.trainer;
    read_field(t, "iterations", o.iterations);
    read_field(t, "restarts", o.restarts);
    read_field(t, "step", o.step);
    read_field(t, "step_growth", o.step_growth);
    read_field(t, "max_halvings", o.max_halvings);
    read_field(t, "tau_decay", o.tau_decay);
    read_field(t, "plateau_window", o.plateau_window);
    read_field(t, "plateau_tol", o.plateau_tol);
    read_field(t, "tau_floor", o.tau_floor);
    read_field(t, "trace_every", o.trace_every);
    read_field(t, "epsilon", o.epsilon);
  }
  return cfg;
}

std::string config_to_json(const ExperimentConfig& cfg) {
  json j;
  j["problem"] = problem_name(cfg.problem);
  j["n"] = cfg.n;
  j["d"] = cfg.d;
  j["sigma"] = cfg.sigma ? json(*cfg.sigma) : json(nullptr);
  j["kappa"] = cfg.kappa ? json(*cfg.kappa) : json(nullptr);
  j["h"] = cfg.h;
  j["m"] = cfg.m;
  j["seeds"] = cfg.seeds;
  j["mc_samples"] = cfg.mc_samples;
  j["epsilon"] = cfg.epsilon;
  j["gram_constant"] = cfg.gram_constant;
  j["train"] = cfg.train;
  j["force"] = cfg.force;
  j["workers"] = cfg.workers;
  j["solver"] = {{"gap_tol", cfg.solver.gap_tol}, {"max_epochs", cfg.solver.max_epochs}};
  const TrainerOptions& o = cfg.trainer;
  j["trainer"] = {{"iterations", o.iterations},     {"restarts", o.restarts},
                  {"step", o.step},                 {"step_growth", o.step_growth},
                  {"max_halvings", o.max_halvings}, {"tau_decay", o.tau_decay},
                  {"plateau_window", o.plateau_window}, {"plateau_tol", o.plateau_tol},
                  {"tau_floor", o.tau_floor},       {"trace_every", o.trace_every},
                  {"epsilon", o.epsilon}};
  return j.dump(2);
}

// ---- records ----

TrialRecord::TrialRecord()
    : gamma_star(kNaN),
      margin_trained(kNaN),
      margin_good(kNaN),
      margin_bad(kNaN),
      margin_constructed(kNaN),
      train_err(kNaN),
      test_err(kNaN),
      err_psi_S(kNaN),
      err_psibar_S(kNaN),
      err_psi_D(kNaN),
      q_ratio(kNaN),
      cross_mass_D(kNaN) {}

double TrialRecord::extra(const std::string& key) const {
  auto it = extras.find(key);
  return it == extras.end() ? kNaN : it->second;
}

TrialRecord run_trial(const ExperimentConfig& cfg, std::uint64_t seed) {
  const auto t0 = std::chrono::steady_clock::now();
  TrialRecord rec = base_record(cfg, seed);
  try {
    cfg.validate();
    if (cfg.problem == Problem::kLinear) {
      run_linear(cfg, seed, rec);
    } else {
      run_xor(cfg, seed, rec);
    }
  } catch (const std::exception& e) {
    rec.status = "failed:" + sanitize(e.what());
  }
  rec.wall_time_ms = elapsed_ms(t0);
  return rec;
}

int resolve_workers(int configured) {
  if (configured > 0) return configured;
  if (const char* env = std::getenv("MARGINLAB_WORKERS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  return 1;
}

namespace {

std::vector<TrialRecord> run_pool(const std::vector<std::function<TrialRecord()>>& jobs,
                                  int workers, int max_failures, bool* aborted) {
  std::vector<TrialRecord> out(jobs.size());
  std::vector<char> done(jobs.size(), 0);
  std::atomic<std::size_t> next{0};
  std::atomic<int> failures{0};
  std::atomic<bool> stop{false};
  auto work = [&] {
    while (!stop.load()) {
      const std::size_t i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      out[i] = jobs[i]();
      done[i] = 1;
      if (!out[i].ok() && max_failures >= 0 && failures.fetch_add(1) + 1 > max_failures) {
        stop.store(true);
      }
    }
  };
  const int count = std::max(1, std::min<int>(workers, static_cast<int>(jobs.size())));
  if (count == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < count; ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (aborted) *aborted = stop.load();
  std::vector<TrialRecord> kept;
  for (std::size_t i = 0; i < jobs.size(); ++i)
    if (done[i]) kept.push_back(std::move(out[i]));
  return kept;
}

}  // namespace

std::vector<TrialRecord> run_parallel(const std::vector<std::function<TrialRecord()>>& jobs,
                                      int workers) {
  return run_pool(jobs, workers, -1, nullptr);
}

SweepResult phase_sweep(const SweepGrid& grid, const ExperimentConfig& cfg) {
  if (grid.kappas.empty() || grid.d_over_n.empty()) {
    throw ValidationError("sweep grid needs at least one kappa and one d/n ratio");
  }
  std::vector<double> hs = grid.hs;
  if (hs.empty() || cfg.problem == Problem::kLinear) hs = {cfg.h};

  std::vector<std::function<TrialRecord()>> jobs;
  int cell = 0;
  for (double h : hs) {
    for (double ratio : grid.d_over_n) {
      for (double kappa : grid.kappas) {
        ExperimentConfig c = cfg;
        c.h = h;
        c.d = static_cast<int>(std::lround(cfg.n * ratio));
        c.kappa = kappa;
        c.sigma.reset();
        for (std::uint64_t seed : cfg.seeds) {
          jobs.push_back([c, seed, cell] {
            TrialRecord r = run_trial(c, seed);
            r.cell = cell;
            return r;
          });
        }
        ++cell;
      }
    }
  }
  SweepResult res;
  const int max_failures = static_cast<int>(std::floor(0.2 * static_cast<double>(jobs.size())));
  res.records = run_pool(jobs, resolve_workers(cfg.workers), max_failures, &res.aborted);
  sort_records(res.records);
  int failed = 0;
  for (const auto& r : res.records)
    if (!r.ok()) ++failed;
  res.failed_fraction = res.records.empty() ? 0.0 : static_cast<double>(failed) / res.records.size();
  res.caveat =
      "region labels use the idealized thresholds only; finite-size region boundaries carry "
      "unspecified constants";
  return res;
}

UcDemoRecord summarize_uc_demo(TrialRecord trial, bool in_band) {
  UcDemoRecord out;
  out.in_band = in_band;
  out.trial = std::move(trial);
  const TrialRecord& r = out.trial;
  out.train_err = r.train_err;
  out.accuracy_psi_S = 1.0 - r.err_psi_S;
  out.test_err = r.test_err;
  if (r.problem == Problem::kLinear) {
    // psi(S) is a sample from the mu -> -mu distribution, on which the model
    // errs with probability 1 - test_err.
    out.err_psibar_S = r.err_psibar_S;
    out.err_psi_D = kNaN;
    out.witness = (1.0 - r.test_err) - r.err_psi_S;
  } else {
    out.err_psibar_S = kNaN;
    out.err_psi_D = r.err_psi_D;
    out.witness = r.err_psi_D - r.err_psi_S;
  }
  return out;
}

UcDemoRecord uc_failure_demo(const ExperimentConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const double kappa = cfg.kappa_value();
  const bool in_band =
      classify_region(cfg.problem, kappa, cfg.h) == Region::kGeneralizationNoUc;
  if (!in_band && !cfg.force) {
    std::ostringstream msg;
    msg << "kappa=" << kappa << " lies outside the (kappa_gen, kappa_uc) band; use --force";
    throw ValidationError(msg.str());
  }
  return summarize_uc_demo(run_trial(cfg, seed), in_band);
}

VacuityRecord summarize_vacuity(TrialRecord trial) {
  VacuityRecord out;
  out.trial = std::move(trial);
  const TrialRecord& r = out.trial;
  if (r.problem == Problem::kLinear) {
    out.margin_ratio = r.margin_bad / r.gamma_star;
    out.test_err = r.extra("bad_test_err");
  } else {
    out.margin_ratio = r.extra("con_q_ratio");
    out.test_err = r.extra("con_err_psi_D");
  }
  return out;
}

VacuityRecord margin_vacuity_demo(const ExperimentConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  return summarize_vacuity(run_trial(cfg, seed));
}

// ---- emission ----

const std::vector<std::string> kCsvHeader = {
    "problem",        "n",         "d",          "sigma",        "kappa",
    "h",              "m",         "seed",       "region",       "gamma_star",
    "margin_trained", "margin_good", "margin_bad", "margin_constructed", "train_err",
    "test_err",       "err_psi_S", "err_psibar_S", "err_psi_D",  "q_ratio",
    "cross_mass_D",   "status",    "wall_time_ms"};

std::string problem_name(Problem p) { return p == Problem::kLinear ? "linear" : "xor"; }

Problem parse_problem(const std::string& s) {
  if (s == "linear") return Problem::kLinear;
  if (s == "xor") return Problem::kXor;
  throw ValidationError("unknown problem '" + s + "' (expected linear or xor)");
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& s) {
  if (s == "nan") return kNaN;
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) throw ValidationError("bad number '" + s + "'");
  return v;
}

std::string records_to_csv(const std::vector<TrialRecord>& records) {
  std::ostringstream out;
  for (std::size_t i = 0; i < kCsvHeader.size(); ++i) out << (i ? "," : "") << kCsvHeader[i];
  out << '\n';
  for (const TrialRecord& r : records) {
    out << problem_name(r.problem) << ',' << r.n << ',' << r.d << ',' << format_double(r.sigma)
        << ',' << format_double(r.kappa) << ',' << format_double(r.h) << ',' << r.m << ','
        << r.seed << ',' << sanitize(r.region) << ',' << format_double(r.gamma_star) << ','
        << format_double(r.margin_trained) << ',' << format_double(r.margin_good) << ','
        << format_double(r.margin_bad) << ',' << format_double(r.margin_constructed) << ','
        << format_double(r.train_err) << ',' << format_double(r.test_err) << ','
        << format_double(r.err_psi_S) << ',' << format_double(r.err_psibar_S) << ','
        << format_double(r.err_psi_D) << ',' << format_double(r.q_ratio) << ','
        << format_double(r.cross_mass_D) << ',' << sanitize(r.status) << ','
        << format_double(r.wall_time_ms) << '\n';
  }
  return out.str();
}

std::vector<TrialRecord> records_from_csv(const std::string& text) {
  const auto lines = lines_of(text);
  if (lines.empty()) throw ValidationError("CSV is empty");
  if (split(lines[0], ',') != kCsvHeader) throw ValidationError("CSV header does not match");
  std::vector<TrialRecord> out;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    const auto f = split(lines[li], ',');
    if (f.size() != kCsvHeader.size()) throw ValidationError("CSV row has the wrong field count");
    TrialRecord r;
    r.problem = parse_problem(f[0]);
    r.n = std::stoi(f[1]);
    r.d = std::stoi(f[2]);
    r.sigma = parse_double(f[3]);
    r.kappa = parse_double(f[4]);
    r.h = parse_double(f[5]);
    r.m = std::stoi(f[6]);
    r.seed = std::stoull(f[7]);
    r.region = f[8];
    r.gamma_star = parse_double(f[9]);
    r.margin_trained = parse_double(f[10]);
    r.margin_good = parse_double(f[11]);
    r.margin_bad = parse_double(f[12]);
    r.margin_constructed = parse_double(f[13]);
    r.train_err = parse_double(f[14]);
    r.test_err = parse_double(f[15]);
    r.err_psi_S = parse_double(f[16]);
    r.err_psibar_S = parse_double(f[17]);
    r.err_psi_D = parse_double(f[18]);
    r.q_ratio = parse_double(f[19]);
    r.cross_mass_D = parse_double(f[20]);
    r.status = f[21];
    r.wall_time_ms = parse_double(f[22]);
    out.push_back(std::move(r));
  }
  return out;
}

std::string records_to_json(const std::vector<TrialRecord>& records) {
  json arr = json::array();
  for (const TrialRecord& r : records) {
    json j;
    j["problem"] = problem_name(r.problem);
    j["n"] = r.n;
    j["d"] = r.d;
    j["sigma"] = number_or_tag(r.sigma);
    j["kappa"] = number_or_tag(r.kappa);
    j["h"] = number_or_tag(r.h);
    j["m"] = r.m;
    j["seed"] = r.seed;
    j["region"] = r.region;
    j["gamma_star"] = number_or_tag(r.gamma_star);
    j["margin_trained"] = number_or_tag(r.margin_trained);
    j["margin_good"] = number_or_tag(r.margin_good);
    j["margin_bad"] = number_or_tag(r.margin_bad);
    j["margin_constructed"] = number_or_tag(r.margin_constructed);
    j["train_err"] = number_or_tag(r.train_err);
    j["test_err"] = number_or_tag(r.test_err);
    j["err_psi_S"] = number_or_tag(r.err_psi_S);
    j["err_psibar_S"] = number_or_tag(r.err_psibar_S);
    j["err_psi_D"] = number_or_tag(r.err_psi_D);
    j["q_ratio"] = number_or_tag(r.q_ratio);
    j["cross_mass_D"] = number_or_tag(r.cross_mass_D);
    j["status"] = r.status;
    j["wall_time_ms"] = number_or_tag(r.wall_time_ms);
    j["cell"] = r.cell;
    json ex = json::object();
    for (const auto& [k, v] : r.extras) ex[k] = number_or_tag(v);
    j["extras"] = ex;
    arr.push_back(std::move(j));
  }
  return arr.dump(2);
}

std::vector<TrialRecord> records_from_json(const std::string& text) {
  json arr;
  try {
    arr = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("records JSON is malformed: ") + e.what());
  }
  if (!arr.is_array()) throw ValidationError("records JSON must be an array");
  std::vector<TrialRecord> out;
  for (const json& j : arr) {
    TrialRecord r;
    r.problem = parse_problem(j.at("problem").get<std::string>());
    r.n = j.at("n").get<int>();
    r.d = j.at("d").get<int>();
    r.sigma = from_number_or_tag(j.at("sigma"));
    r.kappa = from_number_or_tag(j.at("kappa"));
    r.h = from_number_or_tag(j.at("h"));
    r.m = j.at("m").get<int>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.region = j.at("region").get<std::string>();
    r.gamma_star = from_number_or_tag(j.at("gamma_star"));
    r.margin_trained = from_number_or_tag(j.at("margin_trained"));
    r.margin_good = from_number_or_tag(j.at("margin_good"));
    r.margin_bad = from_number_or_tag(j.at("margin_bad"));
    r.margin_constructed = from_number_or_tag(j.at("margin_constructed"));
    r.train_err = from_number_or_tag(j.at("train_err"));
    r.test_err = from_number_or_tag(j.at("test_err"));
    r.err_psi_S = from_number_or_tag(j.at("err_psi_S"));
    r.err_psibar_S = from_number_or_tag(j.at("err_psibar_S"));
    r.err_psi_D = from_number_or_tag(j.at("err_psi_D"));
    r.q_ratio = from_number_or_tag(j.at("q_ratio"));
    r.cross_mass_D = from_number_or_tag(j.at("cross_mass_D"));
    r.status = j.at("status").get<std::string>();
    r.wall_time_ms = from_number_or_tag(j.at("wall_time_ms"));
    r.cell = j.value("cell", 0);
    if (j.contains("extras")) {
      for (auto it = j["extras"].begin(); it != j["extras"].end(); ++it) {
        r.extras[it.key()] = from_number_or_tag(it.value());
      }
    }
    out.push_back(std::move(r));
  }
  return out;
}

void emit(const std::vector<TrialRecord>& records, EmitFormat format, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << (format == EmitFormat::kCsv ? records_to_csv(records) : records_to_json(records));
  if (format == EmitFormat::kJson) out << '\n';
  out.flush();
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

std::uint64_t determinism_hash(const std::vector<std::string>& csv_texts) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](const std::string& s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
  };
  for (const std::string& text : csv_texts) {
    const auto lines = lines_of(text);
    if (lines.empty()) continue;
    const auto header = split(lines[0], ',');
    const auto it = std::find(header.begin(), header.end(), "wall_time_ms");
    const long skip = it == header.end() ? -1 : static_cast<long>(it - header.begin());
    for (const std::string& line : lines) {
      const auto fields = split(line, ',');
      for (std::size_t i = 0; i < fields.size(); ++i) {
        if (static_cast<long>(i) == skip) continue;
        feed(fields[i]);
        feed(",");
      }
      feed("\n");
    }
    feed("\x1e");
  }
  return h;
}

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void sort_records(std::vector<TrialRecord>& records) {
  std::stable_sort(records.begin(), records.end(), [](const TrialRecord& a, const TrialRecord& b) {
    return a.cell != b.cell ? a.cell < b.cell : a.seed < b.seed;
  });
}

}  // namespace marginlab
