// marginlab command-line driver.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "marginlab/acceptance.hpp"
#include "marginlab/errors.hpp"
#include "marginlab/labharness.hpp"
#include "marginlab/opt_chain.hpp"
#include "marginlab/serialize.hpp"

using namespace marginlab;
using nlohmann::json;

namespace {

struct Common {
  std::string config_path;
  std::string out;  // "-" is stdout
  std::string format = "csv";
};

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Leftover "--key=value" or "--key value" arguments become config overrides.
Overrides collect_overrides(const std::vector<std::string>& rest) {
  Overrides out;
  for (std::size_t i = 0; i < rest.size(); ++i) {
    const std::string& a = rest[i];
    if (a.rfind("--", 0) != 0) throw ValidationError("unexpected argument '" + a + "'");
    const std::string body = a.substr(2);
    const auto eq = body.find('=');
    if (eq != std::string::npos) {
      out.emplace_back(body.substr(0, eq), body.substr(eq + 1));
    } else if (i + 1 < rest.size() && rest[i + 1].rfind("--", 0) != 0) {
      out.emplace_back(body, rest[++i]);
    } else {
      out.emplace_back(body, "true");
    }
  }
  return out;
}

ExperimentConfig make_config(const Common& c, const CLI::App& sub, const std::string& problem) {
  Overrides ov;
  if (!problem.empty()) ov.emplace_back("problem", problem);
  for (auto& kv : collect_overrides(sub.remaining())) ov.push_back(kv);
  const std::string text = c.config_path.empty() ? std::string("{}") : read_file(c.config_path);
  return load_config(text, ov);
}

json finite_or_string(double v) {
  if (std::isfinite(v)) return v;
  return format_double(v);
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

void emit_records(const std::vector<TrialRecord>& recs, const Common& c) {
  if (c.format == "json") {
    write_text(c.out, records_to_json(recs) + "\n");
  } else if (c.format == "csv") {
    write_text(c.out, records_to_csv(recs));
  } else {
    throw ValidationError("format must be csv or json");
  }
}

void warn_conditioning(const std::vector<TrialRecord>& recs) {
  for (const auto& r : recs) {
    if (r.extras.count("ill_conditioned") && r.extra("ill_conditioned") != 0.0) {
      std::cerr << "warning: seed " << r.seed << ": noise Gram matrix is ill-conditioned (cond "
                << r.extra("gram_condition") << ")\n";
    }
    if (!r.ok()) std::cerr << "warning: seed " << r.seed << ": " << r.status << "\n";
  }
}

std::vector<TrialRecord> run_seeds(const ExperimentConfig& cfg) {
  std::vector<std::function<TrialRecord()>> jobs;
  for (std::uint64_t s : cfg.seeds) jobs.push_back([cfg, s] { return run_trial(cfg, s); });
  auto recs = run_parallel(jobs, resolve_workers(cfg.workers));
  warn_conditioning(recs);
  return recs;
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(parse_double(item));
  }
  return out;
}

json point_json(const TrivariatePoint& p) {
  return {{"b", p.b}, {"c", p.c}, {"d", p.d}, {"k", p.k}, {"p5", p.p5}, {"h", p.h},
          {"objective", p.objective}, {"constraint", p.constraint()}, {"boundary", p.boundary}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"marginlab: max-margin constructions, training and audits on synthetic data"};
  app.require_subcommand(1);
  Common common;

  auto add_common = [&common](CLI::App* sub, bool records) {
    sub->allow_extras();
    sub->add_option("-c,--config", common.config_path, "JSON config file");
    sub->add_option("-o,--out", common.out, "output path (default stdout)");
    if (records) sub->add_option("--format", common.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    sub->footer("Any config field can be overridden with --key=value, e.g. --kappa=2 --trainer.iterations=3000.");
  };

  auto* gen = app.add_subcommand("gen", "sample a dataset and write it in the MLDS binary format");
  add_common(gen, false);
  std::string gen_problem = "linear";
  gen->add_option("--problem", gen_problem)->check(CLI::IsMember({"linear", "xor"}));

  auto* solve = app.add_subcommand("solve-linear", "max-margin linear trials, one record per seed");
  add_common(solve, true);

  auto* train = app.add_subcommand("train-xor", "train the two-layer network, one record per seed");
  add_common(train, true);
  std::string save_net_path, trace_path;
  train->add_option("--save-net", save_net_path, "write the trained net of the first seed (MLNN)");
  train->add_option("--trace", trace_path, "write the trainer trace of the first seed as CSV");

  auto* construct = app.add_subcommand("construct", "explicit XOR network from the trivariate solution");
  add_common(construct, false);
  std::string mode = "optimal";
  double alpha = 1.0;
  std::string construct_net_path;
  construct->add_option("--mode", mode)->check(CLI::IsMember({"optimal", "no_gen", "scaled"}));
  construct->add_option("--alpha", alpha, "signal scale for --mode scaled");
  construct->add_option("--save-net", construct_net_path);

  auto* opt5 = app.add_subcommand("opt5", "solve the trivariate program");
  opt5->set_help_flag("--help", "print help");
  double k = 1.0, p5 = 1.0, h5 = 1.5;
  int grid = 0;
  opt5->add_option("--k", k)->required();
  opt5->add_option("--p5", p5);
  opt5->add_option("--h", h5);
  opt5->add_option("--oracle-grid", grid, "also run the brute-force oracle at this resolution");

  auto* thresholds = app.add_subcommand("thresholds", "regime thresholds for a given h");
  thresholds->set_help_flag("--help", "print help");
  double th_h = 1.5;
  double th_kappa = std::nan("");
  thresholds->add_option("--h", th_h);
  thresholds->add_option("--kappa", th_kappa, "also classify this kappa");

  auto* sweep = app.add_subcommand("sweep", "phase-diagram sweep");
  add_common(sweep, true);
  std::string sweep_problem = "linear", kappas = "0.25,0.5,1,2,4,8", ratios, hs;
  sweep->add_option("--problem", sweep_problem)->check(CLI::IsMember({"linear", "xor"}));
  sweep->add_option("--kappas", kappas, "comma-separated kappa values");
  sweep->add_option("--d-over-n", ratios, "comma-separated d/n ratios (default: config d/n)");
  sweep->add_option("--hs", hs, "comma-separated h values (xor)");

  auto* uc = app.add_subcommand("uc-demo", "opposite-sample uniform-convergence failure demo");
  add_common(uc, true);
  std::string uc_problem = "linear";
  uc->add_option("--problem", uc_problem)->check(CLI::IsMember({"linear", "xor"}));

  auto* md = app.add_subcommand("margin-demo", "margin-bound vacuity demo");
  add_common(md, true);
  std::string md_problem = "linear";
  md->add_option("--problem", md_problem)->check(CLI::IsMember({"linear", "xor"}));

  auto* accept = app.add_subcommand("accept", "run the acceptance suite");
  std::string out_dir;
  std::vector<int> only;
  int accept_workers = 0;
  accept->add_option("--out-dir", out_dir, "write the record tables here");
  accept->add_option("--only", only, "criteria to run (1..12)")->delimiter(',');
  accept->add_option("--workers", accept_workers);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      const ExperimentConfig cfg = make_config(common, *gen, gen_problem);
      const std::uint64_t seed = cfg.seeds.empty() ? 0 : cfg.seeds.front();
      if (common.out.empty() || common.out == "-") throw ValidationError("gen needs --out PATH");
      if (cfg.problem == Problem::kLinear) {
        const LinearSpec spec = cfg.linear_spec();
        save_dataset(common.out, sample_linear(spec, seed), spec.mu, Eigen::VectorXd::Zero(spec.d));
      } else {
        const XorSpec spec = cfg.xor_spec();
        save_dataset(common.out, sample_xor(spec, seed), spec.mu1, spec.mu2);
      }
      std::cerr << "wrote " << common.out << " (n=" << cfg.n << ", d=" << cfg.d
                << ", sigma=" << cfg.sigma_value() << ", seed=" << seed << ")\n";
    } else if (*solve) {
      emit_records(run_seeds(make_config(common, *solve, "linear")), common);
    } else if (*train) {
      ExperimentConfig cfg = make_config(common, *train, "xor");
      emit_records(run_seeds(cfg), common);
      if (!save_net_path.empty() || !trace_path.empty()) {
        const XorSpec spec = cfg.xor_spec();
        const std::uint64_t seed = cfg.seeds.empty() ? 0 : cfg.seeds.front();
        const Dataset ds = sample_xor(spec, seed);
        TrainerOptions topt = cfg.trainer;
        topt.seed = seed;
        const TrainResult tr = train_max_margin(ds, spec, topt);
        if (!save_net_path.empty()) save_net(save_net_path, tr.net);
        if (!trace_path.empty()) {
          std::ostringstream t;
          t << "restart,iteration,tau,soft_margin,margin,best_margin,step\n";
          for (const auto& p : tr.trace) {
            t << p.restart << ',' << p.iteration << ',' << format_double(p.tau) << ','
              << format_double(p.soft_margin) << ',' << format_double(p.margin) << ','
              << format_double(p.best_margin) << ',' << format_double(p.step) << '\n';
          }
          write_text(trace_path, t.str());
        }
      }
    } else if (*construct) {
      const ExperimentConfig cfg = make_config(common, *construct, "xor");
      const XorSpec spec = cfg.xor_spec();
      const std::uint64_t seed = cfg.seeds.empty() ? 0 : cfg.seeds.front();
      const Dataset ds = sample_xor(spec, seed);
      const ConstructMode cm = mode == "optimal"  ? ConstructMode::optimal()
                               : mode == "no_gen" ? ConstructMode::no_gen()
                                                  : ConstructMode::scaled(alpha);
      const Construction con = construct_network(ds, spec, cm);
      if (con.ill_conditioned)
        std::cerr << "warning: noise Gram matrix is ill-conditioned (cond " << con.gram_condition << ")\n";
      const MarginReport rep = normalized_margin(con.net, ds);
      const NetDecomposition dec = decompose_net(con.net, ds, spec);
      json j = {{"mode", cm.name()},
                {"seed", seed},
                {"kappa", spec.kappa()},
                {"kappa_hat", con.kappa_hat},
                {"n_min", con.n_min},
                {"gram_condition", con.gram_condition},
                {"point", point_json(con.point)},
                {"margin", finite_or_string(rep.normalized_margin)},
                {"train_err", empirical_error(con.net, ds)},
                {"test_err", xor_test_error(con.net, spec, cfg.mc_samples, seed)},
                {"u_norm", dec.u_norm},
                {"v_norm", dec.v_norm}};
      if (!construct_net_path.empty()) save_net(construct_net_path, con.net);
      write_text(common.out, j.dump(2) + "\n");
    } else if (*opt5) {
      json j = {{"closed_form", point_json(solve_opt5(k, p5, h5))},
                {"without_signal", point_json(solve_opt5_without_signal(k, p5, h5))}};
      if (grid > 0) j["oracle"] = point_json(opt5_oracle(k, p5, h5, grid));
      std::cout << j.dump(2) << "\n";
    } else if (*thresholds) {
      const Thresholds t = Thresholds::for_h(th_h);
      json j = {{"h", th_h},
                {"linear", {{"kappa_gen", t.kappa_gen_linear}, {"kappa_uc", t.kappa_uc_linear}}},
                {"xor",
                 {{"kappa_gen", t.kappa_gen_xor},
                  {"kappa_uc", t.kappa_uc_xor},
                  {"closed_form_kappa_gen", std::pow(2.0, 1.0 + 2.0 / th_h) - 4.0}}}};
      if (!std::isnan(th_kappa)) {
        j["kappa"] = th_kappa;
        j["linear"]["region"] = region_name(classify_region(Problem::kLinear, th_kappa, th_h));
        j["xor"]["region"] = region_name(classify_region(Problem::kXor, th_kappa, th_h));
        j["xor"]["gamma_0"] = gamma_0(th_kappa, th_h);
        j["xor"]["gamma_star"] = gamma_star(th_kappa, th_h);
      }
      std::cout << j.dump(2) << "\n";
    } else if (*sweep) {
      const ExperimentConfig cfg = make_config(common, *sweep, sweep_problem);
      SweepGrid g;
      g.kappas = parse_list(kappas);
      g.d_over_n = ratios.empty() ? std::vector<double>{static_cast<double>(cfg.d) / cfg.n} : parse_list(ratios);
      g.hs = parse_list(hs);
      const SweepResult res = phase_sweep(g, cfg);
      warn_conditioning(res.records);
      if (!res.caveat.empty()) std::cerr << "caveat: " << res.caveat << "\n";
      emit_records(res.records, common);
      if (res.aborted) return 3;
    } else if (*uc || *md) {
      CLI::App& sub = *uc ? *uc : *md;
      const ExperimentConfig cfg = make_config(common, sub, *uc ? uc_problem : md_problem);
      std::vector<TrialRecord> recs;
      json summary = json::array();
      for (std::uint64_t s : cfg.seeds) {
        if (*uc) {
          const UcDemoRecord r = uc_failure_demo(cfg, s);
          summary.push_back({{"seed", s},
                             {"in_band", r.in_band},
                             {"train_err", finite_or_string(r.train_err)},
                             {"accuracy_psi_S", finite_or_string(r.accuracy_psi_S)},
                             {"err_psibar_S", finite_or_string(r.err_psibar_S)},
                             {"err_psi_D", finite_or_string(r.err_psi_D)},
                             {"test_err", finite_or_string(r.test_err)},
                             {"witness", finite_or_string(r.witness)}});
          recs.push_back(r.trial);
        } else {
          const VacuityRecord r = margin_vacuity_demo(cfg, s);
          summary.push_back({{"seed", s},
                             {"margin_ratio", finite_or_string(r.margin_ratio)},
                             {"test_err", finite_or_string(r.test_err)}});
          recs.push_back(r.trial);
        }
      }
      warn_conditioning(recs);
      std::cerr << summary.dump(2) << "\n";
      emit_records(recs, common);
    } else if (*accept) {
      AcceptanceOptions opts;
      opts.workers = accept_workers;
      opts.only = only;
      const AcceptanceReport rep = run_acceptance(opts);
      for (const auto& r : rep.results) std::cout << format_result(r) << "\n";
      std::cout << "record hash " << hash_hex(rep.hash) << "\n";
      if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        for (const auto& [name, text] : rep.csvs) write_text((std::filesystem::path(out_dir) / name).string(), text);
      }
      return rep.all_passed() ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
