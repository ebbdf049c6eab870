#pragma once

// Command-line surface: estimate / test / oracle-test / compare / simulate.
// Exit codes: 0 success, 2 input or usage error, 3 numeric failure.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rlis/baselines.hpp"
#include "rlis/em.hpp"
#include "rlis/model.hpp"
#include "rlis/replicability.hpp"
#include "rlis/serialize.hpp"
#include "rlis/simulate.hpp"
#include "rlis/table_io.hpp"

namespace rlis {

namespace detail {

struct CommonInputArgs {
  std::string input;
  ReadOptions read;

  void attach(CLI::App* cmd) {
    cmd->add_option("--input", input, "input TSV/CSV with header")->required();
    cmd->add_option("--id-col", read.id_col, "feature id column name");
    cmd->add_option("--p1-col", read.p1_col, "study-1 p-value column name");
    cmd->add_option("--p2-col", read.p2_col, "study-2 p-value column name");
    cmd->add_option("--zero-floor", read.zero_floor,
                    "replacement for p-values equal to zero");
    cmd->add_flag("--sort-by-position", read.sort_by_position,
                  "sort rows by (chrom,pos) before analysis");
  }

  InputTable load() const {
    InputTable t = read_paired_table(input, read);
    if (!t.skipped_lines.empty()) {
      std::cerr << "note: skipped " << t.skipped_lines.size()
                << " row(s) with missing p-values (first at line "
                << t.skipped_lines.front() << ")\n";
    }
    if (t.clamped_zeros > 0)
      std::cerr << "note: clamped " << t.clamped_zeros
                << " zero p-value(s) to " << read.zero_floor << "\n";
    if (t.clamped_ones > 0)
      std::cerr << "note: clamped " << t.clamped_ones
                << " p-value(s) equal to one\n";
    if (t.has_coordinates && !t.coordinate_sorted && !read.sort_by_position)
      std::cerr << "warning: input does not appear sorted by (chrom,pos); "
                   "the analysis treats row order as the chain order "
                   "(--sort-by-position to reorder)\n";
    return t;
  }
};

struct EmArgs {
  EmConfig cfg;

  void attach(CLI::App* cmd) {
    cmd->add_option("--max_iterations", cfg.max_iterations, "EM iteration cap");
    cmd->add_option("--rel_tol", cfg.rel_tol,
                    "relative log-likelihood convergence threshold");
    cmd->add_option("--min_features", cfg.min_features,
                    "smallest input size accepted by the estimator");
  }
};

inline void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw input_error("cannot create output directory: " + dir);
}

inline std::string join_path(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

}  // namespace detail

inline int cli_dispatch(const std::vector<std::string>& args) {
  CLI::App app{"replicability analysis of paired p-values from two studies"};
  app.require_subcommand(1);
  app.fallthrough();

  std::uint64_t seed = 1;
  int threads = 0;
  std::string preset = "paper";
  app.add_option("--seed", seed, "RNG seed")->capture_default_str();
  app.add_option("--threads", threads, "worker threads (0 = hardware)");
  app.add_option("--preset", preset, "desk or paper scale")
      ->check(CLI::IsMember({"desk", "paper"}));
  app.set_config("--config", "",
                 "TOML config; global keys at top level, subcommand "
                 "options under a [simulate] etc. section");

  // estimate
  auto* est = app.add_subcommand("estimate", "fit the model, write params JSON");
  detail::CommonInputArgs est_in;
  detail::EmArgs est_em;
  std::string est_out;
  est_in.attach(est);
  est_em.attach(est);
  est->add_option("--out", est_out, "output directory")->required();

  // test
  auto* tst = app.add_subcommand("test", "fit and run the step-up procedure");
  detail::CommonInputArgs tst_in;
  detail::EmArgs tst_em;
  std::string tst_out;
  double tst_q = 0.05;
  tst_in.attach(tst);
  tst_em.attach(tst);
  tst->add_option("--q", tst_q, "nominal FDR level")->required();
  tst->add_option("--out", tst_out, "output directory")->required();

  // oracle-test
  auto* orc = app.add_subcommand("oracle-test",
                                 "run the step-up procedure with known params");
  detail::CommonInputArgs orc_in;
  std::string orc_params, orc_out;
  double orc_q = 0.05;
  orc_in.attach(orc);
  orc->add_option("--params", orc_params, "params JSON file")->required();
  orc->add_option("--q", orc_q, "nominal FDR level")->required();
  orc->add_option("--out", orc_out, "output directory")->required();

  // compare
  auto* cmp = app.add_subcommand("compare", "run baseline procedures");
  detail::CommonInputArgs cmp_in;
  detail::EmArgs cmp_em;
  std::string cmp_out;
  double cmp_q = 0.05;
  std::vector<std::string> cmp_methods{"adhoc_bh", "maxp", "radjust", "jump",
                                       "stareg"};
  cmp_in.attach(cmp);
  cmp_em.attach(cmp);
  cmp->add_option("--q", cmp_q, "nominal FDR level")->required();
  cmp->add_option("--methods", cmp_methods, "comma-separated method list")
      ->delimiter(',');
  cmp->add_option("--out", cmp_out, "output directory")->required();

  // simulate
  auto* sim = app.add_subcommand("simulate", "Monte Carlo FDR/power evaluation");
  detail::EmArgs sim_em;
  SimConfig sim_base;
  std::size_t sim_m = 0;
  int sim_reps = 0;
  int sim_scenario = 1;
  std::vector<double> sim_q;
  std::vector<std::string> sim_methods{"rlis", "adhoc_bh", "maxp",
                                       "radjust", "jump", "stareg"};
  std::string sim_out;
  sim_em.attach(sim);
  sim->add_option("--m", sim_m, "features per replication");
  sim->add_option("--replications,--reps", sim_reps, "number of replications");
  sim->add_option("--mu1", sim_base.mu1, "signal mean, study 1")
      ->capture_default_str();
  sim->add_option("--mu2", sim_base.mu2, "signal mean, study 2")
      ->capture_default_str();
  sim->add_option("--sigma1", sim_base.sigma1, "signal sd, study 1");
  sim->add_option("--sigma2", sim_base.sigma2, "signal sd, study 2");
  sim->add_option("--scenario", sim_scenario, "generating matrix: 1 or 2")
      ->check(CLI::IsMember({1, 2}));
  sim->add_option("--q", sim_q, "nominal level grid (repeatable)");
  sim->add_option("--methods", sim_methods, "comma-separated method list")
      ->delimiter(',');
  sim->add_option("--out", sim_out, "output CSV path (default: stdout)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(std::move(reversed));
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (est->parsed()) {
      const InputTable t = est_in.load();
      const EmFit f = fit(t.to_pvalues(), est_em.cfg);
      detail::ensure_dir(est_out);
      write_text_file(detail::join_path(est_out, "params.json"),
                      to_json(f).dump(2) + "\n");
      std::cout << "fit: " << t.ids.size() << " features, "
                << f.iterations_used << " iterations, "
                << (f.converged ? "converged" : "iteration cap reached")
                << ", log-likelihood "
                << (f.log_likelihood_trace.empty()
                        ? 0.0
                        : f.log_likelihood_trace.back())
                << "\n";
    } else if (tst->parsed()) {
      const InputTable t = tst_in.load();
      const PairedPValues data = t.to_pvalues();
      auto [f, outcome] = test_replicability(data, tst_q, tst_em.cfg);
      detail::ensure_dir(tst_out);
      write_text_file(detail::join_path(tst_out, "params.json"),
                      to_json(f).dump(2) + "\n");
      write_text_file(detail::join_path(tst_out, "results.tsv"),
                      test_outcome_tsv(data, outcome));
      write_text_file(detail::join_path(tst_out, "results.json"),
                      test_outcome_sidecar(outcome).dump(2) + "\n");
      std::cout << outcome.rejected.size() << " rejections at q = " << tst_q
                << "\n";
    } else if (orc->parsed()) {
      const InputTable t = orc_in.load();
      const PairedPValues data = t.to_pvalues();
      const HmmParams params = read_params_json(orc_params);
      const TestOutcome outcome = oracle_test(params, data, orc_q);
      detail::ensure_dir(orc_out);
      write_text_file(detail::join_path(orc_out, "results.tsv"),
                      test_outcome_tsv(data, outcome));
      write_text_file(detail::join_path(orc_out, "results.json"),
                      test_outcome_sidecar(outcome).dump(2) + "\n");
      std::cout << outcome.rejected.size() << " rejections at q = " << orc_q
                << "\n";
    } else if (cmp->parsed()) {
      const InputTable t = cmp_in.load();
      const PairedPValues data = t.to_pvalues();
      detail::ensure_dir(cmp_out);
      for (const auto& name : cmp_methods) {
        if (name == "rlis") {
          auto [f, outcome] = test_replicability(data, cmp_q, cmp_em.cfg);
          write_text_file(detail::join_path(cmp_out, "rlis.tsv"),
                          test_outcome_tsv(data, outcome));
          std::cout << "rlis: " << outcome.rejected.size() << " rejections\n";
          continue;
        }
        BaselineOutcome outcome;
        if (name == "adhoc_bh") outcome = adhoc_bh(data, cmp_q);
        else if (name == "maxp") outcome = maxp(data, cmp_q);
        else if (name == "radjust") outcome = radjust_adaptive(data, cmp_q);
        else if (name == "jump") outcome = jump(data, cmp_q);
        else if (name == "stareg") outcome = stareg(data, cmp_q);
        else throw input_error("compare: unknown method '" + name + "'");
        write_text_file(detail::join_path(cmp_out, name + ".tsv"),
                        baseline_tsv(data, outcome));
        std::cout << name << ": " << outcome.rejected.size() << " rejections\n";
      }
    } else if (sim->parsed()) {
      SimConfig cfg = (preset == "desk") ? SimConfig::desk_preset()
                                         : SimConfig::paper_preset();
      cfg.a = scenario_matrix(sim_scenario);
      cfg.mu1 = sim_base.mu1;
      cfg.mu2 = sim_base.mu2;
      cfg.sigma1 = sim_base.sigma1;
      cfg.sigma2 = sim_base.sigma2;
      if (sim_m > 0) cfg.m = sim_m;
      if (sim_reps > 0) cfg.replications = sim_reps;
      if (!sim_q.empty()) cfg.q_grid = sim_q;
      cfg.seed = seed;
      cfg.threads = threads;
      cfg.em = sim_em.cfg;
      const EvalReport report = evaluate(cfg, sim_methods);
      const std::string csv = report.to_csv();
      if (sim_out.empty())
        std::cout << csv;
      else
        write_text_file(sim_out, csv);
    }
  } catch (const input_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const numeric_error& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << "\n";
    return 3;
  }
  return 0;
}

inline int cli_dispatch(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return cli_dispatch(args);
}

}  // namespace rlis
