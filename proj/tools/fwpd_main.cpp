#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "fwpd/harness.hpp"

namespace {

using fwpd::ConfigError;
using fwpd::ExperimentConfig;

// Config flags shared by `run` and `verify`. Values stay strings and flow
// through the same entry parser as config files, so errors and accepted
// spellings are identical in both.
struct ConfigFlags {
  std::string config_path;
  std::vector<std::pair<std::string, std::string>> entries;  // in flag-definition order

  void add_to(CLI::App& cmd) {
    cmd.add_option("--config", config_path, "config file with key = value lines");
    auto key_opt = [&](const std::string& flag, const char* key, const char* help) {
      entries.emplace_back(key, "");
      std::string* slot = &entries.back().second;
      cmd.add_option(flag, *slot, help);
    };
    entries.reserve(21);  // reallocation would invalidate the bound slots
    key_opt("--algo", "algo", "fw | hbfw | gen_fw | ofw_ftrl | ofw_omd | gd_pd");
    key_opt("--set", "set", "simplex | ksparse | none");
    key_opt("--dim", "dim", "ambient dimension");
    key_opt("--k", "k", "sparsity level for the ksparse set");
    key_opt("--objective,--obj", "objective", "dist | lsq | quad");
    key_opt("--rows", "rows", "rows of the lsq matrix (default dim)");
    key_opt("--cond", "cond", "condition number of the quad objective");
    key_opt("--step_rule,--step", "step_rule", "step-size rule");
    key_opt("--ell", "ell", "open-loop parameter: gamma_t = ell/(t+ell)");
    key_opt("--a0", "a0", "open-loop weight scale");
    key_opt("--variant", "variant", "gen_fw: per_step | cumulative | decreasing_reg");
    key_opt("--policy", "policy", "ofw_omd: ftrl_equivalent | zero");
    key_opt("--y_hook", "y_hook", "optimistic: identity | segment_search");
    key_opt("--T,--iters", "T", "iteration budget");
    key_opt("--seed", "seed", "instance seed");
    key_opt("--report_hb_gap", "report_hb_gap", "report the averaged-gradient bound (true/false)");
    key_opt("--epsilon", "epsilon", "early-stop gap threshold");
    key_opt("--stride", "stride", "CSV reporting stride");
    key_opt("--d_bound", "d_bound", "gd_pd distance bound");
    key_opt("--psi", "psi", "none | linear");
    key_opt("--psi_scale", "psi_scale", "scale of the linear regularizer");
  }

  ExperimentConfig build() const {
    ExperimentConfig cfg;
    if (!config_path.empty()) {
      std::ifstream in(config_path, std::ios::binary);
      if (!in) throw ConfigError("cannot open config file '" + config_path + "'");
      std::ostringstream buf;
      buf << in.rdbuf();
      cfg = fwpd::parse_config(buf.str());
    }
    for (const auto& [key, value] : entries)
      if (!value.empty()) fwpd::apply_config_entry(cfg, key, value);
    fwpd::validate_config(cfg);
    return cfg;
  }
};

int cmd_run(const ConfigFlags& flags, const std::string& out_path) {
  ExperimentConfig cfg = flags.build();
  fwpd::ExperimentResult res = fwpd::run_experiment(cfg);
  fwpd::write_run_files(cfg, res.run, out_path);
  const fwpd::TraceRecord& last = res.run.trace.back();
  std::cout << "wrote " << out_path << " and " << fwpd::meta_path_for(out_path) << "\n"
            << "iterations = " << last.iter << ", final_primal = "
            << fwpd::format_double(res.run.primal_final)
            << ", final_gap = " << fwpd::format_double(last.gap_ahead)
            << (res.run.converged ? ", converged" : "") << "\n";
  return 0;
}

int cmd_slope(const std::string& csv_path, const std::string& column, const std::string& window,
              long t0, long t1) {
  std::ifstream in(csv_path, std::ios::binary);
  if (!in) throw ConfigError("cannot open trace file '" + csv_path + "'");
  std::vector<fwpd::TraceRecord> rows = fwpd::read_csv(in);
  fwpd::SlopeWindow win;
  if (window == "last_decade") {
    win.last_decade = true;
  } else if (window == "range") {
    if (t1 <= 0) throw ConfigError("slope: range window needs --t0 and --t1");
    win.last_decade = false;
    win.t0 = t0;
    win.t1 = t1;
  } else {
    throw ConfigError("slope: window must be last_decade or range");
  }
  std::cout << fwpd::format_double(fwpd::slope_fit(rows, column, win)) << "\n";
  return 0;
}

int cmd_compare(const std::vector<std::string>& config_paths, const std::string& out_path) {
  std::vector<ExperimentConfig> cfgs;
  cfgs.reserve(config_paths.size());
  for (const std::string& path : config_paths) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    ExperimentConfig cfg = fwpd::parse_config(buf.str());
    fwpd::validate_config(cfg);
    cfgs.push_back(std::move(cfg));
  }
  std::string table = fwpd::format_compare_table(fwpd::run_compare(cfgs));
  std::cout << table;
  if (!out_path.empty()) {
    std::ofstream os(out_path, std::ios::binary);
    if (!os) throw fwpd::OracleError("cannot open output file '" + out_path + "'");
    os << table;
  }
  return 0;
}

int cmd_verify(const ConfigFlags& flags) {
  ExperimentConfig cfg = flags.build();
  int failures = fwpd::run_verify(cfg, std::cout);
  if (failures > 0) {
    std::cout << failures << " check(s) failed\n";
    return 3;
  }
  std::cout << "all checks passed\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fwpd: projection-free convex optimization benchmarks"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "execute one experiment and write a CSV trace");
  ConfigFlags run_flags;
  run_flags.add_to(*run);
  std::string out_path = "trace.csv";
  run->add_option("--out", out_path, "output CSV path (metadata sidecar gets .meta)");

  auto* slope = app.add_subcommand("slope", "log-log slope of a trace column");
  std::string slope_csv, slope_column = "gap_ahead", slope_window = "last_decade";
  long slope_t0 = 0, slope_t1 = 0;
  slope->add_option("--csv", slope_csv, "trace CSV produced by run")->required();
  slope->add_option("--column", slope_column, "trace column (default gap_ahead)");
  slope->add_option("--window", slope_window, "last_decade (default) or range");
  slope->add_option("--t0", slope_t0, "range window start iteration");
  slope->add_option("--t1", slope_t1, "range window end iteration");

  auto* compare = app.add_subcommand("compare", "run several configs on one instance");
  std::vector<std::string> compare_paths;
  std::string compare_out;
  compare->add_option("configs", compare_paths, "config files (>= 2)")->expected(-2);
  compare->add_option("--out", compare_out, "also write the table to this file");

  auto* verify = app.add_subcommand("verify", "run the invariant checks for a config");
  ConfigFlags verify_flags;
  verify_flags.add_to(*verify);

  try {
    app.parse(argc, argv);
    if (run->parsed()) return cmd_run(run_flags, out_path);
    if (slope->parsed()) return cmd_slope(slope_csv, slope_column, slope_window, slope_t0, slope_t1);
    if (compare->parsed()) return cmd_compare(compare_paths, compare_out);
    if (verify->parsed()) return cmd_verify(verify_flags);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
