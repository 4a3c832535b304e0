#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "fwpd/algorithms.hpp"
#include "fwpd/errors.hpp"
#include "fwpd/model.hpp"
#include "fwpd/prng.hpp"
#include "fwpd/regularizer.hpp"
#include "fwpd/sets.hpp"
#include "fwpd/trace.hpp"

namespace fwpd {

inline constexpr std::string_view kVersion = "0.1.0";

enum class Algo { fw, hbfw, gen_fw, ofw_ftrl, ofw_omd, gd_pd };
enum class SetKind { none, simplex, ksparse };
enum class ObjectiveKind { dist, lsq, quad };
enum class PsiKind { none, linear };

inline const char* algo_name(Algo a) {
  switch (a) {
    case Algo::fw: return "fw";
    case Algo::hbfw: return "hbfw";
    case Algo::gen_fw: return "gen_fw";
    case Algo::ofw_ftrl: return "ofw_ftrl";
    case Algo::ofw_omd: return "ofw_omd";
    case Algo::gd_pd: return "gd_pd";
  }
  return "unknown";
}

inline const char* set_kind_name(SetKind s) {
  switch (s) {
    case SetKind::none: return "none";
    case SetKind::simplex: return "simplex";
    case SetKind::ksparse: return "ksparse";
  }
  return "unknown";
}

inline const char* objective_kind_name(ObjectiveKind o) {
  switch (o) {
    case ObjectiveKind::dist: return "dist";
    case ObjectiveKind::lsq: return "lsq";
    case ObjectiveKind::quad: return "quad";
  }
  return "unknown";
}

inline const char* psi_kind_name(PsiKind p) {
  return p == PsiKind::none ? "none" : "linear";
}

inline const char* y_hook_name(YHook h) {
  return h == YHook::identity ? "identity" : "segment_search";
}

// Experiment description; round-trips losslessly through key = value text.
struct ExperimentConfig {
  Algo algo = Algo::fw;
  SetKind set = SetKind::simplex;
  int dim = 100;
  std::optional<int> k;              // ksparse only
  ObjectiveKind objective = ObjectiveKind::dist;
  std::optional<int> rows;           // lsq only; defaults to dim
  std::optional<double> cond;        // quad only; defaults to 100
  StepRule step_rule = StepRule::open_loop;
  int ell = 2;
  double a0 = 2.0;
  FwVariant variant = FwVariant::per_step;  // gen_fw only
  SubgradientPolicy policy = SubgradientPolicy::ftrl_equivalent;  // ofw_omd only
  YHook y_hook = YHook::identity;    // optimistic only
  long T = 100;
  unsigned long long seed = 0;
  bool report_hb_gap = true;
  double epsilon = 0.0;
  long stride = 1;
  std::optional<double> d_bound;     // gd_pd only
  PsiKind psi = PsiKind::none;
  double psi_scale = 1.0;
};

namespace detail {

// Accept hyphen or underscore spellings and any letter case.
inline std::string normalize_token(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c == '-') c = '_';
    else c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

template <typename T>
T parse_named_token(std::string_view key, std::string_view value,
                    const std::vector<std::pair<std::string_view, T>>& table) {
  std::string tok = normalize_token(value);
  for (const auto& [name, v] : table)
    if (tok == name) return v;
  throw ConfigError("config key '" + std::string(key) + "': unknown value '" +
                    std::string(value) + "'");
}

inline long parse_long_for(std::string_view key, std::string_view value) {
  try {
    return parse_long(value);
  } catch (const ConfigError&) {
    throw ConfigError("config key '" + std::string(key) + "': expected an integer, got '" +
                      std::string(value) + "'");
  }
}

inline double parse_double_for(std::string_view key, std::string_view value) {
  try {
    return parse_double(value);
  } catch (const ConfigError&) {
    throw ConfigError("config key '" + std::string(key) + "': expected a number, got '" +
                      std::string(value) + "'");
  }
}

inline bool parse_bool_for(std::string_view key, std::string_view value) {
  std::string tok = normalize_token(value);
  if (tok == "true" || tok == "1" || tok == "yes") return true;
  if (tok == "false" || tok == "0" || tok == "no") return false;
  throw ConfigError("config key '" + std::string(key) + "': expected a boolean, got '" +
                    std::string(value) + "'");
}

inline int parse_int_for(std::string_view key, std::string_view value) {
  long v = parse_long_for(key, value);
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max())
    throw ConfigError("config key '" + std::string(key) + "': value out of range");
  return static_cast<int>(v);
}

}  // namespace detail

// Applies one key = value entry; shared by the config-file parser and the CLI
// flag layer so both report identical errors.
inline void apply_config_entry(ExperimentConfig& cfg, std::string_view raw_key,
                               std::string_view value) {
  using detail::parse_named_token;
  std::string key = detail::normalize_token(raw_key);
  if (key == "algo") {
    cfg.algo = parse_named_token<Algo>(key, value,
                                       {{"fw", Algo::fw},
                                        {"hbfw", Algo::hbfw},
                                        {"gen_fw", Algo::gen_fw},
                                        {"ofw_ftrl", Algo::ofw_ftrl},
                                        {"ofw_omd", Algo::ofw_omd},
                                        {"gd_pd", Algo::gd_pd}});
  } else if (key == "set") {
    cfg.set = parse_named_token<SetKind>(key, value,
                                         {{"none", SetKind::none},
                                          {"simplex", SetKind::simplex},
                                          {"ksparse", SetKind::ksparse}});
  } else if (key == "dim") {
    cfg.dim = detail::parse_int_for(key, value);
  } else if (key == "k") {
    cfg.k = detail::parse_int_for(key, value);
  } else if (key == "objective") {
    cfg.objective = parse_named_token<ObjectiveKind>(key, value,
                                                     {{"dist", ObjectiveKind::dist},
                                                      {"lsq", ObjectiveKind::lsq},
                                                      {"quad", ObjectiveKind::quad}});
  } else if (key == "rows") {
    cfg.rows = detail::parse_int_for(key, value);
  } else if (key == "cond") {
    cfg.cond = detail::parse_double_for(key, value);
  } else if (key == "step_rule") {
    cfg.step_rule = parse_named_token<StepRule>(
        key, value,
        {{"open_loop", StepRule::open_loop},
         {"short_step", StepRule::short_step},
         {"pd_short", StepRule::pd_short},
         {"pd_line_search", StepRule::pd_line_search},
         {"gd_fixed", StepRule::gd_fixed},
         {"gd_pd_short", StepRule::gd_pd_short},
         {"gd_pd_line_search", StepRule::gd_pd_line_search}});
  } else if (key == "ell") {
    cfg.ell = detail::parse_int_for(key, value);
  } else if (key == "a0") {
    cfg.a0 = detail::parse_double_for(key, value);
  } else if (key == "variant") {
    cfg.variant = parse_named_token<FwVariant>(key, value,
                                               {{"per_step", FwVariant::per_step},
                                                {"cumulative", FwVariant::cumulative},
                                                {"decreasing_reg", FwVariant::decreasing_reg}});
  } else if (key == "policy") {
    cfg.policy = parse_named_token<SubgradientPolicy>(
        key, value,
        {{"ftrl_equivalent", SubgradientPolicy::ftrl_equivalent},
         {"zero", SubgradientPolicy::zero}});
  } else if (key == "y_hook") {
    cfg.y_hook = parse_named_token<YHook>(key, value,
                                          {{"identity", YHook::identity},
                                           {"segment_search", YHook::segment_search}});
  } else if (key == "t" || key == "iters") {
    cfg.T = detail::parse_long_for(key, value);
  } else if (key == "seed") {
    long s = detail::parse_long_for(key, value);
    if (s < 0) throw ConfigError("config key 'seed': must be nonnegative");
    cfg.seed = static_cast<unsigned long long>(s);
  } else if (key == "report_hb_gap") {
    cfg.report_hb_gap = detail::parse_bool_for(key, value);
  } else if (key == "epsilon") {
    cfg.epsilon = detail::parse_double_for(key, value);
  } else if (key == "stride") {
    cfg.stride = detail::parse_long_for(key, value);
  } else if (key == "d_bound") {
    cfg.d_bound = detail::parse_double_for(key, value);
  } else if (key == "psi") {
    cfg.psi = parse_named_token<PsiKind>(key, value,
                                         {{"none", PsiKind::none}, {"linear", PsiKind::linear}});
  } else if (key == "psi_scale") {
    cfg.psi_scale = detail::parse_double_for(key, value);
  } else {
    throw ConfigError("unknown config key '" + std::string(raw_key) + "'");
  }
}

// Parses key = value text: one entry per line, '#' comments, blank lines ok.
// Does not validate cross-field constraints; see validate_config.
inline ExperimentConfig parse_config(std::string_view text) {
  ExperimentConfig cfg;
  std::map<std::string, bool> seen;
  std::size_t pos = 0;
  int line_no = 0;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    std::string_view line =
        text.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
    pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
    ++line_no;
    if (std::size_t hash = line.find('#'); hash != std::string_view::npos)
      line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    std::size_t eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    std::string key = detail::normalize_token(detail::trim(line.substr(0, eq)));
    std::string_view value = detail::trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw ConfigError("config line " + std::to_string(line_no) + ": empty key or value");
    if (seen[key]) throw ConfigError("duplicate config key '" + key + "'");
    seen[key] = true;
    apply_config_entry(cfg, key, value);
  }
  return cfg;
}

// Emits keys in a fixed canonical order; optional or defaulted keys appear
// only when they deviate, so serialize(parse(serialize(c))) is a fixed point.
inline std::string serialize_config(const ExperimentConfig& cfg) {
  std::ostringstream os;
  os << "algo = " << algo_name(cfg.algo) << '\n';
  os << "set = " << set_kind_name(cfg.set) << '\n';
  os << "dim = " << cfg.dim << '\n';
  if (cfg.k) os << "k = " << *cfg.k << '\n';
  os << "objective = " << objective_kind_name(cfg.objective) << '\n';
  if (cfg.rows) os << "rows = " << *cfg.rows << '\n';
  if (cfg.cond) os << "cond = " << format_double(*cfg.cond) << '\n';
  os << "step_rule = " << step_rule_name(cfg.step_rule) << '\n';
  if (cfg.ell != 2) os << "ell = " << cfg.ell << '\n';
  if (cfg.a0 != 2.0) os << "a0 = " << format_double(cfg.a0) << '\n';
  if (cfg.variant != FwVariant::per_step) os << "variant = " << fw_variant_name(cfg.variant) << '\n';
  if (cfg.policy != SubgradientPolicy::ftrl_equivalent)
    os << "policy = " << subgradient_policy_name(cfg.policy) << '\n';
  if (cfg.y_hook != YHook::identity) os << "y_hook = " << y_hook_name(cfg.y_hook) << '\n';
  os << "T = " << cfg.T << '\n';
  os << "seed = " << cfg.seed << '\n';
  os << "report_hb_gap = " << (cfg.report_hb_gap ? "true" : "false") << '\n';
  os << "epsilon = " << format_double(cfg.epsilon) << '\n';
  os << "stride = " << cfg.stride << '\n';
  if (cfg.d_bound) os << "d_bound = " << format_double(*cfg.d_bound) << '\n';
  os << "psi = " << psi_kind_name(cfg.psi) << '\n';
  if (cfg.psi_scale != 1.0) os << "psi_scale = " << format_double(cfg.psi_scale) << '\n';
  return os.str();
}

inline void validate_config(const ExperimentConfig& cfg) {
  if (cfg.dim < 1) throw ConfigError("config key 'dim': must be >= 1");
  if (cfg.T < 1) throw ConfigError("config key 'T': must be >= 1");
  if (cfg.stride < 1) throw ConfigError("config key 'stride': must be >= 1");
  if (!(cfg.epsilon >= 0.0)) throw ConfigError("config key 'epsilon': must be >= 0");
  if (cfg.ell < 1) throw ConfigError("config key 'ell': must be >= 1");
  if (!(cfg.a0 > 0.0)) throw ConfigError("config key 'a0': must be positive");
  if (!std::isfinite(cfg.psi_scale)) throw ConfigError("config key 'psi_scale': must be finite");

  if (cfg.set == SetKind::ksparse) {
    if (!cfg.k) throw ConfigError("config key 'k': required for the ksparse set");
    if (*cfg.k < 1 || *cfg.k > cfg.dim)
      throw ConfigError("config key 'k': must satisfy 1 <= k <= dim");
  } else if (cfg.k) {
    throw ConfigError("config key 'k': applies to the ksparse set only");
  }
  if (cfg.rows) {
    if (cfg.objective != ObjectiveKind::lsq)
      throw ConfigError("config key 'rows': applies to the lsq objective only");
    if (*cfg.rows < 1) throw ConfigError("config key 'rows': must be >= 1");
  }
  if (cfg.cond) {
    if (cfg.objective != ObjectiveKind::quad)
      throw ConfigError("config key 'cond': applies to the quad objective only");
    if (!(*cfg.cond >= 1.0)) throw ConfigError("config key 'cond': must be >= 1");
  }

  const bool fw_family = cfg.algo == Algo::fw || cfg.algo == Algo::hbfw || cfg.algo == Algo::gen_fw;
  const bool optimistic = cfg.algo == Algo::ofw_ftrl || cfg.algo == Algo::ofw_omd;

  if (cfg.algo == Algo::gd_pd) {
    if (cfg.set != SetKind::none)
      throw ConfigError("config key 'set': gd_pd is unconstrained; use set = none");
    if (cfg.step_rule != StepRule::gd_pd_short && cfg.step_rule != StepRule::gd_pd_line_search &&
        cfg.step_rule != StepRule::gd_fixed)
      throw ConfigError(
          "config key 'step_rule': gd_pd supports gd_pd_short, gd_pd_line_search, gd_fixed");
    if (cfg.psi != PsiKind::none)
      throw ConfigError("config key 'psi': gd_pd is unconstrained; psi must be none");
  } else {
    if (cfg.set == SetKind::none)
      throw ConfigError("config key 'set': required for projection-free runs");
    if (cfg.d_bound) throw ConfigError("config key 'd_bound': applies to gd_pd only");
  }
  if (fw_family) {
    if (cfg.step_rule != StepRule::open_loop && cfg.step_rule != StepRule::short_step &&
        cfg.step_rule != StepRule::pd_short && cfg.step_rule != StepRule::pd_line_search)
      throw ConfigError(
          "config key 'step_rule': Frank-Wolfe algorithms support open_loop, short_step, "
          "pd_short, pd_line_search");
    if (cfg.psi == PsiKind::linear && cfg.step_rule != StepRule::open_loop)
      throw ConfigError("config key 'psi': composite runs support the open_loop rule only");
  }
  if (optimistic) {
    if (cfg.step_rule != StepRule::open_loop)
      throw ConfigError("config key 'step_rule': optimistic runs use fixed weights; leave it at "
                        "open_loop");
    if (cfg.psi != PsiKind::none)
      throw ConfigError("config key 'psi': optimistic runs support the indicator regularizer only");
  } else if (cfg.y_hook != YHook::identity) {
    throw ConfigError("config key 'y_hook': applies to optimistic runs only");
  }
  if (cfg.algo != Algo::ofw_omd && cfg.policy != SubgradientPolicy::ftrl_equivalent)
    throw ConfigError("config key 'policy': applies to ofw_omd only");
  if (cfg.algo != Algo::gen_fw && cfg.variant != FwVariant::per_step)
    throw ConfigError("config key 'variant': applies to gen_fw only");
}

namespace detail {

inline Vector gaussian_vector(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vector v(n);
  for (int i = 0; i < n; ++i) v[i] = gauss(rng);
  return v;
}

// Positive entries, L1-normalized, scaled: lands outside the target set.
inline Vector dist_anchor(std::mt19937_64& rng, int n, double scale) {
  Vector v = gaussian_vector(rng, n).cwiseAbs();
  double s = v.sum();
  if (s <= 0.0) v.setConstant(1.0 / double(n));
  else v /= s;
  return scale * v;
}

}  // namespace detail

// Materializes the problem a config describes. Instance data depends only on
// (set, dim, k, objective, rows, cond, seed, psi, psi_scale); the reference
// optimum additionally respects which objective the algorithm certifies.
inline ProblemInstance build_instance(const ExperimentConfig& cfg) {
  validate_config(cfg);
  ProblemInstance inst;
  const int n = cfg.dim;

  std::shared_ptr<const FeasibleSet> set;
  if (cfg.set == SetKind::simplex) set = std::make_shared<SimplexSet>(n);
  else if (cfg.set == SetKind::ksparse) set = std::make_shared<KSparseSet>(n, *cfg.k);
  inst.set = set;

  Vector x0;                   // dist anchor
  Eigen::MatrixXd lsq_A;       // kept for the unconstrained reference
  Vector lsq_b;
  Eigen::MatrixXd quad_Q;
  Vector quad_c;
  switch (cfg.objective) {
    case ObjectiveKind::dist: {
      auto rng = seeded_stream(cfg.seed, "dist");
      double scale = cfg.set == SetKind::ksparse ? 2.0 * double(*cfg.k) : 2.0;
      x0 = detail::dist_anchor(rng, n, scale);
      inst.objective = make_distance_objective(x0);
      break;
    }
    case ObjectiveKind::lsq: {
      auto rng = seeded_stream(cfg.seed, "lsq");
      int m = cfg.rows.value_or(n);
      lsq_A.resize(m, n);
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) lsq_A(i, j) = std::normal_distribution<double>(0.0, 1.0)(rng);
      lsq_b = detail::gaussian_vector(rng, m);
      inst.objective = make_lsq_objective(lsq_A, lsq_b);
      break;
    }
    case ObjectiveKind::quad: {
      auto rng = seeded_stream(cfg.seed, "quad");
      double cond = cfg.cond.value_or(100.0);
      Eigen::MatrixXd G(n, n);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) G(i, j) = std::normal_distribution<double>(0.0, 1.0)(rng);
      Eigen::MatrixXd U = Eigen::HouseholderQR<Eigen::MatrixXd>(G).householderQ();
      Vector lambda(n);
      if (n == 1) lambda[0] = cond;
      else
        for (int i = 0; i < n; ++i)
          lambda[i] = std::pow(10.0, std::log10(cond) * double(i) / double(n - 1));
      quad_Q = U * lambda.asDiagonal() * U.transpose();
      quad_Q = 0.5 * (quad_Q + quad_Q.transpose());
      quad_c = detail::gaussian_vector(rng, n);
      inst.objective = make_quadratic_objective(quad_Q, quad_c, cond);
      break;
    }
  }

  Vector psi_c;
  if (cfg.psi == PsiKind::linear) {
    auto rng = seeded_stream(cfg.seed, "psi");
    psi_c = cfg.psi_scale * detail::gaussian_vector(rng, n);
    inst.regularizer = std::make_shared<LinearIndicatorRegularizer>(psi_c, set);
  }

  // Reference optimum of whichever objective the run certifies: composite
  // runs certify f + psi, the raw-sum variant and gd certify f alone.
  const bool f_only =
      cfg.psi == PsiKind::none ||
      (cfg.algo == Algo::gen_fw && cfg.variant == FwVariant::decreasing_reg);
  if (cfg.algo == Algo::gd_pd) {
    switch (cfg.objective) {
      case ObjectiveKind::dist:
        inst.reference_optimum = x0;
        inst.reference_value = 0.0;
        break;
      case ObjectiveKind::quad: {
        Vector xs = quad_Q.ldlt().solve(-0.5 * quad_c);
        inst.reference_optimum = xs;
        inst.reference_value = inst.objective.value(xs);
        break;
      }
      case ObjectiveKind::lsq: {
        Vector xs = lsq_A.bdcSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(lsq_b);
        inst.reference_optimum = xs;
        inst.reference_value = inst.objective.value(xs);
        break;
      }
    }
  } else if (cfg.objective == ObjectiveKind::dist) {
    // f + linear psi completes to a shifted squared distance, so one anchor
    // shift covers both the plain and the composite reference.
    Vector anchor = x0;
    double constant = 0.0;
    if (!f_only) {
      anchor = x0 - 0.5 * psi_c;
      constant = psi_c.dot(x0) - 0.25 * psi_c.squaredNorm();
    }
    if (cfg.set == SetKind::simplex) {
      Vector xs = project_simplex(anchor);
      inst.reference_optimum = xs;
      inst.reference_value = (xs - anchor).squaredNorm() + constant;
    } else if (cfg.set == SetKind::ksparse && n <= 12) {
      auto [xs, val] = reference_optimum_ksparse_distance(anchor, *cfg.k);
      inst.reference_optimum = xs;
      inst.reference_value = val + constant;
    }
  }

  inst.validate();
  return inst;
}

inline RunResult run_experiment(const ExperimentConfig& cfg, const ProblemInstance& inst) {
  switch (cfg.algo) {
    case Algo::fw:
    case Algo::hbfw:
    case Algo::gen_fw: {
      FwOptions o;
      o.rule = cfg.step_rule;
      o.ell = cfg.ell;
      o.a0 = cfg.a0;
      o.T = cfg.T;
      o.epsilon = cfg.epsilon;
      o.report_hb = cfg.report_hb_gap;
      if (cfg.algo == Algo::fw) return run_fw(inst, o);
      if (cfg.algo == Algo::hbfw) return run_hb_fw(inst, o);
      return run_generalized_fw(inst, cfg.variant, o);
    }
    case Algo::ofw_ftrl:
    case Algo::ofw_omd: {
      OptimisticOptions o;
      o.learner =
          cfg.algo == Algo::ofw_ftrl ? OptimisticLearner::oftrl : OptimisticLearner::omd;
      o.policy = cfg.policy;
      o.y_hook = cfg.y_hook;
      o.T = cfg.T;
      o.epsilon = cfg.epsilon;
      o.report_hb = cfg.report_hb_gap;
      return run_optimistic_fw(inst, o);
    }
    case Algo::gd_pd: {
      GdOptions o;
      o.rule = cfg.step_rule;
      o.T = cfg.T;
      o.epsilon = cfg.epsilon;
      o.d_bound = cfg.d_bound;
      return run_gd_pd(inst, o);
    }
  }
  throw ConfigError("run_experiment: unknown algorithm");
}

struct ExperimentResult {
  ProblemInstance instance;
  RunResult run;
};

inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  ExperimentResult out{build_instance(cfg), {}};
  out.run = run_experiment(cfg, out.instance);
  return out;
}

// t.csv -> t.meta; files without an extension gain one.
inline std::string meta_path_for(const std::string& csv_path) {
  std::filesystem::path p(csv_path);
  p.replace_extension(".meta");
  return p.string();
}

inline void write_run_files(const ExperimentConfig& cfg, const RunResult& res,
                            const std::string& csv_path) {
  {
    std::ofstream os(csv_path, std::ios::binary);
    if (!os) throw OracleError("cannot open output file '" + csv_path + "'");
    write_csv(os, res.trace, cfg.stride);
    if (!os) throw OracleError("failed writing '" + csv_path + "'");
  }
  std::string mp = meta_path_for(csv_path);
  std::ofstream os(mp, std::ios::binary);
  if (!os) throw OracleError("cannot open output file '" + mp + "'");
  os << "version = " << kVersion << '\n';
  os << serialize_config(cfg);
  const TraceRecord* last = res.trace.empty() ? nullptr : &res.trace.back();
  os << "iterations_recorded = " << res.trace.size() << '\n';
  os << "final_primal = " << format_double(res.primal_final) << '\n';
  os << "final_gap = " << format_double(last ? last->gap_ahead : kNan) << '\n';
  os << "converged = " << (res.converged ? "true" : "false") << '\n';
  os << "lmo_calls = " << res.counts.lmo << '\n';
  os << "grad_calls = " << res.counts.grad << '\n';
  os << "fval_calls = " << res.counts.fval << '\n';
  os << "fval_search_calls = " << res.counts.fval_search << '\n';
  os << "reporting_lmo = " << res.counts.reporting_lmo << '\n';
  if (!os) throw OracleError("failed writing '" + mp + "'");
}

// --- slope estimation ---------------------------------------------------

inline double trace_column(const TraceRecord& r, std::string_view column) {
  if (column == "primal") return r.primal;
  if (column == "lb_fw_mix") return r.lb_fw_mix;
  if (column == "lb_fw_best") return r.lb_fw_best;
  if (column == "lb_hb") return r.lb_hb;
  if (column == "lb_opt") return r.lb_opt;
  if (column == "gap_aligned") return r.gap_aligned;
  if (column == "gap_ahead") return r.gap_ahead;
  if (column == "gamma_or_a") return r.gamma_or_a;
  if (column == "wall_time_s") return r.wall_time_s;
  throw ConfigError("unknown trace column '" + std::string(column) + "'");
}

struct SlopeWindow {
  bool last_decade = true;  // iters in [max_iter / 10, max_iter]
  long t0 = 0, t1 = 0;      // inclusive, when last_decade is false
};

// Least-squares slope of log10(y) vs log10(iter). Rows with iter < 1 cannot
// sit on a log axis and are outside every window.
inline double slope_fit_xy(const std::vector<std::pair<double, double>>& pts) {
  if (pts.size() < 10)
    throw ConfigError("slope: need at least 10 rows in the window, have " +
                      std::to_string(pts.size()));
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (auto [x, y] : pts) {
    double lx = std::log10(x), ly = std::log10(y);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  double m = double(pts.size());
  double var = sxx - sx * sx / m;
  if (!(var > 0.0)) throw ConfigError("slope: window spans a single iteration value");
  return (sxy - sx * sy / m) / var;
}

inline double slope_fit(const std::vector<TraceRecord>& rows, std::string_view column,
                        const SlopeWindow& win) {
  if (rows.empty()) throw ConfigError("slope: empty trace");
  long lo = 1, hi = std::numeric_limits<long>::max();
  if (win.last_decade) {
    long max_iter = rows.back().iter;
    for (const auto& r : rows) max_iter = std::max(max_iter, r.iter);
    lo = std::max(1L, max_iter / 10);
    hi = max_iter;
  } else {
    lo = std::max(1L, win.t0);
    hi = win.t1;
  }
  std::vector<std::pair<double, double>> pts;
  pts.reserve(rows.size());
  for (const auto& r : rows) {
    if (r.iter < lo || r.iter > hi) continue;
    double v = trace_column(r, column);
    if (!(v > 0.0))
      throw ConfigError("slope: nonpositive value in column '" + std::string(column) +
                        "' at iter " + std::to_string(r.iter));
    pts.emplace_back(double(r.iter), v);
  }
  return slope_fit_xy(pts);
}

// --- compare ------------------------------------------------------------

inline std::string compare_label(const ExperimentConfig& cfg) {
  std::string label = algo_name(cfg.algo);
  if (cfg.algo == Algo::gen_fw) label += std::string("/") + fw_variant_name(cfg.variant);
  if (cfg.algo == Algo::fw || cfg.algo == Algo::hbfw || cfg.algo == Algo::gen_fw)
    label += std::string("/") + step_rule_name(cfg.step_rule);
  if (cfg.algo == Algo::ofw_omd && cfg.policy == SubgradientPolicy::zero) label += "/zero";
  if ((cfg.algo == Algo::ofw_ftrl || cfg.algo == Algo::ofw_omd) &&
      cfg.y_hook == YHook::segment_search)
    label += "/seg";
  if (cfg.algo == Algo::gd_pd) label += std::string("/") + step_rule_name(cfg.step_rule);
  return label;
}

// Keys that determine the generated instance; compare requires them equal.
inline void require_same_instance(const std::vector<ExperimentConfig>& cfgs) {
  if (cfgs.size() < 2) throw ConfigError("compare: need at least 2 configs");
  auto mismatch = [&](std::string_view key) {
    throw ConfigError("compare: configs disagree on instance key '" + std::string(key) + "'");
  };
  const ExperimentConfig& a = cfgs.front();
  for (const ExperimentConfig& b : cfgs) {
    if (b.set != a.set) mismatch("set");
    if (b.dim != a.dim) mismatch("dim");
    if (b.k != a.k) mismatch("k");
    if (b.objective != a.objective) mismatch("objective");
    if (b.rows != a.rows) mismatch("rows");
    if (b.cond != a.cond) mismatch("cond");
    if (b.seed != a.seed) mismatch("seed");
    if (b.psi != a.psi) mismatch("psi");
    if (b.psi_scale != a.psi_scale) mismatch("psi_scale");
  }
}

struct CompareRow {
  std::string label;
  double final_primal = kNan;
  double final_hb_gap = kNan;
  double slope = kNan;  // log-log slope of the reported-bound gap, last decade
  bool best_primal = false;
  bool best_gap = false;
  bool best_slope = false;
};

inline std::vector<CompareRow> run_compare(const std::vector<ExperimentConfig>& cfgs) {
  require_same_instance(cfgs);
  std::vector<CompareRow> rows;
  rows.reserve(cfgs.size());
  for (const ExperimentConfig& cfg : cfgs) {
    validate_config(cfg);
    ExperimentResult res = run_experiment(cfg);
    CompareRow row;
    row.label = compare_label(cfg);
    row.final_primal = res.run.primal_final;
    if (!res.run.trace.empty()) {
      const TraceRecord& last = res.run.trace.back();
      row.final_hb_gap = last.primal - last.lb_hb;
      std::vector<std::pair<double, double>> pts;
      long max_iter = res.run.trace.back().iter;
      long lo = std::max(1L, max_iter / 10);
      for (const auto& r : res.run.trace) {
        if (r.iter < lo) continue;
        double g = r.primal - r.lb_hb;
        if (g > 0.0 && r.iter >= 1) pts.emplace_back(double(r.iter), g);
      }
      try {
        row.slope = slope_fit_xy(pts);
      } catch (const ConfigError&) {
        row.slope = kNan;
      }
    }
    rows.push_back(std::move(row));
  }
  auto flag_best = [&](auto member, auto flag) {
    double best = kNan;
    for (const auto& r : rows) {
      double v = r.*member;
      if (std::isnan(v)) continue;
      if (std::isnan(best) || v < best) best = v;
    }
    if (std::isnan(best)) return;
    for (auto& r : rows)
      if (r.*member == best) r.*flag = true;
  };
  flag_best(&CompareRow::final_primal, &CompareRow::best_primal);
  flag_best(&CompareRow::final_hb_gap, &CompareRow::best_gap);
  flag_best(&CompareRow::slope, &CompareRow::best_slope);
  return rows;
}

inline std::string format_compare_table(const std::vector<CompareRow>& rows) {
  auto cell = [](double v, bool best) {
    char buf[40];
    if (std::isnan(v)) std::snprintf(buf, sizeof buf, "n/a");
    else std::snprintf(buf, sizeof buf, "%.6g%s", v, best ? "*" : "");
    return std::string(buf);
  };
  std::size_t w0 = 9;
  for (const auto& r : rows) w0 = std::max(w0, r.label.size());
  std::ostringstream os;
  os << std::left;
  auto pad = [&](const std::string& s, std::size_t w) {
    os << s;
    for (std::size_t i = s.size(); i < w + 2; ++i) os << ' ';
  };
  pad("algorithm", w0);
  pad("final_primal", 14);
  pad("final_hb_gap", 14);
  os << "slope\n";
  for (const auto& r : rows) {
    pad(r.label, w0);
    pad(cell(r.final_primal, r.best_primal), 14);
    pad(cell(r.final_hb_gap, r.best_gap), 14);
    os << cell(r.slope, r.best_slope) << '\n';
  }
  return os.str();
}

// --- verify -------------------------------------------------------------

namespace detail {

inline bool verify_check(std::ostream& os, const char* name,
                         const std::function<std::string()>& body) {
  std::string detail;
  try {
    detail = body();
  } catch (const std::exception& e) {
    detail = e.what();
  }
  if (detail.empty()) {
    os << "ok " << name << '\n';
    return true;
  }
  os << "FAIL " << name << ": " << detail << '\n';
  return false;
}

}  // namespace detail

// Runs the invariant battery for one config: serialization round-trips,
// objective model sanity, oracle optimality spot checks, and trace-level
// bound consistency on a truncated run. Returns the number of failures.
inline int run_verify(const ExperimentConfig& cfg, std::ostream& os) {
  validate_config(cfg);
  int failures = 0;
  auto check = [&](const char* name, const std::function<std::string()>& body) {
    if (!detail::verify_check(os, name, body)) ++failures;
  };

  check("config_roundtrip", [&] {
    std::string s1 = serialize_config(cfg);
    std::string s2 = serialize_config(parse_config(s1));
    return s1 == s2 ? "" : "serialized forms differ";
  });

  ProblemInstance inst = build_instance(cfg);
  const Objective& f = inst.objective;

  check("objective_model", [&]() -> std::string {
    if (inst.set) {
      VerifyReport rep = verify_objective(f, *inst.set, 50, cfg.seed);
      if (rep.flagged) {
        return "sandwich/gradient check flagged: lower " + format_double(rep.max_lower_violation) +
               ", upper " + format_double(rep.max_upper_violation) + ", fd " +
               format_double(rep.max_fd_rel_error);
      }
      return "";
    }
    // Unconstrained: probe Gaussian points around the start.
    auto rng = seeded_stream(cfg.seed, "verify_unconstrained");
    Vector base = inst.start.value_or(Vector::Zero(f.dimension));
    double worst = 0.0;
    for (int s = 0; s < 50; ++s) {
      Vector x = base + detail::gaussian_vector(rng, f.dimension);
      Vector y = base + detail::gaussian_vector(rng, f.dimension);
      double lin = f.value(y) - f.value(x) - f.gradient(x).dot(y - x);
      worst = std::max(worst, -lin);
      worst = std::max(worst, lin - 0.5 * f.smoothness_L * (y - x).squaredNorm());
    }
    double scale = 1e-6 * (1.0 + std::abs(f.value(base)));
    return worst <= scale ? "" : "sandwich violated by " + format_double(worst);
  });

  if (inst.set) {
    check("lmo_optimality", [&]() -> std::string {
      auto rng = seeded_stream(cfg.seed, "verify_lmo");
      for (int s = 0; s < 100; ++s) {
        Vector d = detail::gaussian_vector(rng, inst.set->dimension());
        Vector v = inst.set->lmo(d);
        if (!inst.set->contains(v, 1e-7))
          return "lmo returned an infeasible point on sample " + std::to_string(s);
        for (int j = 0; j < 5; ++j) {
          Vector z = sample_set_point(*inst.set, rng);
          if (d.dot(v) > d.dot(z) + 1e-9 * (1.0 + std::abs(d.dot(z))))
            return "lmo value beaten by a feasible point on sample " + std::to_string(s);
        }
      }
      return "";
    });
  }

  ExperimentConfig short_cfg = cfg;
  short_cfg.T = std::min(cfg.T, 50L);
  short_cfg.stride = 1;
  RunResult res = run_experiment(short_cfg, inst);

  check("trace_invariants", [&]() -> std::string {
    long prev = -1;
    for (const TraceRecord& r : res.trace) {
      if (r.iter <= prev) return "iter not strictly increasing at " + std::to_string(r.iter);
      prev = r.iter;
      if (!std::isfinite(r.primal)) return "nonfinite primal at iter " + std::to_string(r.iter);
      double tol = 1e-7 * (1.0 + std::abs(r.primal));
      for (double lb : {r.lb_fw_mix, r.lb_fw_best, r.lb_hb, r.lb_opt}) {
        if (std::isnan(lb)) continue;
        if (lb > r.primal + tol)
          return "lower bound above primal at iter " + std::to_string(r.iter);
      }
      if (!std::isnan(r.gap_ahead) && r.gap_ahead < -tol)
        return "negative gap at iter " + std::to_string(r.iter);
    }
    return "";
  });

  if (inst.reference_value) {
    check("reference_bounds", [&]() -> std::string {
      double fstar = *inst.reference_value;
      double tol = 1e-7 * (1.0 + std::abs(fstar));
      for (const TraceRecord& r : res.trace) {
        for (double lb : {r.lb_fw_mix, r.lb_fw_best, r.lb_hb, r.lb_opt}) {
          if (std::isnan(lb)) continue;
          if (lb > fstar + tol)
            return "lower bound exceeds the optimum at iter " + std::to_string(r.iter);
        }
        if (!std::isnan(r.gap_ahead) && r.gap_ahead < (r.primal - fstar) - tol)
          return "gap below the primal gap at iter " + std::to_string(r.iter);
      }
      return "";
    });
  }

  check("csv_roundtrip", [&]() -> std::string {
    std::ostringstream buf;
    write_csv(buf, res.trace, 1);
    std::istringstream in(buf.str());
    std::vector<TraceRecord> back = read_csv(in);
    std::ostringstream buf2;
    write_csv(buf2, back, 1);
    return buf.str() == buf2.str() ? "" : "serialized traces differ";
  });

  return failures;
}

}  // namespace fwpd
