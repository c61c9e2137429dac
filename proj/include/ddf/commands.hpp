#pragma once

// Command implementations behind the ddfusion executable. Each command
// returns its process exit code: 0 success, 1 invalid input, 2 the optimizer
// hit its sweep limit before reaching a fixed point.

#include "ddf/artifacts.hpp"
#include "ddf/config.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace ddf {

enum ExitCode : int { kExitOk = 0, kExitInvalid = 1, kExitNotConverged = 2 };

/// Command-line adjustments layered over a config. Recorded in the manifest.
struct Overrides {
  std::optional<std::uint64_t> seed;  // sampling seed S, evaluation seed S + 1
  std::optional<std::size_t> max_sweeps;
  std::optional<TrialKind> trial;
  std::optional<std::string> rule;
  bool eval_on_training = false;

  void apply(RunConfig& cfg) const {
    if (seed) {
      cfg.sampling_seed = *seed;
      cfg.eval_seed = *seed + 1;
    }
    if (max_sweeps) {
      if (*max_sweeps < 1) throw ConfigError("--max-sweeps must be at least 1");
      cfg.max_sweeps = *max_sweeps;
    }
    if (trial) cfg.trials = {*trial};
    if (rule) {
      try {
        FusionRule::parse(*rule, static_cast<std::size_t>(cfg.model().num_sensors()));
      } catch (const FusionError& e) {
        throw ConfigError(std::string("--rule: ") + e.what());
      }
      cfg.fusion_rules = {*rule};
    }
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    if (seed) j["seed"] = *seed;
    if (max_sweeps) j["max_sweeps"] = *max_sweeps;
    if (trial) j["trial"] = std::string(to_string(*trial));
    if (rule) j["rule"] = *rule;
    if (eval_on_training) j["eval_on_training"] = true;
    return j;
  }

  static Overrides from_json(const nlohmann::json& j) {
    Overrides o;
    if (j.contains("seed")) o.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("max_sweeps")) o.max_sweeps = j.at("max_sweeps").get<std::size_t>();
    if (j.contains("trial")) o.trial = parse_trial_kind(j.at("trial").get<std::string>());
    if (j.contains("rule")) o.rule = j.at("rule").get<std::string>();
    if (j.contains("eval_on_training")) o.eval_on_training = j.at("eval_on_training").get<bool>();
    return o;
  }
};

/// Config text plus where it came from.
struct ConfigSource {
  std::string text;
  std::string name;

  static ConfigSource from_file(const std::string& path) {
    try {
      return {read_file(path), path};
    } catch (const ArtifactError& e) {
      throw ConfigError(e.what());
    }
  }
};

namespace paper_configs {

inline constexpr std::string_view kExample1 = R"ini(# Ten sensors observing a common Gaussian signal in independent noise.
[scenario]
name = example1
sensors = 10

[priors]
p0 = 0.5
p1 = 0.5

[costs]
c00 = 0
c01 = 1
c10 = 1
c11 = 0

[h0]
type = gaussian
mean = 0
cov = diagonal: 0.6

# signal N(1, 0.4) shared by all sensors plus N(0, 0.6) noise
[h1]
type = gaussian
mean = 1
cov = equicorrelated: 1.0, 0.4

[fusion]
rules = and, or, k-of-l:4

[sampling]
trial = gaussian, mixture
n = 1000
seed = 1
init = affine: 3, -4
max_sweeps = 100

[evaluation]
m = 10000
seed = 2

[sweep]
grid = log: 0.01, 100, 21
)ini";

inline constexpr std::string_view kExample2 = R"ini(# One hundred sensors on fifty two-sensor paths; under H1 the target
# crosses one path chosen uniformly at random.
[scenario]
name = example2
sensors = 100

[priors]
p0 = 0.5
p1 = 0.5

[costs]
c00 = 0
c01 = 1
c10 = 1
c11 = 0

[h0]
type = gaussian
mean = 0
cov = diagonal: 0.6

[h1]
type = path-signal
paths = 50
per_path = 2
signal_mean = 1
signal_var = 0.4
noise_var = 0.6

[fusion]
rules = paths:50

[sampling]
trial = gaussian, mixture
n = 10000
seed = 1
init = affine: 3, -4
max_sweeps = 100

[evaluation]
m = 10000
seed = 2

[sweep]
grid = log: 0.01, 100, 21
)ini";

inline std::optional<ConfigSource> get(int id) {
  if (id == 1) return ConfigSource{std::string(kExample1), "paper:1"};
  if (id == 2) return ConfigSource{std::string(kExample2), "paper:2"};
  return std::nullopt;
}

}  // namespace paper_configs

namespace command_detail {

inline std::string fmt(double v, int precision = 6) {
  std::ostringstream os;
  os << std::setprecision(precision) << v;
  return os.str();
}

inline RunConfig load(const ConfigSource& src, const Overrides& o) {
  RunConfig cfg = parse_config(src.text, src.name);
  o.apply(cfg);
  return cfg;
}

inline nlohmann::ordered_json base_manifest(std::string_view command, const ConfigSource& src,
                                            const RunConfig& cfg, const Overrides& o) {
  nlohmann::ordered_json m;
  m["tool"] = "ddfusion";
  m["version"] = std::string(kToolVersion);
  m["command"] = std::string(command);
  m["config_source"] = src.name;
  m["config_fnv1a64"] = hex64(fnv1a(src.text));
  m["config_text"] = src.text;
  m["overrides"] = o.to_json();
  m["seeds"] = {{"sampling", cfg.sampling_seed}, {"evaluation", cfg.eval_seed}};
  if (cfg.init.kind == InitKind::Random) m["seeds"]["init"] = cfg.init.seed;
  nlohmann::ordered_json init;
  switch (cfg.init.kind) {
    case InitKind::Lhat: init = "lhat"; break;
    case InitKind::Affine: init = {{"affine", {cfg.init.slope, cfg.init.intercept}}}; break;
    case InitKind::Random: init = {{"random", cfg.init.seed}}; break;
  }
  nlohmann::ordered_json trials = nlohmann::ordered_json::array();
  for (auto t : cfg.trials) trials.push_back(std::string(to_string(t)));
  m["parameters"] = {{"sensors", cfg.model().num_sensors()},
                     {"dim", cfg.model().dim()},
                     {"rules", cfg.fusion_rules},
                     {"trials", trials},
                     {"n", cfg.n},
                     {"m", cfg.m},
                     {"max_sweeps", cfg.max_sweeps},
                     {"init", init},
                     {"grid", cfg.grid}};
  return m;
}

inline nlohmann::ordered_json run_summary(const std::string& rule, TrialKind trial, const OptimizeTrace& t,
                                          std::optional<double> r = std::nullopt) {
  nlohmann::ordered_json j;
  j["rule"] = rule;
  j["trial"] = std::string(to_string(trial));
  if (r) j["sweep_parameter"] = *r;
  j["initial_cost"] = t.initial_cost;
  j["final_cost"] = t.block_costs.empty() ? t.initial_cost : t.block_costs.back();
  j["sweeps_used"] = t.sweeps_used;
  j["converged"] = t.converged;
  return j;
}

inline void check_rule_arity(const RunConfig& cfg) {
  if (cfg.fusion_rules.empty()) throw ConfigError("[fusion] rules is empty");
}

}  // namespace command_detail

/// Parse and fully validate a config. Prints a one-line report.
inline int cmd_validate(const ConfigSource& src, std::ostream& out, std::ostream& err) {
  try {
    const RunConfig cfg = parse_config(src.text, src.name);
    const Scenario& s = cfg.model();
    out << src.name << ": valid scenario '" << cfg.name << "' (" << s.num_sensors() << " sensors, dimension "
        << s.dim() << ", rules";
    for (const auto& r : cfg.fusion_rules) out << ' ' << r;
    out << ")\n";
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitInvalid;
  }
}

/// Draw the bank for every configured trial, optimize every configured rule
/// and write bank, labels, trace and manifest files.
inline int cmd_optimize(const ConfigSource& src, const std::filesystem::path& out_dir, const Overrides& o,
                        std::ostream& out, std::ostream& err) {
  using namespace command_detail;
  try {
    const RunConfig cfg = load(src, o);
    check_rule_arity(cfg);
    const Scenario& s = cfg.model();
    const BayesConstants k = bayes_constants(s);
    ArtifactWriter w(out_dir);
    auto manifest = base_manifest("optimize", src, cfg, o);
    manifest["runs"] = nlohmann::ordered_json::array();
    bool all_converged = true;
    for (TrialKind trial : cfg.trials) {
      const std::string tname(to_string(trial));
      const SampleBank bank = draw_bank(build_trial(s, trial), s, cfg.n, cfg.sampling_seed);
      w.write("bank_" + tname + ".csv", bank_csv(bank));
      for (const auto& text : cfg.fusion_rules) {
        const FusionRule f = FusionRule::parse(text, static_cast<std::size_t>(s.num_sensors()));
        auto [labels, trace] = optimize(bank, f, k, make_init(cfg.init, bank), cfg.max_sweeps);
        const std::string stem = f.slug() + "_" + tname;
        w.write("labels_" + stem + ".csv", labels_csv(bank, labels));
        w.write("trace_" + stem + ".csv", trace_csv(trace, labels.sensors()));
        manifest["runs"].push_back(run_summary(f.id(), trial, trace));
        const double final_cost = trace.block_costs.empty() ? trace.initial_cost : trace.block_costs.back();
        out << f.id() << " / " << tname << ": final cost " << fmt(final_cost, 10) << " after "
            << trace.sweeps_used << " sweep" << (trace.sweeps_used == 1 ? "" : "s")
            << (trace.converged ? "" : " (sweep limit reached)") << '\n';
        all_converged = all_converged && trace.converged;
      }
    }
    w.finish(std::move(manifest));
    if (!all_converged) {
      err << "warning: optimizer reached the sweep limit without a zero-flip sweep\n";
      return kExitNotConverged;
    }
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
  } catch (const ArtifactError& e) {
    err << "error: " << e.what() << '\n';
  }
  return kExitInvalid;
}

/// Everything a ROC run produced, kept for summaries.
struct RocRunOutput {
  std::vector<RocCurve> curves;  // distributed curves in config order, centralized last
  bool all_converged = true;
};

namespace command_detail {

inline RocRunOutput run_roc(const std::string& command, const ConfigSource& src, const RunConfig& cfg,
                            const Overrides& o, ArtifactWriter& w, std::ostream& out,
                            nlohmann::ordered_json& manifest) {
  check_rule_arity(cfg);
  const Scenario& s = cfg.model();
  manifest = base_manifest(command, src, cfg, o);
  manifest["eval_on_training"] = o.eval_on_training;
  manifest["runs"] = nlohmann::ordered_json::array();
  RocRunOutput result;
  const EvaluationSet eval = draw_evaluation_set(s, cfg.m, cfg.eval_seed);
  RocOptions opt;
  opt.max_sweeps = cfg.max_sweeps;
  opt.init = cfg.init;
  opt.eval_on_training = o.eval_on_training;
  std::optional<RocCurve> centralized;
  for (TrialKind trial : cfg.trials) {
    const std::string tname(to_string(trial));
    const SampleBank bank = draw_bank(build_trial(s, trial), s, cfg.n, cfg.sampling_seed);
    w.write("bank_" + tname + ".csv", bank_csv(bank));
    for (const auto& text : cfg.fusion_rules) {
      const FusionRule f = FusionRule::parse(text, static_cast<std::size_t>(s.num_sensors()));
      RocResult r = roc_sweep(s, f, bank, eval, cfg.grid, opt);
      r.distributed.id = "distributed_" + f.slug() + "_" + tname;
      std::string trace = "sweep_parameter,sweep,sensor,cost\n";
      std::size_t sweeps = 0;
      for (const auto& rec : r.records) {
        append_trace_rows(trace, rec.trace, f.sensors(), &rec.r);
        manifest["runs"].push_back(run_summary(f.id(), trial, rec.trace, rec.r));
        result.all_converged = result.all_converged && rec.trace.converged;
        sweeps = std::max(sweeps, rec.trace.sweeps_used);
      }
      w.write("roc_" + r.distributed.id + ".csv", roc_csv(r.distributed));
      w.write("trace_" + r.distributed.id + ".csv", trace);
      out << r.distributed.id << ": " << r.distributed.points.size() << " points, at most " << sweeps
          << " sweep" << (sweeps == 1 ? "" : "s") << " per point\n";
      result.curves.push_back(std::move(r.distributed));
      if (!centralized) {
        centralized = std::move(r.centralized);
        centralized->id = "centralized";
      }
    }
  }
  w.write("roc_centralized.csv", roc_csv(*centralized));
  result.curves.push_back(std::move(*centralized));
  w.write("roc_all.csv", roc_csv(result.curves));
  return result;
}

}  // namespace command_detail

/// ROC sweep for every (trial, rule) pair plus the centralized baseline.
inline int cmd_roc(const ConfigSource& src, const std::filesystem::path& out_dir, const Overrides& o,
                   std::ostream& out, std::ostream& err) {
  try {
    const RunConfig cfg = command_detail::load(src, o);
    if (!cfg.has_sweep) throw ConfigError(src.name + ": roc needs a [sweep] section");
    ArtifactWriter w(out_dir);
    nlohmann::ordered_json manifest;
    const auto res = command_detail::run_roc("roc", src, cfg, o, w, out, manifest);
    w.finish(std::move(manifest));
    if (!res.all_converged) {
      err << "warning: optimizer reached the sweep limit without a zero-flip sweep\n";
      return kExitNotConverged;
    }
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
  } catch (const ArtifactError& e) {
    err << "error: " << e.what() << '\n';
  }
  return kExitInvalid;
}

/// Evaluate a learned rule file on fresh draws, next to the centralized
/// detector at the Bayes threshold b/a.
inline int cmd_eval(const ConfigSource& src, const std::filesystem::path& labels_path,
                    const std::filesystem::path& out_dir, const Overrides& o, std::ostream& out,
                    std::ostream& err) {
  using namespace command_detail;
  try {
    const RunConfig cfg = load(src, o);
    check_rule_arity(cfg);
    if (cfg.fusion_rules.size() != 1) {
      throw ConfigError(src.name + ": config lists several fusion rules; choose one with --rule");
    }
    if (o.eval_on_training) throw ConfigError("--eval-on-training needs the sample bank; use it with roc");
    const Scenario& s = cfg.model();
    const FusionRule f = FusionRule::parse(cfg.fusion_rules.front(), static_cast<std::size_t>(s.num_sensors()));
    const std::string labels_text = read_file(labels_path);
    const LoadedRule rule = parse_labels_csv(labels_text, labels_path.string());
    if (rule.sensor_dims != s.sensor_dims()) {
      throw ConfigError(labels_path.string() + ": sensor layout does not match the scenario");
    }
    const BayesConstants k = bayes_constants(s);
    const double threshold = k.b / k.a;
    const EvaluationSet eval = draw_evaluation_set(s, cfg.m, cfg.eval_seed);
    RocCurve dist{"distributed_" + f.slug(), {evaluate_system(s, rule.deploy(), f, eval, threshold)}, {}};
    RocCurve cent{"centralized", {centralized_point(s, eval, threshold)}, {}};
    ArtifactWriter w(out_dir);
    w.write("eval.csv", roc_csv(std::vector<RocCurve>{dist, cent}));
    auto manifest = base_manifest("eval", src, cfg, o);
    manifest["labels_file"] = labels_path.string();
    manifest["labels_fnv1a64"] = hex64(fnv1a(labels_text));
    w.finish(std::move(manifest));
    for (const auto* c : {&dist, &cent}) {
      const auto& p = c->points.front();
      out << c->id << ": pf " << fmt(p.pf) << " pd " << fmt(p.pd) << " bayes cost " << fmt(p.bayes_cost)
          << '\n';
    }
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
  } catch (const ArtifactError& e) {
    err << "error: " << e.what() << '\n';
  }
  return kExitInvalid;
}

/// Per-point comparison of each distributed curve with the centralized curve
/// interpolated at the same pf.
inline std::string summary_csv(const std::vector<RocCurve>& curves) {
  std::string out = "curve_id,sweep_parameter,pf,pd,centralized_pd,pd_gap\n";
  const RocCurve& cent = curves.back();
  for (std::size_t c = 0; c + 1 < curves.size(); ++c) {
    for (const auto& p : curves[c].points) {
      const double cpd = interpolate_pd(cent.points, p.pf);
      out += curves[c].id;
      for (double v : {p.sweep_parameter, p.pf, p.pd, cpd, cpd - p.pd}) {
        out += ',';
        append_number(out, v);
      }
      out += '\n';
    }
  }
  return out;
}

/// Run one of the built-in paper configurations end to end.
inline int cmd_paper(int example_id, const std::filesystem::path& out_dir, const Overrides& o,
                     std::ostream& out, std::ostream& err) {
  const auto src = paper_configs::get(example_id);
  if (!src) {
    err << "error: unknown paper example '" << example_id << "' (expected 1 or 2)\n";
    return kExitInvalid;
  }
  try {
    const RunConfig cfg = command_detail::load(*src, o);
    ArtifactWriter w(out_dir);
    nlohmann::ordered_json manifest;
    const auto res = command_detail::run_roc("paper", *src, cfg, o, w, out, manifest);
    manifest["example"] = example_id;
    w.write("summary.csv", summary_csv(res.curves));
    w.finish(std::move(manifest));

    const RocCurve& cent = res.curves.back();
    out << '\n'
        << std::left << std::setw(34) << "curve" << std::right << std::setw(10) << "mean pf" << std::setw(10)
        << "mean pd" << std::setw(14) << "central pd" << std::setw(12) << "max gap" << '\n';
    for (const auto& c : res.curves) {
      double pf = 0, pd = 0, cpd = 0, gap = -1.0;
      for (const auto& p : c.points) {
        const double ref = interpolate_pd(cent.points, p.pf);
        pf += p.pf;
        pd += p.pd;
        cpd += ref;
        gap = std::max(gap, ref - p.pd);
      }
      const double n = static_cast<double>(c.points.size());
      out << std::left << std::setw(34) << c.id << std::right << std::fixed << std::setprecision(4)
          << std::setw(10) << pf / n << std::setw(10) << pd / n << std::setw(14) << cpd / n << std::setw(12)
          << gap << std::defaultfloat << '\n';
    }
    if (!res.all_converged) {
      err << "warning: optimizer reached the sweep limit without a zero-flip sweep\n";
      return kExitNotConverged;
    }
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
  } catch (const ArtifactError& e) {
    err << "error: " << e.what() << '\n';
  }
  return kExitInvalid;
}

/// Re-run the command recorded in a manifest into a new directory.
inline int cmd_replay(const std::filesystem::path& manifest_path, const std::filesystem::path& out_dir,
                      std::ostream& out, std::ostream& err) {
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(read_file(manifest_path));
  } catch (const std::exception& e) {
    err << "error: " << manifest_path.string() << ": " << e.what() << '\n';
    return kExitInvalid;
  }
  try {
    const auto command = m.at("command").get<std::string>();
    const ConfigSource src{m.at("config_text").get<std::string>(), m.at("config_source").get<std::string>()};
    if (hex64(fnv1a(src.text)) != m.at("config_fnv1a64").get<std::string>()) {
      err << "error: " << manifest_path.string() << ": config text does not match its recorded hash\n";
      return kExitInvalid;
    }
    const Overrides o = Overrides::from_json(m.at("overrides"));
    if (command == "optimize") return cmd_optimize(src, out_dir, o, out, err);
    if (command == "roc") return cmd_roc(src, out_dir, o, out, err);
    if (command == "paper") return cmd_paper(m.at("example").get<int>(), out_dir, o, out, err);
    if (command == "eval") {
      return cmd_eval(src, m.at("labels_file").get<std::string>(), out_dir, o, out, err);
    }
    err << "error: " << manifest_path.string() << ": cannot replay command '" << command << "'\n";
  } catch (const nlohmann::json::exception& e) {
    err << "error: " << manifest_path.string() << ": " << e.what() << '\n';
  } catch (const ModelError& e) {
    err << "error: " << manifest_path.string() << ": " << e.what() << '\n';
  }
  return kExitInvalid;
}

}  // namespace ddf
