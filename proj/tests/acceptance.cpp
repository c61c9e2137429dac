// Acceptance checks. Usage: ddf_acceptance [criterion ...]; with no
// arguments every criterion runs. One PASS/FAIL line per criterion.

#include "ddf/commands.hpp"
#include "ddf/fusion_reference.hpp"
#include "test_util.hpp"

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

using namespace ddf;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Verdict {
  bool pass = true;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string num(double v, int precision = 4) {
  std::ostringstream s;
  s.precision(precision);
  s << v;
  return s.str();
}

RunConfig paper_config(int id) {
  const auto src = paper_configs::get(id);
  return parse_config(src->text, src->name);
}

/// Least-squares line through (x, y); returns slope and R^2.
std::pair<double, double> fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i] / n;
    my += y[i] / n;
  }
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return {sxy / sxx, sxy * sxy / (sxx * syy)};
}

// ---------------------------------------------------------------------------
// 1. Decomposition identity

Verdict decomposition() {
  const auto t0 = Clock::now();
  std::size_t checks = 0, bad = 0;
  for (std::size_t sensors : {2u, 3u}) {
    const std::size_t rows = std::size_t{1} << sensors;
    for (std::uint64_t t = 0; t < (std::uint64_t{1} << rows); ++t) {
      std::vector<bool> table(rows);
      for (std::size_t k = 0; k < rows; ++k) table[k] = (t >> k) & 1u;
      const FusionRule f = FusionRule::truth_table(sensors, table);
      for (std::uint64_t v = 0; v < rows; ++v) {
        const Vote u = Vote::from_integer(sensors, v);
        for (std::size_t j = 0; j < sensors; ++j) {
          const int p1 = pj1(f, u.view(), j);
          const int p2 = reference::pj2_reference(f, u.view(), j);
          const int omega0 = f.evaluate(u.view()) ? 0 : 1;
          ++checks;
          if (p1 != reference::pj1_reference(f, u.view(), j)) ++bad;
          if ((1 - (u[j] ? 1 : 0)) * p1 + p2 != omega0) ++bad;
        }
      }
    }
  }
  const double secs = seconds_since(t0);
  return {bad == 0 && secs < 10.0,
          std::to_string(checks) + " (rule, vote, sensor) cases, " + std::to_string(bad) + " mismatches, " +
              num(secs, 3) + " s"};
}

// ---------------------------------------------------------------------------
// 2-3. Optimize-run suite

struct SuiteRun {
  std::string label;
  OptimizeTrace trace;
  bool example_one = false;
};

std::vector<SuiteRun> random_suite() {
  std::vector<SuiteRun> runs;
  std::mt19937_64 rng(2024);
  for (int sensors = 2; sensors <= 5; ++sensors) {
    for (int rep = 0; rep < 3; ++rep) {
      const std::uint64_t seed = static_cast<std::uint64_t>(100 * sensors + rep);
      const SampleBank b = ddf::testing::random_bank(sensors, 300, seed);
      const BayesConstants k = bayes_constants(ddf::testing::random_scenario(sensors, seed));
      const auto L = static_cast<std::size_t>(sensors);
      std::vector<bool> table(std::size_t{1} << L);
      for (std::size_t r = 0; r < table.size(); ++r) table[r] = (rng() >> 63) != 0;
      const std::vector<FusionRule> rules{FusionRule::all(L), FusionRule::any(L), FusionRule::k_of_l(L, 2),
                                         FusionRule::truth_table(L, table)};
      for (const auto& f : rules) {
        const RuleLabels init = rep == 0   ? init_affine(b, 3.0, -4.0)
                                : rep == 1 ? init_random(L, b.size(), seed * 7 + 1)
                                           : analytic_and_or(b);
        auto [labels, trace] = optimize(b, f, k, init);
        runs.push_back({"L=" + std::to_string(sensors) + " " + f.id() + " seed " + std::to_string(seed),
                        std::move(trace)});
      }
    }
  }
  return runs;
}

void example_suite(int id, std::vector<SuiteRun>& runs) {
  const RunConfig cfg = paper_config(id);
  const Scenario& s = cfg.model();
  for (TrialKind trial : cfg.trials) {
    const SampleBank bank = draw_bank(build_trial(s, trial), s, cfg.n, cfg.sampling_seed);
    for (const auto& f : cfg.rules()) {
      for (double r : cfg.grid) {
        const Scenario sr = sweep_scenario(s, r);
        const BayesConstants k = bayes_constants(sr);
        const SampleBank b = bank.reweighted(k);
        auto [labels, trace] = optimize(b, f, k, make_init(cfg.init, b), cfg.max_sweeps);
        runs.push_back({"example " + std::to_string(id) + " " + f.id() + " " + std::string(to_string(trial)) +
                            " r=" + num(r),
                        std::move(trace), id == 1});
      }
    }
  }
}

std::vector<SuiteRun> full_suite() {
  auto runs = random_suite();
  example_suite(1, runs);
  example_suite(2, runs);
  return runs;
}

Verdict monotone_cost() {
  const auto runs = full_suite();
  std::size_t pairs = 0, violations = 0;
  std::string first;
  for (const auto& run : runs) {
    double prev = run.trace.initial_cost;
    for (double c : run.trace.block_costs) {
      ++pairs;
      if (c > prev) {
        if (violations++ == 0) first = "; first in " + run.label;
      }
      prev = c;
    }
  }
  return {runs.size() >= 30 && violations == 0,
          std::to_string(runs.size()) + " runs, " + std::to_string(pairs) + " consecutive pairs, " +
              std::to_string(violations) + " increases" + first};
}

Verdict convergence() {
  const auto runs = full_suite();
  std::size_t unconverged = 0, slow_example1 = 0, worst = 0, worst_example1 = 0;
  for (const auto& run : runs) {
    if (!run.trace.converged || run.trace.sweeps_used > 100) ++unconverged;
    worst = std::max(worst, run.trace.sweeps_used);
    if (run.example_one) {
      worst_example1 = std::max(worst_example1, run.trace.sweeps_used);
      if (run.trace.sweeps_used > 10) ++slow_example1;
    }
  }
  return {unconverged == 0 && slow_example1 == 0,
          std::to_string(runs.size()) + " runs, " + std::to_string(unconverged) +
              " without a zero-flip sweep within 100, max sweeps " + std::to_string(worst) +
              "; example 1 max sweeps " + std::to_string(worst_example1)};
}

// ---------------------------------------------------------------------------
// 4. AND/OR optimality

Verdict and_or_optimality() {
  std::map<std::string, std::pair<std::size_t, std::size_t>> failures;  // rule -> (product, cost)
  std::size_t runs = 0;
  for (int bank_id = 0; bank_id < 5; ++bank_id) {
    const int sensors = 2 + bank_id % 4;
    const auto L = static_cast<std::size_t>(sensors);
    const std::uint64_t seed = 900 + static_cast<std::uint64_t>(bank_id);
    const SampleBank b = ddf::testing::random_bank(sensors, 400, seed);
    const BayesConstants k = bayes_constants(ddf::testing::random_scenario(sensors, seed));
    for (const auto& f : {FusionRule::all(L), FusionRule::any(L)}) {
      const double analytic = cost_mc(b, analytic_and_or(b), f, k);
      auto& fail = failures[f.id()];
      for (int init = 0; init < 20; ++init) {
        auto [labels, trace] = optimize(b, f, k, init_random(L, b.size(), seed * 100 + init));
        ++runs;
        bool product = true;
        for (std::size_t i = 0; i < b.size(); ++i) {
          product = product && f.evaluate(labels.vote(i)) == indicator(b.lhat_values()[i]);
        }
        if (!product) ++fail.first;
        const double cost = trace.block_costs.back();
        if (std::abs(cost - analytic) > 1e-12 * std::abs(analytic)) ++fail.second;
      }
    }
  }
  std::size_t exhaustive = 0, exhaustive_bad = 0;
  for (std::size_t n = 2; n <= 8; ++n) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const SampleBank b = ddf::testing::random_bank(2, n, 4000 + 10 * n + seed);
      const BayesConstants k = bayes_constants(ddf::testing::random_scenario(2, 4000 + 10 * n + seed));
      for (const auto& f : {FusionRule::all(2), FusionRule::any(2)}) {
        ++exhaustive;
        if (exhaustive_optimum(b, f, k).second != cost_mc(b, analytic_and_or(b), f, k)) ++exhaustive_bad;
      }
    }
  }
  bool pass = exhaustive_bad == 0;
  std::string detail = std::to_string(runs) + " runs;";
  for (const auto& [id, fail] : failures) {
    pass = pass && fail.first == 0 && fail.second == 0;
    detail += " " + id + ": " + std::to_string(fail.first) + " product-condition failures, " +
              std::to_string(fail.second) + " cost mismatches;";
  }
  detail += " exhaustive L=2 N<=8: " + std::to_string(exhaustive_bad) + "/" + std::to_string(exhaustive) +
            " where the analytic cost is not the global minimum";
  return {pass, detail};
}

// ---------------------------------------------------------------------------
// 5. Estimator error rate

Verdict estimator_rate() {
  const auto t0 = Clock::now();
  const double v0 = 0.6, v1 = 1.0, m1 = 1.0, cut = 0.5;
  const Scenario s(1, 0.5, 0.5, Costs{}, Gaussian(Vector::Zero(1), Matrix::Constant(1, 1, v0)),
                   Gaussian(Vector::Constant(1, m1), Matrix::Constant(1, 1, v1)));
  const BayesConstants k = bayes_constants(s);
  auto lhat_at = [&](double y) {
    return k.a * ddf::testing::normal_pdf(y, m1, v1) - k.b * ddf::testing::normal_pdf(y, 0.0, v0);
  };
  // C = c + integral of lhat over the region labelled 0, here y < cut.
  const double lo = -20.0;
  const std::size_t steps = 400000;
  const double h = (cut - lo) / static_cast<double>(steps);
  long double area = 0.5L * (lhat_at(lo) + lhat_at(cut));
  for (std::size_t i = 1; i < steps; ++i) area += lhat_at(lo + h * static_cast<double>(i));
  const double quadrature = k.c + static_cast<double>(area) * h;
  auto phi = [](double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); };
  const double closed = k.c + k.a * phi((cut - m1) / std::sqrt(v1)) - k.b * phi(cut / std::sqrt(v0));
  const double quad_err = std::abs(quadrature - closed);

  const FusionRule f = FusionRule::all(1);
  const TrialDistribution trial = build_trial(s, TrialKind::GaussianFit);
  std::vector<double> log_n, log_err;
  std::string errs;
  for (std::size_t n : {100u, 1000u, 10000u, 100000u}) {
    double total = 0.0;
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
      const SampleBank b = draw_bank(trial, s, n, seed * 1000003 + n);
      RuleLabels labels(1, n);
      for (std::size_t i = 0; i < n; ++i) labels.set(0, i, b.sample(i)[0] >= cut);
      total += std::abs(cost_mc(b, labels, f, k) - quadrature);
    }
    log_n.push_back(std::log10(static_cast<double>(n)));
    log_err.push_back(std::log10(total / 50.0));
    errs += " N=" + std::to_string(n) + ":" + num(total / 50.0, 3);
  }
  const double slope = fit_line(log_n, log_err).first;
  const double secs = seconds_since(t0);
  return {quad_err < 1e-8 && std::abs(slope + 0.5) <= 0.1 && secs < 120.0,
          "true cost " + num(quadrature, 10) + " (closed form differs by " + num(quad_err, 2) +
              "), mean |error|" + errs + ", slope " + num(slope, 3) + ", " + num(secs, 3) + " s"};
}

// ---------------------------------------------------------------------------
// 6. Complexity

Verdict complexity() {
  std::string detail;
  bool counts_ok = true;
  for (std::size_t sensors : {3u, 10u, 64u, 65u}) {
    for (std::size_t n : {1u, 17u, 500u}) {
      const SampleBank b = ddf::testing::random_bank(static_cast<int>(sensors), n, sensors * 31 + n);
      const BayesConstants k = bayes_constants(ddf::testing::random_scenario(static_cast<int>(sensors), 1));
      for (const auto& base : {FusionRule::all(sensors), FusionRule::k_of_l(sensors, 2)}) {
        EvalCounter counter{0};
        const FusionRule f = base.counted(counter);
        RuleLabels labels = init_random(sensors, n, 3);
        sweep(b, labels, f, k);
        if (counter.load() != 2 * sensors * n) counts_ok = false;
      }
    }
  }
  detail = std::string("counter ") + (counts_ok ? "equals" : "differs from") + " 2LN on 24 sweeps;";

  const std::size_t n = 2000;
  std::vector<double> ls, ts;
  for (std::size_t sensors : {10u, 20u, 40u, 80u, 100u}) {
    const int d = static_cast<int>(sensors);
    const Scenario s(d, 0.5, 0.5, Costs{}, Gaussian(Vector::Zero(d), Matrix::Identity(d, d)),
                     Gaussian(Vector::Constant(d, 0.2), Matrix::Identity(d, d)));
    const SampleBank b = draw_bank(build_trial(s, TrialKind::GaussianFit), s, n, sensors);
    const BayesConstants k = bayes_constants(s);
    const FusionRule f = FusionRule::k_of_l(sensors, sensors / 2);
    const RuleLabels start = init_random(sensors, n, 11);
    double best = std::numeric_limits<double>::infinity();
    for (int rep = 0; rep < 15; ++rep) {
      RuleLabels labels = start;
      const auto t0 = Clock::now();
      sweep(b, labels, f, k);
      best = std::min(best, seconds_since(t0));
    }
    ls.push_back(static_cast<double>(sensors));
    ts.push_back(best);
    detail += " L=" + std::to_string(sensors) + ":" + num(best * 1e3, 3) + "ms";
  }
  const double r2 = fit_line(ls, ts).second;
  detail += "; R^2 " + num(r2, 4);
  return {counts_ok && r2 >= 0.98, detail};
}

// ---------------------------------------------------------------------------
// 7-8. Paper examples

struct ExampleCurves {
  // trial -> rule id -> curve
  std::map<TrialKind, std::map<std::string, RocCurve>> distributed;
  RocCurve centralized;
  std::size_t m = 0;
  double optimize_seconds = 0.0;
};

ExampleCurves run_example(int id) {
  const RunConfig cfg = paper_config(id);
  const Scenario& s = cfg.model();
  ExampleCurves out;
  out.m = cfg.m;
  const EvaluationSet eval = draw_evaluation_set(s, cfg.m, cfg.eval_seed);
  RocOptions opt;
  opt.max_sweeps = cfg.max_sweeps;
  opt.init = cfg.init;
  for (TrialKind trial : cfg.trials) {
    const SampleBank bank = draw_bank(build_trial(s, trial), s, cfg.n, cfg.sampling_seed);
    for (const auto& f : cfg.rules()) {
      // Optimization time alone, without deployment and evaluation.
      const auto t0 = Clock::now();
      for (double r : cfg.grid) {
        const Scenario sr = sweep_scenario(s, r);
        const BayesConstants k = bayes_constants(sr);
        const SampleBank b = bank.reweighted(k);
        optimize(b, f, k, make_init(cfg.init, b), cfg.max_sweeps);
      }
      out.optimize_seconds += seconds_since(t0);
      RocResult r = roc_sweep(s, f, bank, eval, cfg.grid, opt);
      out.distributed[trial][f.id()] = std::move(r.distributed);
      out.centralized = std::move(r.centralized);
    }
  }
  return out;
}

double pd_stderr(double pd, std::size_t m) { return binomial_stderr(std::clamp(pd, 0.0, 1.0), m); }

Verdict example_one() {
  const auto t0 = Clock::now();
  const ExampleCurves ex = run_example(1);
  const double secs = seconds_since(t0);
  std::string detail;
  bool pass = secs < 600.0;

  // (a) centralized dominance at every distributed operating point.
  double worst_gap = std::numeric_limits<double>::infinity();
  std::string worst_where;
  for (const auto& [trial, curves] : ex.distributed) {
    for (const auto& [id, c] : curves) {
      for (const auto& p : c.points) {
        const double gap = interpolate_pd(ex.centralized.points, p.pf) - p.pd;
        if (gap < worst_gap) {
          worst_gap = gap;
          worst_where = id + "/" + std::string(to_string(trial)) + " pf " + num(p.pf, 3);
        }
      }
    }
  }
  const bool a = worst_gap >= -0.03;
  detail += std::string("(a) ") + (a ? "pass" : "FAIL") + ": min centralized-minus-distributed pd " +
            num(worst_gap, 3) + " at " + worst_where + ";";

  // (b) AND above OR at small pf and below it at large pf, compared at the
  // union of operating points in the region and on a 0.01-step pf grid.
  bool b = true;
  for (const auto& [trial, curves] : ex.distributed) {
    const RocCurve& and_c = curves.at("and");
    const RocCurve& or_c = curves.at("or");
    for (const bool low : {true, false}) {
      std::vector<double> queries;
      for (int q = 1; q <= 10; ++q) queries.push_back(low ? 0.01 * q : 0.89 + 0.01 * q);
      for (const auto* c : {&and_c, &or_c}) {
        for (const auto& p : c->points) {
          if (low ? p.pf <= 0.1 : p.pf >= 0.9) queries.push_back(p.pf);
        }
      }
      double worst = std::numeric_limits<double>::infinity();
      double at = 0.0;
      bool ok = true;
      for (double q : queries) {
        const double pa = interpolate_pd(and_c.points, q);
        const double po = interpolate_pd(or_c.points, q);
        const double margin = low ? pa - po : po - pa;
        const double tol = 3.0 * (pd_stderr(pa, ex.m) + pd_stderr(po, ex.m));
        if (margin < -tol) ok = false;
        if (margin + tol < worst) {
          worst = margin + tol;
          at = q;
        }
      }
      b = b && ok;
      detail += std::string(" (b) ") + std::string(to_string(trial)) + (low ? " pf<=0.1: " : " pf>=0.9: ") +
                (ok ? "pass" : "FAIL") + " (" + (low ? "AND-OR" : "OR-AND") + " pd margin incl. 3 s.e. min " +
                num(worst, 3) + " at pf " + num(at, 3) + ");";
    }
  }

  // (c) AND points nearer (0,0) and OR points nearer (1,1) on average.
  bool c = true;
  for (const auto& [trial, curves] : ex.distributed) {
    auto mean_dist = [](const RocCurve& curve, double x, double y) {
      double total = 0.0;
      for (const auto& p : curve.points) total += std::hypot(p.pf - x, p.pd - y);
      return total / static_cast<double>(curve.points.size());
    };
    const RocCurve& and_c = curves.at("and");
    const RocCurve& or_c = curves.at("or");
    const double a0 = mean_dist(and_c, 0, 0), o0 = mean_dist(or_c, 0, 0);
    const double a1 = mean_dist(and_c, 1, 1), o1 = mean_dist(or_c, 1, 1);
    const bool ok = a0 < o0 && o1 < a1;
    c = c && ok;
    detail += std::string(" (c) ") + std::string(to_string(trial)) + ": " + (ok ? "pass" : "FAIL") +
              " (mean distance to (0,0) AND " + num(a0, 3) + " OR " + num(o0, 3) + "; to (1,1) AND " +
              num(a1, 3) + " OR " + num(o1, 3) + ");";
  }
  pass = pass && a && b && c;
  detail += " " + num(secs, 3) + " s";
  return {pass, detail};
}

Verdict example_two() {
  const auto t0 = Clock::now();
  const ExampleCurves ex = run_example(2);
  const double secs = seconds_since(t0);
  const auto& rule = ex.distributed.begin()->second.begin()->first;
  const RocCurve& gauss = ex.distributed.at(TrialKind::GaussianFit).at(rule);
  const RocCurve& mix = ex.distributed.at(TrialKind::HypothesisMixture).at(rule);
  double worst = std::numeric_limits<double>::infinity();
  double at = 0.0;
  for (const auto* c : {&gauss, &mix}) {
    for (const auto& p : c->points) {
      const double d = interpolate_pd(mix.points, p.pf) - interpolate_pd(gauss.points, p.pf);
      if (d < worst) {
        worst = d;
        at = p.pf;
      }
    }
  }
  const bool fast = ex.optimize_seconds < 300.0;
  return {fast && worst >= -0.03,
          "optimization " + num(ex.optimize_seconds, 3) + " s (total " + num(secs, 3) +
              " s); min mixture-minus-gaussian pd " + num(worst, 3) + " at pf " + num(at, 3)};
}

// ---------------------------------------------------------------------------
// 9. Determinism

int run_tool(const std::string& args) {
  const std::string cmd = std::string(DDFUSION_BIN) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Verdict determinism() {
  const fs::path dir = fs::temp_directory_path() / "ddf_acceptance_determinism";
  fs::remove_all(dir);
  const int first = run_tool("paper 1 -o " + (dir / "first").string());
  const int second = run_tool("replay " + (dir / "first" / "manifest.json").string() + " -o " +
                              (dir / "second").string());
  const int third = run_tool("paper 1 -o " + (dir / "third").string());
  if (first != 0 || second != 0 || third != 0) {
    return {false, "exit codes " + std::to_string(first) + ", " + std::to_string(second) + ", " +
                       std::to_string(third)};
  }
  std::size_t files = 0, differ = 0;
  for (const auto& e : fs::directory_iterator(dir / "first")) {
    if (e.path().extension() != ".csv") continue;
    ++files;
    const std::string a = read_file(e.path());
    const auto name = e.path().filename();
    if (!fs::exists(dir / "second" / name) || read_file(dir / "second" / name) != a) ++differ;
    if (!fs::exists(dir / "third" / name) || read_file(dir / "third" / name) != a) ++differ;
  }
  fs::remove_all(dir);
  return {files > 0 && differ == 0, std::to_string(files) + " CSV files compared across a rerun and a replay, " +
                                        std::to_string(differ) + " differences"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"decomposition identity", decomposition},
      {"monotone cost", monotone_cost},
      {"finite convergence", convergence},
      {"AND/OR optimality", and_or_optimality},
      {"estimator error rate", estimator_rate},
      {"linear complexity", complexity},
      {"example 1 reproduction", example_one},
      {"example 2 reproduction", example_two},
      {"determinism", determinism},
  };
  std::vector<std::size_t> selected;
  for (int i = 1; i < argc; ++i) {
    const int id = std::atoi(argv[i]);
    if (id < 1 || id > static_cast<int>(criteria.size())) {
      std::cerr << "unknown criterion '" << argv[i] << "'\n";
      return 2;
    }
    selected.push_back(static_cast<std::size_t>(id));
  }
  if (selected.empty()) {
    for (std::size_t i = 1; i <= criteria.size(); ++i) selected.push_back(i);
  }
  bool all = true;
  for (std::size_t id : selected) {
    const auto& [name, check] = criteria[id - 1];
    Verdict v;
    try {
      v = check();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    all = all && v.pass;
    std::cout << (v.pass ? "PASS" : "FAIL") << " criterion " << id << " (" << name << "): " << v.detail
              << std::endl;
  }
  return all ? 0 : 1;
}
