#pragma once

// Deployment of learned bank labels to continuous observations, system
// evaluation by fresh Monte Carlo draws, the centralized likelihood-ratio
// baseline and ROC sweeps over the cost ratio b/a.

#include "ddf/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

namespace ddf {

/// Per-sensor nearest-reference classifier built from the bank's labels.
/// Ties in distance go to the lowest sample index.
class DeployedRule {
 public:
  DeployedRule(const SampleBank& bank, const RuleLabels& labels)
      : DeployedRule(bank.samples(), bank.sensor_dims(), labels) {}

  /// `samples` holds one reference sample per column, split into sensor
  /// blocks of the given dimensions.
  DeployedRule(const Matrix& samples, const std::vector<int>& sensor_dims, const RuleLabels& labels) {
    const auto n = static_cast<std::size_t>(samples.cols());
    if (labels.samples() != n || labels.sensors() != sensor_dims.size()) {
      throw ModelError("deploy: labels do not match the sample bank");
    }
    sensors_.resize(labels.sensors());
    int offset = 0;
    for (std::size_t j = 0; j < sensor_dims.size(); ++j) {
      auto& s = sensors_[j];
      s.dim = sensor_dims[j];
      s.offset = offset;
      offset += s.dim;
      if (offset > samples.rows()) throw ModelError("deploy: sensor dimensions exceed the sample dimension");
      auto coord = [&](std::size_t i, int d) {
        return samples(s.offset + d, static_cast<Eigen::Index>(i));
      };
      if (s.dim == 1) {
        std::vector<std::pair<double, std::size_t>> order(n);
        for (std::size_t i = 0; i < n; ++i) order[i] = {coord(i, 0), i};
        std::sort(order.begin(), order.end());
        // Duplicate coordinates collapse to their lowest index; consecutive
        // points with equal bits merge into one run.
        for (std::size_t k = 0; k < order.size(); ++k) {
          const auto [v, i] = order[k];
          if (k > 0 && order[k - 1].first == v) continue;
          const bool bit = labels.get(j, i);
          if (!s.runs.empty() && s.runs.back().bit == bit) {
            s.runs.back().last = v;
            s.runs.back().last_index = i;
          } else {
            s.runs.push_back({v, v, i, i, bit});
          }
        }
        s.run_first.reserve(s.runs.size());
        for (const auto& r : s.runs) s.run_first.push_back(r.first);
      } else {
        s.points.resize(n * static_cast<std::size_t>(s.dim));
        s.bits.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
          for (int d = 0; d < s.dim; ++d) {
            s.points[i * static_cast<std::size_t>(s.dim) + static_cast<std::size_t>(d)] = coord(i, d);
          }
          s.bits[i] = labels.get(j, i);
        }
      }
    }
  }

  std::size_t sensors() const { return sensors_.size(); }

  /// Bit of the Euclidean-nearest reference point of sensor j.
  bool decide(std::size_t j, const double* y) const {
    const auto& s = sensors_[j];
    if (s.dim == 1) {
      const double q = y[0];
      const auto it = std::upper_bound(s.run_first.begin(), s.run_first.end(), q);
      const auto next = static_cast<std::size_t>(it - s.run_first.begin());
      if (next == 0) return s.runs.front().bit;
      const Run& lo = s.runs[next - 1];
      if (q <= lo.last || next == s.runs.size()) return lo.bit;
      const Run& hi = s.runs[next];
      const double d_lo = q - lo.last;
      const double d_hi = hi.first - q;
      if (d_lo < d_hi) return lo.bit;
      if (d_hi < d_lo) return hi.bit;
      return lo.last_index < hi.first_index ? lo.bit : hi.bit;
    }
    const auto dim = static_cast<std::size_t>(s.dim);
    double best = std::numeric_limits<double>::infinity();
    bool bit = false;
    for (std::size_t i = 0; i < s.bits.size(); ++i) {
      double d2 = 0.0;
      for (std::size_t d = 0; d < dim; ++d) {
        const double diff = y[d] - s.points[i * dim + d];
        d2 += diff * diff;
      }
      if (d2 < best) {
        best = d2;
        bit = s.bits[i];
      }
    }
    return bit;
  }

  bool decide(std::size_t j, const Eigen::Ref<const Vector>& y) const { return decide(j, y.data()); }

  /// Local votes for a full observation vector.
  void votes(const Eigen::Ref<const Vector>& y, Vote& out) const {
    for (std::size_t j = 0; j < sensors_.size(); ++j) {
      out.set(j, decide(j, y.data() + sensors_[j].offset));
    }
  }

 private:
  // Maximal stretch of sorted distinct coordinates sharing one bit; the
  // indices are the lowest sample index at the first and last coordinate.
  struct Run {
    double first;
    double last;
    std::size_t first_index;
    std::size_t last_index;
    bool bit;
  };
  struct Sensor {
    int dim = 1;
    int offset = 0;
    std::vector<Run> runs;            // 1-D sensors
    std::vector<double> run_first;
    std::vector<double> points;       // n_j > 1: row-major reference points
    std::vector<bool> bits;
  };
  std::vector<Sensor> sensors_;
};

inline DeployedRule deploy(const SampleBank& bank, const RuleLabels& labels) {
  return DeployedRule(bank, labels);
}

struct OperatingPoint {
  double pf = 0.0;
  double pd = 0.0;
  double bayes_cost = 0.0;
  double sweep_parameter = 0.0;
  double stderr_pf = 0.0;
  double stderr_pd = 0.0;
};

inline double binomial_stderr(double p, std::size_t m) {
  return std::sqrt(p * (1.0 - p) / static_cast<double>(m));
}

inline double bayes_cost(const Scenario& s, double pf, double pd) {
  const auto& k = s.costs();
  return k.c00 * s.prior_p0() * (1.0 - pf) + k.c01 * s.prior_p1() * (1.0 - pd) +
         k.c10 * s.prior_p0() * pf + k.c11 * s.prior_p1() * pd;
}

inline OperatingPoint make_point(const Scenario& s, std::size_t alarms_h0, std::size_t alarms_h1,
                                 std::size_t m, double parameter) {
  OperatingPoint p;
  p.pf = static_cast<double>(alarms_h0) / static_cast<double>(m);
  p.pd = static_cast<double>(alarms_h1) / static_cast<double>(m);
  p.bayes_cost = bayes_cost(s, p.pf, p.pd);
  p.sweep_parameter = parameter;
  p.stderr_pf = binomial_stderr(p.pf, m);
  p.stderr_pd = binomial_stderr(p.pd, m);
  return p;
}

/// M fresh draws under each hypothesis plus their log-likelihood ratios.
struct EvaluationSet {
  Matrix h0_draws;
  Matrix h1_draws;
  std::vector<double> llr_h0;
  std::vector<double> llr_h1;
  std::size_t size() const { return static_cast<std::size_t>(h0_draws.cols()); }
};

inline std::vector<double> log_likelihood_ratios(const Scenario& s, const Matrix& draws) {
  std::vector<double> out(static_cast<std::size_t>(draws.cols()));
  for (Eigen::Index i = 0; i < draws.cols(); ++i) {
    out[static_cast<std::size_t>(i)] = s.h1().log_pdf(draws.col(i)) - s.h0().log_pdf(draws.col(i));
  }
  return out;
}

/// H0 draws use `seed`, H1 draws use `seed + 1`.
inline EvaluationSet draw_evaluation_set(const Scenario& s, std::size_t m, std::uint64_t seed,
                                         bool with_llr = true) {
  if (m < 1) throw ModelError("evaluation: M must be at least 1");
  EvaluationSet e;
  e.h0_draws = sample(s.h0(), m, seed);
  e.h1_draws = sample(s.h1(), m, seed + 1);
  if (with_llr) {
    e.llr_h0 = log_likelihood_ratios(s, e.h0_draws);
    e.llr_h1 = log_likelihood_ratios(s, e.h1_draws);
  }
  return e;
}

inline OperatingPoint evaluate_system(const Scenario& s, const DeployedRule& rule,
                                      const FusionRule& f, const EvaluationSet& e,
                                      double parameter = 0.0) {
  if (rule.sensors() != f.sensors()) throw ModelError("evaluate: rule and fusion arity differ");
  Vote u(f.sensors());
  auto alarms = [&](const Matrix& draws) {
    std::size_t count = 0;
    for (Eigen::Index i = 0; i < draws.cols(); ++i) {
      rule.votes(draws.col(i), u);
      if (f.evaluate(u)) ++count;
    }
    return count;
  };
  return make_point(s, alarms(e.h0_draws), alarms(e.h1_draws), e.size(), parameter);
}

inline OperatingPoint evaluate_system(const Scenario& s, const DeployedRule& rule,
                                      const FusionRule& f, std::size_t m, std::uint64_t seed) {
  return evaluate_system(s, rule, f, draw_evaluation_set(s, m, seed, false));
}

/// Importance-sampling estimate of (pf, pd) on the training bank itself,
/// using the bank labels directly. Estimates are clipped to [0, 1].
inline OperatingPoint evaluate_on_training(const Scenario& s, const SampleBank& bank,
                                           const RuleLabels& labels, const FusionRule& f,
                                           double parameter = 0.0) {
  if (!bank.has_log_densities()) {
    throw ModelError("evaluate_on_training: bank was built without hypothesis log-densities");
  }
  const std::size_t n = bank.size();
  auto estimate = [&](const std::vector<double>& log_p) {
    double sum = 0.0, sum_sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double v = f.evaluate(labels.vote(i)) ? std::exp(log_p[i] - bank.log_g()[i]) : 0.0;
      sum += v;
      sum_sq += v * v;
    }
    const double mean = sum / static_cast<double>(n);
    const double var = std::max(0.0, sum_sq / static_cast<double>(n) - mean * mean);
    return std::pair{std::clamp(mean, 0.0, 1.0), std::sqrt(var / static_cast<double>(n))};
  };
  const auto [pf, se_f] = estimate(bank.log_p0());
  const auto [pd, se_d] = estimate(bank.log_p1());
  OperatingPoint p{pf, pd, bayes_cost(s, pf, pd), parameter, se_f, se_d};
  return p;
}

/// 1 iff p(y|H1) / p(y|H0) >= t, in log space.
inline bool centralized_decide(const Scenario& s, const Eigen::Ref<const Vector>& y, double t) {
  if (!(t >= 0.0)) throw ModelError("centralized threshold must be nonnegative");
  return s.h1().log_pdf(y) - s.h0().log_pdf(y) >= std::log(t);
}

inline OperatingPoint centralized_point(const Scenario& s, const EvaluationSet& e, double t) {
  if (!(t >= 0.0)) throw ModelError("centralized threshold must be nonnegative");
  const double log_t = std::log(t);
  auto alarms = [&](const std::vector<double>& llr) {
    return static_cast<std::size_t>(
        std::count_if(llr.begin(), llr.end(), [&](double v) { return v >= log_t; }));
  };
  return make_point(s, alarms(e.llr_h0), alarms(e.llr_h1), e.size(), t);
}

struct RocCurve {
  std::string id;
  std::vector<OperatingPoint> points;
  std::map<std::string, std::string> metadata;

  void sort_by_pf() {
    std::stable_sort(points.begin(), points.end(), [](const OperatingPoint& a, const OperatingPoint& b) {
      return a.pf < b.pf || (a.pf == b.pf && a.pd < b.pd);
    });
  }
};

/// pd of the piecewise-linear curve through (0,0), the points and (1,1) at
/// false-alarm rate `pf`. Points must be sorted by pf.
inline double interpolate_pd(const std::vector<OperatingPoint>& sorted, double pf) {
  std::vector<std::pair<double, double>> xy;
  xy.reserve(sorted.size() + 2);
  xy.emplace_back(0.0, 0.0);
  for (const auto& p : sorted) xy.emplace_back(p.pf, p.pd);
  xy.emplace_back(1.0, 1.0);
  // Largest pd among points sharing the query pf.
  double at = -1.0;
  for (const auto& [x, y] : xy) {
    if (x == pf) at = std::max(at, y);
  }
  if (at >= 0.0) return at;
  for (std::size_t k = 1; k < xy.size(); ++k) {
    if (xy[k].first > pf) {
      const auto [x0, y0] = xy[k - 1];
      const auto [x1, y1] = xy[k];
      return y0 + (y1 - y0) * (pf - x0) / (x1 - x0);
    }
  }
  return 1.0;
}

/// Scenario used at sweep value r = b/a: P0 = P1 = 1/2, C00 = C11 = 0,
/// C01 = 1, C10 = r.
inline Scenario sweep_scenario(const Scenario& base, double r) {
  return base.with_costs(0.5, 0.5, Costs{0.0, 1.0, r, 0.0});
}

inline std::vector<double> log_grid(double lo, double hi, std::size_t points) {
  if (points == 0 || !(lo > 0.0) || !(hi >= lo)) throw ModelError("log grid needs 0 < lo <= hi and points >= 1");
  std::vector<double> g(points);
  if (points == 1) {
    g[0] = lo;
    return g;
  }
  const double a = std::log10(lo), b = std::log10(hi);
  for (std::size_t k = 0; k < points; ++k) {
    g[k] = std::pow(10.0, a + (b - a) * static_cast<double>(k) / static_cast<double>(points - 1));
  }
  return g;
}

enum class InitKind { Lhat, Affine, Random };

struct InitSpec {
  InitKind kind = InitKind::Lhat;
  double slope = 3.0;       // Affine: I[slope * y + intercept]
  double intercept = -4.0;
  std::uint64_t seed = 0;   // Random
};

inline RuleLabels make_init(const InitSpec& spec, const SampleBank& bank) {
  switch (spec.kind) {
    case InitKind::Lhat: return analytic_and_or(bank);
    case InitKind::Affine: return init_affine(bank, spec.slope, spec.intercept);
    case InitKind::Random:
      return init_random(static_cast<std::size_t>(bank.num_sensors()), bank.size(), spec.seed);
  }
  return analytic_and_or(bank);
}

struct RocOptions {
  std::size_t max_sweeps = 100;
  InitSpec init;
  bool eval_on_training = false;
};

/// Per grid point: everything the distributed sweep produced.
struct SweepPointRecord {
  double r = 0.0;
  OptimizeTrace trace;
};

struct RocResult {
  RocCurve distributed;
  RocCurve centralized;
  std::vector<SweepPointRecord> records;
};

/// Sweep r = b/a over `grid`: each value re-derives lhat on the same bank,
/// re-optimizes, deploys and evaluates on the shared evaluation draws. The
/// centralized detector thresholds the likelihood ratio at t = r on the same
/// draws.
inline RocResult roc_sweep(const Scenario& base, const FusionRule& f, const SampleBank& bank,
                           const EvaluationSet& eval, const std::vector<double>& grid,
                           const RocOptions& opt = {}) {
  if (grid.empty()) throw ModelError("roc_sweep: grid must be nonempty");
  RocResult out;
  for (double r : grid) {
    if (!(r > 0.0)) throw ModelError("roc_sweep: grid entries must be positive");
    const Scenario s = sweep_scenario(base, r);
    const BayesConstants k = bayes_constants(s);
    const SampleBank b = bank.reweighted(k);
    auto [labels, trace] = optimize(b, f, k, make_init(opt.init, b), opt.max_sweeps);
    if (opt.eval_on_training) {
      out.distributed.points.push_back(evaluate_on_training(s, b, labels, f, r));
    } else {
      out.distributed.points.push_back(evaluate_system(s, deploy(b, labels), f, eval, r));
    }
    out.centralized.points.push_back(centralized_point(s, eval, r));
    out.records.push_back({r, std::move(trace)});
  }
  out.distributed.sort_by_pf();
  out.centralized.sort_by_pf();
  return out;
}

/// Convenience overload drawing the bank and evaluation set from seeds.
inline RocResult roc_sweep(const Scenario& base, const FusionRule& f, TrialKind trial, std::size_t n,
                           std::size_t m, const std::vector<double>& grid, std::uint64_t bank_seed,
                           std::uint64_t eval_seed, const RocOptions& opt = {}) {
  const SampleBank bank = draw_bank(build_trial(base, trial), base, n, bank_seed);
  const EvaluationSet eval = draw_evaluation_set(base, m, eval_seed);
  RocResult r = roc_sweep(base, f, bank, eval, grid, opt);
  for (RocCurve* c : {&r.distributed, &r.centralized}) {
    c->metadata["trial"] = std::string(to_string(trial));
    c->metadata["N"] = std::to_string(n);
    c->metadata["M"] = std::to_string(m);
    c->metadata["bank_seed"] = std::to_string(bank_seed);
    c->metadata["eval_seed"] = std::to_string(eval_seed);
  }
  r.distributed.metadata["fusion"] = f.id();
  r.distributed.id = "distributed_" + f.slug() + "_" + std::string(to_string(trial));
  r.centralized.id = "centralized";
  return r;
}

}  // namespace ddf
