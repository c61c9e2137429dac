#pragma once

// Monte Carlo cost and the Gauss-Seidel (person-by-person) search for sensor
// decision rules restricted to the sample bank.

#include "ddf/fusion.hpp"
#include "ddf/sampling.hpp"

#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <utility>
#include <vector>

namespace ddf {

/// I[x] = 1 if x >= 0, else 0.
inline bool indicator(double x) { return x >= 0.0; }

/// Sensor decision bits on the bank: bit (j, i) = I_j(Y_{ji}). Stored sample
/// major, so column i is the packed vote of sample i.
class RuleLabels {
 public:
  RuleLabels() = default;
  RuleLabels(std::size_t sensors, std::size_t samples)
      : sensors_(sensors), samples_(samples), stride_(words_for(sensors)),
        words_(stride_ * samples, 0) {}

  std::size_t sensors() const { return sensors_; }
  std::size_t samples() const { return samples_; }

  bool get(std::size_t j, std::size_t i) const {
    return (words_[i * stride_ + (j >> 6)] >> (j & 63)) & 1u;
  }
  void set(std::size_t j, std::size_t i, bool bit) {
    std::uint64_t& w = words_[i * stride_ + (j >> 6)];
    const std::uint64_t mask = std::uint64_t{1} << (j & 63);
    w = bit ? (w | mask) : (w & ~mask);
  }

  VoteView vote(std::size_t i) const {
    return {std::span<const std::uint64_t>(words_).subspan(i * stride_, stride_), sensors_};
  }
  std::span<std::uint64_t> vote_words(std::size_t i) {
    return std::span<std::uint64_t>(words_).subspan(i * stride_, stride_);
  }

  friend bool operator==(const RuleLabels&, const RuleLabels&) = default;

 private:
  std::size_t sensors_ = 0;
  std::size_t samples_ = 0;
  std::size_t stride_ = 0;
  std::vector<std::uint64_t> words_;
};

struct OptimizeTrace {
  double initial_cost = 0.0;
  std::vector<double> block_costs;          // cost after every sensor block, L per sweep
  std::vector<std::size_t> flips_per_sweep;
  std::size_t sweeps_used = 0;
  bool converged = false;
  std::optional<std::size_t> first_stagnant_sweep;  // first sweep with no cost change (1-based)
};

struct SweepResult {
  std::vector<double> block_costs;
  std::size_t flips = 0;
};

namespace detail {

inline void check_shapes(const SampleBank& bank, const RuleLabels& labels, const FusionRule& f) {
  if (labels.samples() != bank.size() ||
      labels.sensors() != static_cast<std::size_t>(bank.num_sensors())) {
    throw ModelError("labels do not match the sample bank");
  }
  if (f.sensors() != labels.sensors()) {
    throw ModelError("fusion rule arity does not match the number of sensors");
  }
}

// c + (1/N) sum_i omega0_i w_i, summed in sample order.
inline double reduce_cost(const std::vector<char>& omega0, const std::vector<double>& w, double c) {
  double s = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) s += omega0[i] ? w[i] : 0.0;
  return c + s / static_cast<double>(w.size());
}

}  // namespace detail

/// C_MC = c + (1/N) sum_i I_{Omega0}(labels_i) * lhat_i / g_i.
inline double cost_mc(const SampleBank& bank, const RuleLabels& labels, const FusionRule& f,
                      const BayesConstants& k) {
  detail::check_shapes(bank, labels, f);
  std::vector<char> omega0(bank.size());
  for (std::size_t i = 0; i < bank.size(); ++i) {
    omega0[i] = f.evaluate_unchecked(labels.vote(i)) ? 0 : 1;
  }
  return detail::reduce_cost(omega0, bank.weights(), k.c);
}

/// One Gauss-Seidel pass: for j = 0..L-1, every sample's bit j becomes
/// I[P_{j1} * lhat] given the current bits of the other sensors. Sensor j sees
/// the already-updated blocks 0..j-1. Exactly 2*L*N fusion evaluations.
inline SweepResult sweep(const SampleBank& bank, RuleLabels& labels, const FusionRule& f,
                         const BayesConstants& k) {
  detail::check_shapes(bank, labels, f);
  const std::size_t n = bank.size();
  const std::size_t sensors = labels.sensors();
  const auto& lhat = bank.lhat_values();
  SweepResult out;
  out.block_costs.reserve(sensors);
  std::vector<char> omega0(n);
  for (std::size_t j = 0; j < sensors; ++j) {
    const std::uint64_t mask = std::uint64_t{1} << (j & 63);
    const std::size_t word = j >> 6;
    for (std::size_t i = 0; i < n; ++i) {
      auto words = labels.vote_words(i);
      std::uint64_t& w = words[word];
      const bool old_bit = (w & mask) != 0;
      w |= mask;
      const bool f_hi = f.evaluate_unchecked(VoteView(words, sensors));
      w &= ~mask;
      const bool f_lo = f.evaluate_unchecked(VoteView(words, sensors));
      const int p = (f_hi ? 1 : 0) - (f_lo ? 1 : 0);
      const bool bit = indicator(static_cast<double>(p) * lhat[i]);
      if (bit) w |= mask;
      if (bit != old_bit) ++out.flips;
      omega0[i] = (bit ? f_hi : f_lo) ? 0 : 1;
    }
    out.block_costs.push_back(detail::reduce_cost(omega0, bank.weights(), k.c));
  }
  return out;
}

/// Repeat sweeps until one changes no bit or `max_sweeps` is reached.
inline std::pair<RuleLabels, OptimizeTrace> optimize(const SampleBank& bank, const FusionRule& f,
                                                     const BayesConstants& k, RuleLabels init,
                                                     std::size_t max_sweeps = 100) {
  if (max_sweeps < 1) throw ModelError("optimize: max_sweeps must be at least 1");
  OptimizeTrace trace;
  trace.initial_cost = cost_mc(bank, init, f, k);
  double previous = trace.initial_cost;
  while (trace.sweeps_used < max_sweeps) {
    SweepResult r = sweep(bank, init, f, k);
    ++trace.sweeps_used;
    trace.block_costs.insert(trace.block_costs.end(), r.block_costs.begin(), r.block_costs.end());
    trace.flips_per_sweep.push_back(r.flips);
    const double now = r.block_costs.back();
    if (!trace.first_stagnant_sweep && now == previous) trace.first_stagnant_sweep = trace.sweeps_used;
    previous = now;
    if (r.flips == 0) {
      trace.converged = true;
      break;
    }
  }
  return {std::move(init), std::move(trace)};
}

/// Every sensor's bit equals I[lhat]; optimal for AND and OR fusion.
inline RuleLabels analytic_and_or(const SampleBank& bank) {
  RuleLabels labels(static_cast<std::size_t>(bank.num_sensors()), bank.size());
  for (std::size_t i = 0; i < bank.size(); ++i) {
    const bool bit = indicator(bank.lhat_values()[i]);
    for (std::size_t j = 0; j < labels.sensors(); ++j) labels.set(j, i, bit);
  }
  return labels;
}

/// Initial rule I_j(y) = I[slope * y_j + intercept] on the first coordinate
/// of each sensor block.
inline RuleLabels init_affine(const SampleBank& bank, double slope, double intercept) {
  RuleLabels labels(static_cast<std::size_t>(bank.num_sensors()), bank.size());
  for (std::size_t i = 0; i < bank.size(); ++i) {
    for (int j = 0; j < bank.num_sensors(); ++j) {
      labels.set(static_cast<std::size_t>(j), i,
                 indicator(slope * bank.sensor_block(j, i)[0] + intercept));
    }
  }
  return labels;
}

inline RuleLabels init_random(std::size_t sensors, std::size_t samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  RuleLabels labels(sensors, samples);
  for (std::size_t i = 0; i < samples; ++i) {
    for (std::size_t j = 0; j < sensors; ++j) labels.set(j, i, (rng() >> 63) != 0);
  }
  return labels;
}

/// Global minimizer of C_MC over all 2^{L N} labelings; bit (j, i) of the
/// enumerated pattern is pattern bit j*N + i, and ties go to the smallest
/// pattern.
inline std::pair<RuleLabels, double> exhaustive_optimum(const SampleBank& bank, const FusionRule& f,
                                                        const BayesConstants& k) {
  const std::size_t sensors = static_cast<std::size_t>(bank.num_sensors());
  const std::size_t n = bank.size();
  if (sensors * n > 24) throw ModelError("exhaustive_optimum: requires L*N <= 24");
  RuleLabels labels(sensors, n);
  detail::check_shapes(bank, labels, f);
  const std::uint64_t patterns = std::uint64_t{1} << (sensors * n);
  double best = std::numeric_limits<double>::infinity();
  std::uint64_t best_pattern = 0;
  for (std::uint64_t p = 0; p < patterns; ++p) {
    for (std::size_t j = 0; j < sensors; ++j) {
      for (std::size_t i = 0; i < n; ++i) labels.set(j, i, (p >> (j * n + i)) & 1u);
    }
    const double c = cost_mc(bank, labels, f, k);
    if (c < best) {
      best = c;
      best_pattern = p;
    }
  }
  for (std::size_t j = 0; j < sensors; ++j) {
    for (std::size_t i = 0; i < n; ++i) labels.set(j, i, (best_pattern >> (j * n + i)) & 1u);
  }
  return {labels, best};
}

/// True when every bit equals I[P_{j1} * lhat] under the current labels.
inline bool is_fixed_point(const SampleBank& bank, const RuleLabels& labels, const FusionRule& f) {
  detail::check_shapes(bank, labels, f);
  for (std::size_t i = 0; i < bank.size(); ++i) {
    for (std::size_t j = 0; j < labels.sensors(); ++j) {
      const int p = pj1(f, labels.vote(i), j);
      if (labels.get(j, i) != indicator(static_cast<double>(p) * bank.lhat_values()[i])) return false;
    }
  }
  return true;
}

}  // namespace ddf
