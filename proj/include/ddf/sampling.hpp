#pragma once

// Importance (trial) distributions and the frozen sample bank the optimizer
// works on.

#include "ddf/model.hpp"

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace ddf {

enum class TrialKind { GaussianFit, HypothesisMixture, Custom };

inline std::string_view to_string(TrialKind k) {
  switch (k) {
    case TrialKind::GaussianFit: return "gaussian";
    case TrialKind::HypothesisMixture: return "mixture";
    case TrialKind::Custom: return "custom";
  }
  return "custom";
}

inline TrialKind parse_trial_kind(std::string_view s) {
  if (s == "gaussian") return TrialKind::GaussianFit;
  if (s == "mixture") return TrialKind::HypothesisMixture;
  throw ModelError(detail::concat("unknown trial kind '", s, "' (expected gaussian or mixture)"));
}

struct TrialDistribution {
  TrialKind kind;
  Density density;
};

/// GaussianFit: one Gaussian matching the first two moments of the equal-weight
/// mixture of H0 and H1. HypothesisMixture: 0.5 p(.|H0) + 0.5 p(.|H1).
inline TrialDistribution build_trial(const Scenario& s, TrialKind kind) {
  std::vector<double> weights;
  std::vector<Gaussian> comps;
  for (const Density* h : {&s.h0(), &s.h1()}) {
    for (const auto& [w, g] : h->components()) {
      weights.push_back(0.5 * w);
      comps.push_back(*g);
    }
  }
  Mixture both(std::move(weights), std::move(comps));
  switch (kind) {
    case TrialKind::HypothesisMixture:
      return {kind, Density(std::move(both))};
    case TrialKind::GaussianFit: {
      auto [mean, cov] = Density(std::move(both)).moments();
      return {kind, Density(Gaussian(std::move(mean), std::move(cov)))};
    }
    case TrialKind::Custom:
      break;
  }
  throw ModelError("build_trial: a custom trial is built with custom_trial()");
}

inline TrialDistribution custom_trial(Density d) { return {TrialKind::Custom, std::move(d)}; }

/// N fixed samples from the trial density with g(Y_i), lhat(Y_i) and the
/// importance weights lhat/g. Immutable once built.
class SampleBank {
 public:
  /// Bank from explicit values (hand-built instances and imported banks).
  /// `samples` holds one sample per column.
  static SampleBank from_values(Matrix samples, std::vector<int> sensor_dims,
                                std::vector<double> g_values, std::vector<double> lhat_values,
                                std::uint64_t seed = 0) {
    SampleBank b;
    b.samples_ = std::move(samples);
    b.dims_ = std::move(sensor_dims);
    b.g_ = std::move(g_values);
    b.lhat_ = std::move(lhat_values);
    b.seed_ = seed;
    b.finish();
    return b;
  }

  /// One-dimensional sensors, `num_sensors` rows per sample.
  static SampleBank from_values(Matrix samples, std::vector<double> g_values,
                                std::vector<double> lhat_values) {
    std::vector<int> dims(static_cast<std::size_t>(samples.rows()), 1);
    return from_values(std::move(samples), std::move(dims), std::move(g_values),
                       std::move(lhat_values));
  }

  std::size_t size() const { return g_.size(); }
  int num_sensors() const { return static_cast<int>(dims_.size()); }
  int dim() const { return static_cast<int>(samples_.rows()); }
  const std::vector<int>& sensor_dims() const { return dims_; }
  int sensor_offset(int j) const { return offsets_[static_cast<std::size_t>(j)]; }
  std::uint64_t seed() const { return seed_; }

  const Matrix& samples() const { return samples_; }
  auto sample(std::size_t i) const { return samples_.col(static_cast<Eigen::Index>(i)); }
  /// Y_{ji}: sensor j's block of sample i.
  auto sensor_block(int j, std::size_t i) const {
    return samples_.col(static_cast<Eigen::Index>(i))
        .segment(sensor_offset(j), dims_[static_cast<std::size_t>(j)]);
  }

  const std::vector<double>& g_values() const { return g_; }
  const std::vector<double>& lhat_values() const { return lhat_; }
  const std::vector<double>& weights() const { return w_; }

  bool has_log_densities() const { return log_p0_.has_value(); }
  const std::vector<double>& log_p0() const { return log_p0_.value(); }
  const std::vector<double>& log_p1() const { return log_p1_.value(); }
  const std::vector<double>& log_g() const { return log_g_.value(); }

  /// Same samples with lhat and weights recomputed for new cost constants.
  SampleBank reweighted(const BayesConstants& k) const {
    if (!has_log_densities()) {
      throw ModelError("reweighted: bank was built without hypothesis log-densities");
    }
    SampleBank b = *this;
    for (std::size_t i = 0; i < size(); ++i) {
      b.lhat_[i] = signed_likelihood(k, (*log_p1_)[i], (*log_p0_)[i]);
    }
    b.finish();
    return b;
  }

 private:
  friend SampleBank bank_from_samples(const TrialDistribution&, const Scenario&, Matrix,
                                      std::uint64_t);

  void finish() {
    const auto n = static_cast<std::size_t>(samples_.cols());
    if (n == 0) throw ModelError("sample bank: needs at least one sample");
    if (g_.size() != n || lhat_.size() != n) {
      throw ModelError(detail::concat("sample bank: ", n, " samples but ", g_.size(), " g values and ",
                                      lhat_.size(), " lhat values"));
    }
    int total = 0;
    offsets_.clear();
    for (int d : dims_) {
      if (d < 1) throw ModelError("sample bank: sensor dimension must be positive");
      offsets_.push_back(total);
      total += d;
    }
    if (dims_.empty() || total != samples_.rows()) {
      throw ModelError("sample bank: sensor dimensions do not match the sample dimension");
    }
    w_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (!(g_[i] > 0.0) || !std::isfinite(g_[i])) {
        throw ModelError(detail::concat("sample bank: trial density at sample ", i,
                                        " is not positive and finite (", g_[i], ")"));
      }
      if (!std::isfinite(lhat_[i])) {
        throw ModelError(detail::concat("sample bank: lhat at sample ", i, " is not finite"));
      }
      w_[i] = lhat_[i] / g_[i];
    }
  }

  Matrix samples_;
  std::vector<int> dims_;
  std::vector<int> offsets_;
  std::vector<double> g_;
  std::vector<double> lhat_;
  std::vector<double> w_;
  std::optional<std::vector<double>> log_p0_, log_p1_, log_g_;
  std::uint64_t seed_ = 0;
};

/// Bank over given samples (one per column): evaluates g, both hypothesis
/// densities and lhat at every sample.
inline SampleBank bank_from_samples(const TrialDistribution& trial, const Scenario& s, Matrix samples,
                                    std::uint64_t seed = 0) {
  if (trial.density.dim() != s.dim() || samples.rows() != s.dim()) {
    throw ModelError("sample bank: trial density or sample dimension does not match the scenario");
  }
  const auto n = static_cast<std::size_t>(samples.cols());
  const BayesConstants k = bayes_constants(s);
  SampleBank b;
  b.samples_ = std::move(samples);
  b.dims_ = s.sensor_dims();
  b.seed_ = seed;
  b.g_.resize(n);
  b.lhat_.resize(n);
  std::vector<double> lp0(n), lp1(n), lg(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto y = b.samples_.col(static_cast<Eigen::Index>(i));
    lg[i] = trial.density.log_pdf(y);
    lp0[i] = s.h0().log_pdf(y);
    lp1[i] = s.h1().log_pdf(y);
    b.g_[i] = std::exp(lg[i]);
    b.lhat_[i] = signed_likelihood(k, lp1[i], lp0[i]);
  }
  b.log_p0_ = std::move(lp0);
  b.log_p1_ = std::move(lp1);
  b.log_g_ = std::move(lg);
  b.finish();
  return b;
}

/// Draw N samples from the trial density and freeze them into a bank.
inline SampleBank draw_bank(const TrialDistribution& trial, const Scenario& s, std::size_t n,
                            std::uint64_t seed) {
  if (n < 1) throw ModelError("draw_bank: N must be at least 1");
  return bank_from_samples(trial, s, sample(trial.density, n, seed), seed);
}

}  // namespace ddf
