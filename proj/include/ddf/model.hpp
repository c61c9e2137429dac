#pragma once

// Detection scenarios: priors, Bayesian costs and the hypothesis-conditional
// observation densities (Gaussian or Gaussian mixture).

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace ddf {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Raised for any input that violates a model invariant.
class ModelError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

namespace detail {

inline constexpr double kLog2Pi = 1.8378770664093454836;  // ln(2*pi)

template <class... Args>
std::string concat(const Args&... args) {
  std::ostringstream os;
  os.precision(17);
  (os << ... << args);
  return os.str();
}

/// ln(sum_k exp(x_k)); -inf for an empty or all -inf input.
inline double log_sum_exp(const std::vector<double>& xs) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : xs) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

}  // namespace detail

/// Multivariate normal N(mean, covariance). The covariance is factorized once
/// at construction; a diagonal covariance takes a cheaper evaluation path.
class Gaussian {
 public:
  Gaussian(Vector mean, Matrix covariance)
      : mean_(std::move(mean)), cov_(std::move(covariance)) {
    const auto d = mean_.size();
    if (d == 0) throw ModelError("gaussian: dimension must be positive");
    if (cov_.rows() != d || cov_.cols() != d) {
      throw ModelError(detail::concat("gaussian: covariance is ", cov_.rows(), "x", cov_.cols(),
                                      " but mean has dimension ", d));
    }
    const double scale = std::max(1.0, cov_.cwiseAbs().maxCoeff());
    for (Eigen::Index r = 0; r < d; ++r) {
      for (Eigen::Index c = r + 1; c < d; ++c) {
        if (std::abs(cov_(r, c) - cov_(c, r)) > 1e-12 * scale) {
          throw ModelError(detail::concat("covariance not symmetric at entry (", r + 1, ",", c + 1,
                                          "): ", cov_(r, c), " vs (", c + 1, ",", r + 1,
                                          "): ", cov_(c, r)));
        }
      }
    }
    diagonal_ = cov_.isDiagonal(0.0);
    if (diagonal_) {
      inv_sd_.resize(d);
      double log_det = 0.0;
      for (Eigen::Index k = 0; k < d; ++k) {
        const double v = cov_(k, k);
        if (!(v > 0.0) || !std::isfinite(v)) {
          throw ModelError(detail::concat("covariance not positive definite: diagonal entry (",
                                          k + 1, ",", k + 1, ") = ", v));
        }
        inv_sd_[k] = 1.0 / std::sqrt(v);
        log_det += std::log(v);
      }
      chol_ = cov_.diagonal().cwiseSqrt().asDiagonal();
      log_norm_ = -0.5 * (static_cast<double>(d) * detail::kLog2Pi + log_det);
    } else {
      Eigen::LLT<Matrix> llt(cov_);
      if (llt.info() != Eigen::Success) {
        throw ModelError("covariance not positive definite (Cholesky factorization failed)");
      }
      chol_ = llt.matrixL();
      const double log_det = 2.0 * chol_.diagonal().array().log().sum();
      if (!std::isfinite(log_det)) throw ModelError("covariance not positive definite");
      log_norm_ = -0.5 * (static_cast<double>(d) * detail::kLog2Pi + log_det);
      build_sparse_factor();
    }
  }

  int dim() const { return static_cast<int>(mean_.size()); }
  const Vector& mean() const { return mean_; }
  const Matrix& covariance() const { return cov_; }
  bool is_diagonal() const { return diagonal_; }

  double log_pdf(const Eigen::Ref<const Vector>& y) const {
    if (y.size() != mean_.size()) {
      throw ModelError(detail::concat("log_pdf: point has dimension ", y.size(), ", density has ",
                                      mean_.size()));
    }
    double q = 0.0;
    if (diagonal_) {
      q = ((y - mean_).array() * inv_sd_.array()).square().sum();
    } else if (!row_start_.empty()) {
      // Forward substitution over the stored nonzeros of the factor.
      const auto d = static_cast<std::size_t>(mean_.size());
      thread_local std::vector<double> scratch;
      scratch.resize(d);
      for (std::size_t r = 0; r < d; ++r) {
        double v = y[static_cast<Eigen::Index>(r)] - mean_[static_cast<Eigen::Index>(r)];
        for (std::size_t k = row_start_[r]; k < row_start_[r + 1]; ++k) {
          v -= entries_[k].second * scratch[entries_[k].first];
        }
        v /= chol_(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(r));
        scratch[r] = v;
        q += v * v;
      }
    } else {
      const Vector z = chol_.triangularView<Eigen::Lower>().solve(y - mean_);
      q = z.squaredNorm();
    }
    return log_norm_ - 0.5 * q;
  }

  template <class Rng>
  Vector draw(Rng& rng) const {
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector z(mean_.size());
    for (Eigen::Index k = 0; k < z.size(); ++k) z[k] = normal(rng);
    if (diagonal_) return mean_ + chol_.diagonal().cwiseProduct(z);
    if (!row_start_.empty()) {
      Vector y = mean_;
      for (Eigen::Index r = 0; r < y.size(); ++r) {
        double v = chol_(r, r) * z[r];
        const auto ur = static_cast<std::size_t>(r);
        for (std::size_t k = row_start_[ur]; k < row_start_[ur + 1]; ++k) {
          v += entries_[k].second * z[static_cast<Eigen::Index>(entries_[k].first)];
        }
        y[r] += v;
      }
      return y;
    }
    return mean_ + chol_.triangularView<Eigen::Lower>() * z;
  }

 private:
  // Row-wise strictly-lower nonzeros of the factor, kept when the factor is
  // mostly zero (block-structured covariances).
  void build_sparse_factor() {
    const auto d = static_cast<std::size_t>(chol_.rows());
    std::size_t nnz = 0;
    for (Eigen::Index r = 0; r < chol_.rows(); ++r) {
      for (Eigen::Index c = 0; c < r; ++c) nnz += chol_(r, c) != 0.0 ? 1 : 0;
    }
    if (d < 8 || nnz * 8 > d * (d - 1) / 2) return;
    row_start_.assign(d + 1, 0);
    entries_.reserve(nnz);
    for (std::size_t r = 0; r < d; ++r) {
      row_start_[r] = entries_.size();
      for (std::size_t c = 0; c < r; ++c) {
        const double v = chol_(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
        if (v != 0.0) entries_.emplace_back(c, v);
      }
    }
    row_start_[d] = entries_.size();
  }

  Vector mean_;
  Matrix cov_;
  Matrix chol_;
  Vector inv_sd_;
  std::vector<std::size_t> row_start_;
  std::vector<std::pair<std::size_t, double>> entries_;
  double log_norm_ = 0.0;
  bool diagonal_ = false;
};

/// Finite Gaussian mixture. Weights are nonnegative and sum to one.
class Mixture {
 public:
  Mixture(std::vector<double> weights, std::vector<Gaussian> components)
      : weights_(std::move(weights)), components_(std::move(components)) {
    if (components_.empty()) throw ModelError("mixture: needs at least one component");
    if (weights_.size() != components_.size()) {
      throw ModelError(detail::concat("mixture: ", weights_.size(), " weights for ",
                                      components_.size(), " components"));
    }
    double total = 0.0;
    for (std::size_t k = 0; k < weights_.size(); ++k) {
      if (!(weights_[k] >= 0.0) || !std::isfinite(weights_[k])) {
        throw ModelError(detail::concat("mixture: weight ", k + 1, " is negative or not finite"));
      }
      total += weights_[k];
      if (components_[k].dim() != components_.front().dim()) {
        throw ModelError("mixture: components have different dimensions");
      }
    }
    if (std::abs(total - 1.0) > 1e-12) {
      throw ModelError(detail::concat("mixture: weights sum to ", total, ", expected 1"));
    }
    log_weights_.reserve(weights_.size());
    for (double w : weights_) {
      log_weights_.push_back(w > 0.0 ? std::log(w) : -std::numeric_limits<double>::infinity());
    }
  }

  int dim() const { return components_.front().dim(); }
  const std::vector<double>& weights() const { return weights_; }
  const std::vector<Gaussian>& components() const { return components_; }

  double log_pdf(const Eigen::Ref<const Vector>& y) const {
    std::vector<double> terms;
    terms.reserve(components_.size());
    for (std::size_t k = 0; k < components_.size(); ++k) {
      if (weights_[k] == 0.0) continue;
      terms.push_back(log_weights_[k] + components_[k].log_pdf(y));
    }
    return detail::log_sum_exp(terms);
  }

  template <class Rng>
  Vector draw(Rng& rng) const {
    std::discrete_distribution<std::size_t> pick(weights_.begin(), weights_.end());
    return components_[pick(rng)].draw(rng);
  }

 private:
  std::vector<double> weights_;
  std::vector<double> log_weights_;
  std::vector<Gaussian> components_;
};

/// A hypothesis-conditional observation density.
class Density {
 public:
  Density(Gaussian g) : impl_(std::move(g)) {}  // NOLINT: implicit by design of the variant
  Density(Mixture m) : impl_(std::move(m)) {}   // NOLINT

  bool is_mixture() const { return std::holds_alternative<Mixture>(impl_); }
  const Gaussian& gaussian() const { return std::get<Gaussian>(impl_); }
  const Mixture& mixture() const { return std::get<Mixture>(impl_); }

  int dim() const {
    return std::visit([](const auto& d) { return d.dim(); }, impl_);
  }

  double log_pdf(const Eigen::Ref<const Vector>& y) const {
    return std::visit([&](const auto& d) { return d.log_pdf(y); }, impl_);
  }

  template <class Rng>
  Vector draw(Rng& rng) const {
    return std::visit([&](const auto& d) { return d.draw(rng); }, impl_);
  }

  /// Flattened (weight, component) view; a Gaussian is a one-component mixture.
  std::vector<std::pair<double, const Gaussian*>> components() const {
    std::vector<std::pair<double, const Gaussian*>> out;
    if (const auto* g = std::get_if<Gaussian>(&impl_)) {
      out.emplace_back(1.0, g);
    } else {
      const auto& m = std::get<Mixture>(impl_);
      for (std::size_t k = 0; k < m.components().size(); ++k) {
        out.emplace_back(m.weights()[k], &m.components()[k]);
      }
    }
    return out;
  }

  /// First two moments of the density.
  std::pair<Vector, Matrix> moments() const {
    const auto parts = components();
    const auto d = dim();
    Vector mean = Vector::Zero(d);
    Matrix second = Matrix::Zero(d, d);
    for (const auto& [w, g] : parts) {
      mean += w * g->mean();
      second += w * (g->covariance() + g->mean() * g->mean().transpose());
    }
    Matrix cov = second - mean * mean.transpose();
    cov = 0.5 * (cov + cov.transpose()).eval();
    return {mean, cov};
  }

 private:
  std::variant<Gaussian, Mixture> impl_;
};

/// The constants of the reduced cost C = c + integral of I_{Omega0} * (a p1 - b p0).
struct BayesConstants {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
};

struct Costs {
  double c00 = 0.0;
  double c01 = 1.0;
  double c10 = 1.0;
  double c11 = 0.0;
};

/// Priors, costs and the two conditional densities of a detection problem.
class Scenario {
 public:
  Scenario(std::vector<int> sensor_dims, double prior_p0, double prior_p1, Costs costs,
           Density h0, Density h1)
      : dims_(std::move(sensor_dims)),
        p0_(prior_p0),
        p1_(prior_p1),
        costs_(costs),
        h0_(std::move(h0)),
        h1_(std::move(h1)) {
    if (dims_.empty()) throw ModelError("scenario: number of sensors must be positive");
    for (std::size_t j = 0; j < dims_.size(); ++j) {
      if (dims_[j] < 1) {
        throw ModelError(detail::concat("scenario: sensor ", j + 1, " has non-positive dimension"));
      }
    }
    if (!(p0_ >= 0.0 && p0_ <= 1.0 && p1_ >= 0.0 && p1_ <= 1.0)) {
      throw ModelError("priors must lie in [0,1]");
    }
    if (std::abs(p0_ + p1_ - 1.0) > 1e-12) throw ModelError("priors must sum to 1");
    for (double c : {costs_.c00, costs_.c01, costs_.c10, costs_.c11}) {
      if (!(c >= 0.0) || !std::isfinite(c)) throw ModelError("costs must be nonnegative and finite");
    }
    if (!(costs_.c01 > costs_.c11)) throw ModelError("costs must satisfy C01 > C11");
    if (!(costs_.c10 > costs_.c00)) throw ModelError("costs must satisfy C10 > C00");
    const int total = std::accumulate(dims_.begin(), dims_.end(), 0);
    if (h0_.dim() != total || h1_.dim() != total) {
      throw ModelError(detail::concat("density dimensions (", h0_.dim(), ", ", h1_.dim(),
                                      ") must equal the total sensor dimension ", total));
    }
    offsets_.resize(dims_.size());
    std::exclusive_scan(dims_.begin(), dims_.end(), offsets_.begin(), 0);
  }

  /// All-scalar sensors.
  Scenario(int num_sensors, double prior_p0, double prior_p1, Costs costs, Density h0, Density h1)
      : Scenario(std::vector<int>(static_cast<std::size_t>(std::max(num_sensors, 0)), 1), prior_p0,
                 prior_p1, costs, std::move(h0), std::move(h1)) {}

  int num_sensors() const { return static_cast<int>(dims_.size()); }
  int dim() const { return h0_.dim(); }
  const std::vector<int>& sensor_dims() const { return dims_; }
  int sensor_offset(int j) const { return offsets_[static_cast<std::size_t>(j)]; }
  double prior_p0() const { return p0_; }
  double prior_p1() const { return p1_; }
  const Costs& costs() const { return costs_; }
  const Density& h0() const { return h0_; }
  const Density& h1() const { return h1_; }

  /// Same densities, different priors and costs.
  Scenario with_costs(double prior_p0, double prior_p1, Costs costs) const {
    return Scenario(dims_, prior_p0, prior_p1, costs, h0_, h1_);
  }

 private:
  std::vector<int> dims_;
  std::vector<int> offsets_;
  double p0_;
  double p1_;
  Costs costs_;
  Density h0_;
  Density h1_;
};

inline BayesConstants bayes_constants(const Scenario& s) {
  const auto& k = s.costs();
  if (!(k.c01 > k.c11)) throw ModelError("costs must satisfy C01 > C11");
  if (!(k.c10 > k.c00)) throw ModelError("costs must satisfy C10 > C00");
  return {s.prior_p1() * (k.c01 - k.c11), s.prior_p0() * (k.c10 - k.c00),
          k.c10 * s.prior_p0() + k.c11 * s.prior_p1()};
}

inline double log_density(const Density& d, const Eigen::Ref<const Vector>& y) {
  return d.log_pdf(y);
}

/// a*exp(log_p1) - b*exp(log_p0), evaluated around the larger exponent.
inline double signed_likelihood(const BayesConstants& k, double log_p1, double log_p0) {
  const double l1 = std::log(k.a) + log_p1;
  const double l0 = std::log(k.b) + log_p0;
  const double m = std::max(l1, l0);
  if (m == -std::numeric_limits<double>::infinity()) return 0.0;
  return std::exp(m) * (std::exp(l1 - m) - std::exp(l0 - m));
}

inline double lhat(const Scenario& s, const Eigen::Ref<const Vector>& y) {
  return signed_likelihood(bayes_constants(s), s.h1().log_pdf(y), s.h0().log_pdf(y));
}

/// i.i.d. draws stored as the columns of a dim x count matrix.
inline Matrix sample(const Density& d, std::size_t count, std::uint64_t seed) {
  if (count < 1) throw ModelError("sample: count must be at least 1");
  std::mt19937_64 rng(seed);
  Matrix out(d.dim(), static_cast<Eigen::Index>(count));
  for (std::size_t i = 0; i < count; ++i) out.col(static_cast<Eigen::Index>(i)) = d.draw(rng);
  return out;
}

// Structured covariance helpers.

inline Matrix diagonal_covariance(int d, double variance) {
  return Matrix::Identity(d, d) * variance;
}

inline Matrix equicorrelated_covariance(int d, double variance, double covariance) {
  Matrix m = Matrix::Constant(d, d, covariance);
  m.diagonal().setConstant(variance);
  return m;
}

/// y_i = s + v_i under H1 and y_i = v_i under H0, with a common signal s shared
/// by all sensors and independent noise.
inline Scenario shared_signal_scenario(int num_sensors, double signal_mean, double signal_var,
                                       double noise_var, double prior_p0 = 0.5,
                                       double prior_p1 = 0.5, Costs costs = {}) {
  Gaussian h0(Vector::Zero(num_sensors), diagonal_covariance(num_sensors, noise_var));
  Gaussian h1(Vector::Constant(num_sensors, signal_mean),
              equicorrelated_covariance(num_sensors, signal_var + noise_var, signal_var));
  return Scenario(num_sensors, prior_p0, prior_p1, costs, std::move(h0), std::move(h1));
}

/// Surveillance model: sensors grouped into paths of `per_path` sensors; under
/// H1 the signal crosses one path chosen uniformly and only that path's sensors
/// see it.
inline Mixture path_signal_mixture(int paths, int per_path, double signal_mean, double signal_var,
                                   double noise_var) {
  if (paths < 1 || per_path < 1) throw ModelError("path mixture: paths and sensors per path must be positive");
  const int d = paths * per_path;
  std::vector<Gaussian> comps;
  comps.reserve(static_cast<std::size_t>(paths));
  for (int p = 0; p < paths; ++p) {
    Vector mean = Vector::Zero(d);
    Matrix cov = diagonal_covariance(d, noise_var);
    mean.segment(p * per_path, per_path).setConstant(signal_mean);
    cov.block(p * per_path, p * per_path, per_path, per_path) =
        equicorrelated_covariance(per_path, signal_var + noise_var, signal_var);
    comps.emplace_back(std::move(mean), std::move(cov));
  }
  return Mixture(std::vector<double>(static_cast<std::size_t>(paths), 1.0 / paths),
                 std::move(comps));
}

/// Ten sensors observing a common N(1, 0.4) signal in independent N(0, 0.6) noise.
inline Scenario example_ten_sensors() { return shared_signal_scenario(10, 1.0, 0.4, 0.6); }

/// One hundred sensors on fifty two-sensor paths.
inline Scenario example_hundred_sensors() {
  Gaussian h0(Vector::Zero(100), diagonal_covariance(100, 0.6));
  return Scenario(100, 0.5, 0.5, Costs{}, std::move(h0), path_signal_mixture(50, 2, 1.0, 0.4, 0.6));
}

}  // namespace ddf
