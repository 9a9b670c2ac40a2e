#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>

#include "coinfect/error.hpp"

namespace coinfect {

inline constexpr double kInfiniteCapacity = std::numeric_limits<double>::infinity();

/// Relative gap below which two sigma ratios are treated as tied.
inline constexpr double kSigmaTieTolerance = 1e-9;

/// Rates of the two-strain coinfection model. Populations and rates carry
/// abstract units (population, 1/time).
struct ModelParams {
  double b = 0.0;       // birth rate
  double K = 0.0;       // carrying capacity, or kInfiniteCapacity
  double mu0 = 0.0;     // death rate of S
  double mu1 = 0.0;     // death rate of I1
  double mu2 = 0.0;     // death rate of I2
  double mu3 = 0.0;     // death rate of I12
  double alpha1 = 0.0;  // transmission rate of strain 1
  double alpha2 = 0.0;  // transmission rate of strain 2
  double alpha3 = 0.0;  // transmission rate of the coinfection
  double eta1 = 0.0;    // I1 -> I12 acquisition rate
  double eta2 = 0.0;    // I2 -> I12 acquisition rate
  double rho1 = 0.0;    // recovery rates, only used for the R class
  double rho2 = 0.0;
  double rho3 = 0.0;
  double mu4p = 0.0;    // death rate of R

  bool has_infinite_capacity() const { return std::isinf(K) && K > 0; }
};

/// Computes a*b - c*d with a single rounding error (Kahan).
inline double difference_of_products(double a, double b, double c, double d) {
  const double cd = c * d;
  const double err = std::fma(-c, d, cd);
  const double dop = std::fma(a, b, -cd);
  return dop + err;
}

/// Scalars derived from admissible parameters. For infinite K the
/// capacity-dependent coordinates S2, S6, S7 and sigma1prime are infinite.
struct DerivedConstants {
  double sigma1 = 0.0;
  double sigma2 = 0.0;
  double sigma3 = 0.0;
  double Delta = 0.0;  // alpha2*eta1 - alpha1*eta2
  double delta = 0.0;  // mu2*eta1 - mu1*eta2
  double S2 = 0.0;
  double S3 = 0.0;
  double S4 = 0.0;
  double S5 = 0.0;
  double S6 = 0.0;
  double S7 = 0.0;
  std::optional<double> S8;  // delta / Delta, absent when Delta == 0
  double gamma1 = 0.0;
  double gamma2 = 0.0;
  double sigma1prime = 0.0;

  bool has_interior_point() const { return S8.has_value(); }
};

/// True when Delta is zero relative to the size of the products it is built from.
inline bool delta_vanishes(const ModelParams& p, double Delta) {
  const double scale = std::max(std::abs(p.alpha2 * p.eta1), std::abs(p.alpha1 * p.eta2));
  return std::abs(Delta) <= 1e-14 * scale;
}

inline DerivedConstants derive_constants(const ModelParams& p) {
  DerivedConstants d;
  d.sigma1 = p.mu1 / p.alpha1;
  d.sigma2 = p.mu2 / p.alpha2;
  d.sigma3 = p.mu3 / p.alpha3;
  d.Delta = difference_of_products(p.alpha2, p.eta1, p.alpha1, p.eta2);
  d.delta = difference_of_products(p.mu2, p.eta1, p.mu1, p.eta2);
  d.S3 = d.sigma1;
  d.S4 = d.sigma2;
  d.S5 = d.sigma3;
  const double growth = p.b - p.mu0;
  d.gamma1 = p.eta1 * growth - p.alpha1 * p.alpha3 * (d.sigma3 - d.sigma1);
  d.gamma2 = p.alpha2 * p.alpha3 * (d.sigma3 - d.sigma2) - p.eta2 * growth;
  if (!delta_vanishes(p, d.Delta)) d.S8 = d.delta / d.Delta;

  if (p.has_infinite_capacity()) {
    const double inf = std::numeric_limits<double>::infinity();
    d.S2 = inf;
    d.S6 = d.gamma1 > 0 ? inf : (d.gamma1 < 0 ? -inf : 0.0);
    d.S7 = d.gamma2 < 0 ? inf : (d.gamma2 > 0 ? -inf : 0.0);
    d.sigma1prime = inf;
    return d;
  }
  d.S2 = p.K * growth / p.b;
  // (S2 - S6) b/(K alpha1) = (S5 - S3) alpha3/eta1, likewise for S7.
  d.S6 = d.S2 - (d.sigma3 - d.sigma1) * p.alpha1 * p.alpha3 * p.K / (p.b * p.eta1);
  d.S7 = d.S2 - (d.sigma3 - d.sigma2) * p.alpha2 * p.alpha3 * p.K / (p.b * p.eta2);
  d.sigma1prime = d.sigma1 + (d.sigma3 - d.sigma1) * p.K * p.alpha1 * p.alpha3 / (p.b * p.eta1);
  return d;
}

/// Parameters that passed validation, bundled with their derived constants.
class AdmissibleParams {
 public:
  const ModelParams& raw() const { return params_; }
  const DerivedConstants& derived() const { return derived_; }
  bool has_infinite_capacity() const { return params_.has_infinite_capacity(); }

  /// Same rates with a different carrying capacity, revalidated.
  AdmissibleParams with_capacity(double K) const;

 private:
  friend AdmissibleParams validate_params(const ModelParams& raw);
  AdmissibleParams(const ModelParams& p, const DerivedConstants& d) : params_(p), derived_(d) {}

  ModelParams params_;
  DerivedConstants derived_;
};

namespace detail {

inline void require_positive(double value, const char* name) {
  if (!(value > 0.0) || std::isnan(value) || (std::isinf(value))) {
    std::ostringstream os;
    os << name << " must be a positive finite rate, got " << value;
    throw Error(ErrorCode::NonPositiveRate, os.str());
  }
}

inline void require_nonnegative(double value, const char* name) {
  if (!(value >= 0.0) || std::isinf(value)) {
    std::ostringstream os;
    os << name << " must be nonnegative and finite, got " << value;
    throw Error(ErrorCode::NonPositiveRate, os.str());
  }
}

inline void require_sigma_order(double lo, double hi, const char* lo_name, const char* hi_name) {
  std::ostringstream os;
  os << "admissibility requires " << lo_name << " < " << hi_name << ", got " << lo << " and " << hi;
  if (!(lo < hi)) throw Error(ErrorCode::SigmaOrderViolated, os.str());
  if (hi - lo <= kSigmaTieTolerance * std::max(std::abs(lo), std::abs(hi)))
    throw Error(ErrorCode::SigmaTie, os.str() + " (tied within relative 1e-9)");
}

}  // namespace detail

/// Checks positivity, b > mu0 and sigma1 < sigma2 < sigma3; K may be infinite.
inline AdmissibleParams validate_params(const ModelParams& raw) {
  detail::require_positive(raw.b, "b");
  if (!raw.has_infinite_capacity()) detail::require_positive(raw.K, "K");
  detail::require_positive(raw.mu0, "mu0");
  detail::require_positive(raw.mu1, "mu1");
  detail::require_positive(raw.mu2, "mu2");
  detail::require_positive(raw.mu3, "mu3");
  detail::require_positive(raw.alpha1, "alpha1");
  detail::require_positive(raw.alpha2, "alpha2");
  detail::require_positive(raw.alpha3, "alpha3");
  detail::require_positive(raw.eta1, "eta1");
  detail::require_positive(raw.eta2, "eta2");
  detail::require_nonnegative(raw.rho1, "rho1");
  detail::require_nonnegative(raw.rho2, "rho2");
  detail::require_nonnegative(raw.rho3, "rho3");
  detail::require_nonnegative(raw.mu4p, "mu4p");

  if (!(raw.b > raw.mu0)) {
    std::ostringstream os;
    os << "birth rate must exceed the susceptible death rate (b - mu0 > 0), got b=" << raw.b
       << " mu0=" << raw.mu0;
    throw Error(ErrorCode::BirthBelowDeath, os.str());
  }

  DerivedConstants d = derive_constants(raw);
  detail::require_sigma_order(d.sigma1, d.sigma2, "sigma1", "sigma2");
  detail::require_sigma_order(d.sigma2, d.sigma3, "sigma2", "sigma3");
  return AdmissibleParams(raw, d);
}

inline AdmissibleParams AdmissibleParams::with_capacity(double K) const {
  ModelParams p = params_;
  p.K = K;
  return validate_params(p);
}

}  // namespace coinfect
