#include "qrwald/special.hpp"

#include <cmath>

#include "qrwald/errors.hpp"

namespace qrwald {

namespace {

constexpr double kSqrt2 = 1.4142135623730951;
constexpr double kSqrt2Pi = 2.5066282746310002;
constexpr int kMaxSeriesIter = 500;
constexpr double kTiny = 1e-300;

// Lower regularized gamma P(a, x) by series, valid for x < a + 1.
double gamma_p_series(double a, double x) {
  double ap = a;
  double sum = 1.0 / a;
  double del = sum;
  for (int i = 0; i < kMaxSeriesIter; ++i) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::fabs(del) < std::fabs(sum) * 1e-16) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Upper regularized gamma Q(a, x) by modified Lentz continued fraction,
// valid for x >= a + 1.
double gamma_q_cf(double a, double x) {
  double b = x + 1.0 - a;
  double c = 1.0 / kTiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= kMaxSeriesIter; ++i) {
    const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = b + an / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < 1e-16) break;
  }
  return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Continued fraction for the incomplete beta (Lentz).
double beta_cf(double a, double b, double x) {
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxSeriesIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < 1e-16) break;
  }
  return h;
}

}  // namespace

double normal_pdf(double x) { return std::exp(-0.5 * x * x) / kSqrt2Pi; }

double normal_cdf(double x) { return 0.5 * std::erfc(-x / kSqrt2); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw DomainError(strf("normal_quantile: p=%g outside (0,1)", p));

  // Acklam's rational approximation, then Halley refinement.
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;

  double x;
  if (p < plow) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - plow) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }

  if (std::fabs(x) < 8.0) {
    for (int k = 0; k < 2; ++k) {
      const double e = normal_cdf(x) - p;
      const double u = e * kSqrt2Pi * std::exp(0.5 * x * x);
      x -= u / (1.0 + 0.5 * x * u);
    }
  }
  return x;
}

double regularized_gamma_q(double a, double x) {
  if (!(a > 0.0)) throw DomainError("regularized_gamma_q: shape must be positive");
  if (x < 0.0) throw DomainError("regularized_gamma_q: x must be nonnegative");
  if (x == 0.0) return 1.0;
  if (x < a + 1.0) return 1.0 - gamma_p_series(a, x);
  return gamma_q_cf(a, x);
}

double regularized_beta(double x, double a, double b) {
  if (!(a > 0.0 && b > 0.0)) throw DomainError("regularized_beta: shapes must be positive");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double lbeta = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b);
  const double front = std::exp(lbeta + a * std::log(x) + b * std::log1p(-x));
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_cf(a, b, x) / a;
  return 1.0 - front * beta_cf(b, a, 1.0 - x) / b;
}

double chi2_sf(double x, int dof) {
  if (dof < 1) throw DomainError("chi2_sf: dof must be >= 1");
  if (x < 0.0) throw DomainError("chi2_sf: x must be nonnegative");
  return regularized_gamma_q(0.5 * dof, 0.5 * x);
}

double chi2_quantile(double p, int dof) {
  if (dof < 1) throw DomainError("chi2_quantile: dof must be >= 1");
  if (!(p > 0.0 && p < 1.0)) throw DomainError("chi2_quantile: p outside (0,1)");

  // Wilson-Hilferty start, then safeguarded Newton on the survival function.
  const double nu = static_cast<double>(dof);
  const double z = normal_quantile(p);
  const double t = 1.0 - 2.0 / (9.0 * nu) + z * std::sqrt(2.0 / (9.0 * nu));
  double x = nu * t * t * t;
  if (!(x > 0.0)) x = 0.5 * nu;

  double lo = 0.0;
  double hi = std::max(4.0 * x, nu + 40.0 * std::sqrt(nu) + 40.0);
  while (chi2_sf(hi, dof) > 1.0 - p) hi *= 2.0;

  const double a = 0.5 * nu;
  const double lognorm = -a * std::log(2.0) - std::lgamma(a);
  for (int it = 0; it < 200; ++it) {
    const double f = (1.0 - chi2_sf(x, dof)) - p;
    if (std::fabs(f) <= 1e-13) break;
    if (f > 0.0)
      hi = x;
    else
      lo = x;
    const double dens = std::exp(lognorm + (a - 1.0) * std::log(x) - 0.5 * x);
    double xn = (dens > 0.0 && std::isfinite(dens)) ? x - f / dens : 0.5 * (lo + hi);
    if (!(xn > lo && xn < hi)) xn = 0.5 * (lo + hi);
    if (xn == x) break;
    x = xn;
  }
  return x;
}

double student_t_quantile(double p, double dof) {
  if (!(dof > 0.0)) throw DomainError("student_t_quantile: dof must be positive");
  if (!(p > 0.0 && p < 1.0)) throw DomainError("student_t_quantile: p outside (0,1)");
  if (p == 0.5) return 0.0;
  const double q = p < 0.5 ? p : 1.0 - p;
  const double x = beta_quantile(2.0 * q, 0.5 * dof, 0.5);
  const double t = std::sqrt(dof * (1.0 - x) / x);
  return p < 0.5 ? -t : t;
}

double beta_quantile(double p, double a, double b) {
  if (!(a > 0.0 && b > 0.0)) throw DomainError("beta_quantile: shapes must be positive");
  if (!(p > 0.0 && p < 1.0)) throw DomainError("beta_quantile: p outside (0,1)");

  const double lbeta = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b);
  double lo = 0.0, hi = 1.0;
  double x = a / (a + b);
  for (int it = 0; it < 200; ++it) {
    const double f = regularized_beta(x, a, b) - p;
    if (std::fabs(f) <= 1e-12) return x;
    if (f > 0.0)
      hi = x;
    else
      lo = x;
    const double dens = std::exp(lbeta + (a - 1.0) * std::log(x) + (b - 1.0) * std::log1p(-x));
    double xn = (dens > 0.0 && std::isfinite(dens)) ? x - f / dens : 0.5 * (lo + hi);
    if (!(xn > lo && xn < hi)) xn = 0.5 * (lo + hi);
    if (xn == x) {
      if (hi - lo < 1e-16) break;
      xn = 0.5 * (lo + hi);
    }
    x = xn;
  }
  if (std::fabs(regularized_beta(x, a, b) - p) <= 1e-10) return x;
  throw ConvergenceFailure(strf("beta_quantile: no convergence for p=%g a=%g b=%g", p, a, b));
}

}  // namespace qrwald
