#include "qrwald/density.hpp"

#include <algorithm>
#include <cmath>

#include "qrwald/errors.hpp"
#include "qrwald/rng.hpp"
#include "qrwald/special.hpp"

namespace qrwald {

std::string method_name(GMethod m) {
  switch (m) {
    case GMethod::EG: return "weg";
    case GMethod::Powell: return "wker";
    case GMethod::HK: return "wnid";
    case GMethod::IIDSparsity: return "wiid";
  }
  return "?";
}

GMethod method_from_name(const std::string& name) {
  if (name == "weg") return GMethod::EG;
  if (name == "wker") return GMethod::Powell;
  if (name == "wnid") return GMethod::HK;
  if (name == "wiid") return GMethod::IIDSparsity;
  throw ConfigError(strf("unknown method '%s' (expected weg, wiid, wnid or wker)", name.c_str()));
}

double kernel_epa(double w) {
  if (std::fabs(w) > 0.5) return 0.0;
  return 1.5 * (1.0 - 4.0 * w * w);
}

std::size_t grid_size_m(std::size_t n, double k) {
  if (n < 20) throw DomainError("grid_size_m: need n >= 20");
  if (!(k > 0.0)) throw DomainError("grid_size_m: need k > 0");
  const double logn = std::log(static_cast<double>(n));
  const double base = k * static_cast<double>(n) / std::pow(logn, 2.2);
  const double m = std::floor(std::pow(base, 1.25));
  return static_cast<std::size_t>(std::max(m, 2.0));
}

double bandwidth_h(std::size_t m, double c) {
  if (m < 2) throw DomainError("bandwidth_h: need m >= 2");
  if (!(c > 0.0)) throw DomainError("bandwidth_h: need c > 0");
  const double md = static_cast<double>(m);
  return c * std::pow(std::log(md) / md, 0.2);
}

namespace {

void validate_interval(const EGConfig& cfg) {
  if (!(cfg.a1 > 0.0 && cfg.a1 < cfg.a2 && cfg.a2 < 1.0))
    throw DomainError(strf("level interval [%g, %g] must satisfy 0 < a1 < a2 < 1", cfg.a1, cfg.a2));
}

// (1/n) sum f_i x_i x_i^T with exact symmetry.
Matrix assemble_G(const Dataset& data, const Vector& f) {
  const std::size_t n = data.n(), d = data.d();
  Matrix G(d, d);
  for (std::size_t i = 0; i < n; ++i) {
    const double fi = f[i];
    if (fi == 0.0) continue;
    const double* xi = data.X.row(i);
    for (std::size_t k = 0; k < d; ++k) {
      const double t = fi * xi[k];
      for (std::size_t l = 0; l <= k; ++l) G(k, l) += t * xi[l];
    }
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t k = 0; k < d; ++k)
    for (std::size_t l = 0; l <= k; ++l) {
      G(k, l) *= inv_n;
      G(l, k) = G(k, l);
    }
  return G;
}

void require_nonsingular(const Matrix& G, GMethod method) {
  if (!all_finite(G)) throw SingularG(strf("%s: G has non-finite entries", method_name(method).c_str()));
  try {
    SpdSolver probe(G);
  } catch (const SingularMatrix& e) {
    throw SingularG(strf("%s: G is numerically singular (%s)", method_name(method).c_str(), e.what()));
  }
}

// Kernel average of coefficient contrasts against a reference beta.
Vector kernel_average(const Dataset& data, const std::vector<const Vector*>& betas,
                      const Vector& beta_ref, double a1, double a2, double h_m) {
  if (!(h_m > 0.0)) throw DomainError("density: bandwidth must be positive");
  const std::size_t n = data.n(), d = data.d();
  const std::size_t m = betas.size();
  Vector acc(n, 0.0);
  Vector dbeta(d);
  for (std::size_t j = 0; j < m; ++j) {
    const Vector& bj = *betas[j];
    for (std::size_t k = 0; k < d; ++k) dbeta[k] = bj[k] - beta_ref[k];
    for (std::size_t i = 0; i < n; ++i) {
      const double* xi = data.X.row(i);
      double arg = 0.0;
      for (std::size_t k = 0; k < d; ++k) arg += xi[k] * dbeta[k];
      acc[i] += kernel_epa(arg / h_m);
    }
  }
  const double scale = (a2 - a1) / (static_cast<double>(m) * h_m);
  for (double& v : acc) v *= scale;
  return acc;
}

double sample_quantile(const Vector& sorted, double p) {
  const std::size_t n = sorted.size();
  if (n == 0) throw DomainError("sample_quantile: empty sample");
  if (p <= 0.0) return sorted.front();
  if (p >= 1.0) return sorted.back();
  const double h = (static_cast<double>(n) - 1.0) * p;
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  const double frac = h - static_cast<double>(lo);
  if (lo + 1 >= n) return sorted.back();
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

double clipped_halfwidth(double alpha, double h) {
  const double lo = 0.005, hi = 0.995;
  const double hmax = std::min(alpha - lo, hi - alpha);
  if (!(hmax > 0.0))
    throw DomainError(strf("quantile %g leaves no room for a two-sided bandwidth", alpha));
  return std::min(h, hmax);
}

}  // namespace

Vector draw_levels(const EGConfig& cfg, std::size_t m) {
  validate_interval(cfg);
  if (m < 2) throw DomainError("draw_levels: need m >= 2");
  Vector levels(m);
  if (cfg.level_mode == LevelMode::Equispaced) {
    const double step = (cfg.a2 - cfg.a1) / static_cast<double>(m);
    for (std::size_t j = 0; j < m; ++j)
      levels[j] = cfg.a1 + (static_cast<double>(j) + 0.5) * step;
  } else {
    Rng rng(cfg.seed);
    for (std::size_t j = 0; j < m; ++j) levels[j] = rng.uniform(cfg.a1, cfg.a2);
  }
  return levels;
}

Vector eg_density(const Dataset& data, const QuantileProcess& process,
                  const QuantileFit& fit_alpha, double a1, double a2, double h_m) {
  if (process.fits.empty()) throw DomainError("eg_density: empty quantile process");
  std::vector<const Vector*> betas;
  betas.reserve(process.fits.size());
  for (const auto& f : process.fits) betas.push_back(&f.beta);
  return kernel_average(data, betas, fit_alpha.beta, a1, a2, h_m);
}

Vector infeasible_density(const Dataset& data,
                          const std::function<Vector(double)>& true_beta, double alpha,
                          const Vector& levels, double a1, double a2, double h_m) {
  if (levels.empty()) throw DomainError("infeasible_density: empty level grid");
  std::vector<Vector> path;
  path.reserve(levels.size());
  for (double u : levels) path.push_back(true_beta(u));
  std::vector<const Vector*> betas;
  betas.reserve(path.size());
  for (const auto& b : path) betas.push_back(&b);
  const Vector beta_ref = true_beta(alpha);
  return kernel_average(data, betas, beta_ref, a1, a2, h_m);
}

HMatrix compute_H(const Dataset& data) {
  Vector ones(data.n(), 1.0);
  return HMatrix{assemble_G(data, ones)};
}

double hall_sheather_bandwidth(std::size_t n, double alpha, double tau) {
  if (n < 20) throw DomainError("hall_sheather_bandwidth: need n >= 20");
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("hall_sheather_bandwidth: alpha outside (0,1)");
  if (!(tau > 0.0 && tau < 1.0)) throw DomainError("hall_sheather_bandwidth: tau outside (0,1)");
  const double z = normal_quantile(1.0 - 0.5 * tau);
  const double q = normal_quantile(alpha);
  const double dens = normal_pdf(q);
  const double bracket = 1.5 * dens * dens / (2.0 * q * q + 1.0);
  return std::pow(static_cast<double>(n), -1.0 / 3.0) * std::pow(z, 2.0 / 3.0) *
         std::cbrt(bracket);
}

GEstimate estimate_G_eg(const Dataset& data, double alpha, const EGConfig& cfg) {
  validate_interval(cfg);
  if (!(alpha > cfg.a1 && alpha < cfg.a2))
    throw DomainError(strf("estimate_G_eg: alpha=%g outside (a1, a2)=(%g, %g)", alpha, cfg.a1, cfg.a2));
  const std::size_t m = cfg.m_override ? std::max<std::size_t>(*cfg.m_override, 2)
                                       : grid_size_m(data.n(), cfg.k);
  const double h = cfg.h_override ? *cfg.h_override : bandwidth_h(m, cfg.c);
  if (!(h > 0.0)) throw DomainError("estimate_G_eg: bandwidth must be positive");
  const Vector levels = draw_levels(cfg, m);
  const QuantileProcess process = fit_process(data, levels);
  const QuantileFit fit = fit_rq(data, alpha);
  return eg_from_process(data, fit, process, cfg, h);
}

GEstimate eg_from_process(const Dataset& data, const QuantileFit& fit_alpha,
                          const QuantileProcess& process, const EGConfig& cfg, double h_m) {
  GEstimate est;
  est.alpha = fit_alpha.alpha;
  est.method = GMethod::EG;
  est.f_hat = eg_density(data, process, fit_alpha, cfg.a1, cfg.a2, h_m);
  est.G = assemble_G(data, est.f_hat);
  est.bandwidth = h_m;
  est.m_used = process.fits.size();
  require_nonsingular(est.G, GMethod::EG);
  return est;
}

GEstimate estimate_G_hk(const Dataset& data, double alpha) {
  const double h = clipped_halfwidth(alpha, hall_sheather_bandwidth(data.n(), alpha));
  const QuantileFit hi = fit_rq(data, alpha + h);
  const QuantileFit lo = fit_rq(data, alpha - h);

  const std::size_t n = data.n(), d = data.d();
  Vector dbeta(d);
  for (std::size_t k = 0; k < d; ++k) dbeta[k] = hi.beta[k] - lo.beta[k];

  GEstimate est;
  est.alpha = alpha;
  est.method = GMethod::HK;
  est.bandwidth = h;
  est.f_hat.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double* xi = data.X.row(i);
    double denom = 0.0;
    for (std::size_t k = 0; k < d; ++k) denom += xi[k] * dbeta[k];
    if (denom > 0.0) {
      est.f_hat[i] = 2.0 * h / denom;
    } else {
      ++est.floored;
    }
  }
  est.G = assemble_G(data, est.f_hat);
  require_nonsingular(est.G, GMethod::HK);
  return est;
}

GEstimate estimate_G_powell(const Dataset& data, const QuantileFit& fit_alpha) {
  const double h = hall_sheather_bandwidth(data.n(), fit_alpha.alpha);
  if (!(0.5 + h < 1.0)) throw DomainError("estimate_G_powell: bandwidth too wide");
  const double delta = normal_quantile(0.5 + h) - normal_quantile(0.5 - h);

  const std::size_t n = data.n();
  GEstimate est;
  est.alpha = fit_alpha.alpha;
  est.method = GMethod::Powell;
  est.bandwidth = delta;
  est.f_hat.assign(n, 0.0);
  std::size_t inside = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (std::fabs(fit_alpha.residuals[i]) <= delta) {
      est.f_hat[i] = 1.0 / (2.0 * delta);
      ++inside;
    }
  }
  if (inside == 0) throw SingularG("wker: no residual inside the kernel window");
  est.G = assemble_G(data, est.f_hat);
  require_nonsingular(est.G, GMethod::Powell);
  return est;
}

GEstimate estimate_G_powell(const Dataset& data, double alpha) {
  return estimate_G_powell(data, fit_rq(data, alpha));
}

GEstimate estimate_G_iid(const Dataset& data, const QuantileFit& fit_alpha) {
  const double alpha = fit_alpha.alpha;
  const double h = clipped_halfwidth(alpha, hall_sheather_bandwidth(data.n(), alpha));

  Vector sorted = fit_alpha.residuals;
  std::sort(sorted.begin(), sorted.end());
  const double sparsity =
      (sample_quantile(sorted, alpha + h) - sample_quantile(sorted, alpha - h)) / (2.0 * h);
  if (!(sparsity > 0.0))
    throw DegenerateSparsity(strf("wiid: sparsity estimate %g is not positive", sparsity));

  GEstimate est;
  est.alpha = alpha;
  est.method = GMethod::IIDSparsity;
  est.bandwidth = h;
  est.f_hat.assign(data.n(), 1.0 / sparsity);
  est.G = assemble_G(data, est.f_hat);
  require_nonsingular(est.G, GMethod::IIDSparsity);
  return est;
}

GEstimate estimate_G_iid(const Dataset& data, double alpha) {
  return estimate_G_iid(data, fit_rq(data, alpha));
}

}  // namespace qrwald
