#include "qrwald/wald.hpp"

#include <cmath>
#include <limits>

#include "qrwald/errors.hpp"
#include "qrwald/parallel.hpp"
#include "qrwald/special.hpp"

namespace qrwald {

void validate_restriction(const Restriction& restr, std::size_t d) {
  const std::size_t J = restr.R.rows();
  if (J == 0) throw DomainError("restriction: R has no rows");
  if (restr.R.cols() != d)
    throw DomainError(strf("restriction: R has %zu columns, design has %zu", restr.R.cols(), d));
  if (J > d) throw DomainError("restriction: more restrictions than coefficients");
  if (restr.r.size() != J) throw DomainError("restriction: r length does not match R rows");
  Matrix RRt(J, J);
  for (std::size_t i = 0; i < J; ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) s += restr.R(i, k) * restr.R(j, k);
      RRt(i, j) = s;
      RRt(j, i) = s;
    }
  if (spd_rank(RRt) < J) throw RankDeficient("restriction: R is not of full row rank");
}

Matrix compute_W(const GEstimate& G, const HMatrix& H, const Restriction& restr) {
  const std::size_t d = G.G.rows();
  validate_restriction(restr, d);
  const std::size_t J = restr.J();

  Matrix S;
  try {
    S = solve_spd(G.G, transpose(restr.R));  // G^{-1} R^T, d x J
  } catch (const SingularMatrix& e) {
    throw SingularG(strf("compute_W: G solve failed (%s)", e.what()));
  }
  const Matrix HS = matmul(H.H, S);
  Matrix core(J, J);
  for (std::size_t i = 0; i < J; ++i)
    for (std::size_t j = 0; j < J; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) s += S(k, i) * HS(k, j);
      core(i, j) = s;
    }
  // symmetrize before inverting the J x J core
  for (std::size_t i = 0; i < J; ++i)
    for (std::size_t j = 0; j < i; ++j) {
      const double v = 0.5 * (core(i, j) + core(j, i));
      core(i, j) = v;
      core(j, i) = v;
    }

  Matrix W;
  try {
    W = solve_spd(core, Matrix::identity(J));
  } catch (const SingularMatrix& e) {
    throw SingularW(strf("compute_W: R G^{-1} H G^{-1} R^T is singular (%s)", e.what()));
  }
  for (std::size_t i = 0; i < J; ++i)
    for (std::size_t j = 0; j < i; ++j) {
      const double v = 0.5 * (W(i, j) + W(j, i));
      W(i, j) = v;
      W(j, i) = v;
    }
  return W;
}

WaldResult wald_test(const QuantileFit& fit, const GEstimate& G, const HMatrix& H,
                     const Restriction& restr, std::size_t n) {
  if (std::fabs(fit.alpha - G.alpha) > 1e-12)
    throw DomainError(strf("wald_test: fit at alpha=%g but G at alpha=%g", fit.alpha, G.alpha));
  const double alpha = fit.alpha;
  const Matrix W = compute_W(G, H, restr);
  const std::size_t J = restr.J();

  Vector v = matvec(restr.R, fit.beta);
  for (std::size_t j = 0; j < J; ++j) v[j] -= restr.r[j];
  const Vector Wv = matvec(W, v);
  double quad = dot(v, Wv);
  if (quad < 0.0) quad = 0.0;

  WaldResult res;
  res.alpha = alpha;
  res.J = J;
  res.method = G.method;
  res.statistic = static_cast<double>(n) / (alpha * (1.0 - alpha)) * quad;
  res.p_value = chi2_sf(res.statistic, static_cast<int>(J));
  for (double tau : {0.01, 0.05, 0.10}) res.reject_at[tau] = res.p_value < tau;
  if (G.method == GMethod::EG)
    res.diagnostics = strf("m=%zu h=%.6g", G.m_used, G.bandwidth);
  else
    res.diagnostics = strf("h=%.6g", G.bandwidth);
  return res;
}

std::vector<WaldResult> pvalue_curve(const Dataset& data, const Restriction& restr,
                                     const Vector& alphas, GMethod method,
                                     const EGConfig& cfg) {
  if (alphas.empty()) throw EmptyGrid("pvalue_curve: empty quantile grid");
  validate_dataset(data, false);
  validate_restriction(restr, data.d());
  for (double alpha : alphas) {
    if (!(alpha > 0.0 && alpha < 1.0))
      throw DomainError(strf("pvalue_curve: alpha=%g outside (0,1)", alpha));
    if (method == GMethod::EG && !(alpha > cfg.a1 && alpha < cfg.a2))
      throw DomainError(
          strf("pvalue_curve: alpha=%g outside the level interval (%g, %g)", alpha, cfg.a1, cfg.a2));
  }

  const HMatrix H = compute_H(data);
  const std::size_t n = data.n();

  // The process grid does not depend on the tested quantile, so one fitted
  // process serves the whole sweep.
  QuantileProcess shared_process;
  double h_m = 0.0;
  if (method == GMethod::EG) {
    const std::size_t m = cfg.m_override ? std::max<std::size_t>(*cfg.m_override, 2)
                                         : grid_size_m(n, cfg.k);
    h_m = cfg.h_override ? *cfg.h_override : bandwidth_h(m, cfg.c);
    shared_process = fit_process(data, draw_levels(cfg, m));
  }

  std::vector<WaldResult> out(alphas.size());
  parallel_for(alphas.size(), [&](std::size_t idx) {
    const double alpha = alphas[idx];
    try {
      const QuantileFit fit = fit_rq(data, alpha);
      GEstimate G;
      switch (method) {
        case GMethod::EG: G = eg_from_process(data, fit, shared_process, cfg, h_m); break;
        case GMethod::Powell: G = estimate_G_powell(data, fit); break;
        case GMethod::HK: G = estimate_G_hk(data, alpha); break;
        case GMethod::IIDSparsity: G = estimate_G_iid(data, fit); break;
      }
      out[idx] = wald_test(fit, G, H, restr, n);
    } catch (const Error& e) {
      WaldResult bad;
      bad.alpha = alpha;
      bad.J = restr.J();
      bad.method = method;
      bad.statistic = std::numeric_limits<double>::quiet_NaN();
      bad.p_value = std::numeric_limits<double>::quiet_NaN();
      bad.ok = false;
      bad.diagnostics = e.what();
      out[idx] = bad;
    }
  });
  return out;
}

}  // namespace qrwald
