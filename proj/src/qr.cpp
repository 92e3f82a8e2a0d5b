#include "qrwald/qr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "qrwald/errors.hpp"
#include "qrwald/parallel.hpp"

namespace qrwald {

void validate_dataset(const Dataset& data, bool check_rank) {
  const std::size_t n = data.n();
  const std::size_t d = data.d();
  if (d < 1) throw DomainError("dataset: design has no columns");
  if (n <= d) throw DomainError(strf("dataset: need n > d, got n=%zu d=%zu", n, d));
  if (data.y.size() != n) throw DomainError("dataset: response length does not match design rows");
  if (!data.column_names.empty() && data.column_names.size() != d)
    throw DomainError("dataset: column name count does not match design columns");
  if (!all_finite(data.y) || !all_finite(data.X))
    throw DomainError("dataset: non-finite entries");
  if (check_rank) {
    Matrix xtx(d, d);
    for (std::size_t i = 0; i < n; ++i) {
      const double* xi = data.X.row(i);
      for (std::size_t k = 0; k < d; ++k)
        for (std::size_t l = 0; l <= k; ++l) xtx(k, l) += xi[k] * xi[l];
    }
    for (std::size_t k = 0; k < d; ++k)
      for (std::size_t l = k + 1; l < d; ++l) xtx(k, l) = xtx(l, k);
    if (spd_rank(xtx) < d) throw RankDeficient("dataset: design is not of full column rank");
  }
}

double check_loss(double u, double alpha) {
  return u * (alpha - (u <= 0.0 ? 1.0 : 0.0));
}

double zero_tolerance(const Dataset& data) {
  return 1e-9 * (1.0 + max_abs(data.y));
}

namespace {

double objective_at(const Vector& res, double alpha) {
  double s = 0.0;
  for (double u : res) s += check_loss(u, alpha);
  return s;
}

// X^T diag(w) X, lower triangle mirrored.
void weighted_gram(const Matrix& X, const Vector& w, Matrix& M) {
  const std::size_t n = X.rows(), d = X.cols();
  std::fill(M.data().begin(), M.data().end(), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double* xi = X.row(i);
    const double wi = w[i];
    for (std::size_t k = 0; k < d; ++k) {
      const double t = wi * xi[k];
      double* mrow = M.row(k);
      for (std::size_t l = 0; l <= k; ++l) mrow[l] += t * xi[l];
    }
  }
  for (std::size_t k = 0; k < d; ++k)
    for (std::size_t l = k + 1; l < d; ++l) M(k, l) = M(l, k);
}

void weighted_xtv(const Matrix& X, const Vector& w, const Vector& v, Vector& out) {
  const std::size_t n = X.rows(), d = X.cols();
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double* xi = X.row(i);
    const double t = w[i] * v[i];
    for (std::size_t k = 0; k < d; ++k) out[k] += t * xi[k];
  }
}

// Exact LP optimality certificate at a vertex: the basic dual weights
// obtained from the nonbasic subgradient must lie in [alpha-1, alpha].
bool vertex_optimal(const Matrix& X, const Vector& res, double alpha,
                    const std::vector<std::size_t>& basis, double ztol) {
  const std::size_t d = X.cols();
  Vector g(d, 0.0);
  std::vector<char> in_basis(X.rows(), 0);
  for (std::size_t b : basis) in_basis[b] = 1;
  for (std::size_t i = 0; i < X.rows(); ++i) {
    if (in_basis[i]) continue;
    const double psi = alpha - (res[i] < -ztol ? 1.0 : 0.0);
    const double* xi = X.row(i);
    for (std::size_t k = 0; k < d; ++k) g[k] += xi[k] * psi;
  }
  Matrix Bt(d, d);
  for (std::size_t j = 0; j < d; ++j) {
    const double* xb = X.row(basis[j]);
    for (std::size_t k = 0; k < d; ++k) Bt(k, j) = xb[k];
  }
  Vector t;
  try {
    Vector neg(d);
    for (std::size_t k = 0; k < d; ++k) neg[k] = -g[k];
    t = solve_linear(Bt, neg);
  } catch (const SingularMatrix&) {
    return false;
  }
  const double slack = 1e-7;
  for (double ti : t)
    if (!(ti >= alpha - 1.0 - slack && ti <= alpha + slack)) return false;
  return true;
}

}  // namespace

QuantileFit fit_rq(const Dataset& data, double alpha, const FitOptions& opt) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw DomainError(strf("fit_rq: alpha=%g outside (0,1)", alpha));
  const std::size_t n = data.n(), d = data.d();
  if (d < 1 || n <= d) throw DomainError("fit_rq: need n > d >= 1");
  const Matrix& X = data.X;
  const Vector& y = data.y;

  Vector a(n, 1.0 - alpha), s(n, alpha);
  Vector z(n), w(n), r(n), qinv(n), xi(n), t(n);
  Vector da(n), dz(n), dw(n), da2(n), dz2(n), dw2(n);
  Vector beta(d), dbeta(d), rhs(d);
  Matrix M(d, d);

  const double ysum = std::accumulate(y.begin(), y.end(), 0.0);

  // Least-squares start.
  {
    Vector ones(n, 1.0);
    weighted_gram(X, ones, M);
    weighted_xtv(X, ones, y, rhs);
    try {
      beta = SpdSolver(M).solve(rhs);
    } catch (const SingularMatrix&) {
      throw RankDeficient("fit_rq: design is rank deficient");
    }
  }

  auto residuals = [&]() {
    for (std::size_t i = 0; i < n; ++i) {
      const double* xrow = X.row(i);
      double fit = 0.0;
      for (std::size_t k = 0; k < d; ++k) fit += xrow[k] * beta[k];
      r[i] = y[i] - fit;
    }
  };
  residuals();

  double mean_abs_r = 0.0;
  for (double v : r) mean_abs_r += std::fabs(v);
  mean_abs_r /= static_cast<double>(n);
  const double shift = 1e-4 * (1.0 + mean_abs_r);
  for (std::size_t i = 0; i < n; ++i) {
    z[i] = std::max(-r[i], 0.0) + shift;
    w[i] = std::max(r[i], 0.0) + shift;
  }

  const double theta = 0.9995;
  int it = 0;
  bool converged = false;
  double objective = objective_at(r, alpha);

  for (; it < opt.max_iter; ++it) {
    residuals();
    objective = objective_at(r, alpha);
    const double dual = dot(y, a) - (1.0 - alpha) * ysum;
    if (objective - dual <= opt.gap_tol * (1.0 + std::fabs(objective))) {
      converged = true;
      break;
    }

    for (std::size_t i = 0; i < n; ++i) qinv[i] = 1.0 / (z[i] / a[i] + w[i] / s[i]);

    weighted_gram(X, qinv, M);
    SpdSolver* chol = nullptr;
    SpdSolver chol_storage = [&]() -> SpdSolver {
      try {
        return SpdSolver(M, 1e-14);
      } catch (const SingularMatrix&) {
        double md = 0.0;
        for (std::size_t k = 0; k < d; ++k) md = std::max(md, M(k, k));
        for (std::size_t k = 0; k < d; ++k) M(k, k) += 1e-12 * (1.0 + md);
        try {
          return SpdSolver(M, 1e-16);
        } catch (const SingularMatrix&) {
          throw RankDeficient("fit_rq: weighted normal equations are singular");
        }
      }
    }();
    chol = &chol_storage;

    // Affine (predictor) direction.
    weighted_xtv(X, qinv, r, rhs);
    dbeta = chol->solve(rhs);
    for (std::size_t i = 0; i < n; ++i) {
      const double* xrow = X.row(i);
      double fit = 0.0;
      for (std::size_t k = 0; k < d; ++k) fit += xrow[k] * dbeta[k];
      t[i] = fit;
    }
    for (std::size_t i = 0; i < n; ++i) {
      da[i] = qinv[i] * (r[i] - t[i]);
      dz[i] = -z[i] - (z[i] / a[i]) * da[i];
      dw[i] = -w[i] + (w[i] / s[i]) * da[i];
    }

    auto primal_ratio = [&](const Vector& dir) {
      double rat = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < n; ++i) {
        if (dir[i] < 0.0) rat = std::min(rat, a[i] / -dir[i]);
        else if (dir[i] > 0.0) rat = std::min(rat, s[i] / dir[i]);
      }
      return rat;
    };
    auto dual_ratio = [&](const Vector& dzv, const Vector& dwv) {
      double rat = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < n; ++i) {
        if (dzv[i] < 0.0) rat = std::min(rat, z[i] / -dzv[i]);
        if (dwv[i] < 0.0) rat = std::min(rat, w[i] / -dwv[i]);
      }
      return rat;
    };

    double ap = std::min(1.0, theta * primal_ratio(da));
    double ad = std::min(1.0, theta * dual_ratio(dz, dw));

    const double gap_c = dot(a, z) + dot(s, w);
    if (!(gap_c > 0.0)) break;
    double gap_aff = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      gap_aff += (a[i] + ap * da[i]) * (z[i] + ad * dz[i]);
      gap_aff += (s[i] - ap * da[i]) * (w[i] + ad * dw[i]);
    }
    gap_aff = std::max(gap_aff, 0.0);
    const double ratio = gap_aff / gap_c;
    const double mu = ratio * ratio * ratio * gap_c / (2.0 * static_cast<double>(n));

    // Corrector with second-order terms.
    for (std::size_t i = 0; i < n; ++i) {
      xi[i] = r[i] + mu / a[i] - mu / s[i] - da[i] * dz[i] / a[i] - da[i] * dw[i] / s[i];
    }
    weighted_xtv(X, qinv, xi, rhs);
    dbeta = chol->solve(rhs);
    for (std::size_t i = 0; i < n; ++i) {
      const double* xrow = X.row(i);
      double fit = 0.0;
      for (std::size_t k = 0; k < d; ++k) fit += xrow[k] * dbeta[k];
      t[i] = fit;
    }
    for (std::size_t i = 0; i < n; ++i) {
      da2[i] = qinv[i] * (xi[i] - t[i]);
      dz2[i] = mu / a[i] - z[i] - da[i] * dz[i] / a[i] - (z[i] / a[i]) * da2[i];
      dw2[i] = mu / s[i] - w[i] + da[i] * dw[i] / s[i] + (w[i] / s[i]) * da2[i];
    }

    ap = std::min(1.0, theta * primal_ratio(da2));
    ad = std::min(1.0, theta * dual_ratio(dz2, dw2));
    if (ap < 1e-12 && ad < 1e-12) break;

    for (std::size_t i = 0; i < n; ++i) {
      a[i] += ap * da2[i];
      s[i] -= ap * da2[i];
      z[i] += ad * dz2[i];
      w[i] += ad * dw2[i];
    }
    for (std::size_t k = 0; k < d; ++k) beta[k] += ad * dbeta[k];
  }

  residuals();
  objective = objective_at(r, alpha);

  // Snap to the interpolating vertex spanned by the d smallest residuals
  // when that does not worsen the objective. An optimality certificate at
  // the vertex also settles convergence when the gap test was not met.
  if (opt.polish) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::partial_sort(order.begin(), order.begin() + d, order.end(),
                      [&](std::size_t i, std::size_t j) {
                        return std::fabs(r[i]) < std::fabs(r[j]);
                      });
    std::vector<std::size_t> basis(order.begin(), order.begin() + d);
    std::sort(basis.begin(), basis.end());
    Matrix B(d, d);
    Vector yb(d);
    for (std::size_t j = 0; j < d; ++j) {
      const double* xrow = X.row(basis[j]);
      for (std::size_t k = 0; k < d; ++k) B(j, k) = xrow[k];
      yb[j] = y[basis[j]];
    }
    try {
      Vector beta_v = solve_linear(B, yb);
      Vector rv(n);
      for (std::size_t i = 0; i < n; ++i) {
        const double* xrow = X.row(i);
        double fit = 0.0;
        for (std::size_t k = 0; k < d; ++k) fit += xrow[k] * beta_v[k];
        rv[i] = y[i] - fit;
      }
      const double obj_v = objective_at(rv, alpha);
      if (obj_v <= objective + 1e-9 * (1.0 + objective)) {
        beta = std::move(beta_v);
        r = std::move(rv);
        objective = obj_v;
        if (!converged && vertex_optimal(X, r, alpha, basis, zero_tolerance(data)))
          converged = true;
      }
    } catch (const SingularMatrix&) {
      // degenerate basis; keep the interior-point iterate
    }
  }

  if (!converged)
    throw ConvergenceFailure(
        strf("fit_rq: duality gap above %g after %d iterations (alpha=%g)", opt.gap_tol,
             it, alpha));

  QuantileFit fit;
  fit.alpha = alpha;
  fit.beta = std::move(beta);
  fit.residuals = std::move(r);
  fit.objective = objective;
  fit.iterations = it;
  fit.converged = converged;
  return fit;
}

QuantileProcess fit_process(const Dataset& data, Vector levels, const FitOptions& opt) {
  if (levels.empty()) throw DomainError("fit_process: empty level grid");
  for (double u : levels)
    if (!(u > 0.0 && u < 1.0))
      throw DomainError(strf("fit_process: level %g outside (0,1)", u));

  QuantileProcess out;
  out.levels = std::move(levels);
  for (double& u : out.levels) {
    const double clipped = std::min(0.995, std::max(0.005, u));
    if (clipped != u) {
      u = clipped;
      ++out.clipped;
    }
  }
  std::sort(out.levels.begin(), out.levels.end());

  const std::size_t m = out.levels.size();
  out.fits.resize(m);

  enum Kind { kNone = 0, kConvergence, kRank, kDomain, kOther };
  std::vector<int> kinds(m, kNone);
  std::vector<std::string> messages(m);

  parallel_for(m, [&](std::size_t j) {
    try {
      out.fits[j] = fit_rq(data, out.levels[j], opt);
    } catch (const ConvergenceFailure& e) {
      kinds[j] = kConvergence;
      messages[j] = e.what();
    } catch (const RankDeficient& e) {
      kinds[j] = kRank;
      messages[j] = e.what();
    } catch (const DomainError& e) {
      kinds[j] = kDomain;
      messages[j] = e.what();
    } catch (const Error& e) {
      kinds[j] = kOther;
      messages[j] = e.what();
    }
  });

  for (std::size_t j = 0; j < m; ++j) {
    if (kinds[j] == kNone) continue;
    const std::string msg = strf("level %g: %s", out.levels[j], messages[j].c_str());
    switch (kinds[j]) {
      case kConvergence: throw ConvergenceFailure(msg);
      case kRank: throw RankDeficient(msg);
      case kDomain: throw DomainError(msg);
      default: throw Error(msg);
    }
  }
  return out;
}

}  // namespace qrwald
