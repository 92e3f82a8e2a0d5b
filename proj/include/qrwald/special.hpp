#pragma once

namespace qrwald {

double normal_pdf(double x);
double normal_cdf(double x);
double normal_quantile(double p);

// Regularized incomplete gamma Q(a, x) and incomplete beta I_x(a, b).
double regularized_gamma_q(double a, double x);
double regularized_beta(double x, double a, double b);

// Upper-tail probability of a chi-square with dof degrees of freedom.
double chi2_sf(double x, int dof);
// Lower quantile: chi2_sf(chi2_quantile(p, dof), dof) == 1 - p.
double chi2_quantile(double p, int dof);

double student_t_quantile(double p, double dof);
double beta_quantile(double p, double a, double b);

}  // namespace qrwald
