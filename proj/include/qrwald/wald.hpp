#pragma once

#include <map>
#include <string>
#include <vector>

#include "qrwald/density.hpp"
#include "qrwald/linalg.hpp"
#include "qrwald/qr.hpp"

namespace qrwald {

struct Restriction {
  Matrix R;  // J x d, rank J
  Vector r;  // length J
  std::vector<std::string> labels;

  std::size_t J() const { return R.rows(); }
};

void validate_restriction(const Restriction& restr, std::size_t d);

struct WaldResult {
  double alpha = 0.5;
  double statistic = 0.0;
  std::size_t J = 0;
  double p_value = 1.0;
  std::map<double, bool> reject_at;  // nominal levels 0.01, 0.05, 0.10
  GMethod method = GMethod::EG;
  std::string diagnostics;  // bandwidth / grid size / failure notes
  bool ok = true;
};

// W = (R G^{-1} H_n G^{-1} R^T)^{-1}, formed by SPD solves.
Matrix compute_W(const GEstimate& G, const HMatrix& H, const Restriction& restr);

// Statistic n / (alpha (1-alpha)) (R beta - r)^T W (R beta - r) with its
// chi-square p-value.
WaldResult wald_test(const QuantileFit& fit, const GEstimate& G, const HMatrix& H,
                     const Restriction& restr, std::size_t n);

// One test per requested quantile. Numerical failures at individual levels
// are recorded in the result entry instead of aborting the sweep.
std::vector<WaldResult> pvalue_curve(const Dataset& data, const Restriction& restr,
                                     const Vector& alphas, GMethod method,
                                     const EGConfig& cfg = {});

}  // namespace qrwald
