#pragma once

#include <string>
#include <vector>

#include "qrwald/linalg.hpp"

namespace qrwald {

struct Dataset {
  Vector y;
  Matrix X;  // n rows, d columns
  std::vector<std::string> column_names;

  std::size_t n() const { return X.rows(); }
  std::size_t d() const { return X.cols(); }
};

// Shape, finiteness and (optionally) full column rank.
void validate_dataset(const Dataset& data, bool check_rank = true);

// rho_alpha(u) = u * (alpha - 1{u <= 0})
double check_loss(double u, double alpha);

// Tolerance for classifying a residual as zero when reading off signs
// from an interior-point solution.
double zero_tolerance(const Dataset& data);

struct QuantileFit {
  double alpha = 0.5;
  Vector beta;
  Vector residuals;  // y - X beta
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
};

struct FitOptions {
  double gap_tol = 1e-8;  // relative duality-gap stop
  int max_iter = 100;
  bool polish = true;  // snap to the best nearby vertex when it helps
};

// Regression alpha-quantile via a primal-dual interior-point method on the
// check-loss linear program.
QuantileFit fit_rq(const Dataset& data, double alpha, const FitOptions& opt = {});

struct QuantileProcess {
  Vector levels;                  // ascending
  std::vector<QuantileFit> fits;  // aligned with levels
  std::size_t clipped = 0;        // levels moved into [0.005, 0.995]
};

// Fits every requested level. Levels outside [0.005, 0.995] are clipped and
// counted; the returned grid is sorted ascending.
QuantileProcess fit_process(const Dataset& data, Vector levels, const FitOptions& opt = {});

}  // namespace qrwald
