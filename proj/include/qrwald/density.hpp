#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>

#include "qrwald/linalg.hpp"
#include "qrwald/qr.hpp"

namespace qrwald {

enum class GMethod { EG, Powell, HK, IIDSparsity };

std::string method_name(GMethod m);
GMethod method_from_name(const std::string& name);

enum class LevelMode { Equispaced, IidUniform };

// Settings for the quantile-process density estimator: grid interval
// [a1, a2], grid-size constant k, bandwidth constant c, and how the grid
// levels are placed.
struct EGConfig {
  double a1 = 0.01;
  double a2 = 0.99;
  double k = 5.0;
  double c = 1.5;
  std::optional<std::size_t> m_override;
  std::optional<double> h_override;
  LevelMode level_mode = LevelMode::Equispaced;
  std::uint64_t seed = 0;  // used only in iid-uniform mode
};

struct GEstimate {
  double alpha = 0.5;
  GMethod method = GMethod::EG;
  Matrix G;        // d x d, symmetric
  Vector f_hat;    // per-observation density estimates (constant for IIDSparsity)
  double bandwidth = 0.0;
  std::size_t m_used = 0;  // EG only
  int floored = 0;         // HK difference quotients clipped at zero
};

struct HMatrix {
  Matrix H;  // (1/n) sum x_i x_i^T
};

// Epanechnikov kernel rescaled to [-1/2, 1/2]: K(w) = 1.5 (1 - 4 w^2).
double kernel_epa(double w);

// m = floor((k n / (log n)^{11/5})^{5/4}), clamped to at least 2.
std::size_t grid_size_m(std::size_t n, double k);

// h_m = c (log m / m)^{1/5}
double bandwidth_h(std::size_t m, double c);

// Level grid on (a1, a2): equispaced midpoints, or seeded iid uniforms.
Vector draw_levels(const EGConfig& cfg, std::size_t m);

// Per-observation kernel average over the fitted quantile process.
Vector eg_density(const Dataset& data, const QuantileProcess& process,
                  const QuantileFit& fit_alpha, double a1, double a2, double h_m);

// Same sum with the true coefficient path substituted for the fits.
// Simulation-only oracle.
Vector infeasible_density(const Dataset& data,
                          const std::function<Vector(double)>& true_beta, double alpha,
                          const Vector& levels, double a1, double a2, double h_m);

HMatrix compute_H(const Dataset& data);

// Rule-of-thumb bandwidth for sparsity estimation at quantile alpha.
double hall_sheather_bandwidth(std::size_t n, double alpha, double tau = 0.05);

// Quantile-process density estimator assembled into G.
GEstimate estimate_G_eg(const Dataset& data, double alpha, const EGConfig& cfg = {});

// Same, reusing an already fitted process and alpha-fit. The bandwidth h_m
// must match the process the caller supplies.
GEstimate eg_from_process(const Dataset& data, const QuantileFit& fit_alpha,
                          const QuantileProcess& process, const EGConfig& cfg, double h_m);

// Difference-quotient estimator from fits at alpha +/- h.
GEstimate estimate_G_hk(const Dataset& data, double alpha);

// Uniform-kernel residual estimator.
GEstimate estimate_G_powell(const Dataset& data, double alpha);
GEstimate estimate_G_powell(const Dataset& data, const QuantileFit& fit_alpha);

// Scalar sparsity under iid errors: G = H_n / s_hat.
GEstimate estimate_G_iid(const Dataset& data, double alpha);
GEstimate estimate_G_iid(const Dataset& data, const QuantileFit& fit_alpha);

}  // namespace qrwald
