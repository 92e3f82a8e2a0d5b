#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "qrwald/density.hpp"
#include "qrwald/qr.hpp"
#include "qrwald/rng.hpp"
#include "qrwald/wald.hpp"

namespace qrwald {

enum class FDist { Normal, T3 };

struct DGPSpec {
  int model = 1;          // 1..6
  double a = 0.0;         // heterogeneity constant
  double alpha_star = 0.5;  // quantile the null is centered at (models 3 and 6)
  FDist F = FDist::Normal;
  std::size_t n = 100;
};

// Heterogeneity term of the treatment interaction, by model.
double delta_a(int model, double a, double U, double alpha_star, FDist F = FDist::Normal);

// Draws one sample of Y = 1 + sum_j X_j + D + delta_a(U) D X_1 + F^{-1}(U)
// with columns (intercept, x1..x4, d, d_x1), plus the restriction selecting
// the d_x1 coefficient.
std::pair<Dataset, Restriction> generate_sample(const DGPSpec& spec, Rng& rng);

struct SimConfig {
  std::vector<int> models{1};
  std::vector<std::size_t> sample_sizes{100};
  Vector alphas{0.5};
  Vector a_values{0.0};
  std::vector<GMethod> methods{GMethod::EG};
  std::size_t replications = 1000;
  double nominal_tau = 0.05;
  std::uint64_t base_seed = 1;
  EGConfig eg;
  FDist dist = FDist::Normal;
};

struct SimRow {
  int model = 0;
  std::size_t n = 0;
  double alpha = 0.0;
  double a = 0.0;
  GMethod method = GMethod::EG;
  double raw_pct = 0.0;
  double size_corrected_pct = 0.0;
  std::size_t reps = 0;
  double cpu_mean_s = 0.0;
  std::size_t failures = 0;
};

struct SimReport {
  std::vector<SimRow> rows;
  std::uint64_t base_seed = 0;
  std::size_t replications = 0;
};

// (1 - tau) order-statistic critical value of a null statistic sample.
double empirical_critical_value(Vector stats, double tau);

// Runs every (model, n, alpha, a, method) cell of the configuration.
// Replication r of cell (model, n, alpha) always sees the same draws
// whatever a or the method, which makes size correction seed-matched.
SimReport run_experiment(const SimConfig& cfg);

// CSV with header model,n,alpha,a,method,raw_pct,size_corrected_pct,reps,
// cpu_mean_s,failures; rows sorted by (model, n, alpha, method, a).
void emit_report(const SimReport& report, const std::string& path);

}  // namespace qrwald
