#include "qrwald/mc.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>

#include "qrwald/errors.hpp"
#include "qrwald/parallel.hpp"
#include "qrwald/special.hpp"

namespace qrwald {

namespace {

constexpr double kTwoPi = 6.283185307179586;

double f_inverse(FDist F, double u) {
  return F == FDist::Normal ? normal_quantile(u) : student_t_quantile(u, 3.0);
}

std::uint64_t alpha_key(double alpha) {
  return static_cast<std::uint64_t>(std::llround(alpha * 1e9));
}

double elapsed_s(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

double delta_a(int model, double a, double U, double alpha_star, FDist F) {
  if (!(U > 0.0 && U < 1.0)) throw DomainError(strf("delta_a: U=%g outside (0,1)", U));
  switch (model) {
    case 1:
      return a;
    case 2:
      return a * (1.0 + f_inverse(F, U));
    case 3: {
      if (!(alpha_star > 0.0 && alpha_star < 1.0))
        throw DomainError("delta_a: model 3 needs alpha_star in (0,1)");
      return (1.0 - 5.0 * a) * beta_quantile(U, 1.0, 4.0) - beta_quantile(alpha_star, 1.0, 4.0);
    }
    case 4:
      return a == 0.0 ? 0.0 : 2.0 * a * beta_quantile(U, 0.5, 0.5);
    case 5:
      return a == 0.0 ? 0.0 : 2.0 * a * beta_quantile(U, 2.0, 2.0);
    case 6: {
      if (!(alpha_star > 0.0 && alpha_star < 1.0))
        throw DomainError("delta_a: model 6 needs alpha_star in (0,1)");
      return (std::sin(kTwoPi * U) - std::sin(kTwoPi * alpha_star) - kTwoPi * a) / kTwoPi;
    }
    default:
      throw DomainError(strf("delta_a: model %d outside 1..6", model));
  }
}

std::pair<Dataset, Restriction> generate_sample(const DGPSpec& spec, Rng& rng) {
  if (spec.model < 1 || spec.model > 6)
    throw DomainError(strf("generate_sample: model %d outside 1..6", spec.model));
  if (spec.n < 20) throw DomainError("generate_sample: need n >= 20");

  const std::size_t n = spec.n;
  const std::size_t d = 7;
  Dataset data;
  data.X = Matrix(n, d);
  data.y.resize(n);
  data.column_names = {"intercept", "x1", "x2", "x3", "x4", "d", "d_x1"};

  for (std::size_t i = 0; i < n; ++i) {
    const double x1 = normal_quantile(rng.uniform01());
    const double x2 = normal_quantile(rng.uniform01());
    const double x3 = normal_quantile(rng.uniform01());
    const double x4 = normal_quantile(rng.uniform01());
    const double treat = rng.uniform01() < 0.5 ? 1.0 : 0.0;
    const double u = rng.uniform01();

    const double delta = delta_a(spec.model, spec.a, u, spec.alpha_star, spec.F);
    data.y[i] = 1.0 + x1 + x2 + x3 + x4 + treat + delta * treat * x1 + f_inverse(spec.F, u);

    double* row = data.X.row(i);
    row[0] = 1.0;
    row[1] = x1;
    row[2] = x2;
    row[3] = x3;
    row[4] = x4;
    row[5] = treat;
    row[6] = treat * x1;
  }

  Restriction restr;
  restr.R = Matrix(1, d);
  restr.R(0, 6) = 1.0;
  restr.r = Vector{0.0};
  restr.labels = {"d_x1"};
  return {std::move(data), std::move(restr)};
}

double empirical_critical_value(Vector stats, double tau) {
  if (stats.empty()) throw DomainError("empirical_critical_value: empty sample");
  if (!(tau > 0.0 && tau <= 1.0)) throw DomainError("empirical_critical_value: tau outside (0,1]");
  std::sort(stats.begin(), stats.end());
  const auto n = static_cast<double>(stats.size());
  const auto idx = static_cast<long long>(std::ceil((1.0 - tau) * n));
  if (idx < 1) return -std::numeric_limits<double>::infinity();
  if (idx >= static_cast<long long>(stats.size())) return stats.back();
  return stats[static_cast<std::size_t>(idx - 1)];
}

namespace {

void validate_config(const SimConfig& cfg) {
  if (cfg.models.empty()) throw ConfigError("simulation config: no models");
  for (int m : cfg.models)
    if (m < 1 || m > 6) throw ConfigError(strf("simulation config: model %d outside 1..6", m));
  if (cfg.sample_sizes.empty()) throw ConfigError("simulation config: no sample sizes");
  for (std::size_t n : cfg.sample_sizes)
    if (n < 20) throw ConfigError("simulation config: sample sizes must be >= 20");
  if (cfg.alphas.empty()) throw ConfigError("simulation config: no quantile levels");
  const bool has_eg =
      std::find(cfg.methods.begin(), cfg.methods.end(), GMethod::EG) != cfg.methods.end();
  for (double alpha : cfg.alphas) {
    if (!(alpha > 0.0 && alpha < 1.0))
      throw ConfigError(strf("simulation config: alpha=%g outside (0,1)", alpha));
    if (has_eg && !(alpha > cfg.eg.a1 && alpha < cfg.eg.a2))
      throw ConfigError(strf("simulation config: alpha=%g outside the level interval (%g, %g)",
                             alpha, cfg.eg.a1, cfg.eg.a2));
  }
  if (cfg.methods.empty()) throw ConfigError("simulation config: no methods");
  if (cfg.a_values.empty() ||
      std::find(cfg.a_values.begin(), cfg.a_values.end(), 0.0) == cfg.a_values.end())
    throw ConfigError("simulation config: a values must include 0 for size correction");
  if (cfg.replications < 100) throw ConfigError("simulation config: need at least 100 replications");
  if (!(cfg.nominal_tau > 0.0 && cfg.nominal_tau <= 1.0))
    throw ConfigError("simulation config: nominal tau outside (0,1]");
}

struct CellOutcome {
  Vector stat;
  Vector pval;
  std::vector<char> ok;
  Vector secs;
};

}  // namespace

SimReport run_experiment(const SimConfig& cfg) {
  validate_config(cfg);

  std::vector<int> models = cfg.models;
  std::sort(models.begin(), models.end());
  models.erase(std::unique(models.begin(), models.end()), models.end());
  std::vector<std::size_t> sizes = cfg.sample_sizes;
  std::sort(sizes.begin(), sizes.end());
  sizes.erase(std::unique(sizes.begin(), sizes.end()), sizes.end());
  Vector alphas = cfg.alphas;
  std::sort(alphas.begin(), alphas.end());
  alphas.erase(std::unique(alphas.begin(), alphas.end()), alphas.end());

  // a = 0 runs first so its statistics are available for size correction.
  Vector a_order = cfg.a_values;
  std::sort(a_order.begin(), a_order.end());
  a_order.erase(std::unique(a_order.begin(), a_order.end()), a_order.end());
  a_order.erase(std::remove(a_order.begin(), a_order.end(), 0.0), a_order.end());
  a_order.insert(a_order.begin(), 0.0);

  const std::size_t reps = cfg.replications;
  const double tau = cfg.nominal_tau;
  SimReport report;
  report.base_seed = cfg.base_seed;
  report.replications = reps;

  for (int model : models) {
    for (std::size_t n : sizes) {
      std::size_t m_grid = 0;
      double h_m = 0.0;
      Vector equispaced;
      const bool has_eg =
          std::find(cfg.methods.begin(), cfg.methods.end(), GMethod::EG) != cfg.methods.end();
      if (has_eg) {
        m_grid = cfg.eg.m_override ? std::max<std::size_t>(*cfg.eg.m_override, 2)
                                   : grid_size_m(n, cfg.eg.k);
        h_m = cfg.eg.h_override ? *cfg.eg.h_override : bandwidth_h(m_grid, cfg.eg.c);
        if (cfg.eg.level_mode == LevelMode::Equispaced)
          equispaced = draw_levels(cfg.eg, m_grid);
      }

      for (double alpha : alphas) {
        std::map<GMethod, Vector> null_stats;

        for (double a : a_order) {
          std::map<GMethod, CellOutcome> cells;
          for (GMethod method : cfg.methods) {
            CellOutcome c;
            c.stat.assign(reps, 0.0);
            c.pval.assign(reps, 1.0);
            c.ok.assign(reps, 0);
            c.secs.assign(reps, 0.0);
            cells[method] = std::move(c);
          }

          parallel_for(reps, [&](std::size_t rep) {
            const std::uint64_t seed = derive_seed(
                cfg.base_seed, {static_cast<std::uint64_t>(model), n, alpha_key(alpha), rep});
            Rng rng(seed);
            DGPSpec spec{model, a, alpha, cfg.dist, n};
            auto [ds, restr] = generate_sample(spec, rng);
            const HMatrix H = compute_H(ds);

            const auto t_fit0 = std::chrono::steady_clock::now();
            QuantileFit fit_alpha;
            bool fit_ok = true;
            try {
              fit_alpha = fit_rq(ds, alpha);
            } catch (const Error&) {
              fit_ok = false;
            }
            const double fit_secs = elapsed_s(t_fit0);

            for (GMethod method : cfg.methods) {
              CellOutcome& cell = cells.at(method);
              const auto t0 = std::chrono::steady_clock::now();
              try {
                if (!fit_ok) throw ConvergenceFailure("alpha fit failed");
                GEstimate G;
                switch (method) {
                  case GMethod::EG: {
                    QuantileProcess process;
                    if (cfg.eg.level_mode == LevelMode::Equispaced) {
                      process = fit_process(ds, equispaced);
                    } else {
                      EGConfig local = cfg.eg;
                      local.seed = derive_seed(seed, {0x11d5u});
                      process = fit_process(ds, draw_levels(local, m_grid));
                    }
                    G = eg_from_process(ds, fit_alpha, process, cfg.eg, h_m);
                    break;
                  }
                  case GMethod::Powell: G = estimate_G_powell(ds, fit_alpha); break;
                  case GMethod::HK: G = estimate_G_hk(ds, alpha); break;
                  case GMethod::IIDSparsity: G = estimate_G_iid(ds, fit_alpha); break;
                }
                const WaldResult res = wald_test(fit_alpha, G, H, restr, n);
                cell.stat[rep] = res.statistic;
                cell.pval[rep] = res.p_value;
                cell.ok[rep] = 1;
              } catch (const Error&) {
                cell.ok[rep] = 0;
              }
              cell.secs[rep] = elapsed_s(t0) + fit_secs;
            }
          });

          for (GMethod method : cfg.methods) {
            const CellOutcome& cell = cells.at(method);
            std::size_t ok_count = 0, reject_raw = 0;
            Vector ok_stats;
            ok_stats.reserve(reps);
            double total_secs = 0.0;
            for (std::size_t rep = 0; rep < reps; ++rep) {
              total_secs += cell.secs[rep];
              if (!cell.ok[rep]) continue;
              ++ok_count;
              ok_stats.push_back(cell.stat[rep]);
              if (cell.pval[rep] < tau) ++reject_raw;
            }
            const std::size_t failures = reps - ok_count;
            const double raw_pct =
                ok_count ? 100.0 * static_cast<double>(reject_raw) / static_cast<double>(ok_count)
                         : 0.0;

            double corrected_pct = raw_pct;
            if (a == 0.0) {
              null_stats[method] = ok_stats;
            } else {
              const auto it = null_stats.find(method);
              if (it != null_stats.end() && !it->second.empty() && ok_count > 0) {
                const double crit = empirical_critical_value(it->second, tau);
                std::size_t reject_corr = 0;
                for (std::size_t rep = 0; rep < reps; ++rep)
                  if (cell.ok[rep] && cell.stat[rep] > crit) ++reject_corr;
                corrected_pct =
                    100.0 * static_cast<double>(reject_corr) / static_cast<double>(ok_count);
              }
            }

            if (failures * 100 > reps)
              std::fprintf(stderr,
                           "warning: cell model=%d n=%zu alpha=%.2f a=%.2f method=%s had %zu/%zu "
                           "failed replications\n",
                           model, n, alpha, a, method_name(method).c_str(), failures, reps);

            SimRow row;
            row.model = model;
            row.n = n;
            row.alpha = alpha;
            row.a = a;
            row.method = method;
            row.raw_pct = raw_pct;
            row.size_corrected_pct = corrected_pct;
            row.reps = reps;
            row.cpu_mean_s = total_secs / static_cast<double>(reps);
            row.failures = failures;
            report.rows.push_back(row);

            std::fprintf(stderr, "cell model=%d n=%zu alpha=%.2f a=%.2f method=%s done reps=%zu rej=%.1f\n",
                         model, n, alpha, a, method_name(method).c_str(), reps, raw_pct);
          }
        }
      }
    }
  }

  std::sort(report.rows.begin(), report.rows.end(), [](const SimRow& x, const SimRow& y) {
    if (x.model != y.model) return x.model < y.model;
    if (x.n != y.n) return x.n < y.n;
    if (x.alpha != y.alpha) return x.alpha < y.alpha;
    const std::string mx = method_name(x.method), my = method_name(y.method);
    if (mx != my) return mx < my;
    return x.a < y.a;
  });
  return report;
}

void emit_report(const SimReport& report, const std::string& path) {
  if (report.rows.empty()) throw DomainError("emit_report: empty report");
  std::ofstream out(path);
  if (!out) throw IOError(strf("emit_report: cannot open '%s' for writing", path.c_str()));
  out << "model,n,alpha,a,method,raw_pct,size_corrected_pct,reps,cpu_mean_s,failures\n";
  for (const SimRow& row : report.rows) {
    out << strf("%d,%zu,%g,%g,%s,%.1f,%.1f,%zu,%.4f,%zu\n", row.model, row.n, row.alpha, row.a,
                method_name(row.method).c_str(), row.raw_pct, row.size_corrected_pct, row.reps,
                row.cpu_mean_s, row.failures);
  }
  if (!out) throw IOError(strf("emit_report: write to '%s' failed", path.c_str()));
}

}  // namespace qrwald
