#include <cstdio>
#include <cstdlib>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "qrwald/errors.hpp"
#include "qrwald/io.hpp"
#include "qrwald/mc.hpp"
#include "qrwald/parallel.hpp"
#include "qrwald/wald.hpp"

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

struct CommonInput {
  std::string input;
  std::string response;
  std::string profile;
  bool intercept = false;
  std::vector<std::string> restrict_names;
};

struct EGFlags {
  double k = 5.0, c = 1.5;
  double a1 = 0.01, a2 = 0.99;
  std::optional<std::size_t> m;
  std::optional<double> h;
  std::string level_mode = "equispaced";
  std::uint64_t seed = 0;

  qrwald::EGConfig to_config() const {
    qrwald::EGConfig cfg;
    cfg.k = k;
    cfg.c = c;
    cfg.a1 = a1;
    cfg.a2 = a2;
    cfg.m_override = m;
    cfg.h_override = h;
    cfg.seed = seed;
    if (level_mode == "equispaced")
      cfg.level_mode = qrwald::LevelMode::Equispaced;
    else if (level_mode == "iid-uniform")
      cfg.level_mode = qrwald::LevelMode::IidUniform;
    else
      throw qrwald::DomainError("level mode must be 'equispaced' or 'iid-uniform'");
    return cfg;
  }
};

void add_eg_flags(CLI::App* cmd, EGFlags& eg) {
  cmd->add_option("--k", eg.k, "grid-size constant");
  cmd->add_option("--c", eg.c, "bandwidth constant");
  cmd->add_option("--a1", eg.a1, "lower end of the level interval");
  cmd->add_option("--a2", eg.a2, "upper end of the level interval");
  cmd->add_option_function<std::size_t>("--m", [&eg](const std::size_t& v) { eg.m = v; },
                                        "grid size override");
  cmd->add_option_function<double>("--h", [&eg](const double& v) { eg.h = v; },
                                   "bandwidth override");
  cmd->add_option("--level-mode", eg.level_mode, "equispaced or iid-uniform");
  cmd->add_option("--seed", eg.seed, "seed for iid-uniform levels");
}

// Loads either a plain file (response + named columns) or the Pennsylvania
// bonus-experiment layout, which also implies the tested interaction block.
std::pair<qrwald::Dataset, std::optional<qrwald::Restriction>> load_input(const CommonInput& in) {
  if (in.profile == "penn") {
    qrwald::PennResult penn = qrwald::load_penn(in.input);
    if (penn.dropped_rows > 0)
      std::fprintf(stderr, "note: dropped %zu unusable rows\n", penn.dropped_rows);
    return {std::move(penn.data), std::move(penn.restr)};
  }
  if (!in.profile.empty()) throw qrwald::DomainError("unknown profile '" + in.profile + "'");
  if (in.response.empty()) throw qrwald::DomainError("--response is required without a profile");
  qrwald::LoadOptions opt;
  opt.response = in.response;
  opt.add_intercept = in.intercept;
  qrwald::LoadResult res = qrwald::load_csv(in.input, opt);
  if (res.dropped_rows > 0)
    std::fprintf(stderr, "note: dropped %zu malformed rows\n", res.dropped_rows);
  return {std::move(res.data), std::nullopt};
}

qrwald::Restriction resolve_restriction(const qrwald::Dataset& data,
                                        const std::optional<qrwald::Restriction>& profile_restr,
                                        const std::vector<std::string>& names) {
  if (!names.empty()) return qrwald::build_restriction(data, names);
  if (profile_restr) return *profile_restr;
  throw qrwald::DomainError("--restrict is required (comma-separated coefficient names)");
}

qrwald::Vector parse_grid(const std::string& spec) {
  double lo = 0, hi = 0;
  int count = 0;
  if (std::sscanf(spec.c_str(), "%lf:%lf:%d", &lo, &hi, &count) != 3 || count < 1)
    throw qrwald::DomainError("grid must be LO:HI:COUNT with COUNT >= 1");
  qrwald::Vector grid;
  if (count == 1) {
    grid.push_back(lo);
    return grid;
  }
  for (int i = 0; i < count; ++i)
    grid.push_back(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1));
  return grid;
}

int cmd_fit(const CommonInput& in, double alpha, const std::string& out_path) {
  auto [data, restr] = load_input(in);
  (void)restr;
  const qrwald::QuantileFit fit = qrwald::fit_rq(data, alpha);
  std::FILE* out = out_path.empty() ? stdout : std::fopen(out_path.c_str(), "w");
  if (!out) throw qrwald::IOError("cannot open output file '" + out_path + "'");
  std::fprintf(out, "column,estimate\n");
  for (std::size_t j = 0; j < data.d(); ++j)
    std::fprintf(out, "%s,%.10g\n", data.column_names[j].c_str(), fit.beta[j]);
  if (out != stdout) std::fclose(out);
  std::fprintf(stderr, "fit alpha=%g n=%zu d=%zu objective=%.10g iterations=%d\n", alpha,
               data.n(), data.d(), fit.objective, fit.iterations);
  return 0;
}

int cmd_test(const CommonInput& in, double alpha, const std::string& method_name,
             const EGFlags& eg, double tau) {
  auto [data, profile_restr] = load_input(in);
  const qrwald::Restriction restr = resolve_restriction(data, profile_restr, in.restrict_names);
  const qrwald::GMethod method = qrwald::method_from_name(method_name);
  const qrwald::EGConfig cfg = eg.to_config();

  const qrwald::HMatrix H = qrwald::compute_H(data);
  const qrwald::QuantileFit fit = qrwald::fit_rq(data, alpha);
  qrwald::GEstimate G;
  switch (method) {
    case qrwald::GMethod::EG: G = qrwald::estimate_G_eg(data, alpha, cfg); break;
    case qrwald::GMethod::Powell: G = qrwald::estimate_G_powell(data, fit); break;
    case qrwald::GMethod::HK: G = qrwald::estimate_G_hk(data, alpha); break;
    case qrwald::GMethod::IIDSparsity: G = qrwald::estimate_G_iid(data, fit); break;
  }
  const qrwald::WaldResult res = qrwald::wald_test(fit, G, H, restr, data.n());

  std::printf("alpha,statistic,df,p_value,method,reject_0.01,reject_0.05,reject_0.10\n");
  std::printf("%g,%.10g,%zu,%.10g,%s,%d,%d,%d\n", res.alpha, res.statistic, res.J, res.p_value,
              qrwald::method_name(res.method).c_str(), res.reject_at.at(0.01) ? 1 : 0,
              res.reject_at.at(0.05) ? 1 : 0, res.reject_at.at(0.10) ? 1 : 0);
  std::fprintf(stderr, "%s reject at tau=%g: %s\n", res.diagnostics.c_str(), tau,
               res.p_value < tau ? "yes" : "no");
  return 0;
}

int cmd_curve(const CommonInput& in, const std::string& grid_spec, const std::string& method_name,
              const EGFlags& eg, const std::string& out_base, bool svg) {
  auto [data, profile_restr] = load_input(in);
  const qrwald::Restriction restr = resolve_restriction(data, profile_restr, in.restrict_names);
  const qrwald::GMethod method = qrwald::method_from_name(method_name);
  const qrwald::Vector grid = parse_grid(grid_spec);

  const auto results = qrwald::pvalue_curve(data, restr, grid, method, eg.to_config());
  qrwald::write_curve_csv(out_base + ".csv", results);
  if (svg) qrwald::write_curve_svg(out_base + ".svg", results);

  std::size_t failed = 0;
  for (const auto& res : results)
    if (!res.ok) ++failed;
  std::fprintf(stderr, "curve: %zu levels, %zu failed, wrote %s.csv%s\n", results.size(), failed,
               out_base.c_str(), svg ? " and .svg" : "");
  return 0;
}

int cmd_simulate(const std::string& config_path, const std::string& out_path) {
  const qrwald::SimConfig cfg = qrwald::parse_sim_config(config_path);
  const qrwald::SimReport report = qrwald::run_experiment(cfg);
  qrwald::emit_report(report, out_path);
  std::fprintf(stderr, "simulate: wrote %zu rows to %s\n", report.rows.size(), out_path.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  if (const char* env = std::getenv("QRWALD_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) qrwald::set_max_threads(static_cast<unsigned>(v));
  }

  CLI::App app{"Quantile-regression Wald inference"};
  app.require_subcommand(1);

  CommonInput in;
  double alpha = 0.5;
  double tau = 0.05;
  EGFlags eg;
  std::string out_path, method, grid_spec;
  bool svg = false;
  std::string config_path;
  std::string restrict_csv;

  auto add_common = [&](CLI::App* cmd, bool needs_input) {
    if (needs_input) cmd->add_option("--input", in.input, "data file")->required();
    cmd->add_option("--response", in.response, "response column name");
    cmd->add_option("--profile", in.profile, "input profile (penn)");
    cmd->add_flag("--intercept", in.intercept, "prepend a ones column");
  };

  CLI::App* fit = app.add_subcommand("fit", "fit one regression quantile");
  add_common(fit, true);
  fit->add_option("--alpha", alpha, "quantile level")->required();
  fit->add_option("--out", out_path, "write coefficients here instead of stdout");

  CLI::App* test = app.add_subcommand("test", "Wald test of linear restrictions");
  add_common(test, true);
  test->add_option("--alpha", alpha, "quantile level")->required();
  test->add_option("--method", method, "weg, wiid, wnid or wker")->required();
  test->add_option("--restrict", restrict_csv, "comma-separated coefficient names");
  test->add_option("--tau", tau, "nominal level reported on stderr");
  add_eg_flags(test, eg);

  CLI::App* curve = app.add_subcommand("curve", "p-value curve over a quantile grid");
  add_common(curve, true);
  curve->add_option("--grid", grid_spec, "LO:HI:COUNT")->required();
  curve->add_option("--method", method, "weg, wiid, wnid or wker")->required();
  curve->add_option("--restrict", restrict_csv, "comma-separated coefficient names");
  curve->add_option("--out", out_path, "output base path")->required();
  curve->add_flag("--svg", svg, "also write an SVG plot");
  add_eg_flags(curve, eg);

  CLI::App* simulate = app.add_subcommand("simulate", "run a simulation campaign");
  simulate->add_option("--config", config_path, "key = value configuration file")->required();
  simulate->add_option("--out", out_path, "report CSV path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  if (!restrict_csv.empty()) {
    std::stringstream ss(restrict_csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      if (!tok.empty()) in.restrict_names.push_back(tok);
    }
  }

  try {
    if (fit->parsed()) return cmd_fit(in, alpha, out_path);
    if (test->parsed()) return cmd_test(in, alpha, method, eg, tau);
    if (curve->parsed()) return cmd_curve(in, grid_spec, method, eg, out_path, svg);
    if (simulate->parsed()) return cmd_simulate(config_path, out_path);
  } catch (const qrwald::IOError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitData;
  } catch (const qrwald::ParseError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitData;
  } catch (const qrwald::UnknownColumn& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitData;
  } catch (const qrwald::RankDeficient& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitData;
  } catch (const qrwald::ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitData;
  } catch (const qrwald::DomainError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const qrwald::EmptyGrid& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const qrwald::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitNumeric;
  }
  return 0;
}
