#include "qrwald/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "qrwald/errors.hpp"

namespace qrwald {

namespace {

std::vector<std::string> split_line(const std::string& line, bool comma) {
  std::vector<std::string> out;
  if (comma) {
    std::string tok;
    std::stringstream ss(line);
    while (std::getline(ss, tok, ',')) {
      // trim surrounding blanks
      const auto b = tok.find_first_not_of(" \t\r");
      const auto e = tok.find_last_not_of(" \t\r");
      out.push_back(b == std::string::npos ? "" : tok.substr(b, e - b + 1));
    }
    if (!line.empty() && line.back() == ',') out.push_back("");
  } else {
    std::stringstream ss(line);
    std::string tok;
    while (ss >> tok) out.push_back(tok);
  }
  return out;
}

bool parse_double(const std::string& tok, double& out) {
  if (tok.empty()) return false;
  char* end = nullptr;
  out = std::strtod(tok.c_str(), &end);
  return end == tok.c_str() + tok.size() && std::isfinite(out);
}

struct RawTable {
  std::vector<std::string> header;
  std::vector<Vector> rows;  // aligned with header
  std::size_t dropped = 0;
};

RawTable read_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IOError(strf("cannot open '%s'", path.c_str()));

  std::string line;
  if (!std::getline(in, line)) throw ParseError(strf("%s: empty file", path.c_str()));
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const bool comma = line.find(',') != std::string::npos;

  RawTable table;
  table.header = split_line(line, comma);
  if (table.header.empty()) throw ParseError(strf("%s:1: empty header", path.c_str()));
  std::set<std::string> seen;
  for (const auto& name : table.header) {
    if (name.empty()) throw ParseError(strf("%s:1: blank column name", path.c_str()));
    if (!seen.insert(name).second)
      throw ParseError(strf("%s:1: duplicate column name '%s'", path.c_str(), name.c_str()));
  }

  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto toks = split_line(line, comma);
    bool good = toks.size() == table.header.size();
    Vector row(table.header.size());
    for (std::size_t j = 0; good && j < toks.size(); ++j)
      if (!parse_double(toks[j], row[j])) good = false;
    if (good)
      table.rows.push_back(std::move(row));
    else
      ++table.dropped;
  }
  if (table.rows.empty())
    throw ParseError(strf("%s: no parseable data rows", path.c_str()));
  return table;
}

Dataset dataset_from_columns(const std::vector<std::string>& names,
                             const std::vector<Vector>& columns, const Vector& y) {
  Dataset data;
  const std::size_t n = y.size();
  const std::size_t d = columns.size();
  data.y = y;
  data.X = Matrix(n, d);
  data.column_names = names;
  for (std::size_t j = 0; j < d; ++j)
    for (std::size_t i = 0; i < n; ++i) data.X(i, j) = columns[j][i];
  validate_dataset(data, true);
  return data;
}

}  // namespace

LoadResult load_csv(const std::string& path, const LoadOptions& opt) {
  if (opt.response.empty()) throw DomainError("load_csv: response column name required");
  RawTable table = read_table(path);

  const auto it = std::find(table.header.begin(), table.header.end(), opt.response);
  if (it == table.header.end())
    throw UnknownColumn(strf("load_csv: response column '%s' not in header", opt.response.c_str()));
  const std::size_t ycol = static_cast<std::size_t>(it - table.header.begin());

  const std::size_t n = table.rows.size();
  Vector y(n);
  std::vector<std::string> names;
  std::vector<Vector> cols;
  if (opt.add_intercept) {
    names.push_back("intercept");
    cols.emplace_back(n, 1.0);
  }
  for (std::size_t j = 0; j < table.header.size(); ++j) {
    if (j == ycol) continue;
    names.push_back(table.header[j]);
    cols.emplace_back(n);
  }
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = table.rows[i][ycol];
    std::size_t out = opt.add_intercept ? 1 : 0;
    for (std::size_t j = 0; j < table.header.size(); ++j) {
      if (j == ycol) continue;
      cols[out++][i] = table.rows[i][j];
    }
  }

  LoadResult res;
  res.data = dataset_from_columns(names, cols, y);
  res.dropped_rows = table.dropped;
  return res;
}

void save_csv(const Dataset& data, const std::string& response_name, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IOError(strf("save_csv: cannot open '%s'", path.c_str()));
  out << response_name;
  for (const auto& name : data.column_names) out << ',' << name;
  out << '\n';
  for (std::size_t i = 0; i < data.n(); ++i) {
    out << strf("%.17g", data.y[i]);
    for (std::size_t j = 0; j < data.d(); ++j) out << ',' << strf("%.17g", data.X(i, j));
    out << '\n';
  }
  if (!out) throw IOError(strf("save_csv: write to '%s' failed", path.c_str()));
}

Restriction build_restriction(const Dataset& data, const std::vector<std::string>& names) {
  if (names.empty()) throw DomainError("build_restriction: no coefficient names given");
  std::set<std::string> unique(names.begin(), names.end());
  if (unique.size() != names.size())
    throw DomainError("build_restriction: duplicate coefficient names");

  Restriction restr;
  restr.R = Matrix(names.size(), data.d());
  restr.r.assign(names.size(), 0.0);
  restr.labels = names;
  for (std::size_t j = 0; j < names.size(); ++j) {
    const auto it = std::find(data.column_names.begin(), data.column_names.end(), names[j]);
    if (it == data.column_names.end())
      throw UnknownColumn(strf("build_restriction: column '%s' not in dataset", names[j].c_str()));
    restr.R(j, static_cast<std::size_t>(it - data.column_names.begin())) = 1.0;
  }
  return restr;
}

PennResult load_penn(const std::string& path) {
  RawTable table = read_table(path);
  std::map<std::string, std::size_t> col;
  for (std::size_t j = 0; j < table.header.size(); ++j) col[table.header[j]] = j;

  const std::vector<std::string> needed = {"tg",      "inuidur1", "female",  "black",
                                           "hispanic", "othrace",  "dep",     "recall",
                                           "agelt35",  "agegt54",  "durable", "nondurable",
                                           "lusd",     "husd",     "muld"};
  for (const auto& name : needed)
    if (!col.count(name))
      throw UnknownColumn(strf("penn profile: column '%s' missing from '%s'", name.c_str(), path.c_str()));

  const std::vector<std::string> controls = {"female",  "black",   "hispanic", "othrace",
                                             "dep1",    "dep2",    "recall",   "agelt35",
                                             "agegt54", "durable", "nondurable", "lusd",
                                             "husd",    "muld"};
  const std::vector<std::string> gender_partners = {"black", "othrace", "hispanic", "dep1", "dep2"};

  std::vector<std::string> names;
  names.push_back("intercept");
  names.push_back("treat");
  for (const auto& c : controls) names.push_back(c);
  std::vector<std::string> interaction_names;
  for (const auto& c : controls) interaction_names.push_back("treat_" + c);
  for (const auto& c : interaction_names) names.push_back(c);
  for (const auto& c : gender_partners) names.push_back("female_" + c);

  std::vector<Vector> cols(names.size());
  Vector y;
  std::size_t dropped = table.dropped;
  for (const auto& raw : table.rows) {
    const double dur = raw[col["inuidur1"]];
    if (!(dur > 0.0)) {
      ++dropped;
      continue;
    }
    const double treat = raw[col["tg"]] != 0.0 ? 1.0 : 0.0;
    const double dep = raw[col["dep"]];
    std::map<std::string, double> v;
    v["female"] = raw[col["female"]];
    v["black"] = raw[col["black"]];
    v["hispanic"] = raw[col["hispanic"]];
    v["othrace"] = raw[col["othrace"]];
    v["dep1"] = dep == 1.0 ? 1.0 : 0.0;
    v["dep2"] = dep >= 2.0 ? 1.0 : 0.0;
    v["recall"] = raw[col["recall"]];
    v["agelt35"] = raw[col["agelt35"]];
    v["agegt54"] = raw[col["agegt54"]];
    v["durable"] = raw[col["durable"]];
    v["nondurable"] = raw[col["nondurable"]];
    v["lusd"] = raw[col["lusd"]];
    v["husd"] = raw[col["husd"]];
    v["muld"] = raw[col["muld"]];

    y.push_back(std::log(dur));
    std::size_t j = 0;
    cols[j++].push_back(1.0);
    cols[j++].push_back(treat);
    for (const auto& c : controls) cols[j++].push_back(v[c]);
    for (const auto& c : controls) cols[j++].push_back(treat * v[c]);
    for (const auto& c : gender_partners) cols[j++].push_back(v["female"] * v[c]);
  }
  if (y.empty()) throw ParseError(strf("penn profile: no usable rows in '%s'", path.c_str()));

  PennResult res;
  res.data = dataset_from_columns(names, cols, y);
  res.restr = build_restriction(res.data, interaction_names);
  res.dropped_rows = dropped;
  return res;
}

namespace {

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::string tok;
  std::stringstream ss(value);
  while (std::getline(ss, tok, ',')) {
    const auto b = tok.find_first_not_of(" \t");
    const auto e = tok.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(tok.substr(b, e - b + 1));
  }
  return out;
}

double config_double(const std::string& key, const std::string& value) {
  double x;
  if (!parse_double(value, x)) throw ConfigError(strf("config key '%s': bad number '%s'", key.c_str(), value.c_str()));
  return x;
}

}  // namespace

SimConfig parse_sim_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IOError(strf("cannot open config '%s'", path.c_str()));

  SimConfig cfg;
  cfg.models.clear();
  cfg.sample_sizes.clear();
  cfg.alphas.clear();
  cfg.a_values.clear();
  cfg.methods.clear();

  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto eq = line.find('=');
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (eq == std::string::npos)
      throw ConfigError(strf("%s:%zu: expected 'key = value'", path.c_str(), lineno));
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));

    if (key == "models") {
      for (const auto& tok : split_list(value))
        cfg.models.push_back(static_cast<int>(config_double(key, tok)));
    } else if (key == "sizes" || key == "n") {
      for (const auto& tok : split_list(value))
        cfg.sample_sizes.push_back(static_cast<std::size_t>(config_double(key, tok)));
    } else if (key == "alphas") {
      for (const auto& tok : split_list(value)) cfg.alphas.push_back(config_double(key, tok));
    } else if (key == "a_values" || key == "a") {
      for (const auto& tok : split_list(value)) cfg.a_values.push_back(config_double(key, tok));
    } else if (key == "methods") {
      for (const auto& tok : split_list(value)) cfg.methods.push_back(method_from_name(tok));
    } else if (key == "reps") {
      cfg.replications = static_cast<std::size_t>(config_double(key, value));
    } else if (key == "seed") {
      cfg.base_seed = static_cast<std::uint64_t>(config_double(key, value));
    } else if (key == "tau") {
      cfg.nominal_tau = config_double(key, value);
    } else if (key == "k") {
      cfg.eg.k = config_double(key, value);
    } else if (key == "c") {
      cfg.eg.c = config_double(key, value);
    } else if (key == "a1") {
      cfg.eg.a1 = config_double(key, value);
    } else if (key == "a2") {
      cfg.eg.a2 = config_double(key, value);
    } else if (key == "m_override") {
      cfg.eg.m_override = static_cast<std::size_t>(config_double(key, value));
    } else if (key == "h_override") {
      cfg.eg.h_override = config_double(key, value);
    } else if (key == "level_mode") {
      if (value == "equispaced") cfg.eg.level_mode = LevelMode::Equispaced;
      else if (value == "iid-uniform") cfg.eg.level_mode = LevelMode::IidUniform;
      else throw ConfigError(strf("config key 'level_mode': unknown mode '%s'", value.c_str()));
    } else if (key == "level_seed") {
      cfg.eg.seed = static_cast<std::uint64_t>(config_double(key, value));
    } else if (key == "dist") {
      if (value == "normal") cfg.dist = FDist::Normal;
      else if (value == "t3") cfg.dist = FDist::T3;
      else throw ConfigError(strf("config key 'dist': unknown distribution '%s'", value.c_str()));
    } else {
      throw ConfigError(strf("%s:%zu: unknown key '%s'", path.c_str(), lineno, key.c_str()));
    }
  }

  if (cfg.models.empty()) throw ConfigError("config: 'models' is required");
  if (cfg.sample_sizes.empty()) throw ConfigError("config: 'sizes' is required");
  if (cfg.alphas.empty()) throw ConfigError("config: 'alphas' is required");
  if (cfg.a_values.empty()) cfg.a_values = {0.0};
  if (cfg.methods.empty()) throw ConfigError("config: 'methods' is required");
  if (cfg.replications < 100) throw ConfigError("config: 'reps' must be at least 100");
  return cfg;
}

void write_curve_csv(const std::string& path, const std::vector<WaldResult>& results) {
  std::ofstream out(path);
  if (!out) throw IOError(strf("cannot open '%s'", path.c_str()));
  out << "alpha,statistic,df,p_value,status\n";
  for (const auto& res : results) {
    std::string status = res.ok ? "ok" : res.diagnostics;
    std::replace(status.begin(), status.end(), ',', ';');
    out << strf("%.6g,%.10g,%zu,%.10g,%s\n", res.alpha, res.statistic, res.J, res.p_value,
                status.c_str());
  }
  if (!out) throw IOError(strf("write to '%s' failed", path.c_str()));
}

void write_curve_svg(const std::string& path, const std::vector<WaldResult>& results,
                     double ref_level) {
  std::vector<std::pair<double, double>> pts;
  for (const auto& res : results)
    if (res.ok && std::isfinite(res.p_value)) pts.emplace_back(res.alpha, res.p_value);
  std::sort(pts.begin(), pts.end());
  if (pts.empty()) throw DomainError("write_curve_svg: no finite points to plot");

  const double W = 800, H = 500;
  const double ml = 70, mr = 20, mt = 20, mb = 50;
  const double x0 = pts.front().first, x1 = pts.back().first;
  const double span = x1 > x0 ? x1 - x0 : 1.0;
  auto px = [&](double a) { return ml + (a - x0) / span * (W - ml - mr); };
  auto py = [&](double p) { return mt + (1.0 - p) * (H - mt - mb); };

  std::ofstream out(path);
  if (!out) throw IOError(strf("cannot open '%s'", path.c_str()));
  out << strf("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%g\" height=\"%g\" "
              "viewBox=\"0 0 %g %g\">\n", W, H, W, H);
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  // axes
  out << strf("<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" stroke=\"black\"/>\n", ml, H - mb,
              W - mr, H - mb);
  out << strf("<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" stroke=\"black\"/>\n", ml, mt, ml,
              H - mb);
  for (int i = 0; i <= 4; ++i) {
    const double p = 0.25 * i;
    out << strf("<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" stroke=\"black\"/>\n", ml - 5,
                py(p), ml, py(p));
    out << strf("<text x=\"%g\" y=\"%g\" font-size=\"13\" text-anchor=\"end\">%.2f</text>\n",
                ml - 9, py(p) + 4, p);
    const double a = x0 + span * 0.25 * i;
    out << strf("<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" stroke=\"black\"/>\n", px(a),
                H - mb, px(a), H - mb + 5);
    out << strf("<text x=\"%g\" y=\"%g\" font-size=\"13\" text-anchor=\"middle\">%.2f</text>\n",
                px(a), H - mb + 20, a);
  }
  out << strf("<text x=\"%g\" y=\"%g\" font-size=\"14\" text-anchor=\"middle\">quantile</text>\n",
              ml + 0.5 * (W - ml - mr), H - 10);
  out << strf("<text x=\"18\" y=\"%g\" font-size=\"14\" text-anchor=\"middle\" "
              "transform=\"rotate(-90 18 %g)\">p-value</text>\n",
              mt + 0.5 * (H - mt - mb), mt + 0.5 * (H - mt - mb));
  // reference level
  out << strf("<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" stroke=\"gray\" "
              "stroke-dasharray=\"4 3\"/>\n", ml, py(ref_level), W - mr, py(ref_level));
  // curve
  out << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"1.5\" points=\"";
  for (const auto& [a, p] : pts) out << strf("%.2f,%.2f ", px(a), py(p));
  out << "\"/>\n</svg>\n";
  if (!out) throw IOError(strf("write to '%s' failed", path.c_str()));
}

}  // namespace qrwald
