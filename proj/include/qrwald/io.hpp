#pragma once

#include <string>
#include <vector>

#include "qrwald/mc.hpp"
#include "qrwald/qr.hpp"
#include "qrwald/wald.hpp"

namespace qrwald {

struct LoadOptions {
  std::string response;        // required header name of the response column
  bool add_intercept = false;  // prepend a ones column named "intercept"
};

struct LoadResult {
  Dataset data;
  std::size_t dropped_rows = 0;  // rows with missing or non-numeric cells
};

// Reads a delimited text file with a header row. The delimiter (comma or
// whitespace) is detected from the header. Rows that fail to parse are
// dropped and counted; the resulting design is checked for full column rank.
LoadResult load_csv(const std::string& path, const LoadOptions& opt);

// Writes response followed by the design columns, 17 significant digits.
void save_csv(const Dataset& data, const std::string& response_name, const std::string& path);

// Selection matrix testing that the named coefficients are jointly zero.
Restriction build_restriction(const Dataset& data, const std::vector<std::string>& names);

struct PennResult {
  Dataset data;
  Restriction restr;
  std::size_t dropped_rows = 0;
};

// Loader profile for the Pennsylvania reemployment-bonus experiment layout:
// response log(inuidur1), treatment indicator from tg, fourteen demographic
// controls, treatment interactions (the tested block) and gender
// interactions with race, ethnicity and dependents.
PennResult load_penn(const std::string& path);

// Flat "key = value" simulation configuration file.
SimConfig parse_sim_config(const std::string& path);

void write_curve_csv(const std::string& path, const std::vector<WaldResult>& results);

// Minimal standalone polyline plot of p-value against quantile with a
// dashed reference line.
void write_curve_svg(const std::string& path, const std::vector<WaldResult>& results,
                     double ref_level = 0.10);

}  // namespace qrwald
