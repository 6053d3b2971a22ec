#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "rapidkrig/covariance.hpp"
#include "rapidkrig/gridding.hpp"

namespace rapidkrig::bench {

struct Observations {
  Locations<double> locs;
  Eigen::VectorXd z;
  Eigen::MatrixXd extra;  // any columns beyond x, y, z
  std::vector<std::string> extra_names;
  Domain<double> bbox;
  Eigen::Index duplicates = 0;

  Eigen::Index size() const { return z.size(); }
};

/// Delimited text (comma or whitespace) with a header row naming at least x, y and z.
Observations read_observations(std::istream& in, const std::string& source = "<stream>");
Observations load_observations(const std::string& path);

/// Fixed-effect terms on planar coordinates.
enum class Term { one, x, y, xy };

/// Parses formulas such as "1+x+y+x*y" (terms separated by '+', spaces ignored).
std::vector<Term> parse_covariates(std::string_view formula);
std::string format_covariates(const std::vector<Term>& terms);
Eigen::MatrixXd design_matrix(const std::vector<Term>& terms, const Locations<double>& locs);

/// Gridded result file: a text header of key=value lines after the "RKGRID1" magic line,
/// ended by a blank line, then every field as m1*m2 little-endian float64 values with x
/// varying fastest.
struct GridOutput {
  static constexpr std::string_view magic = "RKGRID1";
  static constexpr int version = 1;

  Eigen::Index m1 = 0, m2 = 0;
  double x0 = 0, y0 = 0, hx = 1, hy = 1;
  CovarianceModel<double> model;
  std::optional<std::uint64_t> seed;
  std::vector<std::pair<std::string, std::string>> meta;  // extra header lines, in order
  std::vector<std::string> field_names;
  std::vector<Eigen::VectorXd> fields;

  void add_field(std::string name, Eigen::VectorXd values);
  const Eigen::VectorXd& field(std::string_view name) const;
  std::optional<std::string> meta_value(std::string_view key) const;
};

GridOutput grid_output_for(const PaddedGrid<double>& grid, const CovarianceModel<double>& model);

void write_grid(std::ostream& out, const GridOutput& g);
void write_grid(const std::string& path, const GridOutput& g);
GridOutput read_grid(std::istream& in);
GridOutput read_grid(const std::string& path);

}  // namespace rapidkrig::bench
