#include "rapidkrig/bench/io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "rapidkrig/errors.hpp"

namespace rapidkrig::bench {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::vector<std::string> split(const std::string& line, bool comma) {
  std::vector<std::string> out;
  if (comma) {
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') out.emplace_back();
  } else {
    std::istringstream ss(line);
    std::string cell;
    while (ss >> cell) out.push_back(cell);
  }
  return out;
}

bool parse_double(const std::string& s, double& v) {
  if (s.empty()) return false;
  const char* first = s.data();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
  return ec == std::errc() && ptr == s.data() + s.size();
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T v{};
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || ptr != value.data() + value.size())
    throw DomainError("grid file: bad value for '" + key + "': " + value);
  return v;
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace

Observations read_observations(std::istream& in, const std::string& source) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) break;
  }
  if (trim(line).empty()) throw DomainError(source + ": empty observation file");
  const bool comma = line.find(',') != std::string::npos;
  const auto header = split(line, comma);

  std::map<std::string, std::size_t> col;
  for (std::size_t j = 0; j < header.size(); ++j) {
    const auto name = lower(header[j]);
    if (name.empty()) throw DomainError(source + ": empty column name in header");
    if (!col.emplace(name, j).second) throw DomainError(source + ": duplicate column '" + name + "'");
  }
  for (const char* req : {"x", "y", "z"})
    if (!col.count(req)) throw DomainError(source + ": missing required column '" + req + "'");
  std::vector<std::size_t> extra_cols;
  Observations obs;
  for (std::size_t j = 0; j < header.size(); ++j) {
    const auto name = lower(header[j]);
    if (name != "x" && name != "y" && name != "z") {
      extra_cols.push_back(j);
      obs.extra_names.push_back(name);
    }
  }

  std::vector<double> values;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split(line, comma);
    if (cells.size() != header.size())
      throw DomainError(source + ":" + std::to_string(line_no) + ": expected " +
                        std::to_string(header.size()) + " fields, found " +
                        std::to_string(cells.size()));
    for (std::size_t j = 0; j < cells.size(); ++j) {
      double v;
      if (!parse_double(cells[j], v) || !std::isfinite(v))
        throw DomainError(source + ":" + std::to_string(line_no) + ": column '" +
                          lower(header[j]) + "': non-numeric value '" + cells[j] + "'");
      values.push_back(v);
    }
    ++rows;
  }
  if (rows == 0) throw DomainError(source + ": no observation rows");

  const auto n = static_cast<Eigen::Index>(rows);
  const std::size_t width = header.size();
  obs.locs.resize(n, 2);
  obs.z.resize(n);
  obs.extra.resize(n, static_cast<Eigen::Index>(extra_cols.size()));
  for (Eigen::Index i = 0; i < n; ++i) {
    const double* row = values.data() + static_cast<std::size_t>(i) * width;
    obs.locs(i, 0) = row[col["x"]];
    obs.locs(i, 1) = row[col["y"]];
    obs.z(i) = row[col["z"]];
    for (std::size_t k = 0; k < extra_cols.size(); ++k)
      obs.extra(i, static_cast<Eigen::Index>(k)) = row[extra_cols[k]];
  }
  obs.bbox = {obs.locs.col(0).minCoeff(), obs.locs.col(0).maxCoeff(), obs.locs.col(1).minCoeff(),
              obs.locs.col(1).maxCoeff()};

  std::vector<Eigen::Index> order(rows);
  for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return std::pair(obs.locs(a, 0), obs.locs(a, 1)) < std::pair(obs.locs(b, 0), obs.locs(b, 1));
  });
  for (std::size_t k = 1; k < order.size(); ++k)
    if (obs.locs.row(order[k]) == obs.locs.row(order[k - 1])) ++obs.duplicates;
  if (obs.duplicates > 0)
    warn(source + ": " + std::to_string(obs.duplicates) +
         " observation(s) share an exact location with another; kept");
  return obs;
}

Observations load_observations(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot open observation file '" + path + "'");
  return read_observations(in, path);
}

std::vector<Term> parse_covariates(std::string_view formula) {
  std::string s;
  for (char c : formula)
    if (!std::isspace(static_cast<unsigned char>(c))) s += static_cast<char>(std::tolower(c));
  if (s.empty()) throw DomainError("covariate formula is empty");
  std::vector<Term> terms;
  std::istringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, '+')) {
    Term t;
    if (tok == "1")
      t = Term::one;
    else if (tok == "x")
      t = Term::x;
    else if (tok == "y")
      t = Term::y;
    else if (tok == "x*y" || tok == "y*x")
      t = Term::xy;
    else
      throw DomainError("unknown covariate term '" + tok + "' (allowed: 1, x, y, x*y)");
    if (std::find(terms.begin(), terms.end(), t) != terms.end())
      throw DomainError("covariate term '" + tok + "' repeated");
    terms.push_back(t);
  }
  if (s.back() == '+') throw DomainError("covariate formula ends with '+'");
  return terms;
}

std::string format_covariates(const std::vector<Term>& terms) {
  std::string out;
  for (const Term t : terms) {
    if (!out.empty()) out += '+';
    out += t == Term::one ? "1" : t == Term::x ? "x" : t == Term::y ? "y" : "x*y";
  }
  return out;
}

Eigen::MatrixXd design_matrix(const std::vector<Term>& terms, const Locations<double>& locs) {
  Eigen::MatrixXd X(locs.rows(), static_cast<Eigen::Index>(terms.size()));
  for (std::size_t k = 0; k < terms.size(); ++k) {
    auto c = X.col(static_cast<Eigen::Index>(k));
    switch (terms[k]) {
      case Term::one: c.setOnes(); break;
      case Term::x: c = locs.col(0); break;
      case Term::y: c = locs.col(1); break;
      case Term::xy: c = locs.col(0).cwiseProduct(locs.col(1)); break;
    }
  }
  return X;
}

void GridOutput::add_field(std::string name, Eigen::VectorXd values) {
  if (values.size() != m1 * m2) throw DomainError("grid field '" + name + "' has the wrong length");
  if (name.empty() || name.find_first_of(",=\n") != std::string::npos)
    throw DomainError("grid field name '" + name + "' is not allowed");
  field_names.push_back(std::move(name));
  fields.push_back(std::move(values));
}

const Eigen::VectorXd& GridOutput::field(std::string_view name) const {
  for (std::size_t k = 0; k < field_names.size(); ++k)
    if (field_names[k] == name) return fields[k];
  throw DomainError("grid file has no field '" + std::string(name) + "'");
}

std::optional<std::string> GridOutput::meta_value(std::string_view key) const {
  for (const auto& [k, v] : meta)
    if (k == key) return v;
  return std::nullopt;
}

GridOutput grid_output_for(const PaddedGrid<double>& grid, const CovarianceModel<double>& model) {
  GridOutput g;
  g.m1 = grid.m1;
  g.m2 = grid.m2;
  g.x0 = grid.x0;
  g.y0 = grid.y0;
  g.hx = grid.hx;
  g.hy = grid.hy;
  g.model = model;
  return g;
}

void write_grid(std::ostream& out, const GridOutput& g) {
  out << GridOutput::magic << '\n'
      << "version=" << GridOutput::version << '\n'
      << "m1=" << g.m1 << '\n'
      << "m2=" << g.m2 << '\n'
      << "x0=" << format_double(g.x0) << '\n'
      << "y0=" << format_double(g.y0) << '\n'
      << "hx=" << format_double(g.hx) << '\n'
      << "hy=" << format_double(g.hy) << '\n'
      << "sigma2=" << format_double(g.model.sigma2) << '\n'
      << "alpha=" << format_double(g.model.alpha) << '\n'
      << "nu=" << format_double(g.model.nu) << '\n'
      << "tau2=" << format_double(g.model.tau2) << '\n';
  if (g.seed) out << "seed=" << *g.seed << '\n';
  for (const auto& [k, v] : g.meta) {
    if (k.find_first_of("=\n") != std::string::npos || v.find('\n') != std::string::npos)
      throw DomainError("grid header entry '" + k + "' is not a single key=value line");
    out << k << '=' << v << '\n';
  }
  out << "fields=";
  for (std::size_t k = 0; k < g.field_names.size(); ++k) out << (k ? "," : "") << g.field_names[k];
  out << "\n\n";

  std::vector<unsigned char> bytes;
  for (const auto& f : g.fields) {
    if (f.size() != g.m1 * g.m2) throw DomainError("grid field has the wrong length");
    bytes.resize(static_cast<std::size_t>(f.size()) * 8);
    for (Eigen::Index i = 0; i < f.size(); ++i) {
      const auto bits = std::bit_cast<std::uint64_t>(f(i));
      for (int b = 0; b < 8; ++b)
        bytes[static_cast<std::size_t>(i) * 8 + b] = static_cast<unsigned char>(bits >> (8 * b));
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  }
  if (!out) throw DomainError("failed writing grid output");
}

void write_grid(const std::string& path, const GridOutput& g) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DomainError("cannot open output file '" + path + "'");
  write_grid(out, g);
}

GridOutput read_grid(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != GridOutput::magic)
    throw DomainError("not a grid file (missing RKGRID1 magic)");
  std::vector<std::pair<std::string, std::string>> header;
  while (true) {
    if (!std::getline(in, line)) throw DomainError("grid file: header not terminated");
    if (line.empty()) break;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw DomainError("grid file: malformed header line '" + line + "'");
    header.emplace_back(line.substr(0, eq), line.substr(eq + 1));
  }

  GridOutput g;
  std::string fields;
  bool have_m1 = false, have_m2 = false, have_fields = false;
  for (const auto& [k, v] : header) {
    if (k == "version") {
      if (parse_number<int>(k, v) != GridOutput::version)
        throw DomainError("grid file: unsupported version " + v);
    } else if (k == "m1") {
      g.m1 = parse_number<Eigen::Index>(k, v);
      have_m1 = true;
    } else if (k == "m2") {
      g.m2 = parse_number<Eigen::Index>(k, v);
      have_m2 = true;
    } else if (k == "x0") {
      g.x0 = parse_number<double>(k, v);
    } else if (k == "y0") {
      g.y0 = parse_number<double>(k, v);
    } else if (k == "hx") {
      g.hx = parse_number<double>(k, v);
    } else if (k == "hy") {
      g.hy = parse_number<double>(k, v);
    } else if (k == "sigma2") {
      g.model.sigma2 = parse_number<double>(k, v);
    } else if (k == "alpha") {
      g.model.alpha = parse_number<double>(k, v);
    } else if (k == "nu") {
      g.model.nu = parse_number<double>(k, v);
    } else if (k == "tau2") {
      g.model.tau2 = parse_number<double>(k, v);
    } else if (k == "seed") {
      g.seed = parse_number<std::uint64_t>(k, v);
    } else if (k == "fields") {
      fields = v;
      have_fields = true;
    } else {
      g.meta.emplace_back(k, v);
    }
  }
  if (!have_m1 || !have_m2 || !have_fields || g.m1 <= 0 || g.m2 <= 0)
    throw DomainError("grid file: header lacks m1, m2 or fields");

  std::vector<std::string> names;
  if (!fields.empty()) {
    std::istringstream ss(fields);
    std::string name;
    while (std::getline(ss, name, ',')) names.push_back(name);
  }
  const auto size = g.m1 * g.m2;
  std::vector<unsigned char> bytes(static_cast<std::size_t>(size) * 8);
  for (auto& name : names) {
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (in.gcount() != static_cast<std::streamsize>(bytes.size()))
      throw DomainError("grid file: payload truncated in field '" + name + "'");
    Eigen::VectorXd f(size);
    for (Eigen::Index i = 0; i < size; ++i) {
      std::uint64_t bits = 0;
      for (int b = 0; b < 8; ++b)
        bits |= std::uint64_t{bytes[static_cast<std::size_t>(i) * 8 + b]} << (8 * b);
      f(i) = std::bit_cast<double>(bits);
    }
    g.add_field(std::move(name), std::move(f));
  }
  if (in.peek() != std::char_traits<char>::eof())
    throw DomainError("grid file: trailing bytes after payload");
  return g;
}

GridOutput read_grid(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DomainError("cannot open grid file '" + path + "'");
  return read_grid(in);
}

}  // namespace rapidkrig::bench
