#include "bpl/density_io.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "bpl/errors.hpp"

namespace bpl {

namespace {

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
  double mass = NAN;
};

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

Table read_table(std::istream& is) {
  Table t;
  std::string line;
  if (!std::getline(is, line)) fail(ErrorKind::IoError, "empty density file");
  t.header = split(line);
  if (t.header.empty() || t.header.back() != "value") fail(ErrorKind::IoError, "density header must end with 'value'");
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line[0] == '#') {
      auto pos = line.find("mass=");
      if (pos != std::string::npos) t.mass = std::stod(line.substr(pos + 5));
      continue;
    }
    auto cells = split(line);
    if (cells.size() != t.header.size()) fail(ErrorKind::IoError, "wrong column count on line " + std::to_string(lineno));
    std::vector<double> row;
    for (auto& c : cells) {
      try {
        row.push_back(std::stod(c));
      } catch (const std::exception&) {
        fail(ErrorKind::IoError, "unparsable number on line " + std::to_string(lineno));
      }
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

int isqrt_exact(std::size_t n) {
  auto r = std::size_t(std::llround(std::sqrt(double(n))));
  if (r * r != n) fail(ErrorKind::IoError, "cell count is not a square");
  return int(r);
}

}  // namespace

void write_density_csv(std::ostream& os, const DensityField& rho) {
  const auto& g = rho.grid();
  os << (g.d() == 1 ? "x,value\n" : "x,y,value\n");
  for (std::size_t i = 0; i < rho.size(); ++i) {
    if (g.d() == 1)
      os << fmt(g.center(int(i)));
    else
      os << fmt(g.center(int(i / g.n()))) << ',' << fmt(g.center(int(i % g.n())));
    os << ',' << fmt(rho[i]) << '\n';
  }
  os << "# mass=" << fmt(rho.mass()) << '\n';
}

void write_phase_csv(std::ostream& os, const PhaseDensity& mu) {
  const auto& g = mu.xgrid();
  const auto& vb = mu.vbox();
  os << (g.d() == 1 ? "x,v,value\n" : "x,y,vx,vy,value\n");
  const std::size_t nv = vb.cells();
  for (std::size_t ix = 0; ix < g.cells(); ++ix) {
    for (std::size_t iv = 0; iv < nv; ++iv) {
      if (g.d() == 1)
        os << fmt(g.center(int(ix))) << ',' << fmt(vb.center(int(iv)));
      else
        os << fmt(g.center(int(ix / g.n()))) << ',' << fmt(g.center(int(ix % g.n()))) << ','
           << fmt(vb.center(int(iv / vb.n_v()))) << ',' << fmt(vb.center(int(iv % vb.n_v())));
      os << ',' << fmt(mu.values()[ix * nv + iv]) << '\n';
    }
  }
  os << "# mass=" << fmt(mu.mass()) << '\n';
}

DensityField read_density_csv(std::istream& is) {
  Table t = read_table(is);
  const std::size_t ncol = t.header.size();
  if (ncol != 2 && ncol != 3) fail(ErrorKind::IoError, "density CSV must have 2 or 3 columns");
  int d = int(ncol) - 1;
  int n = d == 1 ? int(t.rows.size()) : isqrt_exact(t.rows.size());
  TorusGrid grid(d, n);
  std::vector<double> v;
  v.reserve(t.rows.size());
  for (auto& r : t.rows) v.push_back(r.back());
  DensityField rho(grid, std::move(v));
  if (!std::isnan(t.mass) && std::abs(t.mass - rho.mass()) > 1e-12)
    fail(ErrorKind::IoError, "mass comment does not match the data");
  return rho;
}

PhaseDensity read_phase_csv(std::istream& is, double leak_tol) {
  Table t = read_table(is);
  const std::size_t ncol = t.header.size();
  if (ncol != 3 && ncol != 5) fail(ErrorKind::IoError, "phase CSV must have 3 or 5 columns");
  int d = ncol == 3 ? 1 : 2;
  std::set<double> vs;
  for (auto& r : t.rows) vs.insert(r[d]);
  int n_v = int(vs.size());
  if (n_v < 2) fail(ErrorKind::IoError, "phase CSV needs several velocity cells");
  double hv = (*vs.rbegin() - *vs.begin()) / (n_v - 1);
  double v_max = *vs.rbegin() + 0.5 * hv;
  std::size_t nv_cells = d == 1 ? std::size_t(n_v) : std::size_t(n_v) * n_v;
  if (t.rows.size() % nv_cells) fail(ErrorKind::IoError, "row count is not a multiple of velocity cells");
  std::size_t nx_cells = t.rows.size() / nv_cells;
  int n = d == 1 ? int(nx_cells) : isqrt_exact(nx_cells);
  std::vector<double> v;
  v.reserve(t.rows.size());
  for (auto& r : t.rows) v.push_back(r.back());
  PhaseDensity mu(TorusGrid(d, n), VelocityBox(d, n_v, v_max), std::move(v), leak_tol);
  if (!std::isnan(t.mass) && std::abs(t.mass - mu.mass()) > 1e-12)
    fail(ErrorKind::IoError, "mass comment does not match the data");
  return mu;
}

}  // namespace bpl
