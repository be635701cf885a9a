#include "sthdg/vtk.hpp"

#include <cstdio>
#include <fstream>
#include <ostream>
#include <stdexcept>
#include <vector>

namespace sthdg {

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

// corner order of VTK_QUAD / VTK_HEXAHEDRON over the spatial axes then time
const int kQuad[4][2] = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};

void header(std::ostream& os, const std::string& title) {
  os << "# vtk DataFile Version 3.0\n" << title << "\nASCII\nDATASET UNSTRUCTURED_GRID\n";
}

}  // namespace

void write_vtk(std::ostream& os, const DiscreteSolution& sol, const EstimateResult* est) {
  const auto& mesh = sol.space->mesh();
  const int d = mesh.spatial_dim();
  const std::size_t ne = mesh.n_elements();
  const int nc = d == 1 ? 4 : 8;
  header(os, "space-time solution");
  os << "POINTS " << ne * nc << " double\n";
  std::vector<double> values;
  values.reserve(ne * nc);
  for (std::size_t k = 0; k < ne; ++k) {
    const Box& b = mesh.element(static_cast<int>(k)).box;
    for (int c = 0; c < nc; ++c) {
      Point x{};
      const int tsel = d == 1 ? kQuad[c][1] : c / 4;
      const int q = d == 1 ? c : c % 4;
      x[0] = tsel ? b.hi[0] : b.lo[0];
      x[1] = kQuad[q][0] ? b.hi[1] : b.lo[1];
      if (d == 2) x[2] = kQuad[q][1] ? b.hi[2] : b.lo[2];
      if (d == 1)
        os << num(x[1]) << ' ' << num(x[0]) << " 0\n";
      else
        os << num(x[1]) << ' ' << num(x[2]) << ' ' << num(x[0]) << '\n';
      values.push_back(sol.evaluate(static_cast<int>(k), x).value);
    }
  }
  os << "CELLS " << ne << ' ' << ne * (nc + 1) << '\n';
  for (std::size_t k = 0; k < ne; ++k) {
    os << nc;
    for (int c = 0; c < nc; ++c) os << ' ' << k * nc + c;
    os << '\n';
  }
  os << "CELL_TYPES " << ne << '\n';
  for (std::size_t k = 0; k < ne; ++k) os << (d == 1 ? 9 : 12) << '\n';
  os << "CELL_DATA " << ne << '\n';
  os << "SCALARS level int 1\nLOOKUP_TABLE default\n";
  for (const auto& e : mesh.elements()) os << e.level << '\n';
  os << "SCALARS slab int 1\nLOOKUP_TABLE default\n";
  for (const auto& e : mesh.elements()) os << e.slab << '\n';
  if (est) {
    os << "SCALARS eta_K double 1\nLOOKUP_TABLE default\n";
    for (const auto& e : est->elements) os << num(e.eta) << '\n';
  }
  os << "POINT_DATA " << values.size() << '\n';
  os << "SCALARS u_h double 1\nLOOKUP_TABLE default\n";
  for (double v : values) os << num(v) << '\n';
}

void write_vtk_slice(std::ostream& os, const DiscreteSolution& sol, double t) {
  const auto& mesh = sol.space->mesh();
  const int d = mesh.spatial_dim();
  const double T = mesh.domain().t_end;
  if (t < 0.0 || t > T) throw std::invalid_argument("slice time outside [0, T]");
  std::vector<int> cut;
  for (std::size_t k = 0; k < mesh.n_elements(); ++k) {
    const Box& b = mesh.element(static_cast<int>(k)).box;
    if ((b.lo[0] <= t && t < b.hi[0]) || (t == T && b.hi[0] == T)) cut.push_back(static_cast<int>(k));
  }
  const int nc = d == 1 ? 2 : 4;
  header(os, "solution slice at t = " + num(t));
  os << "POINTS " << cut.size() * nc << " double\n";
  std::vector<double> values;
  for (int k : cut) {
    const Box& b = mesh.element(k).box;
    for (int c = 0; c < nc; ++c) {
      Point x{};
      x[0] = t;
      x[1] = (d == 1 ? c : kQuad[c][0]) ? b.hi[1] : b.lo[1];
      if (d == 2) x[2] = kQuad[c][1] ? b.hi[2] : b.lo[2];
      os << num(x[1]) << ' ' << num(x[2]) << " 0\n";
      values.push_back(sol.evaluate(k, x).value);
    }
  }
  os << "CELLS " << cut.size() << ' ' << cut.size() * (nc + 1) << '\n';
  for (std::size_t i = 0; i < cut.size(); ++i) {
    os << nc;
    for (int c = 0; c < nc; ++c) os << ' ' << i * nc + c;
    os << '\n';
  }
  os << "CELL_TYPES " << cut.size() << '\n';
  for (std::size_t i = 0; i < cut.size(); ++i) os << (d == 1 ? 3 : 9) << '\n';
  os << "POINT_DATA " << values.size() << '\n';
  os << "SCALARS u_h double 1\nLOOKUP_TABLE default\n";
  for (double v : values) os << num(v) << '\n';
}

void write_vtk_file(const std::string& path, const DiscreteSolution& sol, const EstimateResult* est) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path);
  write_vtk(os, sol, est);
}

void write_vtk_slice_file(const std::string& path, const DiscreteSolution& sol, double t) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path);
  write_vtk_slice(os, sol, t);
}

}  // namespace sthdg
