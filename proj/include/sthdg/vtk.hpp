#pragma once

#include "sthdg/estimator.hpp"

#include <iosfwd>
#include <string>

namespace sthdg {

// Legacy ASCII VTK (3.0) unstructured grid of the space-time mesh: quads for
// d = 1 with points (x, t, 0), hexahedra for d = 2 with points (x1, x2, t).
// Point data u_h per element corner; cell data level, slab and eta_K.
void write_vtk(std::ostream& os, const DiscreteSolution& sol, const EstimateResult* est = nullptr);

// Cut of the space-time solution at t = const: lines for d = 1, quads for d = 2.
void write_vtk_slice(std::ostream& os, const DiscreteSolution& sol, double t);

void write_vtk_file(const std::string& path, const DiscreteSolution& sol, const EstimateResult* est = nullptr);
void write_vtk_slice_file(const std::string& path, const DiscreteSolution& sol, double t);

}  // namespace sthdg
