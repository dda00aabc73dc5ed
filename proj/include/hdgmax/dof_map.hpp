#pragma once

#include <cstdint>
#include <vector>

#include "hdgmax/basis.hpp"
#include "hdgmax/mesh.hpp"

namespace hdgmax {

/// Global numbering of the trace unknowns. Each face holds [u^ along t1,
/// u^ along t2, sigma^] in blocks of dim_face, faces ordered by index.
/// sigma^ vanishes on the boundary and is not an unknown there.
struct DofMap {
  int degree = 0;
  int dim_face = 0;
  std::vector<std::size_t> offsets;   // size num_faces + 1
  std::vector<std::uint8_t> boundary; // per face
  std::size_t total_unknowns = 0;

  std::size_t num_faces() const { return boundary.size(); }
  std::size_t face_dofs(std::size_t f) const { return offsets[f + 1] - offsets[f]; }
  std::size_t offset(std::size_t f) const { return offsets[f]; }
  bool is_boundary(std::size_t f) const { return boundary[f] != 0; }
};

inline DofMap build_dof_map(const Mesh& mesh, int p) {
  if (p < 1 || p > max_basis_degree) throw invalid_argument("polynomial order out of range");
  DofMap map;
  map.degree = p;
  map.dim_face = face_dimension(p);
  const std::size_t nf = static_cast<std::size_t>(map.dim_face);
  map.offsets.resize(mesh.num_faces() + 1);
  map.boundary.resize(mesh.num_faces());
  std::size_t off = 0;
  for (std::size_t f = 0; f < mesh.num_faces(); ++f) {
    map.offsets[f] = off;
    map.boundary[f] = mesh.faces[f].is_boundary ? 1 : 0;
    off += (mesh.faces[f].is_boundary ? 2 : 3) * nf;
  }
  map.offsets.back() = off;
  map.total_unknowns = off;
  return map;
}

/// Trace DOFs counted as 3 dim_face per face over every face, sigma^ included
/// on the boundary. This is the convention of published HDG DOF tables.
inline std::size_t all_face_dofs(const Mesh& mesh, int p) {
  return 3 * static_cast<std::size_t>(face_dimension(p)) * mesh.num_faces();
}

} // namespace hdgmax
