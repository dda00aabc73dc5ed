#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hdgmax/types.hpp"

namespace hdgmax {

/// Largest accepted number of cube subdivisions per axis (6 n^3 elements).
inline constexpr int max_subdivisions = 64;

struct Face {
  /// Global vertex indices in ascending order.
  std::array<std::size_t, 3> vertex_indices{};
  /// Unit normal pointing out of the owner element.
  Vec3 unit_normal = Vec3::Zero();
  /// Orthonormal in-plane frame. t1 = normalize(x[v1] - x[v0]) and
  /// t2 = unit_normal x t1, with v0 < v1 < v2 the sorted global indices.
  std::array<Vec3, 2> tangent_frame{Vec3::Zero(), Vec3::Zero()};
  bool is_boundary = false;
  std::size_t owner_element = 0;
  std::optional<std::size_t> neighbor_element;
  real area = 0.0;
};

struct ElementFace {
  std::size_t face = 0;
  /// Index (0..5) of the permutation taking the element-local vertex order of
  /// this face to the ascending global order; see Mesh::face_permutation.
  std::uint8_t orientation = 0;
};

/// Affine map x = origin + jacobian * xi from the reference tetrahedron
/// {xi >= 0, sum(xi) <= 1}.
struct ElementGeometry {
  Vec3 origin = Vec3::Zero();
  Mat3 jacobian = Mat3::Identity();
  Mat3 inverse_jacobian = Mat3::Identity();
  real det_jacobian = 1.0;

  Vec3 to_reference(const Vec3& x) const { return inverse_jacobian * (x - origin); }
  Vec3 to_physical(const Vec3& xi) const { return origin + jacobian * xi; }
  real volume() const { return std::abs(det_jacobian) / 6.0; }
};

inline ElementGeometry make_geometry(const std::array<Vec3, 4>& x) {
  ElementGeometry g;
  g.origin = x[0];
  g.jacobian.col(0) = x[1] - x[0];
  g.jacobian.col(1) = x[2] - x[0];
  g.jacobian.col(2) = x[3] - x[0];
  g.det_jacobian = g.jacobian.determinant();
  if (std::abs(g.det_jacobian) < 1e-14)
    throw geometry_error("degenerate element (|det J| = " + std::to_string(std::abs(g.det_jacobian)) + ")");
  g.inverse_jacobian = g.jacobian.inverse();
  return g;
}

/// Local vertex indices of local face l (the face opposite vertex l).
inline constexpr std::array<std::array<int, 3>, 4> local_face_vertices{{
    {1, 2, 3}, {0, 2, 3}, {0, 1, 3}, {0, 1, 2}}};

class Mesh {
public:
  int n_subdivisions = 0;
  std::vector<Vec3> vertices;
  std::vector<std::array<std::size_t, 4>> elements;
  std::vector<Face> faces;
  std::vector<std::array<ElementFace, 4>> element_faces;
  real h_global = 0.0;

  std::size_t num_elements() const { return elements.size(); }
  std::size_t num_faces() const { return faces.size(); }
  std::size_t num_boundary_faces() const {
    return std::count_if(faces.begin(), faces.end(), [](const Face& f) { return f.is_boundary; });
  }
  std::size_t num_interior_faces() const { return num_faces() - num_boundary_faces(); }

  std::array<Vec3, 4> element_vertices(std::size_t e) const {
    check_element(e);
    const auto& v = elements[e];
    return {vertices[v[0]], vertices[v[1]], vertices[v[2]], vertices[v[3]]};
  }

  ElementGeometry geometry(std::size_t e) const { return make_geometry(element_vertices(e)); }

  /// Signed volume under the stored vertex order.
  real signed_volume(std::size_t e) const {
    const auto x = element_vertices(e);
    Mat3 j;
    j << x[1] - x[0], x[2] - x[0], x[3] - x[0];
    return j.determinant() / 6.0;
  }

  /// Longest edge of element e.
  real element_diameter(std::size_t e) const {
    const auto x = element_vertices(e);
    real h = 0.0;
    for (int a = 0; a < 4; ++a)
      for (int b = a + 1; b < 4; ++b) h = std::max(h, (x[a] - x[b]).norm());
    return h;
  }

  std::pair<std::size_t, std::uint8_t> face_of(std::size_t element, int local_face) const {
    check_element(element);
    if (local_face < 0 || local_face > 3)
      throw invalid_argument("local face index " + std::to_string(local_face) + " out of range 0..3");
    const auto& ef = element_faces[element][local_face];
    return {ef.face, ef.orientation};
  }

  /// Unit normal of local face l pointing out of element e.
  Vec3 outward_normal(std::size_t e, int local_face) const {
    const auto [f, orient] = face_of(e, local_face);
    (void)orient;
    return faces[f].owner_element == e ? faces[f].unit_normal : Vec3(-faces[f].unit_normal);
  }

  const Face& face(std::size_t f) const {
    if (f >= faces.size()) throw invalid_argument("face index " + std::to_string(f) + " out of range");
    return faces[f];
  }

  /// Physical point of face f at reference-triangle coordinates (s, t), using
  /// the sorted global vertex order. Both incident elements see the same map.
  Vec3 face_point(std::size_t f, real s, real t) const {
    const auto& v = faces[f].vertex_indices;
    return vertices[v[0]] + s * (vertices[v[1]] - vertices[v[0]]) + t * (vertices[v[2]] - vertices[v[0]]);
  }

  /// The six permutations of {0,1,2}; orientation flags index into this table.
  /// Entry k maps the position in ascending global order to the position in
  /// the element-local order.
  static constexpr std::array<std::array<int, 3>, 6> face_permutation{{
      {0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};

private:
  void check_element(std::size_t e) const {
    if (e >= elements.size())
      throw invalid_argument("element index " + std::to_string(e) + " out of range");
  }
};

inline real mesh_size(const Mesh& mesh) { return mesh.h_global; }

/// Structured Freudenthal/Kuhn mesh of [0,1]^3: n^3 cubes, each split into six
/// congruent tetrahedra sharing the diagonal (0,0,0)-(1,1,1).
inline Mesh build_structured_cube_mesh(int n) {
  if (n < 1) throw invalid_argument("mesh subdivisions must be >= 1");
  if (n > max_subdivisions)
    throw invalid_argument("mesh subdivisions " + std::to_string(n) + " exceed the limit of " +
                           std::to_string(max_subdivisions));
  Mesh mesh;
  mesh.n_subdivisions = n;
  const std::size_t nv = n + 1;
  const real h = 1.0 / n;

  auto vid = [nv](std::size_t i, std::size_t j, std::size_t k) { return i + nv * (j + nv * k); };

  mesh.vertices.reserve(nv * nv * nv);
  for (std::size_t k = 0; k < nv; ++k)
    for (std::size_t j = 0; j < nv; ++j)
      for (std::size_t i = 0; i < nv; ++i)
        mesh.vertices.emplace_back(static_cast<real>(i) * h, static_cast<real>(j) * h, static_cast<real>(k) * h);

  static constexpr std::array<std::array<int, 3>, 6> axis_orders{{
      {0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};

  const std::size_t nc = n;
  mesh.elements.reserve(6 * nc * nc * nc);
  for (std::size_t k = 0; k < nc; ++k)
    for (std::size_t j = 0; j < nc; ++j)
      for (std::size_t i = 0; i < nc; ++i)
        for (const auto& order : axis_orders) {
          std::array<std::size_t, 3> c{i, j, k};
          std::array<std::size_t, 4> tet{};
          tet[0] = vid(c[0], c[1], c[2]);
          for (int s = 0; s < 3; ++s) {
            ++c[order[s]];
            tet[s + 1] = vid(c[0], c[1], c[2]);
          }
          mesh.elements.push_back(tet);
          if (mesh.signed_volume(mesh.elements.size() - 1) < 0.0) std::swap(mesh.elements.back()[2], mesh.elements.back()[3]);
        }

  // Match facets by their sorted vertex triple.
  struct Facet {
    std::array<std::size_t, 3> key;
    std::size_t element;
    int local;
  };
  std::vector<Facet> facets;
  facets.reserve(4 * mesh.elements.size());
  for (std::size_t e = 0; e < mesh.elements.size(); ++e)
    for (int l = 0; l < 4; ++l) {
      std::array<std::size_t, 3> key{};
      for (int a = 0; a < 3; ++a) key[a] = mesh.elements[e][local_face_vertices[l][a]];
      std::sort(key.begin(), key.end());
      facets.push_back({key, e, l});
    }
  std::sort(facets.begin(), facets.end(), [](const Facet& a, const Facet& b) {
    return a.key != b.key ? a.key < b.key : a.element < b.element;
  });

  mesh.element_faces.resize(mesh.elements.size());
  for (std::size_t i = 0; i < facets.size();) {
    std::size_t j = i;
    while (j < facets.size() && facets[j].key == facets[i].key) ++j;
    if (j - i > 2) throw geometry_error("non-conforming mesh: facet shared by more than two elements");

    Face face;
    face.vertex_indices = facets[i].key;
    face.owner_element = facets[i].element;
    face.is_boundary = (j - i == 1);
    if (!face.is_boundary) face.neighbor_element = facets[i + 1].element;

    const Vec3& x0 = mesh.vertices[face.vertex_indices[0]];
    const Vec3& x1 = mesh.vertices[face.vertex_indices[1]];
    const Vec3& x2 = mesh.vertices[face.vertex_indices[2]];
    Vec3 normal = (x1 - x0).cross(x2 - x0);
    face.area = 0.5 * normal.norm();
    normal /= normal.norm();
    const auto& owner = mesh.elements[face.owner_element];
    const Vec3& opposite = mesh.vertices[owner[facets[i].local]];
    if (normal.dot(x0 - opposite) < 0.0) normal = -normal;
    face.unit_normal = normal;
    const Vec3 t1 = (x1 - x0).normalized();
    face.tangent_frame = {t1, normal.cross(t1)};

    const std::size_t fid = mesh.faces.size();
    for (std::size_t m = i; m < j; ++m) {
      const auto& lv = local_face_vertices[facets[m].local];
      std::array<std::size_t, 3> local_order{};
      for (int a = 0; a < 3; ++a) local_order[a] = mesh.elements[facets[m].element][lv[a]];
      std::uint8_t flag = 0;
      for (std::uint8_t p = 0; p < 6; ++p) {
        const auto& perm = Mesh::face_permutation[p];
        bool ok = true;
        for (int a = 0; a < 3; ++a) ok = ok && local_order[perm[a]] == face.vertex_indices[a];
        if (ok) {
          flag = p;
          break;
        }
      }
      mesh.element_faces[facets[m].element][facets[m].local] = {fid, flag};
    }
    mesh.faces.push_back(face);
    i = j;
  }

  for (std::size_t e = 0; e < mesh.elements.size(); ++e) mesh.h_global = std::max(mesh.h_global, mesh.element_diameter(e));
  return mesh;
}

} // namespace hdgmax
