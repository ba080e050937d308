// Structured conforming triangulations of the unit square and the L-shape,
// with full face connectivity, canonical face normals, and boundary tagging.
#pragma once

#include <array>
#include <iosfwd>
#include <vector>

namespace hdglab {

enum class Diagonal { right, left };

inline constexpr int kNoElement = -1;

struct Face {
  int v0 = 0, v1 = 0;       // traversal order of the left element (counterclockwise)
  int left = kNoElement;    // owning element; normal points out of it
  int right = kNoElement;   // kNoElement on the boundary
  double nx = 0.0, ny = 0.0;
  double length = 0.0;

  bool is_boundary() const { return right == kNoElement; }
};

struct Mesh {
  std::vector<std::array<double, 2>> vertices;
  std::vector<std::array<int, 3>> triangles;       // counterclockwise vertex indices
  std::vector<Face> faces;
  std::vector<std::array<int, 3>> element_faces;   // local edge l -> face index
  std::vector<std::array<int, 3>> element_face_sign;  // +1 if this element is the face's left
  std::vector<int> boundary_faces;                 // in face-construction order
  double h_max = 0.0;

  int n_elements() const { return static_cast<int>(triangles.size()); }
  int n_faces() const { return static_cast<int>(faces.size()); }
  int n_interior_faces() const { return n_faces() - static_cast<int>(boundary_faces.size()); }

  const std::array<double, 2>& vertex(int v) const { return vertices[v]; }
  std::array<std::array<double, 2>, 3> triangle_vertices(int e) const {
    const auto& t = triangles[e];
    return {vertices[t[0]], vertices[t[1]], vertices[t[2]]};
  }
  double element_area(int e) const;
  double element_diameter(int e) const;
  /// Outward unit normal of face `local_edge` as seen from element e.
  std::array<double, 2> outward_normal(int e, int local_edge) const {
    const Face& f = faces[element_faces[e][local_edge]];
    const double s = element_face_sign[e][local_edge];
    return {s * f.nx, s * f.ny};
  }
};

Mesh build_unit_square(int n, Diagonal diagonal = Diagonal::right);
Mesh build_lshape(int n, Diagonal diagonal = Diagonal::right);

struct Segment {
  double x0, y0, x1, y1;
};

/// Faces whose closure lies on the union of the given segments. Throws
/// unresolved-interface when a segment is not a union of mesh faces.
std::vector<int> mark_interface(const Mesh& mesh, const std::vector<Segment>& segments);

/// Boundary segments of the generated domains, convenient for Gamma = boundary.
std::vector<Segment> unit_square_boundary_segments();
std::vector<Segment> lshape_boundary_segments();

/// Plain-text dump: "vertices <V> triangles <T>" header, V coordinate lines,
/// T connectivity lines (0-based).
void dump_mesh(const Mesh& mesh, std::ostream& out);

}  // namespace hdglab
