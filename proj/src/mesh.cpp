#include "hdglab/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <string>

#include "hdglab/errors.hpp"

namespace hdglab {

double Mesh::element_area(int e) const {
  const auto v = triangle_vertices(e);
  return 0.5 * ((v[1][0] - v[0][0]) * (v[2][1] - v[0][1]) - (v[2][0] - v[0][0]) * (v[1][1] - v[0][1]));
}

double Mesh::element_diameter(int e) const {
  const auto v = triangle_vertices(e);
  double d = 0.0;
  for (int i = 0; i < 3; ++i) {
    const auto& a = v[i];
    const auto& b = v[(i + 1) % 3];
    d = std::max(d, std::hypot(b[0] - a[0], b[1] - a[1]));
  }
  return d;
}

namespace {

void add_triangle(Mesh& mesh, int a, int b, int c) { mesh.triangles.push_back({a, b, c}); }

// Build faces from triangle connectivity. The first element touching a face
// becomes its left element; the stored traversal (v0, v1) and normal are that
// element's counterclockwise edge and outward normal.
void build_connectivity(Mesh& mesh) {
  std::map<std::pair<int, int>, int> face_of;
  mesh.element_faces.assign(mesh.triangles.size(), {0, 0, 0});
  mesh.element_face_sign.assign(mesh.triangles.size(), {0, 0, 0});
  for (int e = 0; e < mesh.n_elements(); ++e) {
    const auto& t = mesh.triangles[e];
    for (int le = 0; le < 3; ++le) {
      const int a = t[le], b = t[(le + 1) % 3];
      const auto key = std::minmax(a, b);
      auto it = face_of.find(key);
      if (it == face_of.end()) {
        Face f;
        f.v0 = a;
        f.v1 = b;
        f.left = e;
        const double dx = mesh.vertices[b][0] - mesh.vertices[a][0];
        const double dy = mesh.vertices[b][1] - mesh.vertices[a][1];
        f.length = std::hypot(dx, dy);
        f.nx = dy / f.length;   // outward normal of a counterclockwise edge
        f.ny = -dx / f.length;
        const int idx = mesh.n_faces();
        mesh.faces.push_back(f);
        face_of.emplace(key, idx);
        mesh.element_faces[e][le] = idx;
        mesh.element_face_sign[e][le] = +1;
      } else {
        Face& f = mesh.faces[it->second];
        if (f.right != kNoElement)
          fail(ErrorCode::invalid_parameter, "face shared by more than two elements");
        f.right = e;
        mesh.element_faces[e][le] = it->second;
        mesh.element_face_sign[e][le] = -1;
      }
    }
  }
  for (int f = 0; f < mesh.n_faces(); ++f)
    if (mesh.faces[f].is_boundary()) mesh.boundary_faces.push_back(f);
  mesh.h_max = 0.0;
  for (int e = 0; e < mesh.n_elements(); ++e) mesh.h_max = std::max(mesh.h_max, mesh.element_diameter(e));
}

Mesh build_grid(int n, Diagonal diagonal, bool lshape) {
  Mesh mesh;
  const int nv = n + 1;
  mesh.vertices.reserve(static_cast<std::size_t>(nv) * nv);
  for (int j = 0; j < nv; ++j)
    for (int i = 0; i < nv; ++i)
      mesh.vertices.push_back({static_cast<double>(i) / n, static_cast<double>(j) / n});
  auto vid = [nv](int i, int j) { return j * nv + i; };
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      if (lshape && 2 * i >= n && 2 * (j + 1) <= n) continue;  // cell inside [1/2,1) x (0,1/2]
      const int v00 = vid(i, j), v10 = vid(i + 1, j), v01 = vid(i, j + 1), v11 = vid(i + 1, j + 1);
      if (diagonal == Diagonal::right) {
        add_triangle(mesh, v00, v10, v11);
        add_triangle(mesh, v00, v11, v01);
      } else {
        add_triangle(mesh, v00, v10, v01);
        add_triangle(mesh, v10, v11, v01);
      }
    }
  }
  if (lshape) {
    // Compact away unreferenced grid vertices.
    std::vector<int> remap(mesh.vertices.size(), -1);
    std::vector<std::array<double, 2>> kept;
    for (auto& t : mesh.triangles)
      for (int& v : t) {
        if (remap[v] == -1) {
          remap[v] = static_cast<int>(kept.size());
          kept.push_back(mesh.vertices[v]);
        }
        v = remap[v];
      }
    mesh.vertices = std::move(kept);
  }
  build_connectivity(mesh);
  return mesh;
}

}  // namespace

Mesh build_unit_square(int n, Diagonal diagonal) {
  if (n < 1) fail(ErrorCode::invalid_parameter, "unit-square refinement must satisfy n >= 1");
  return build_grid(n, diagonal, false);
}

Mesh build_lshape(int n, Diagonal diagonal) {
  if (n < 2 || n % 2 != 0)
    fail(ErrorCode::invalid_parameter, "L-shape refinement must be even and >= 2");
  return build_grid(n, diagonal, true);
}

namespace {

bool point_on_segment(double px, double py, const Segment& s, double tol) {
  const double dx = s.x1 - s.x0, dy = s.y1 - s.y0;
  const double len2 = dx * dx + dy * dy;
  const double cross = (px - s.x0) * dy - (py - s.y0) * dx;
  if (std::abs(cross) > tol * std::sqrt(len2)) return false;
  const double t = ((px - s.x0) * dx + (py - s.y0) * dy) / len2;
  return t >= -tol && t <= 1.0 + tol;
}

}  // namespace

std::vector<int> mark_interface(const Mesh& mesh, const std::vector<Segment>& segments) {
  constexpr double tol = 1e-12;
  for (const auto& s : segments) {
    for (auto [ex, ey] : {std::array<double, 2>{s.x0, s.y0}, std::array<double, 2>{s.x1, s.y1}}) {
      bool found = false;
      for (const auto& v : mesh.vertices)
        if (std::abs(v[0] - ex) < tol && std::abs(v[1] - ey) < tol) { found = true; break; }
      if (!found)
        fail(ErrorCode::unresolved_interface, "segment endpoint is not a mesh vertex");
    }
  }
  std::vector<int> marked;
  std::vector<double> covered(segments.size(), 0.0);
  for (int f = 0; f < mesh.n_faces(); ++f) {
    const Face& face = mesh.faces[f];
    const auto& a = mesh.vertices[face.v0];
    const auto& b = mesh.vertices[face.v1];
    bool on = false;
    for (std::size_t s = 0; s < segments.size(); ++s) {
      if (point_on_segment(a[0], a[1], segments[s], tol) &&
          point_on_segment(b[0], b[1], segments[s], tol)) {
        covered[s] += face.length;
        on = true;
      }
    }
    if (on) marked.push_back(f);
  }
  for (std::size_t s = 0; s < segments.size(); ++s) {
    const double len = std::hypot(segments[s].x1 - segments[s].x0, segments[s].y1 - segments[s].y0);
    if (std::abs(covered[s] - len) > 1e-10 * std::max(len, 1.0))
      fail(ErrorCode::unresolved_interface,
           "segment not resolved by mesh faces (covered " + std::to_string(covered[s]) + " of " +
               std::to_string(len) + ")");
  }
  return marked;
}

std::vector<Segment> unit_square_boundary_segments() {
  return {{0, 0, 1, 0}, {1, 0, 1, 1}, {1, 1, 0, 1}, {0, 1, 0, 0}};
}

std::vector<Segment> lshape_boundary_segments() {
  return {{0, 0, 0.5, 0}, {0.5, 0, 0.5, 0.5}, {0.5, 0.5, 1, 0.5},
          {1, 0.5, 1, 1}, {1, 1, 0, 1},       {0, 1, 0, 0}};
}

void dump_mesh(const Mesh& mesh, std::ostream& out) {
  out << "vertices " << mesh.vertices.size() << " triangles " << mesh.triangles.size() << "\n";
  for (const auto& v : mesh.vertices) out << v[0] << " " << v[1] << "\n";
  for (const auto& t : mesh.triangles) out << t[0] << " " << t[1] << " " << t[2] << "\n";
}

}  // namespace hdglab
