#include "hdglab/postprocess.hpp"

#include <bit>
#include <cstdint>
#include <map>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "hdglab/errors.hpp"
#include "hdglab/linalg.hpp"

namespace hdglab {

void postprocess(const Mesh& mesh, std::shared_ptr<const ReferenceElement> ref_star,
                 FieldSolution& solution, const Coefficient& c) {
  if (solution.mesh != &mesh) fail(ErrorCode::invalid_parameter, "solution belongs to another mesh");
  const int k = solution.degree;
  if (!ref_star) ref_star = std::make_shared<ReferenceElement>(k + 1, 2 * (k + 1) + 3);
  if (ref_star->degree() != k + 1)
    fail(ErrorCode::invalid_parameter, "postprocess reference element must have degree k+1");

  const int m = solution.m();
  const int ms = ref_star->dim();
  const TriangleRule& tq = ref_star->triangle_rule();
  // P^k basis evaluated at the star rule, for q_h and u_h on each element.
  const DenseMatrix base_k = solution.ref->eval_basis(tq.x, tq.y);

  // The augmented matrix [[stiffness, mean],[mean^T, 0]] depends on the
  // Jacobian only, so congruent elements share one factorization.
  using Key = std::array<std::uint64_t, 4>;
  auto bits = [](double v) { return std::bit_cast<std::uint64_t>(v); };
  std::map<Key, std::shared_ptr<const LuFactor>> cache;
  std::vector<std::shared_ptr<const LuFactor>> lu_of(mesh.n_elements());
  std::vector<AffineMap> maps(mesh.n_elements());
  for (int e = 0; e < mesh.n_elements(); ++e) {
    const auto verts = mesh.triangle_vertices(e);
    maps[e] = AffineMap::from_triangle(verts[0], verts[1], verts[2]);
    const AffineMap& map = maps[e];
    const Key key{bits(map.j00), bits(map.j01), bits(map.j10), bits(map.j11)};
    auto it = cache.find(key);
    if (it == cache.end()) {
      DenseMatrix M(ms + 1, ms + 1);
      for (int p = 0; p < tq.size(); ++p) {
        const double wq = tq.w[p] * map.det;
        for (int i = 0; i < ms; ++i) {
          const auto gi = map.push_gradient(ref_star->gradx_at_quad()(p, i), ref_star->grady_at_quad()(p, i));
          for (int j = 0; j <= i; ++j) {
            const auto gj = map.push_gradient(ref_star->gradx_at_quad()(p, j), ref_star->grady_at_quad()(p, j));
            M(i, j) += wq * (gi[0] * gj[0] + gi[1] * gj[1]);
          }
          M(i, ms) += wq * ref_star->basis_at_quad()(p, i);
        }
      }
      for (int i = 0; i < ms; ++i)
        for (int j = i + 1; j < ms; ++j) M(i, j) = M(j, i);
      for (int j = 0; j < ms; ++j) M(ms, j) = M(j, ms);
      std::shared_ptr<const LuFactor> lu;
      try {
        lu = std::make_shared<LuFactor>(std::move(M));
      } catch (const Error& err) {
        if (err.code() == ErrorCode::singular_matrix)
          fail(ErrorCode::postprocess_failure, "local postprocessing system is singular");
        throw;
      }
      it = cache.emplace(key, std::move(lu)).first;
    }
    lu_of[e] = it->second;
  }

  solution.ustar.assign(static_cast<std::size_t>(mesh.n_elements()) * ms, 0.0);
  solution.ref_star = ref_star;

#ifdef _OPENMP
  omp_set_num_threads(worker_thread_count());
#pragma omp parallel
#endif
  {
    std::vector<double> rhs(ms + 1);
#ifdef _OPENMP
#pragma omp for schedule(static)
#endif
    for (int e = 0; e < mesh.n_elements(); ++e) {
      const AffineMap& map = maps[e];
      const auto qe = solution.q_elem(e);
      const auto ue = solution.u_elem(e);
      std::fill(rhs.begin(), rhs.end(), 0.0);
      for (int p = 0; p < tq.size(); ++p) {
        const double wq = tq.w[p] * map.det;
        double qx = 0.0, qy = 0.0, uv = 0.0;
        for (int i = 0; i < m; ++i) {
          qx += qe[i] * base_k(p, i);
          qy += qe[m + i] * base_k(p, i);
          uv += ue[i] * base_k(p, i);
        }
        const auto xy = map.map(tq.x[p], tq.y[p]);
        const auto cv = c(xy[0], xy[1]);
        const double cqx = cv[0] * qx + cv[1] * qy;
        const double cqy = cv[2] * qx + cv[3] * qy;
        for (int i = 0; i < ms; ++i) {
          const auto gi = map.push_gradient(ref_star->gradx_at_quad()(p, i), ref_star->grady_at_quad()(p, i));
          rhs[i] -= wq * (cqx * gi[0] + cqy * gi[1]);
        }
        rhs[ms] += wq * uv;
      }
      lu_of[e]->solve_in_place(rhs);
      for (int i = 0; i < ms; ++i) solution.ustar[static_cast<std::size_t>(e) * ms + i] = rhs[i];
    }
  }
}

}  // namespace hdglab
