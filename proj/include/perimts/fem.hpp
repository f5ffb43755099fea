#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <map>
#include <vector>

#include "perimts/linalg.hpp"
#include "perimts/material.hpp"
#include "perimts/mesh.hpp"

namespace perimts {

struct ShapeEval {
    int nn = 0;
    std::array<double, 8> N{};
    std::array<std::array<double, 3>, 8> dNdx{};  // physical gradients
    double detJ = 0.0;
};

inline void reference_shape(ElemKind kind, const double* xi, double* N, double grad[][3]) {
    if (kind == ElemKind::quad4) {
        static const double sx[4] = {-1, 1, 1, -1};
        static const double sy[4] = {-1, -1, 1, 1};
        for (int a = 0; a < 4; ++a) {
            N[a] = 0.25 * (1 + sx[a] * xi[0]) * (1 + sy[a] * xi[1]);
            if (grad) {
                grad[a][0] = 0.25 * sx[a] * (1 + sy[a] * xi[1]);
                grad[a][1] = 0.25 * sy[a] * (1 + sx[a] * xi[0]);
                grad[a][2] = 0.0;
            }
        }
    } else {
        static const double sx[8] = {-1, 1, 1, -1, -1, 1, 1, -1};
        static const double sy[8] = {-1, -1, 1, 1, -1, -1, 1, 1};
        static const double sz[8] = {-1, -1, -1, -1, 1, 1, 1, 1};
        for (int a = 0; a < 8; ++a) {
            N[a] = 0.125 * (1 + sx[a] * xi[0]) * (1 + sy[a] * xi[1]) * (1 + sz[a] * xi[2]);
            if (grad) {
                grad[a][0] = 0.125 * sx[a] * (1 + sy[a] * xi[1]) * (1 + sz[a] * xi[2]);
                grad[a][1] = 0.125 * sy[a] * (1 + sx[a] * xi[0]) * (1 + sz[a] * xi[2]);
                grad[a][2] = 0.125 * sz[a] * (1 + sx[a] * xi[0]) * (1 + sy[a] * xi[1]);
            }
        }
    }
}

// Shape values, physical gradients and Jacobian determinant at a reference
// point of an element.
inline ShapeEval shape_and_gradients(const Mesh& mesh, const Element& e, const double* xi) {
    ShapeEval s;
    s.nn = e.node_count();
    double gref[8][3];
    reference_shape(e.kind, xi, s.N.data(), gref);
    const int d = mesh.dim;
    double J[3][3] = {{0, 0, 0}, {0, 0, 0}, {0, 0, 0}};
    for (int a = 0; a < s.nn; ++a) {
        const Point& p = mesh.nodes[e.node_ids[a]];
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) J[i][j] += p[i] * gref[a][j];
    }
    double inv[3][3];
    if (d == 2) {
        s.detJ = J[0][0] * J[1][1] - J[0][1] * J[1][0];
        if (s.detJ <= 0.0)
            throw ConfigError("inverted element " + std::to_string(e.id) +
                              " (non-positive Jacobian)");
        const double r = 1.0 / s.detJ;
        inv[0][0] = J[1][1] * r;
        inv[0][1] = -J[0][1] * r;
        inv[1][0] = -J[1][0] * r;
        inv[1][1] = J[0][0] * r;
    } else {
        s.detJ = J[0][0] * (J[1][1] * J[2][2] - J[1][2] * J[2][1]) -
                 J[0][1] * (J[1][0] * J[2][2] - J[1][2] * J[2][0]) +
                 J[0][2] * (J[1][0] * J[2][1] - J[1][1] * J[2][0]);
        if (s.detJ <= 0.0)
            throw ConfigError("inverted element " + std::to_string(e.id) +
                              " (non-positive Jacobian)");
        const double r = 1.0 / s.detJ;
        inv[0][0] = (J[1][1] * J[2][2] - J[1][2] * J[2][1]) * r;
        inv[0][1] = (J[0][2] * J[2][1] - J[0][1] * J[2][2]) * r;
        inv[0][2] = (J[0][1] * J[1][2] - J[0][2] * J[1][1]) * r;
        inv[1][0] = (J[1][2] * J[2][0] - J[1][0] * J[2][2]) * r;
        inv[1][1] = (J[0][0] * J[2][2] - J[0][2] * J[2][0]) * r;
        inv[1][2] = (J[0][2] * J[1][0] - J[0][0] * J[1][2]) * r;
        inv[2][0] = (J[1][0] * J[2][1] - J[1][1] * J[2][0]) * r;
        inv[2][1] = (J[0][1] * J[2][0] - J[0][0] * J[2][1]) * r;
        inv[2][2] = (J[0][0] * J[1][1] - J[0][1] * J[1][0]) * r;
    }
    for (int a = 0; a < s.nn; ++a)
        for (int i = 0; i < d; ++i) {
            double v = 0.0;
            for (int j = 0; j < d; ++j) v += gref[a][j] * inv[j][i];
            s.dNdx[a][i] = v;
        }
    return s;
}

inline std::vector<std::array<double, 3>> gauss_points(int dim) {
    const double g = 1.0 / std::sqrt(3.0);
    std::vector<std::array<double, 3>> pts;
    if (dim == 2) {
        for (int j = 0; j < 2; ++j)
            for (int i = 0; i < 2; ++i)
                pts.push_back({i ? g : -g, j ? g : -g, 0.0});
    } else {
        for (int k = 0; k < 2; ++k)
            for (int j = 0; j < 2; ++j)
                for (int i = 0; i < 2; ++i)
                    pts.push_back({i ? g : -g, j ? g : -g, k ? g : -g});
    }
    return pts;
}

// Strain matrix in Voigt order (xx, yy, xy) or (xx, yy, zz, xy, yz, zx).
inline DenseMatrix strain_matrix(const ShapeEval& s, int dim) {
    const int rows = dim == 2 ? 3 : 6;
    DenseMatrix b(rows, dim * s.nn);
    for (int a = 0; a < s.nn; ++a) {
        const int c = dim * a;
        if (dim == 2) {
            b(0, c) = s.dNdx[a][0];
            b(1, c + 1) = s.dNdx[a][1];
            b(2, c) = s.dNdx[a][1];
            b(2, c + 1) = s.dNdx[a][0];
        } else {
            b(0, c) = s.dNdx[a][0];
            b(1, c + 1) = s.dNdx[a][1];
            b(2, c + 2) = s.dNdx[a][2];
            b(3, c) = s.dNdx[a][1];
            b(3, c + 1) = s.dNdx[a][0];
            b(4, c + 1) = s.dNdx[a][2];
            b(4, c + 2) = s.dNdx[a][1];
            b(5, c) = s.dNdx[a][2];
            b(5, c + 2) = s.dNdx[a][0];
        }
    }
    return b;
}

// k_e = int B^T D B dV with 2x2(x2) Gauss quadrature.
inline DenseMatrix element_stiffness(const Mesh& mesh, const Element& e, const DenseMatrix& d) {
    const int dim = mesh.dim;
    const int ndof = dim * e.node_count();
    DenseMatrix k(ndof, ndof);
    for (const auto& xi : gauss_points(dim)) {
        const ShapeEval s = shape_and_gradients(mesh, e, xi.data());
        const DenseMatrix b = strain_matrix(s, dim);
        const std::size_t rows = b.rows();
        // k += B^T D B * detJ
        DenseMatrix db(rows, ndof);
        for (std::size_t i = 0; i < rows; ++i)
            for (int j = 0; j < ndof; ++j) {
                double v = 0.0;
                for (std::size_t r = 0; r < rows; ++r) v += d(i, r) * b(r, j);
                db(i, j) = v;
            }
        for (int i = 0; i < ndof; ++i)
            for (int j = 0; j < ndof; ++j) {
                double v = 0.0;
                for (std::size_t r = 0; r < rows; ++r) v += b(r, i) * db(r, j);
                k(i, j) += v * s.detJ;
            }
    }
    return k;
}

// Row-sum lumping of the consistent mass; per-node mass, identical in every
// direction. Sums to rho * V_e because the shape functions partition unity.
inline std::vector<double> lumped_mass(const Mesh& mesh, const Element& e, double rho) {
    std::vector<double> m(e.node_count(), 0.0);
    for (const auto& xi : gauss_points(mesh.dim)) {
        const ShapeEval s = shape_and_gradients(mesh, e, xi.data());
        for (int a = 0; a < s.nn; ++a) m[a] += rho * s.N[a] * s.detJ;
    }
    return m;
}

// Per-Gauss-point strain and stress from the element displacement vector.
inline std::vector<std::pair<Vector, Vector>> element_strain_stress(const Mesh& mesh,
                                                                    const Element& e,
                                                                    const Vector& u_e,
                                                                    const DenseMatrix& d) {
    std::vector<std::pair<Vector, Vector>> out;
    for (const auto& xi : gauss_points(mesh.dim)) {
        const ShapeEval s = shape_and_gradients(mesh, e, xi.data());
        const DenseMatrix b = strain_matrix(s, mesh.dim);
        Vector eps = b.multiply(u_e);
        Vector sig = d.multiply(eps);
        out.emplace_back(std::move(eps), std::move(sig));
    }
    return out;
}

// ---- loads and kinematic constraints ----

struct TractionPatch {
    BoundsBox box;                     // selects boundary faces by face center
    std::array<double, 3> value{};     // Pa
};

struct KinematicBc {
    BoundsBox box;       // selects nodes
    int component = 0;   // 0..dim-1
    double velocity = 0; // prescribed velocity; 0 with fix_all for clamped
    bool fix_all = false;
};

struct BodyForcePatch {
    BoundsBox box;                  // selects elements by centroid
    std::array<double, 3> value{};  // N/m^d
};

struct PressurePatch {
    BoundsBox box;       // selects boundary faces by face center
    double value = 0.0;  // Pa; positive presses on the surface (traction -p n)
};

struct LoadSpec {
    std::vector<TractionPatch> tractions;
    std::vector<PressurePatch> pressures;
    std::array<double, 3> body_force{};  // N/m^d, whole domain
    std::vector<BodyForcePatch> body_patches;
    std::vector<KinematicBc> kinematic;
};

struct BoundaryFace {
    int element = -1;
    std::array<int, 4> nodes{};
    int nn = 0;
    Point center{};
};

inline std::vector<BoundaryFace> boundary_faces(const Mesh& mesh) {
    // faces referenced by exactly one element are on the boundary
    static const int quad_edges[4][2] = {{0, 1}, {1, 2}, {2, 3}, {3, 0}};
    static const int hex_faces[6][4] = {{0, 1, 2, 3}, {4, 5, 6, 7}, {0, 1, 5, 4},
                                        {1, 2, 6, 5}, {2, 3, 7, 6}, {3, 0, 4, 7}};
    std::map<std::array<int, 4>, std::pair<int, BoundaryFace>> faces;
    for (const auto& e : mesh.elements) {
        const int nf = mesh.dim == 2 ? 4 : 6;
        for (int f = 0; f < nf; ++f) {
            BoundaryFace bf;
            bf.element = e.id;
            bf.nn = mesh.dim == 2 ? 2 : 4;
            for (int a = 0; a < bf.nn; ++a)
                bf.nodes[a] = e.node_ids[mesh.dim == 2 ? quad_edges[f][a] : hex_faces[f][a]];
            std::array<int, 4> key = bf.nodes;
            std::sort(key.begin(), key.begin() + bf.nn);
            for (int a = bf.nn; a < 4; ++a) key[a] = -1;
            auto [it, inserted] = faces.try_emplace(key, std::make_pair(0, bf));
            ++it->second.first;
        }
    }
    std::vector<BoundaryFace> out;
    for (auto& [key, entry] : faces) {
        if (entry.first != 1) continue;
        BoundaryFace& bf = entry.second;
        bf.center = {0, 0, 0};
        for (int a = 0; a < bf.nn; ++a)
            for (int k = 0; k < 3; ++k) bf.center[k] += mesh.nodes[bf.nodes[a]][k] / bf.nn;
        out.push_back(bf);
    }
    std::sort(out.begin(), out.end(), [](const BoundaryFace& a, const BoundaryFace& b) {
        return a.nodes < b.nodes;
    });
    return out;
}

// Outward unit normal of a boundary face, oriented away from its element.
inline Point face_outward_normal(const Mesh& mesh, const BoundaryFace& face) {
    Point n{0, 0, 0};
    if (mesh.dim == 2) {
        const Point& a = mesh.nodes[face.nodes[0]];
        const Point& b = mesh.nodes[face.nodes[1]];
        n = {b[1] - a[1], a[0] - b[0], 0.0};
    } else {
        const Point& a = mesh.nodes[face.nodes[0]];
        const Point& b = mesh.nodes[face.nodes[1]];
        const Point& c = mesh.nodes[face.nodes[2]];
        const double u[3] = {b[0] - a[0], b[1] - a[1], b[2] - a[2]};
        const double v[3] = {c[0] - a[0], c[1] - a[1], c[2] - a[2]};
        n = {u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]};
    }
    double len = std::sqrt(n[0] * n[0] + n[1] * n[1] + n[2] * n[2]);
    if (len == 0.0) throw ConfigError("degenerate boundary face");
    for (int k = 0; k < 3; ++k) n[k] /= len;
    const Point& ec = mesh.elements[face.element].centroid;
    double toward = 0.0;
    for (int k = 0; k < 3; ++k) toward += n[k] * (face.center[k] - ec[k]);
    if (toward < 0.0)
        for (int k = 0; k < 3; ++k) n[k] = -n[k];
    return n;
}

// Nodal forces of a constant traction on a boundary face (edge length / face
// area quadrature with the face shape functions).
inline void integrate_face_traction(const Mesh& mesh, const BoundaryFace& face,
                                    const std::array<double, 3>& t,
                                    std::vector<std::pair<int, Point>>& out) {
    if (mesh.dim == 2) {
        const Point& a = mesh.nodes[face.nodes[0]];
        const Point& b = mesh.nodes[face.nodes[1]];
        const double len = distance(a, b);
        for (int n = 0; n < 2; ++n)
            out.push_back({face.nodes[n], {t[0] * len / 2, t[1] * len / 2, t[2] * len / 2}});
        return;
    }
    const double g = 1.0 / std::sqrt(3.0);
    std::array<double, 4> nodal{};
    for (int q = 0; q < 4; ++q) {
        const double xi = (q & 1) ? g : -g, eta = (q & 2) ? g : -g;
        const double N[4] = {0.25 * (1 - xi) * (1 - eta), 0.25 * (1 + xi) * (1 - eta),
                             0.25 * (1 + xi) * (1 + eta), 0.25 * (1 - xi) * (1 + eta)};
        const double dxi[4] = {-0.25 * (1 - eta), 0.25 * (1 - eta), 0.25 * (1 + eta),
                               -0.25 * (1 + eta)};
        const double deta[4] = {-0.25 * (1 - xi), -0.25 * (1 + xi), 0.25 * (1 + xi),
                                0.25 * (1 - xi)};
        double tu[3] = {0, 0, 0}, tv[3] = {0, 0, 0};
        for (int a = 0; a < 4; ++a) {
            const Point& p = mesh.nodes[face.nodes[a]];
            for (int k = 0; k < 3; ++k) {
                tu[k] += dxi[a] * p[k];
                tv[k] += deta[a] * p[k];
            }
        }
        const double cx = tu[1] * tv[2] - tu[2] * tv[1];
        const double cy = tu[2] * tv[0] - tu[0] * tv[2];
        const double cz = tu[0] * tv[1] - tu[1] * tv[0];
        const double dA = std::sqrt(cx * cx + cy * cy + cz * cz);
        for (int a = 0; a < 4; ++a) nodal[a] += N[a] * dA;
    }
    for (int a = 0; a < 4; ++a)
        out.push_back({face.nodes[a], {t[0] * nodal[a], t[1] * nodal[a], t[2] * nodal[a]}});
}

// Weighted traction and pressure forces over the boundary faces a subdomain
// owns; pd_side selects the (1-alpha) weighting. With require_hit set, a
// patch matching no face of this subdomain is a configuration error
// (undecomposed runs); coupled runs validate patch coverage globally.
template <class Dofs>
void add_surface_loads(const Mesh& mesh, const Dofs& dofs, const LoadSpec& loads,
                       const std::vector<double>& alpha, bool pd_side, bool require_hit,
                       std::vector<double>& p_ext) {
    if (loads.tractions.empty() && loads.pressures.empty()) return;
    const auto faces = boundary_faces(mesh);
    const double tol = 1e-12 * mesh.char_length();
    std::vector<std::pair<int, Point>> nodal;
    auto apply = [&](const BoundsBox& box, auto&& traction_of, const char* what) {
        bool hit = false;
        for (const auto& f : faces) {
            if (!box.contains(f.center, mesh.dim, tol)) continue;
            if (!dofs.has_node(f.nodes[0])) continue;  // face outside this subdomain
            const double w = pd_side ? 1.0 - alpha[f.element] : alpha[f.element];
            nodal.clear();
            integrate_face_traction(mesh, f, traction_of(f), nodal);
            for (const auto& [node, force] : nodal)
                for (int ci = 0; ci < mesh.dim; ++ci)
                    p_ext[dofs.dof(node, ci)] += w * force[ci];
            hit = true;
        }
        if (!hit && require_hit)
            throw ConfigError(std::string(what) + " patch selects no boundary face");
    };
    for (const auto& patch : loads.tractions)
        apply(patch.box, [&](const BoundaryFace&) { return patch.value; }, "traction");
    for (const auto& patch : loads.pressures)
        apply(patch.box,
              [&](const BoundaryFace& f) {
                  const Point n = face_outward_normal(mesh, f);
                  return std::array<double, 3>{-patch.value * n[0], -patch.value * n[1],
                                               -patch.value * n[2]};
              },
              "pressure");
}

// ---- subdomain DOF numbering and weighted global assembly ----

struct DofMap {
    int dim = 2;
    int n_dof = 0;
    std::vector<int> node_dof;       // node id -> first dof, -1 if absent
    std::vector<int> active_nodes;   // sorted

    int dof(int node, int comp) const { return node_dof[node] + comp; }
    bool has_node(int node) const { return node_dof[node] >= 0; }
};

inline DofMap build_dof_map(const Mesh& mesh, const std::vector<int>& active_elements) {
    DofMap map;
    map.dim = mesh.dim;
    map.node_dof.assign(mesh.node_count(), -1);
    for (int eid : active_elements) {
        const auto& e = mesh.elements[eid];
        for (int a = 0; a < e.node_count(); ++a) map.node_dof[e.node_ids[a]] = 0;
    }
    for (int n = 0; n < mesh.node_count(); ++n) {
        if (map.node_dof[n] == 0) {
            map.node_dof[n] = map.n_dof;
            map.n_dof += mesh.dim;
            map.active_nodes.push_back(n);
        } else {
            map.node_dof[n] = -1;
        }
    }
    return map;
}

struct FeSystem {
    DofMap dofs;
    SparseMatrix K;
    Vector M;       // lumped diagonal, one entry per dof
    Vector P_ext;   // external load at full amplitude
};

// alpha-weighted FE operators over the given active elements. alpha holds
// one weight per mesh element (1 everywhere for an undecomposed run).
// Tractions are integrated over boundary faces selected by each patch box.
inline FeSystem assemble_global(const Mesh& mesh, const std::vector<int>& active_elements,
                                const std::vector<double>& alpha,
                                const std::vector<SubdomainLabel>* labels,
                                const ElasticMaterial& mat, const LoadSpec& loads) {
    FeSystem sys;
    sys.dofs = build_dof_map(mesh, active_elements);
    const int dim = mesh.dim;
    const DenseMatrix d = elastic_matrix(mat);

    // per-element blocks in parallel, deterministic serial scatter
    std::vector<DenseMatrix> blocks(active_elements.size());
    std::vector<std::vector<double>> masses(active_elements.size());
    parallel_for(0, active_elements.size(), [&](std::size_t s) {
        const auto& e = mesh.elements[active_elements[s]];
        blocks[s] = element_stiffness(mesh, e, d);
        masses[s] = lumped_mass(mesh, e, mat.rho);
    }, 8);

    std::vector<Triplet> triplets;
    sys.M.assign(sys.dofs.n_dof, 0.0);
    sys.P_ext.assign(sys.dofs.n_dof, 0.0);
    for (std::size_t s = 0; s < active_elements.size(); ++s) {
        const int eid = active_elements[s];
        const auto& e = mesh.elements[eid];
        const double a = alpha[eid];
        if (a <= 0.0) {
            if (labels && (*labels)[eid] == SubdomainLabel::FE_only)
                throw InternalError("zero weight on an FE-only element " + std::to_string(eid));
            if (a < 0.0) throw InternalError("negative weight on element " + std::to_string(eid));
        }
        const int nn = e.node_count();
        for (int p = 0; p < nn; ++p) {
            const int prow = sys.dofs.dof(e.node_ids[p], 0);
            for (int q = 0; q < nn; ++q) {
                const int qcol = sys.dofs.dof(e.node_ids[q], 0);
                for (int ci = 0; ci < dim; ++ci)
                    for (int cj = 0; cj < dim; ++cj)
                        triplets.push_back(
                            {prow + ci, qcol + cj, a * blocks[s](dim * p + ci, dim * q + cj)});
            }
            for (int ci = 0; ci < dim; ++ci) sys.M[prow + ci] += a * masses[s][p];
            std::array<double, 3> b = loads.body_force;
            for (const auto& patch : loads.body_patches)
                if (patch.box.contains(e.centroid, dim))
                    for (int ci = 0; ci < dim; ++ci) b[ci] += patch.value[ci];
            for (int ci = 0; ci < dim; ++ci)
                sys.P_ext[prow + ci] += a * b[ci] * masses[s][p] / mat.rho;
        }
    }
    sys.K = SparseMatrix::from_triplets(sys.dofs.n_dof, triplets, true);

    add_surface_loads(mesh, sys.dofs, loads, alpha, false, labels == nullptr, sys.P_ext);
    return sys;
}

// Resolved kinematic constraints on one subdomain's dof numbering.
struct BcTable {
    std::vector<int> dofs;   // sorted
    Vector velocity;         // prescribed velocity per entry

    bool empty() const { return dofs.empty(); }
};

inline BcTable resolve_bcs(const Mesh& mesh, const DofMap& dofs, const LoadSpec& loads) {
    std::map<int, double> table;
    const double tol = 1e-9 * std::max(mesh.char_length(), 1e-300);
    for (const auto& bc : loads.kinematic) {
        bool hit = false;
        for (int n : dofs.active_nodes) {
            if (!bc.box.contains(mesh.nodes[n], mesh.dim, tol)) continue;
            hit = true;
            if (bc.fix_all) {
                for (int c = 0; c < mesh.dim; ++c) table[dofs.dof(n, c)] = 0.0;
            } else {
                table[dofs.dof(n, bc.component)] = bc.velocity;
            }
        }
        if (!hit && !dofs.active_nodes.empty())
            throw ConfigError("kinematic constraint selects no node");
    }
    BcTable out;
    for (const auto& [dof, v] : table) {
        out.dofs.push_back(dof);
        out.velocity.push_back(v);
    }
    return out;
}

}  // namespace perimts
