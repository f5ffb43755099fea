#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "perimts/fem.hpp"
#include "perimts/linalg.hpp"
#include "perimts/material.hpp"
#include "perimts/mesh.hpp"

namespace perimts {

// One quadrature pair of a peridynamic element: a point in each member
// element with the product weight w_i * w_j * detJ_i * detJ_j and the bond
// state mu. xi is cached from the undeformed configuration.
struct QuadPair {
    std::array<double, 8> shape_i{};  // N at the point in element i
    std::array<double, 8> shape_j{};
    std::array<double, 3> xi{};       // x_j - x_i
    double xi_norm = 0.0;
    double weight = 0.0;
    std::uint8_t mu = 1;
};

struct PeriElement {
    int elem_i = -1;
    int elem_j = -1;
    std::vector<QuadPair> quad_pairs;
};

struct BrokenBond {
    int pe = -1;
    int qp = -1;
};

// Builds the PE list from element pairs. points_per_axis = 1 places one
// quadrature point per element (the centroid, weight = volume product);
// 2 uses the full Gauss rule of each element.
inline std::vector<PeriElement> build_peri_elements(const Mesh& mesh,
                                                    const std::vector<PePair>& pairs,
                                                    int points_per_axis = 1) {
    if (points_per_axis != 1 && points_per_axis != 2)
        throw ConfigError("PE quadrature must use 1 or 2 points per axis");
    std::vector<PeriElement> pes(pairs.size());
    parallel_for(0, pairs.size(), [&](std::size_t s) {
        const auto& [ei, ej] = pairs[s];
        PeriElement& pe = pes[s];
        pe.elem_i = ei;
        pe.elem_j = ej;
        const Element& a = mesh.elements[ei];
        const Element& b = mesh.elements[ej];

        struct Pt {
            std::array<double, 8> N{};
            Point x{};
            double w = 0.0;
        };
        auto element_points = [&](const Element& e) {
            std::vector<Pt> pts;
            if (points_per_axis == 1) {
                Pt p;
                const double center[3] = {0, 0, 0};
                reference_shape(e.kind, center, p.N.data(), nullptr);
                p.x = e.centroid;
                p.w = e.volume;
                pts.push_back(p);
            } else {
                for (const auto& xi : gauss_points(mesh.dim)) {
                    Pt p;
                    const ShapeEval sh = shape_and_gradients(mesh, e, xi.data());
                    for (int n = 0; n < sh.nn; ++n) p.N[n] = sh.N[n];
                    p.x = {0, 0, 0};
                    for (int n = 0; n < sh.nn; ++n)
                        for (int k = 0; k < 3; ++k) p.x[k] += sh.N[n] * mesh.nodes[e.node_ids[n]][k];
                    p.w = sh.detJ;
                    pts.push_back(p);
                }
            }
            return pts;
        };
        const auto pts_i = element_points(a);
        const auto pts_j = element_points(b);
        pe.quad_pairs.reserve(pts_i.size() * pts_j.size());
        for (const auto& pi : pts_i)
            for (const auto& pj : pts_j) {
                QuadPair qp;
                qp.shape_i = pi.N;
                qp.shape_j = pj.N;
                for (int k = 0; k < 3; ++k) qp.xi[k] = pj.x[k] - pi.x[k];
                qp.xi_norm = std::sqrt(qp.xi[0] * qp.xi[0] + qp.xi[1] * qp.xi[1] +
                                       qp.xi[2] * qp.xi[2]);
                qp.weight = pi.w * pj.w;
                pe.quad_pairs.push_back(qp);
            }
    }, 64);
    return pes;
}

namespace detail {

// g = Bbar^T xi with Bbar = [N(x_j), -N(x_i)]; the PE block is then
// w * c * g g^T. Dof order is [u_j; u_i] as in the PE displacement vector.
inline int pe_bond_vector(const Mesh& mesh, const PeriElement& pe, const QuadPair& qp,
                          double* g) {
    const int d = mesh.dim;
    const int nni = mesh.elements[pe.elem_i].node_count();
    const int nnj = mesh.elements[pe.elem_j].node_count();
    for (int a = 0; a < nnj; ++a)
        for (int c = 0; c < d; ++c) g[d * a + c] = qp.shape_j[a] * qp.xi[c];
    for (int a = 0; a < nni; ++a)
        for (int c = 0; c < d; ++c) g[d * (nnj + a) + c] = -qp.shape_i[a] * qp.xi[c];
    return d * (nni + nnj);
}

}  // namespace detail

// PE stiffness: sum over quadrature pairs of w * Bbar^T Dbar Bbar. Broken
// pairs contribute nothing.
inline DenseMatrix pe_stiffness(const Mesh& mesh, const PeriElement& pe, const PDMaterial& pd) {
    const int nni = mesh.elements[pe.elem_i].node_count();
    const int nnj = mesh.elements[pe.elem_j].node_count();
    const int ndof = mesh.dim * (nni + nnj);
    DenseMatrix k(ndof, ndof);
    double g[48];
    for (const auto& qp : pe.quad_pairs) {
        if (qp.xi_norm <= 0.0) throw ConfigError("degenerate bond: coincident quadrature points");
        if (!qp.mu) continue;
        const double f = qp.weight * micromodulus(qp.xi_norm, pd);
        detail::pe_bond_vector(mesh, pe, qp, g);
        for (int r = 0; r < ndof; ++r) {
            const double gr = f * g[r];
            if (gr == 0.0) continue;
            for (int c = 0; c < ndof; ++c) k(r, c) += gr * g[c];
        }
    }
    return k;
}

// Bond stretch s = (|xi + eta| - |xi|) / |xi| from the two interpolated
// displacements. A fully collapsed bond reports s = -1, never NaN.
inline double bond_stretch(const Mesh& mesh, const PeriElement& pe, const QuadPair& qp,
                           const Vector& u, const DofMap& dofs) {
    const int d = mesh.dim;
    const Element& ei = mesh.elements[pe.elem_i];
    const Element& ej = mesh.elements[pe.elem_j];
    double eta[3] = {0, 0, 0};
    for (int a = 0; a < ej.node_count(); ++a) {
        const int base = dofs.dof(ej.node_ids[a], 0);
        for (int c = 0; c < d; ++c) eta[c] += qp.shape_j[a] * u[base + c];
    }
    for (int a = 0; a < ei.node_count(); ++a) {
        const int base = dofs.dof(ei.node_ids[a], 0);
        for (int c = 0; c < d; ++c) eta[c] -= qp.shape_i[a] * u[base + c];
    }
    double len2 = 0.0;
    for (int c = 0; c < d; ++c) {
        const double v = qp.xi[c] + eta[c];
        len2 += v * v;
    }
    const double len = std::sqrt(len2);
    if (len <= 0.0) return -1.0;
    return (len - qp.xi_norm) / qp.xi_norm;
}

// Breaks every intact bond with s >= s_crit and returns the delta set,
// ordered by (pe, qp). Transitions are one-way.
inline std::vector<BrokenBond> update_bond_states(const Mesh& mesh,
                                                  std::vector<PeriElement>& pes,
                                                  const Vector& u, const DofMap& dofs,
                                                  double s_crit) {
    std::vector<std::vector<BrokenBond>> partial(worker_count());
    const std::size_t chunk = (pes.size() + partial.size() - 1) / std::max<std::size_t>(partial.size(), 1);
    parallel_for(0, partial.size(), [&](std::size_t w) {
        const std::size_t begin = w * chunk, end = std::min(pes.size(), begin + chunk);
        for (std::size_t p = begin; p < end; ++p) {
            auto& pe = pes[p];
            for (std::size_t q = 0; q < pe.quad_pairs.size(); ++q) {
                auto& qp = pe.quad_pairs[q];
                if (!qp.mu) continue;
                if (bond_stretch(mesh, pe, qp, u, dofs) >= s_crit) {
                    qp.mu = 0;
                    partial[w].push_back({static_cast<int>(p), static_cast<int>(q)});
                }
            }
        }
    }, 1);
    std::vector<BrokenBond> broken;
    for (const auto& part : partial) broken.insert(broken.end(), part.begin(), part.end());
    return broken;
}

struct DamageField {
    std::vector<double> element;  // phi per mesh element (0 where no bonds)
    std::vector<double> node;     // incident-element average
};

// phi = 1 - (intact incident quadrature weight) / (total incident weight),
// accumulated per element; node values average the incident elements.
inline DamageField damage_field(const Mesh& mesh, const std::vector<PeriElement>& pes) {
    std::vector<double> total(mesh.element_count(), 0.0);
    std::vector<double> intact(mesh.element_count(), 0.0);
    for (const auto& pe : pes)
        for (const auto& qp : pe.quad_pairs) {
            total[pe.elem_i] += qp.weight;
            total[pe.elem_j] += qp.weight;
            if (qp.mu) {
                intact[pe.elem_i] += qp.weight;
                intact[pe.elem_j] += qp.weight;
            }
        }
    DamageField f;
    f.element.assign(mesh.element_count(), 0.0);
    for (int e = 0; e < mesh.element_count(); ++e)
        if (total[e] > 0.0) f.element[e] = 1.0 - intact[e] / total[e];
    f.node.assign(mesh.node_count(), 0.0);
    std::vector<int> count(mesh.node_count(), 0);
    for (int e = 0; e < mesh.element_count(); ++e) {
        if (total[e] == 0.0) continue;
        const auto& el = mesh.elements[e];
        for (int a = 0; a < el.node_count(); ++a) {
            f.node[el.node_ids[a]] += f.element[e];
            ++count[el.node_ids[a]];
        }
    }
    for (int n = 0; n < mesh.node_count(); ++n)
        if (count[n] > 0) f.node[n] /= count[n];
    return f;
}

struct PdSystem {
    DofMap dofs;
    SparseMatrix K;
    Vector M;
    Vector P_ext;
    std::vector<double> pe_weight;  // (1 - alpha) at each PE's bond midpoint
};

namespace detail {

inline void scatter_pe_block(SparseMatrix& k, const Mesh& mesh, const DofMap& dofs,
                             const PeriElement& pe, const QuadPair& qp, double coeff,
                             const PDMaterial& pd) {
    if (qp.xi_norm <= 0.0) throw ConfigError("degenerate bond: coincident quadrature points");
    const double f = coeff * qp.weight * micromodulus(qp.xi_norm, pd);
    if (f == 0.0) return;
    double g[48];
    const int ndof = pe_bond_vector(mesh, pe, qp, g);
    const Element& ei = mesh.elements[pe.elem_i];
    const Element& ej = mesh.elements[pe.elem_j];
    const int d = mesh.dim;
    const int nnj = ej.node_count();
    int rows[48];
    for (int a = 0; a < nnj; ++a)
        for (int c = 0; c < d; ++c) rows[d * a + c] = dofs.dof(ej.node_ids[a], c);
    for (int a = 0; a < ei.node_count(); ++a)
        for (int c = 0; c < d; ++c) rows[d * (nnj + a) + c] = dofs.dof(ei.node_ids[a], c);
    for (int r = 0; r < ndof; ++r) {
        const double gr = f * g[r];
        if (gr == 0.0) continue;
        for (int c = 0; c < ndof; ++c) {
            const double v = gr * g[c];
            if (v != 0.0) k.add_at(rows[r], rows[c], v);
        }
    }
}

}  // namespace detail

// (1-alpha)-weighted PD operators. The weight is evaluated at each bond
// midpoint (mean of the two element centroids) for K and at the element
// centroid for M and P. alpha_at must return the blend weight at a point;
// alpha_elem holds per-element values for the mass/load weighting.
inline PdSystem assemble_pd_global(const Mesh& mesh, const std::vector<int>& pd_active,
                                   const std::vector<double>& alpha_elem,
                                   const std::function<double(const Point&)>& alpha_at,
                                   const std::vector<PeriElement>& pes, const PDMaterial& pd,
                                   const ElasticMaterial& mat, const LoadSpec& loads) {
    PdSystem sys;
    sys.dofs = build_dof_map(mesh, pd_active);
    const int d = mesh.dim;

    // node adjacency over PE pairs (every node of one member couples to all
    // nodes of both), then the dof pattern
    const int n_active = static_cast<int>(sys.dofs.active_nodes.size());
    std::vector<int> compact(mesh.node_count(), -1);
    for (int s = 0; s < n_active; ++s) compact[sys.dofs.active_nodes[s]] = s;
    std::vector<std::vector<int>> adj(n_active);
    for (const auto& pe : pes) {
        const Element& ei = mesh.elements[pe.elem_i];
        const Element& ej = mesh.elements[pe.elem_j];
        int nodes[16];
        int nn = 0;
        for (int a = 0; a < ei.node_count(); ++a) nodes[nn++] = ei.node_ids[a];
        for (int a = 0; a < ej.node_count(); ++a) nodes[nn++] = ej.node_ids[a];
        for (int r = 0; r < nn; ++r) {
            if (sys.dofs.node_dof[nodes[r]] < 0)
                throw InternalError("PE references a node outside the PD-active set");
            auto& row = adj[compact[nodes[r]]];
            for (int c = 0; c < nn; ++c) row.push_back(nodes[c]);
        }
    }
    for (auto& row : adj) {
        std::sort(row.begin(), row.end());
        row.erase(std::unique(row.begin(), row.end()), row.end());
    }
    // adjacency is in compact node order; dof rows follow the same order
    std::vector<std::vector<int>> dof_adj(n_active);
    for (int s = 0; s < n_active; ++s) {
        dof_adj[s].reserve(adj[s].size());
        for (int n : adj[s]) dof_adj[s].push_back(sys.dofs.node_dof[n] / d);
    }
    sys.K = SparseMatrix::from_node_pattern(n_active, d, dof_adj, true);

    sys.pe_weight.resize(pes.size());
    for (std::size_t p = 0; p < pes.size(); ++p) {
        const auto& pe = pes[p];
        Point mid;
        for (int k = 0; k < 3; ++k)
            mid[k] = 0.5 * (mesh.elements[pe.elem_i].centroid[k] +
                            mesh.elements[pe.elem_j].centroid[k]);
        const double w = 1.0 - alpha_at(mid);
        if (w < 0.0) throw InternalError("negative PD weight at a bond midpoint");
        sys.pe_weight[p] = w;
        for (const auto& qp : pe.quad_pairs)
            if (qp.mu) detail::scatter_pe_block(sys.K, mesh, sys.dofs, pe, qp, w, pd);
    }

    sys.M.assign(sys.dofs.n_dof, 0.0);
    sys.P_ext.assign(sys.dofs.n_dof, 0.0);
    for (int eid : pd_active) {
        const Element& e = mesh.elements[eid];
        const double w = 1.0 - alpha_elem[eid];
        const auto masses = lumped_mass(mesh, e, mat.rho);
        std::array<double, 3> b = loads.body_force;
        for (const auto& patch : loads.body_patches)
            if (patch.box.contains(e.centroid, d))
                for (int c = 0; c < d; ++c) b[c] += patch.value[c];
        for (int a = 0; a < e.node_count(); ++a) {
            const int base = sys.dofs.dof(e.node_ids[a], 0);
            for (int c = 0; c < d; ++c) {
                sys.M[base + c] += w * masses[a];
                sys.P_ext[base + c] += w * b[c] * masses[a] / mat.rho;
            }
        }
    }
    add_surface_loads(mesh, sys.dofs, loads, alpha_elem, true, false, sys.P_ext);
    return sys;
}

// Subtracts the contributions of newly broken quadrature pairs. The caller
// guarantees each pair appears at most once (mu bookkeeping in
// update_bond_states).
inline void incremental_stiffness_update(SparseMatrix& k, const Mesh& mesh, const DofMap& dofs,
                                         const std::vector<PeriElement>& pes,
                                         const std::vector<double>& pe_weight,
                                         const std::vector<BrokenBond>& broken,
                                         const PDMaterial& pd) {
    for (const auto& bb : broken)
        detail::scatter_pe_block(k, mesh, dofs, pes[bb.pe], pes[bb.pe].quad_pairs[bb.qp],
                                 -pe_weight[bb.pe], pd);
}

}  // namespace perimts
