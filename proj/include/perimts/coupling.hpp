#pragma once

#include <cmath>
#include <iostream>
#include <string>
#include <vector>

#include "perimts/fem.hpp"
#include "perimts/linalg.hpp"
#include "perimts/mesh.hpp"

namespace perimts {

enum class WeightKind { constant, linear, cubic };

inline WeightKind weight_kind_from_string(const std::string& s) {
    if (s == "constant") return WeightKind::constant;
    if (s == "linear") return WeightKind::linear;
    if (s == "cubic") return WeightKind::cubic;
    throw ConfigError("unknown weight kind '" + s + "'");
}

// Blend weight alpha(x): 1 on the exclusive FE side, 0 on the exclusive PD
// side, the chosen profile of l_1/l_O across the overlap, where l_1 is the
// distance from x to the PD core.
struct WeightFunction {
    WeightKind kind = WeightKind::cubic;
    RegionSpec region;
    int dim = 2;

    double operator()(const Point& x) const {
        if (!region.has_pd()) return 1.0;
        if (!region_inside_pd(region, x, dim)) return 1.0;
        const double l1 = region_distance_to_core(region, x, dim);
        if (l1 <= 0.0) return 0.0;
        if (kind == WeightKind::constant) return 0.5;
        const double r = std::min(l1 / region.overlap_width, 1.0);
        return kind == WeightKind::linear ? r : r * r * r;
    }
};

// Boolean selectors pairing overlap dofs of the two subdomains, one
// constraint row per overlap node per direction, ordered by (node, dir).
struct CouplingMap {
    std::vector<int> overlap_nodes;
    int n_lambda = 0;
    std::vector<int> fe_dof;  // row -> FE subdomain dof
    std::vector<int> pd_dof;  // row -> PD subdomain dof

    Vector apply_g_fe(const Vector& v) const {
        Vector out(n_lambda);
        for (int r = 0; r < n_lambda; ++r) out[r] = v[fe_dof[r]];
        return out;
    }
    Vector apply_g_pd(const Vector& v) const {
        Vector out(n_lambda);
        for (int r = 0; r < n_lambda; ++r) out[r] = v[pd_dof[r]];
        return out;
    }
    // out += G^T lambda
    void add_g_fe_transpose(const Vector& lambda, Vector& out) const {
        for (int r = 0; r < n_lambda; ++r) out[fe_dof[r]] += lambda[r];
    }
    void add_g_pd_transpose(const Vector& lambda, Vector& out) const {
        for (int r = 0; r < n_lambda; ++r) out[pd_dof[r]] += lambda[r];
    }
};

// The FE and PD meshes coincide in the overlap, so each overlap node yields
// dim collocated velocity constraints. Rows falling on kinematically
// constrained dofs are dropped (both sides are prescribed there).
inline CouplingMap build_coupling_map(const Mesh& mesh, const SubdomainLabels& labels,
                                      const DofMap& fe_dofs, const DofMap& pd_dofs,
                                      const BcTable* fe_bcs = nullptr,
                                      const BcTable* pd_bcs = nullptr) {
    CouplingMap map;
    for (int n = 0; n < mesh.node_count(); ++n)
        if (labels.node_in_overlap[n]) map.overlap_nodes.push_back(n);
    if (map.overlap_nodes.empty()) throw ConfigError("empty overlap: no coupling possible");
    auto constrained = [](const BcTable* bcs, int dof) {
        return bcs && std::binary_search(bcs->dofs.begin(), bcs->dofs.end(), dof);
    };
    int dropped = 0;
    for (int n : map.overlap_nodes) {
        if (!fe_dofs.has_node(n) || !pd_dofs.has_node(n))
            throw InternalError("overlap node " + std::to_string(n) +
                                " missing from a subdomain dof map");
        for (int c = 0; c < mesh.dim; ++c) {
            const int fd = fe_dofs.dof(n, c);
            const int pdof = pd_dofs.dof(n, c);
            if (constrained(fe_bcs, fd) || constrained(pd_bcs, pdof)) {
                ++dropped;
                continue;
            }
            map.fe_dof.push_back(fd);
            map.pd_dof.push_back(pdof);
        }
    }
    map.n_lambda = static_cast<int>(map.fe_dof.size());
    if (dropped > 0)
        std::cerr << "note: dropped " << dropped
                  << " coupling rows on kinematically constrained dofs\n";
    if (map.n_lambda == 0) throw ConfigError("empty overlap: all coupling rows constrained");
    return map;
}

}  // namespace perimts
