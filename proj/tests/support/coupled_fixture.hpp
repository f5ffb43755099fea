#pragma once

// Small coupled strip assembled end to end, shared by the integrator tests.

#include <functional>
#include <memory>

#include "perimts/coupling.hpp"
#include "perimts/mts.hpp"
#include "perimts/perifem.hpp"

namespace fixtures {

using namespace perimts;

struct CoupledStrip {
    Mesh mesh;
    RegionSpec region;
    SubdomainLabels labels;
    WeightFunction weight;
    std::vector<double> alpha;
    ElasticMaterial mat;
    PDMaterial pd_mat;
    FeSystem fe;
    PdSystem pd;
    std::vector<PeriElement> pes;
    CouplingMap coupling;
    BcTable fe_bcs, pd_bcs;
    std::function<double(double)> load_scale;
    std::unique_ptr<CoupledIntegrator> integ;

    // strip [0, length] x [0, height], PD box in the middle third
    CoupledStrip(int nx, int ny, double dx, MacroStepPlan plan, NewmarkParams fe_nm,
                 NewmarkParams pd_nm, double traction, MtsOptions opts = {},
                 std::function<double(double)> scale = nullptr, double s_crit = 0.0,
                 bool fix_left = false) {
        BoundsBox domain;
        domain.lo = {0, 0, 0};
        domain.hi = {nx * dx, ny * dx, 0};
        mesh = generate_structured(domain, dx, 2);

        region.domain = domain;
        region.overlap_width = 1.0 * dx;
        BoundsBox pd_box = domain;
        pd_box.lo[0] = std::floor(nx / 3.0) * dx;
        pd_box.hi[0] = std::floor(2.0 * nx / 3.0) * dx;
        region.pd_boxes.push_back(pd_box);
        labels = label_subdomains(mesh, region);
        weight = WeightFunction{WeightKind::cubic, region, 2};
        alpha.resize(mesh.element_count());
        for (int e = 0; e < mesh.element_count(); ++e)
            alpha[e] = weight(mesh.elements[e].centroid);

        mat = {65e9, 1.0 / 3.0, 2235.0, Formulation::plane_stress};
        pd_mat.delta = 2.2 * dx;
        pd_mat.l = pd_mat.delta / 8.0;
        pd_mat.c0 = calibrate_c0(mat.E, pd_mat.delta, pd_mat.l, mat.formulation);
        pd_mat.s_crit = s_crit;

        LoadSpec loads;
        if (traction != 0.0) {
            TractionPatch patch;
            patch.box.lo = {nx * dx - 1e-9, -1, 0};
            patch.box.hi = {nx * dx + 1e-9, ny * dx + 1, 0};
            patch.value = {traction, 0, 0};
            loads.tractions.push_back(patch);
        }
        if (fix_left) {
            KinematicBc bc;
            bc.box.lo = {-1e-9, -1, 0};
            bc.box.hi = {1e-9, ny * dx + 1, 0};
            bc.fix_all = true;
            loads.kinematic.push_back(bc);
        }

        const auto fe_active = labels.fe_active_elements();
        const auto pd_active = labels.pd_active_elements();
        fe = assemble_global(mesh, fe_active, alpha, &labels.element_label, mat, loads);
        const auto pairs = find_pe_pairs(mesh, pd_mat.delta, {}, pd_active);
        pes = build_peri_elements(mesh, pairs);
        pd = assemble_pd_global(mesh, pd_active, alpha,
                                [this](const Point& p) { return weight(p); }, pes, pd_mat, mat,
                                loads);
        fe_bcs = resolve_bcs(mesh, fe.dofs, LoadSpec{});
        if (fix_left && !loads.kinematic.empty()) fe_bcs = resolve_bcs(mesh, fe.dofs, loads);
        coupling = build_coupling_map(mesh, labels, fe.dofs, pd.dofs, &fe_bcs, &pd_bcs);

        load_scale = scale ? std::move(scale) : [](double) { return 1.0; };
        integ = std::make_unique<CoupledIntegrator>(mesh, fe, pd, pes, coupling, pd_mat, plan,
                                                    fe_nm, pd_nm, fe_bcs, pd_bcs, load_scale,
                                                    opts);
    }
};

}  // namespace fixtures
