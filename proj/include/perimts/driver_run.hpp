#pragma once

// run_built() lives apart from the artifact/compare plumbing in driver.hpp.

namespace perimts {

namespace detail {

inline std::chrono::steady_clock::time_point wall_now() {
    return std::chrono::steady_clock::now();
}
inline double wall_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(wall_now() - t0).count();
}

struct NodalFieldSampler {
    const BuiltScenario& b;
    const DofMap* fe_dofs = nullptr;
    const DofMap* pd_dofs = nullptr;

    // alpha-blended nodal value across the two subdomains
    double value(const KinematicState* fe, const KinematicState* pd, int node, int comp,
                 bool velocity) const {
        const bool in_fe = fe_dofs && fe_dofs->has_node(node);
        const bool in_pd = pd_dofs && pd_dofs->has_node(node);
        auto pick = [&](const KinematicState* s, const DofMap* d) {
            const int dof = d->dof(node, comp);
            return velocity ? s->vel[dof] : s->disp[dof];
        };
        if (in_fe && in_pd) {
            const double a = b.weight(b.mesh.nodes[node]);
            return a * pick(fe, fe_dofs) + (1.0 - a) * pick(pd, pd_dofs);
        }
        if (in_fe) return pick(fe, fe_dofs);
        if (in_pd) return pick(pd, pd_dofs);
        return 0.0;
    }

    void fill(const KinematicState* fe, const KinematicState* pd, VtkFields& f) const {
        const int d = b.mesh.dim, nn = b.mesh.node_count();
        f.displacement.assign(std::size_t(d) * nn, 0.0);
        f.velocity.assign(std::size_t(d) * nn, 0.0);
        for (int n = 0; n < nn; ++n)
            for (int c = 0; c < d; ++c) {
                f.displacement[std::size_t(n) * d + c] = value(fe, pd, n, c, false);
                f.velocity[std::size_t(n) * d + c] = value(fe, pd, n, c, true);
            }
    }

    std::vector<double> tracked_row(const KinematicState* fe, const KinematicState* pd) const {
        std::vector<double> row;
        for (int node : b.tracked_nodes)
            for (int c = 0; c < b.mesh.dim; ++c) row.push_back(value(fe, pd, node, c, false));
        return row;
    }
};

inline void finalize_outputs(const BuiltScenario& b, RunArtifacts& art,
                             const std::string& out_dir,
                             const std::vector<std::vector<double>>& frame_index) {
    if (out_dir.empty()) return;
    {
        std::ofstream meta(out_dir + "/meta.txt");
        meta << "[run]\n";
        meta << "mesh_hash = " << art.mesh_hash << "\n";
        meta << "dim = " << art.dim << "\n";
        meta << "nodes = " << art.n_nodes << "\n";
        meta << "elements = " << art.n_elements << "\n";
        meta << "tracked = " << art.n_tracked << "\n";
        meta << "mode = "
             << (b.sc.mode == RunMode::pure_fe
                     ? "pure_fe"
                     : b.sc.mode == RunMode::pure_pd ? "pure_pd" : "coupled_mts")
             << "\n";
        meta << "dt_pd = " << b.sc.dt_pd << "\n";
        meta << "m = " << b.sc.m << "\n";
        meta << "total_time = " << b.sc.total_time << "\n";
        meta << "interval = " << b.sc.output_interval << "\n";
    }
    {
        std::vector<std::string> header{"t"};
        for (std::size_t p = 0; p < b.tracked_nodes.size(); ++p)
            for (int c = 0; c < b.mesh.dim; ++c)
                header.push_back("p" + std::to_string(p) + "_u" + char('x' + c));
        std::vector<std::vector<double>> rows;
        for (std::size_t i = 0; i < art.tracked_times.size(); ++i) {
            std::vector<double> row{art.tracked_times[i]};
            row.insert(row.end(), art.tracked_values[i].begin(), art.tracked_values[i].end());
            rows.push_back(std::move(row));
        }
        write_csv(header, rows, out_dir + "/tracked.csv");
    }
    {
        std::vector<std::vector<double>> rows;
        for (std::size_t i = 0; i < art.timing.size(); ++i)
            rows.push_back({double(i), art.timing[i].t_kinematic, art.timing[i].t_update,
                            art.timing[i].t_lambda, art.timing[i].t_unit,
                            i < art.broken_per_step.size() ? double(art.broken_per_step[i]) : 0.0,
                            i < art.continuity.size() ? art.continuity[i] : 0.0});
        write_csv({"step", "t_k", "t_u", "t_lambda", "t_y", "broken", "continuity"}, rows,
                  out_dir + "/timing.csv");
    }
    if (!art.energy.empty()) {
        std::vector<std::vector<double>> rows;
        for (std::size_t i = 0; i < art.energy.size(); ++i)
            rows.push_back({double(i), art.energy[i].quad_fe, art.energy[i].quad_pd,
                            art.energy[i].lambda_fe, art.energy[i].lambda_pd,
                            art.energy[i].total()});
        write_csv({"step", "quad_fe", "quad_pd", "lambda_fe", "lambda_pd", "total"}, rows,
                  out_dir + "/energy.csv");
    }
    if (!frame_index.empty()) write_csv({"frame", "t"}, frame_index, out_dir + "/frames.csv");
}

}  // namespace detail

inline RunArtifacts run_built(BuiltScenario& b, const std::string& out_dir) {
    const auto wall0 = detail::wall_now();
    RunArtifacts art;
    art.mesh_hash = mesh_hash(b.mesh);
    art.dim = b.mesh.dim;
    art.n_nodes = b.mesh.node_count();
    art.n_elements = b.mesh.element_count();
    art.n_tracked = static_cast<int>(b.tracked_nodes.size());
    if (!out_dir.empty()) std::filesystem::create_directories(out_dir);

    const Mesh& mesh = b.mesh;
    detail::FrameWriter frames(b, out_dir, art);

    std::vector<int> label_field(mesh.element_count(), 0);
    std::vector<double> alpha_field(mesh.element_count(), 1.0);
    if (b.sc.mode == RunMode::coupled_mts) {
        for (int e = 0; e < mesh.element_count(); ++e) {
            label_field[e] = static_cast<int>(b.labels.element_label[e]);
            alpha_field[e] = b.alpha_elem[e];
        }
    } else if (b.sc.mode == RunMode::pure_pd) {
        label_field.assign(mesh.element_count(), 1);
        alpha_field.assign(mesh.element_count(), 0.0);
    }

    auto make_fields = [&](const detail::NodalFieldSampler& sampler, const KinematicState* fe,
                           const KinematicState* pd,
                           const std::vector<PeriElement>* pes) {
        VtkFields f;
        sampler.fill(fe, pd, f);
        f.subdomain_label = label_field;
        f.alpha = alpha_field;
        if (pes) {
            const DamageField dmg = damage_field(mesh, *pes);
            f.damage = dmg.element;
            f.damage_avg = dmg.node;
        } else {
            f.damage.assign(mesh.element_count(), 0.0);
            f.damage_avg.assign(mesh.node_count(), 0.0);
        }
        return f;
    };

    if (b.sc.mode == RunMode::pure_fe || b.sc.mode == RunMode::pure_pd) {
        const bool is_pd = b.sc.mode == RunMode::pure_pd;
        std::vector<int> active(mesh.element_count());
        for (int e = 0; e < mesh.element_count(); ++e) active[e] = e;

        std::vector<PeriElement> pes;
        FeSystem fe_sys;
        PdSystem pd_sys;
        DofMap* dofs = nullptr;
        SparseMatrix* k = nullptr;
        Vector* mass = nullptr;
        Vector* p_ext = nullptr;
        if (is_pd) {
            const auto pairs = find_pe_pairs(mesh, b.pd_mat.delta, b.sc.notches);
            pes = build_peri_elements(mesh, pairs, b.sc.pe_quadrature);
            pd_sys = assemble_pd_global(mesh, active, alpha_field,
                                        [](const Point&) { return 0.0; }, pes, b.pd_mat,
                                        b.sc.material, b.loads);
            dofs = &pd_sys.dofs;
            k = &pd_sys.K;
            mass = &pd_sys.M;
            p_ext = &pd_sys.P_ext;
        } else {
            fe_sys = assemble_global(mesh, active, alpha_field, nullptr, b.sc.material, b.loads);
            dofs = &fe_sys.dofs;
            k = &fe_sys.K;
            mass = &fe_sys.M;
            p_ext = &fe_sys.P_ext;
        }

        NewmarkParams nm = is_pd ? b.sc.pd_nm : b.sc.fe_nm;
        nm.dt = b.sc.dt_pd;
        BcTable bcs = detail::resolve_bcs_quiet(mesh, *dofs, b.loads);
        BlockOperator op(k, *mass, nm, bcs);

        KinematicState state = KinematicState::zero(dofs->n_dof);
        for (std::size_t c = 0; c < bcs.dofs.size(); ++c) state.vel[bcs.dofs[c]] = bcs.velocity[c];
        {
            Vector p0 = *p_ext;
            scale(p0, b.load_scale(0.0));
            state.acc = op.initial_acceleration(p0, state.disp);
        }

        detail::NodalFieldSampler sampler{b, is_pd ? nullptr : dofs, is_pd ? dofs : nullptr};
        auto record = [&](double t, const KinematicState& s) {
            art.tracked_times.push_back(t);
            art.tracked_values.push_back(
                sampler.tracked_row(is_pd ? nullptr : &s, is_pd ? &s : nullptr));
        };
        record(0.0, state);
        if (frames.due(0.0))
            frames.emit(0.0, make_fields(sampler, is_pd ? nullptr : &state,
                                         is_pd ? &state : nullptr, is_pd ? &pes : nullptr));

        const int n_steps = static_cast<int>(std::llround(b.sc.total_time / b.sc.dt_pd));
        Vector warm;
        for (int i = 1; i <= n_steps; ++i) {
            const double t = i * b.sc.dt_pd;
            TimingRecord timing;
            const auto tick = detail::wall_now();
            Vector p_t = *p_ext;
            scale(p_t, b.load_scale(t));
            state = advance_dynamic_step(op, state, p_t, &warm);
            timing.t_kinematic = detail::wall_since(tick);

            int broken_now = 0;
            if (is_pd && b.pd_mat.fracture_enabled()) {
                const auto tick_u = detail::wall_now();
                const auto broken =
                    update_bond_states(mesh, pes, state.disp, *dofs, b.pd_mat.s_crit);
                if (!broken.empty()) {
                    incremental_stiffness_update(*k, mesh, *dofs, pes, pd_sys.pe_weight, broken,
                                                 b.pd_mat);
                    if (!nm.explicit_scheme()) op.refresh_diagonal();
                }
                broken_now = static_cast<int>(broken.size());
                timing.t_update = detail::wall_since(tick_u);
            }
            art.timing.push_back(timing);
            art.broken_per_step.push_back(broken_now);
            art.broken_total += broken_now;
            record(t, state);
            if (frames.due(t))
                frames.emit(t, make_fields(sampler, is_pd ? nullptr : &state,
                                           is_pd ? &state : nullptr, is_pd ? &pes : nullptr));
        }
        art.steps = n_steps;
    } else {
        // coupled multi-time-step run
        FeSystem fe_sys = assemble_global(mesh, b.fe_active, b.alpha_elem,
                                          &b.labels.element_label, b.sc.material, b.loads);
        const auto pairs = find_pe_pairs(mesh, b.pd_mat.delta, b.sc.notches, b.pd_active);
        std::vector<PeriElement> pes = build_peri_elements(mesh, pairs, b.sc.pe_quadrature);
        PdSystem pd_sys = assemble_pd_global(
            mesh, b.pd_active, b.alpha_elem,
            [&](const Point& p) { return b.weight(p); }, pes, b.pd_mat, b.sc.material, b.loads);

        BcTable fe_bcs = detail::resolve_bcs_quiet(mesh, fe_sys.dofs, b.loads);
        BcTable pd_bcs = detail::resolve_bcs_quiet(mesh, pd_sys.dofs, b.loads);
        const CouplingMap coupling =
            build_coupling_map(mesh, b.labels, fe_sys.dofs, pd_sys.dofs, &fe_bcs, &pd_bcs);

        MtsOptions opts;
        opts.interface_mode = b.sc.interface_mode;
        opts.enforce_continuity = b.sc.enforce_continuity;
        opts.track_energy = b.sc.track_energy;
        MacroStepPlan plan{b.sc.m, b.sc.dt_pd};
        CoupledIntegrator integ(mesh, fe_sys, pd_sys, pes, coupling, b.pd_mat, plan, b.sc.fe_nm,
                                b.sc.pd_nm, fe_bcs, pd_bcs, b.load_scale, opts);
        integ.initialize_accelerations();

        detail::NodalFieldSampler sampler{b, &fe_sys.dofs, &pd_sys.dofs};
        auto record = [&](double t) {
            art.tracked_times.push_back(t);
            art.tracked_values.push_back(
                sampler.tracked_row(&integ.fe_state(), &integ.pd_state()));
        };
        record(0.0);
        if (frames.due(0.0))
            frames.emit(0.0, make_fields(sampler, &integ.fe_state(), &integ.pd_state(), &pes));

        const int n_macro = static_cast<int>(std::llround(b.sc.total_time / b.sc.dt_fe()));
        for (int i = 1; i <= n_macro; ++i) {
            const MacroReport rep = integ.macro_step();
            const double t = i * b.sc.dt_fe();
            art.timing.push_back(rep.timing);
            art.energy.push_back(rep.energy);
            art.continuity.push_back(rep.continuity_residual);
            art.broken_per_step.push_back(rep.newly_broken);
            art.broken_total += rep.newly_broken;
            record(t);
            if (frames.due(t))
                frames.emit(t, make_fields(sampler, &integ.fe_state(), &integ.pd_state(), &pes));
        }
        art.steps = n_macro;
    }

    art.wall_seconds = detail::wall_since(wall0);
    detail::finalize_outputs(b, art, out_dir, frames.frame_index);
    return art;
}

}  // namespace perimts
