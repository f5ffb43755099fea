#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <optional>
#include <vector>

#include "perimts/coupling.hpp"
#include "perimts/newmark.hpp"
#include "perimts/perifem.hpp"

namespace perimts {

struct MacroStepPlan {
    int m = 1;          // time step ratio, dt_fe = m * dt_pd
    double dt_pd = 0.0;

    double dt_fe() const { return m * dt_pd; }

    void validate() const {
        if (m < 1) throw ConfigError("time step ratio m must be a positive integer");
        if (dt_pd <= 0.0) throw ConfigError("PD time step must be positive");
    }
};

enum class InterfaceMode { automatic, dense, matrix_free };

struct MtsOptions {
    InterfaceMode interface_mode = InterfaceMode::automatic;
    int dense_interface_limit = 400;  // auto mode: form H densely up to this n_lambda
    double continuity_tol = 1e-8;
    bool enforce_continuity = true;   // throw when the residual exceeds the tolerance
    double cg_tol = 1e-10;            // subdomain solves
    double interface_cg_tol = 1e-11;  // matrix-free interface solve
    double link_cg_tol = 1e-12;       // correction solves feed the continuity check
    bool materialize_unit_responses = false;  // keep full Y columns (small systems)
    bool track_energy = true;
};

struct TimingRecord {
    double t_kinematic = 0.0;  // max of the two free solves
    double t_update = 0.0;     // bond state + stiffness updates
    double t_lambda = 0.0;     // interface solve + recombination
    double t_unit = 0.0;       // unit-response upkeep (excluded from t_lambda)
};

struct EnergyRecord {
    double quad_fe = 0.0;
    double quad_pd = 0.0;
    double lambda_fe = 0.0;
    double lambda_pd = 0.0;

    double total() const { return quad_fe + quad_pd + lambda_fe + lambda_pd; }
};

struct MacroReport {
    TimingRecord timing;
    EnergyRecord energy;
    double continuity_residual = 0.0;  // scaled by max(1, |vel|_inf)
    int newly_broken = 0;
    int interface_iterations = 0;
};

// Unit-response data: the interface blocks are what the lambda solve needs;
// full response matrices are materialized only on request.
struct UnitResponse {
    DenseMatrix h_fe;          // -G_FE * vel(Y_FE), built once (elastic FE)
    bool h_fe_built = false;
    DenseMatrix h;             // h_fe + G_PD * vel(Y_PD_m)
    bool h_valid = false;
    std::optional<DenseLu> lu;
    std::vector<KinematicState> y_fe_full, y_pd_full;  // optional, per column
};

// Multi-time-step coupling of one FE and one PD subdomain: per macro step,
// free problems under external loads, an interface solve for the Lagrange
// multipliers from unit responses, and the recombination U = V + Y*lambda.
class CoupledIntegrator {
public:
    CoupledIntegrator(const Mesh& mesh, FeSystem& fe, PdSystem& pd,
                      std::vector<PeriElement>& pes, const CouplingMap& coupling,
                      const PDMaterial& pd_mat, MacroStepPlan plan, NewmarkParams fe_nm,
                      NewmarkParams pd_nm, BcTable fe_bcs, BcTable pd_bcs,
                      std::function<double(double)> load_scale, MtsOptions opts = {})
        : mesh_(mesh),
          fe_(fe),
          pd_(pd),
          pes_(pes),
          coupling_(coupling),
          pd_mat_(pd_mat),
          plan_(plan),
          opts_(opts),
          load_scale_(std::move(load_scale)) {
        plan_.validate();
        fe_nm.dt = plan_.dt_fe();
        pd_nm.dt = plan_.dt_pd;
        k_sync_ = pd_.K;  // unit/link problems lag the live stiffness by one macro step
        fe_op_ = BlockOperator(&fe_.K, fe_.M, fe_nm, std::move(fe_bcs), opts_.cg_tol);
        pd_op_ = BlockOperator(&pd_.K, pd_.M, pd_nm, pd_bcs, opts_.cg_tol);
        pd_op_sync_ = BlockOperator(&k_sync_, pd_.M, pd_nm, std::move(pd_bcs), opts_.cg_tol);

        u_fe_ = KinematicState::zero(fe_.dofs.n_dof);
        u_pd_ = KinematicState::zero(pd_.dofs.n_dof);
        lambda_prev_.assign(coupling_.n_lambda, 0.0);
        lambda_.assign(coupling_.n_lambda, 0.0);
        apply_bc_velocities(fe_op_, u_fe_);
        apply_bc_velocities(pd_op_, u_pd_);

        g_p_fe_ = coupling_.apply_g_fe(fe_.P_ext);
        use_dense_ = opts_.interface_mode == InterfaceMode::dense ||
                     (opts_.interface_mode == InterfaceMode::automatic &&
                      (coupling_.n_lambda <= opts_.dense_interface_limit ||
                       !pd_op_.params().explicit_scheme()));
        build_h_fe();
        if (use_dense_) refresh_dense_interface();
        if (opts_.materialize_unit_responses) materialize_unit_responses();
    }

    void set_time(double t) { t_ = t; }
    double time() const { return t_; }
    const KinematicState& fe_state() const { return u_fe_; }
    const KinematicState& pd_state() const { return u_pd_; }
    KinematicState& fe_state() { return u_fe_; }
    KinematicState& pd_state() { return u_pd_; }
    const Vector& lambda() const { return lambda_prev_; }
    const UnitResponse& unit_response() const { return unit_; }
    const BlockOperator& fe_operator() const { return fe_op_; }
    const BlockOperator& pd_operator() const { return pd_op_; }
    const MacroStepPlan& plan() const { return plan_; }

    // Consistent accelerations from the current displacements and loads.
    void initialize_accelerations() {
        Vector p_fe = scaled_load(fe_.P_ext, t_);
        coupling_.add_g_fe_transpose(scaled(lambda_prev_, -1.0), p_fe);
        u_fe_.acc = fe_op_.initial_acceleration(p_fe, u_fe_.disp);
        Vector p_pd = scaled_load(pd_.P_ext, t_);
        coupling_.add_g_pd_transpose(lambda_prev_, p_pd);
        u_pd_.acc = pd_op_.initial_acceleration(p_pd, u_pd_.disp);
    }

    // Free FE problem: one large step under external loads only.
    KinematicState free_solve_fe() {
        BlockRhs rhs = newmark_predictor(u_fe_, fe_op_.params());
        rhs.a = scaled_load(fe_.P_ext, t_ + plan_.dt_fe());
        return fe_op_.solve(rhs, &warm_fe_free_);
    }

    // Free PD problem: m substeps carrying the interpolated known multiplier
    // load S_j; bond states update from the free displacements after every
    // substep and the live stiffness follows incrementally.
    std::vector<KinematicState> free_solve_pd(std::vector<BrokenBond>* broken_out,
                                              double* update_seconds) {
        std::vector<KinematicState> v(plan_.m + 1);
        v[0] = u_pd_;
        gp_vel_free_.assign(plan_.m + 1, Vector(coupling_.n_lambda, 0.0));
        gp_vel_free_[0] = coupling_.apply_g_pd(u_pd_.vel);
        for (int j = 1; j <= plan_.m; ++j) {
            BlockRhs rhs = newmark_predictor(v[j - 1], pd_op_.params());
            rhs.a = scaled_load(pd_.P_ext, t_ + j * plan_.dt_pd);
            coupling_.add_g_pd_transpose(s_vector(j), rhs.a);
            v[j] = pd_op_.solve(rhs, &warm_pd_free_);
            gp_vel_free_[j] = coupling_.apply_g_pd(v[j].vel);
            if (pd_mat_.fracture_enabled()) {
                const auto tick = clock_now();
                auto broken = update_bond_states(mesh_, pes_, v[j].disp, pd_.dofs,
                                                 pd_mat_.s_crit);
                if (!broken.empty()) {
                    incremental_stiffness_update(pd_.K, mesh_, pd_.dofs, pes_, pd_.pe_weight,
                                                 broken, pd_mat_);
                    if (!pd_op_.params().explicit_scheme()) pd_op_.refresh_diagonal();
                    unit_stale_ = true;
                    if (broken_out)
                        broken_out->insert(broken_out->end(), broken.begin(), broken.end());
                }
                if (update_seconds) *update_seconds += seconds_since(tick);
            }
        }
        return v;
    }

    // Interface system [G_FE vel(Y_FE) + G_PD vel(Y_PD)] lambda = rhs with the
    // signs fixed so the recombined overlap velocities coincide.
    Vector interface_solve(const KinematicState& v_fe_m, const KinematicState& v_pd_m,
                           int* iterations = nullptr) {
        Vector rhs = coupling_.apply_g_fe(v_fe_m.vel);
        const Vector gp = coupling_.apply_g_pd(v_pd_m.vel);
        for (int r = 0; r < coupling_.n_lambda; ++r) rhs[r] -= gp[r];
        if (use_dense_) {
            if (!unit_.h_valid) throw InternalError("interface solve with stale unit response");
            if (iterations) *iterations = 0;
            return unit_.lu->solve(rhs);
        }
        Vector x = lambda_prev_;  // warm start
        auto apply = [&](const Vector& in, Vector& out) {
            out = unit_.h_fe.multiply(in);
            const Vector gpw = apply_h_pd(in);
            for (int r = 0; r < coupling_.n_lambda; ++r) out[r] += gpw[r];
        };
        try {
            const auto res = cg_solve(apply, rhs, x, opts_.interface_cg_tol,
                                      std::max(200, 10 * static_cast<int>(
                                                        std::sqrt(double(coupling_.n_lambda)))));
            if (iterations) *iterations = res.iterations;
        } catch (const SolverError&) {
            // indefinite or stagnating interface operator: fall back to the
            // dense factorization path for the rest of the run
            use_dense_ = true;
            unit_.h_valid = false;
            refresh_dense_interface();
            if (iterations) *iterations = 0;
            return unit_.lu->solve(rhs);
        }
        return x;
    }

    // U = V + Y*lambda via one correction solve per subdomain.
    void recombine(const KinematicState& v_fe_m, const std::vector<KinematicState>& v_pd,
                   const Vector& lambda_m) {
        // FE correction: M_block W = -G^T lambda
        {
            BlockRhs rhs{Vector(fe_.dofs.n_dof, 0.0), Vector(fe_.dofs.n_dof, 0.0),
                         Vector(fe_.dofs.n_dof, 0.0)};
            coupling_.add_g_fe_transpose(scaled(lambda_m, -1.0), rhs.a);
            const KinematicState w = fe_op_.solve(rhs, &warm_fe_link_, true);
            u_fe_ = add_states(v_fe_m, w);
        }
        // PD correction: m substeps under the ramped multiplier load
        {
            KinematicState w = KinematicState::zero(pd_.dofs.n_dof);
            gp_vel_link_.assign(plan_.m + 1, Vector(coupling_.n_lambda, 0.0));
            for (int j = 1; j <= plan_.m; ++j) {
                BlockRhs rhs = newmark_predictor(w, pd_op_sync_.params());
                rhs.a.assign(pd_.dofs.n_dof, 0.0);
                coupling_.add_g_pd_transpose(scaled(lambda_m, double(j) / plan_.m), rhs.a);
                w = pd_op_sync_.solve(rhs, &warm_pd_link_, true);
                gp_vel_link_[j] = coupling_.apply_g_pd(w.vel);
            }
            u_pd_ = add_states(v_pd[plan_.m], w);
        }
    }

    // One full macro step of the coupled algorithm.
    MacroReport macro_step() {
        MacroReport report;
        snapshot_previous();

        // unit-response upkeep (lazy: only after damage changed)
        {
            const auto tick = clock_now();
            if (unit_stale_) {
                k_sync_.values() = pd_.K.values();
                if (!pd_op_sync_.params().explicit_scheme()) pd_op_sync_.refresh_diagonal();
                unit_.h_valid = false;
                unit_stale_ = false;
                if (use_dense_) refresh_dense_interface();
                if (opts_.materialize_unit_responses) materialize_unit_responses();
            }
            report.timing.t_unit = seconds_since(tick);
        }

        std::vector<BrokenBond> broken;
        double update_seconds = 0.0;

        const auto tick_fe = clock_now();
        const KinematicState v_fe = free_solve_fe();
        const double fe_seconds = seconds_since(tick_fe);

        const auto tick_pd = clock_now();
        const std::vector<KinematicState> v_pd = free_solve_pd(&broken, &update_seconds);
        const double pd_seconds = seconds_since(tick_pd) - update_seconds;

        report.timing.t_kinematic = std::max(fe_seconds, pd_seconds);
        report.timing.t_update = update_seconds;

        const auto tick_lambda = clock_now();
        lambda_ = interface_solve(v_fe, v_pd[plan_.m], &report.interface_iterations);
        recombine(v_fe, v_pd, lambda_);
        report.timing.t_lambda = seconds_since(tick_lambda);

        // post-recombination bond audit on the final PD state
        if (pd_mat_.fracture_enabled()) {
            const auto tick = clock_now();
            auto audited = update_bond_states(mesh_, pes_, u_pd_.disp, pd_.dofs, pd_mat_.s_crit);
            if (!audited.empty()) {
                incremental_stiffness_update(pd_.K, mesh_, pd_.dofs, pes_, pd_.pe_weight,
                                             audited, pd_mat_);
                if (!pd_op_.params().explicit_scheme()) pd_op_.refresh_diagonal();
                unit_stale_ = true;
                broken.insert(broken.end(), audited.begin(), audited.end());
            }
            report.timing.t_update += seconds_since(tick);
        }
        report.newly_broken = static_cast<int>(broken.size());

        if (opts_.track_energy) report.energy = energy_record(v_pd);
        report.continuity_residual = continuity_residual();
        if (opts_.enforce_continuity && report.continuity_residual > opts_.continuity_tol)
            throw SolverError("velocity continuity violated: residual " +
                              std::to_string(report.continuity_residual) + " at t=" +
                              std::to_string(t_ + plan_.dt_fe()));

        lambda_prev_ = lambda_;
        t_ += plan_.dt_fe();
        return report;
    }

    // Scaled infinity-norm mismatch of the overlap velocities.
    double continuity_residual() const {
        const Vector gf = coupling_.apply_g_fe(u_fe_.vel);
        const Vector gp = coupling_.apply_g_pd(u_pd_.vel);
        double resid = 0.0;
        for (int r = 0; r < coupling_.n_lambda; ++r)
            resid = std::max(resid, std::abs(gf[r] - gp[r]));
        const double scale = std::max(1.0, std::max(norm_inf(u_fe_.vel), norm_inf(u_pd_.vel)));
        return resid / scale;
    }

    // Interpolated FE state between macro ticks (output sampling only).
    static KinematicState interpolate_fe_substate(const KinematicState& u0,
                                                  const KinematicState& um, int j, int m) {
        const double w = double(j) / m;
        KinematicState out = KinematicState::zero(u0.size());
        for (std::size_t i = 0; i < u0.size(); ++i) {
            out.acc[i] = (1.0 - w) * u0.acc[i] + w * um.acc[i];
            out.vel[i] = (1.0 - w) * u0.vel[i] + w * um.vel[i];
            out.disp[i] = (1.0 - w) * u0.disp[i] + w * um.disp[i];
        }
        return out;
    }

    // Known part of the substep multiplier: the interpolation of lambda_0
    // plus the FE load imbalance mapped to the constraint space.
    Vector s_vector(int j) const {
        const double w = double(j) / plan_.m;
        Vector s(coupling_.n_lambda);
        const double bracket = load_scale_(t_ + j * plan_.dt_pd) -
                               (1.0 - w) * load_scale_(t_) -
                               w * load_scale_(t_ + plan_.dt_fe());
        for (int r = 0; r < coupling_.n_lambda; ++r)
            s[r] = (1.0 - w) * lambda_prev_[r] + bracket * g_p_fe_[r];
        return s;
    }

    // Full unit-response columns at the macro-step end (small systems/tests).
    void materialize_unit_responses() {
        unit_.y_fe_full.clear();
        unit_.y_pd_full.clear();
        for (int k = 0; k < coupling_.n_lambda; ++k) {
            unit_.y_fe_full.push_back(unit_fe_column(k));
            unit_.y_pd_full.push_back(unit_pd_column(k));
        }
    }

    bool dense_interface() const { return use_dense_; }

private:
    static std::chrono::steady_clock::time_point clock_now() {
        return std::chrono::steady_clock::now();
    }
    static double seconds_since(std::chrono::steady_clock::time_point t0) {
        return std::chrono::duration<double>(clock_now() - t0).count();
    }

    static Vector scaled(const Vector& v, double f) {
        Vector out = v;
        for (double& x : out) x *= f;
        return out;
    }

    Vector scaled_load(const Vector& p, double t) const { return scaled(p, load_scale_(t)); }

    static KinematicState add_states(const KinematicState& a, const KinematicState& b) {
        KinematicState out = a;
        for (std::size_t i = 0; i < out.size(); ++i) {
            out.acc[i] += b.acc[i];
            out.vel[i] += b.vel[i];
            out.disp[i] += b.disp[i];
        }
        return out;
    }

    static void apply_bc_velocities(const BlockOperator& op, KinematicState& s) {
        const auto& bcs = op.bcs();
        for (std::size_t c = 0; c < bcs.dofs.size(); ++c) s.vel[bcs.dofs[c]] = bcs.velocity[c];
    }

    // FE unit response: M_block Y = -G^T e_k.
    KinematicState unit_fe_column(int k) const {
        BlockRhs rhs{Vector(fe_.dofs.n_dof, 0.0), Vector(fe_.dofs.n_dof, 0.0),
                     Vector(fe_.dofs.n_dof, 0.0)};
        rhs.a[coupling_.fe_dof[k]] = -1.0;
        return fe_op_.solve(rhs, nullptr, true);
    }

    // PD unit response at the macro-step end: the m-substep recursion under
    // the (j/m)-ramped unit load, on the synced stiffness.
    KinematicState unit_pd_column(int k) const {
        KinematicState y = KinematicState::zero(pd_.dofs.n_dof);
        for (int j = 1; j <= plan_.m; ++j) {
            BlockRhs rhs = newmark_predictor(y, pd_op_sync_.params());
            rhs.a.assign(pd_.dofs.n_dof, 0.0);
            rhs.a[coupling_.pd_dof[k]] = double(j) / plan_.m;
            y = pd_op_sync_.solve(rhs, nullptr, true);
        }
        return y;
    }

    // G_PD vel(Y_PD_m) * w without materializing Y: one ramped recursion.
    Vector apply_h_pd(const Vector& w) const {
        KinematicState y = KinematicState::zero(pd_.dofs.n_dof);
        Vector warm;
        for (int j = 1; j <= plan_.m; ++j) {
            BlockRhs rhs = newmark_predictor(y, pd_op_sync_.params());
            rhs.a.assign(pd_.dofs.n_dof, 0.0);
            coupling_.add_g_pd_transpose(scaled(w, double(j) / plan_.m), rhs.a);
            y = pd_op_sync_.solve(rhs, &warm, true);
        }
        return coupling_.apply_g_pd(y.vel);
    }

    void build_h_fe() {
        unit_.h_fe = DenseMatrix(coupling_.n_lambda, coupling_.n_lambda);
        for (int k = 0; k < coupling_.n_lambda; ++k) {
            const KinematicState y = unit_fe_column(k);
            const Vector g = coupling_.apply_g_fe(y.vel);
            for (int r = 0; r < coupling_.n_lambda; ++r) unit_.h_fe(r, k) = -g[r];
        }
        unit_.h_fe_built = true;
    }

    void refresh_dense_interface() {
        unit_.h = unit_.h_fe;
        for (int k = 0; k < coupling_.n_lambda; ++k) {
            const KinematicState y = unit_pd_column(k);
            const Vector g = coupling_.apply_g_pd(y.vel);
            for (int r = 0; r < coupling_.n_lambda; ++r) unit_.h(r, k) += g[r];
        }
        try {
            unit_.lu.emplace(unit_.h);
        } catch (const SolverError&) {
            throw SolverError("singular interface system: coincident or disconnected overlap");
        }
        unit_.h_valid = true;
    }

    EnergyRecord energy_record(const std::vector<KinematicState>& v_pd) const {
        EnergyRecord e;
        const auto& fe_nm = fe_op_.params();
        const auto& pd_nm = pd_op_.params();
        // quadratic terms vanish identically at gamma = 1/2
        if (fe_nm.gamma != 0.5) {
            Vector da(fe_.dofs.n_dof);
            for (std::size_t i = 0; i < da.size(); ++i) da[i] = u_fe_.acc[i] - fe_prev_acc_[i];
            Vector ka = fe_.K.multiply(da);
            double quad = 0.0;
            const double f = fe_nm.dt * fe_nm.dt * (fe_nm.beta - fe_nm.gamma / 2.0);
            for (std::size_t i = 0; i < da.size(); ++i)
                quad += da[i] * (fe_.M[i] * da[i] + f * ka[i]);
            e.quad_fe = -(fe_nm.gamma - 0.5) * quad;
        }
        if (pd_nm.gamma != 0.5) {
            double quad = 0.0;
            for (int j = 1; j <= plan_.m; ++j) {
                Vector da(pd_.dofs.n_dof);
                for (std::size_t i = 0; i < da.size(); ++i)
                    da[i] = v_pd[j].acc[i] - v_pd[j - 1].acc[i];
                Vector ka = pd_.K.multiply(da);
                const double f = pd_nm.dt * pd_nm.dt * (pd_nm.beta - pd_nm.gamma / 2.0);
                double q = 0.0;
                for (std::size_t i = 0; i < da.size(); ++i)
                    q += da[i] * (pd_.M[i] * da[i] + f * ka[i]);
                quad += q;
            }
            e.quad_pd = -(pd_nm.gamma - 0.5) * quad;
        }
        // interface work terms
        {
            const Vector gf_m = coupling_.apply_g_fe(u_fe_.vel);
            const Vector gf_0 = fe_prev_gvel_;
            double s = 0.0;
            for (int r = 0; r < coupling_.n_lambda; ++r)
                s += (gf_m[r] - gf_0[r]) * (lambda_[r] - lambda_prev_[r]);
            e.lambda_fe = s / plan_.dt_fe();
        }
        {
            double s = 0.0;
            for (int j = 1; j <= plan_.m; ++j) {
                const Vector sj = s_vector(j);
                const Vector sjm = s_vector(j - 1);
                for (int r = 0; r < coupling_.n_lambda; ++r) {
                    const double vel_j = gp_vel_free_[j][r] + gp_vel_link_[j][r];
                    const double vel_jm = gp_vel_free_[j - 1][r] +
                                          (j > 1 ? gp_vel_link_[j - 1][r] : 0.0);
                    const double lam_j = sj[r] + (double(j) / plan_.m) * lambda_[r];
                    const double lam_jm =
                        sjm[r] + (double(j - 1) / plan_.m) * lambda_[r];
                    s += (vel_j - vel_jm) * (lam_j - lam_jm);
                }
            }
            e.lambda_pd = -s / plan_.dt_pd;
        }
        return e;
    }

    // Start-of-step snapshot for the energy bookkeeping.
    void snapshot_previous() {
        fe_prev_acc_ = u_fe_.acc;
        fe_prev_gvel_ = coupling_.apply_g_fe(u_fe_.vel);
    }

    const Mesh& mesh_;
    FeSystem& fe_;
    PdSystem& pd_;
    std::vector<PeriElement>& pes_;
    const CouplingMap& coupling_;
    PDMaterial pd_mat_;
    MacroStepPlan plan_;
    MtsOptions opts_;
    std::function<double(double)> load_scale_;

    SparseMatrix k_sync_;
    BlockOperator fe_op_, pd_op_, pd_op_sync_;
    KinematicState u_fe_, u_pd_;
    Vector lambda_prev_, lambda_;
    Vector g_p_fe_;
    UnitResponse unit_;
    bool unit_stale_ = false;
    bool use_dense_ = true;
    double t_ = 0.0;

    Vector warm_fe_free_, warm_fe_link_, warm_pd_free_, warm_pd_link_;
    std::vector<Vector> gp_vel_free_, gp_vel_link_;
    Vector fe_prev_acc_, fe_prev_gvel_;
};

}  // namespace perimts
