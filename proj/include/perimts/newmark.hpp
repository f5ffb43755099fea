#pragma once

#include <cmath>
#include <functional>
#include <iostream>
#include <optional>
#include <vector>

#include "perimts/fem.hpp"
#include "perimts/linalg.hpp"

namespace perimts {

struct NewmarkParams {
    double gamma = 0.5;
    double beta = 0.25;
    double dt = 0.0;

    bool explicit_scheme() const { return beta == 0.0; }

    void validate() const {
        if (dt <= 0.0) throw ConfigError("time step must be positive");
        if (gamma < 0.5)
            std::cerr << "warning: Newmark gamma=" << gamma << " < 1/2 is unstable\n";
    }

    bool unconditionally_stable() const {
        return gamma >= 0.5 && beta >= 0.25 * (gamma + 0.5) * (gamma + 0.5);
    }
};

struct KinematicState {
    Vector acc, vel, disp;

    static KinematicState zero(std::size_t n) { return {Vector(n, 0.0), Vector(n, 0.0), Vector(n, 0.0)}; }
    std::size_t size() const { return acc.size(); }
};

// Kinematic update for a known new acceleration:
//   v_i = v_{i-1} + dt [(1-gamma) a_{i-1} + gamma a_i]
//   u_i = u_{i-1} + dt v_{i-1} + dt^2 [(1/2-beta) a_{i-1} + beta a_i]
inline KinematicState newmark_step(const KinematicState& prev, const Vector& acc_new,
                                   const NewmarkParams& p) {
    const std::size_t n = prev.size();
    KinematicState s = KinematicState::zero(n);
    s.acc = acc_new;
    for (std::size_t i = 0; i < n; ++i) {
        s.vel[i] = prev.vel[i] + p.dt * ((1.0 - p.gamma) * prev.acc[i] + p.gamma * acc_new[i]);
        s.disp[i] = prev.disp[i] + p.dt * prev.vel[i] +
                    p.dt * p.dt * ((0.5 - p.beta) * prev.acc[i] + p.beta * acc_new[i]);
    }
    return s;
}

// Right-hand side of one block equation: the three stacked components of
// P - N * U_prev (N never touches the acceleration row).
struct BlockRhs {
    Vector a, v, d;
};

inline BlockRhs newmark_predictor(const KinematicState& prev, const NewmarkParams& p) {
    const std::size_t n = prev.size();
    BlockRhs r{Vector(n, 0.0), Vector(n, 0.0), Vector(n, 0.0)};
    for (std::size_t i = 0; i < n; ++i) {
        r.v[i] = prev.vel[i] + p.dt * (1.0 - p.gamma) * prev.acc[i];
        r.d[i] = prev.disp[i] + p.dt * prev.vel[i] + p.dt * p.dt * (0.5 - p.beta) * prev.acc[i];
    }
    return r;
}

// One subdomain's 3x3 block pair (M, N) with its reduced solve. Applying
// M^-1 never forms the stacked matrix: substituting the velocity and
// displacement rows reduces the block solve to
//   (M + beta dt^2 K) a = r_a - K r_d,
// followed by the Newmark updates. Kinematic constraints are imposed by
// projecting the reduced operator and overwriting the constrained rows.
class BlockOperator {
public:
    BlockOperator() = default;

    BlockOperator(const SparseMatrix* k, Vector m_lumped, NewmarkParams nm, BcTable bcs,
                  double cg_tol = 1e-12, int cg_max_factor = 40)
        : k_(k), m_(std::move(m_lumped)), nm_(nm), bcs_(std::move(bcs)), cg_tol_(cg_tol) {
        nm_.validate();
        n_ = m_.size();
        constrained_.assign(n_, 0);
        for (int d : bcs_.dofs) constrained_[d] = 1;
        for (std::size_t i = 0; i < n_; ++i)
            if (!constrained_[i] && m_[i] <= 0.0)
                throw SolverError("non-positive lumped mass at dof " + std::to_string(i));
        cg_max_ = std::max(100, static_cast<int>(cg_max_factor * std::sqrt(double(n_))));
        refresh_diagonal();
    }

    const NewmarkParams& params() const { return nm_; }
    const SparseMatrix& stiffness() const { return *k_; }
    const Vector& mass() const { return m_; }
    const BcTable& bcs() const { return bcs_; }
    std::size_t size() const { return n_; }

    // Call after the stiffness values changed (bond breaking).
    void refresh_diagonal() {
        diag_.assign(n_, 0.0);
        const double bdt2 = nm_.beta * nm_.dt * nm_.dt;
        if (bdt2 != 0.0) diag_ = k_->diagonal();
        for (std::size_t i = 0; i < n_; ++i) diag_[i] = m_[i] + bdt2 * diag_[i];
    }

    // Consistent initial acceleration: M a = P - K u, constrained rows zero.
    Vector initial_acceleration(const Vector& p, const Vector& u0) const {
        Vector ku = k_->multiply(u0);
        Vector a(n_, 0.0);
        for (std::size_t i = 0; i < n_; ++i)
            a[i] = constrained_[i] ? 0.0 : (p[i] - ku[i]) / m_[i];
        return a;
    }

    // Solves M_block * U = rhs. warm_accel (optional) seeds the CG iteration
    // and receives the converged acceleration. homogeneous solves (unit
    // responses, link corrections) pin constrained dofs to zero motion
    // instead of the prescribed velocity.
    KinematicState solve(const BlockRhs& rhs, Vector* warm_accel = nullptr,
                         bool homogeneous = false) const {
        KinematicState out = KinematicState::zero(n_);
        Vector b = k_->multiply(rhs.d);
        for (std::size_t i = 0; i < n_; ++i)
            b[i] = constrained_[i] ? 0.0 : rhs.a[i] - b[i];

        Vector acc(n_, 0.0);
        if (nm_.explicit_scheme()) {
            for (std::size_t i = 0; i < n_; ++i)
                acc[i] = constrained_[i] ? 0.0 : b[i] / m_[i];
        } else {
            if (warm_accel && warm_accel->size() == n_) {
                acc = *warm_accel;
                for (std::size_t i = 0; i < n_; ++i)
                    if (constrained_[i]) acc[i] = 0.0;
            }
            const double bdt2 = nm_.beta * nm_.dt * nm_.dt;
            auto apply = [&](const Vector& x, Vector& y) {
                k_->multiply(x, y);
                for (std::size_t i = 0; i < n_; ++i)
                    y[i] = constrained_[i] ? x[i] : m_[i] * x[i] + bdt2 * y[i];
            };
            cg_solve(apply, b, acc, cg_tol_, cg_max_, diag_);
            for (std::size_t i = 0; i < n_; ++i)
                if (constrained_[i]) acc[i] = 0.0;
        }
        if (warm_accel) *warm_accel = acc;

        out.acc = acc;
        for (std::size_t i = 0; i < n_; ++i) {
            out.vel[i] = rhs.v[i] + nm_.gamma * nm_.dt * acc[i];
            out.disp[i] = rhs.d[i] + nm_.beta * nm_.dt * nm_.dt * acc[i];
        }
        for (std::size_t c = 0; c < bcs_.dofs.size(); ++c)
            out.vel[bcs_.dofs[c]] = homogeneous ? 0.0 : bcs_.velocity[c];
        return out;
    }

    // Residual of the acceleration row M a + K u - p (diagnostics).
    Vector dynamic_residual(const KinematicState& s, const Vector& p) const {
        Vector r = k_->multiply(s.disp);
        for (std::size_t i = 0; i < n_; ++i)
            r[i] = constrained_[i] ? 0.0 : m_[i] * s.acc[i] + r[i] - p[i];
        return r;
    }

    bool constrained(std::size_t dof) const { return constrained_[dof] != 0; }

private:
    const SparseMatrix* k_ = nullptr;
    Vector m_;
    NewmarkParams nm_;
    BcTable bcs_;
    std::vector<std::uint8_t> constrained_;
    Vector diag_;
    std::size_t n_ = 0;
    double cg_tol_ = 1e-12;
    int cg_max_ = 1000;
};

// One dynamic step M u'' + K u = p(t): predictor from the previous state,
// then the reduced block solve.
inline KinematicState advance_dynamic_step(const BlockOperator& op, const KinematicState& prev,
                                           const Vector& p_t, Vector* warm_accel = nullptr) {
    BlockRhs rhs = newmark_predictor(prev, op.params());
    rhs.a = p_t;
    return op.solve(rhs, warm_accel);
}

}  // namespace perimts
