#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "perimts/newmark.hpp"
#include "support/oracles.hpp"

using namespace perimts;

namespace {

SparseMatrix scalar_matrix(double v) {
    return SparseMatrix::from_triplets(1, {{0, 0, v}}, true);
}

SparseMatrix sparse_from_dense(const DenseMatrix& d) {
    std::vector<Triplet> ts;
    for (std::size_t i = 0; i < d.rows(); ++i)
        for (std::size_t j = 0; j < d.cols(); ++j)
            if (d(i, j) != 0.0) ts.push_back({int(i), int(j), d(i, j)});
    return SparseMatrix::from_triplets(int(d.rows()), ts, true);
}

}  // namespace

TEST_CASE("kinematic update under constant acceleration") {
    NewmarkParams p{0.5, 0.0, 0.1};
    KinematicState s = KinematicState::zero(1);
    const double a = 2.0;
    s.acc[0] = a;  // acceleration known at step 0
    const KinematicState next = newmark_step(s, Vector{a}, p);
    CHECK(next.vel[0] == doctest::Approx(a * p.dt).epsilon(1e-14));
    CHECK(next.disp[0] == doctest::Approx(0.5 * a * p.dt * p.dt).epsilon(1e-14));
}

TEST_CASE("average acceleration conserves the oscillator amplitude") {
    const double omega = 2.0 * 3.14159265358979323846;  // 1 Hz
    const SparseMatrix k = scalar_matrix(omega * omega);
    NewmarkParams p{0.5, 0.25, 0.05};
    BlockOperator op(&k, Vector{1.0}, p, BcTable{}, 1e-14);
    KinematicState s = KinematicState::zero(1);
    s.disp[0] = 1.0;
    s.acc = op.initial_acceleration(Vector{0.0}, s.disp);
    auto amplitude = [&](const KinematicState& st) {
        return std::sqrt(st.disp[0] * st.disp[0] +
                         st.vel[0] * st.vel[0] / (omega * omega));
    };
    const double a0 = amplitude(s);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        s = advance_dynamic_step(op, s, Vector{0.0});
        worst = std::max(worst, std::abs(amplitude(s) - a0) / a0);
    }
    CHECK(worst < 1e-6);
}

TEST_CASE("explicit integration diverges above the stability limit") {
    const double omega = 10.0;
    const SparseMatrix k = scalar_matrix(omega * omega);
    auto run = [&](double dt) {
        NewmarkParams p{0.5, 0.0, dt};
        BlockOperator op(&k, Vector{1.0}, p, BcTable{});
        KinematicState s = KinematicState::zero(1);
        s.disp[0] = 1e-3;
        s.acc = op.initial_acceleration(Vector{0.0}, s.disp);
        for (int i = 0; i < 400; ++i) s = advance_dynamic_step(op, s, Vector{0.0});
        return std::abs(s.disp[0]);
    };
    const double dt_crit = 2.0 / omega;
    CHECK(run(1.02 * dt_crit) > 1e3);   // spectral radius above one
    CHECK(run(0.98 * dt_crit) < 1e-1);  // bounded below the limit
}

TEST_CASE("zero load and zero state stay zero") {
    const SparseMatrix k = scalar_matrix(4.0);
    NewmarkParams p{0.5, 0.25, 0.1};
    BlockOperator op(&k, Vector{2.0}, p, BcTable{});
    KinematicState s = KinematicState::zero(1);
    for (int i = 0; i < 10; ++i) s = advance_dynamic_step(op, s, Vector{0.0});
    CHECK(s.disp[0] == 0.0);
    CHECK(s.vel[0] == 0.0);
    CHECK(s.acc[0] == 0.0);
}

TEST_CASE("numerically damped run converges to the static solution") {
    const int n = 6;
    const DenseMatrix kd = oracles::random_spd(n, 2.0);
    const SparseMatrix k = sparse_from_dense(kd);
    const Vector p_load = oracles::random_vector(n);
    // gamma > 1/2 introduces numerical damping; beta at the stability bound
    const double gamma = 0.9, beta = 0.25 * (gamma + 0.5) * (gamma + 0.5);
    NewmarkParams p{gamma, beta, 0.5};
    BlockOperator op(&k, Vector(n, 1.0), p, BcTable{}, 1e-13);
    KinematicState s = KinematicState::zero(n);
    s.acc = op.initial_acceleration(p_load, s.disp);
    for (int i = 0; i < 4000; ++i) s = advance_dynamic_step(op, s, p_load);
    const Vector u_static = oracles::dense_solve(kd, p_load);
    for (int i = 0; i < n; ++i)
        CHECK(s.disp[i] == doctest::Approx(u_static[i]).epsilon(1e-2));
}

TEST_CASE("explicit branch reduces to a diagonal division") {
    const int n = 4;
    const DenseMatrix kd = oracles::random_spd(n);
    const SparseMatrix k = sparse_from_dense(kd);
    const Vector mass{1.0, 2.0, 3.0, 4.0};
    NewmarkParams p{0.5, 0.0, 0.01};
    BlockOperator op(&k, mass, p, BcTable{});
    BlockRhs rhs{oracles::random_vector(n), oracles::random_vector(n),
                 oracles::random_vector(n)};
    const KinematicState s = op.solve(rhs);
    const Vector krd = k.multiply(rhs.d);
    for (int i = 0; i < n; ++i) {
        CHECK(s.acc[i] == doctest::Approx((rhs.a[i] - krd[i]) / mass[i]).epsilon(1e-14));
        CHECK(s.vel[i] == doctest::Approx(rhs.v[i] + p.gamma * p.dt * s.acc[i]).epsilon(1e-14));
        CHECK(s.disp[i] == doctest::Approx(rhs.d[i]).epsilon(1e-14));  // beta = 0
    }
}

TEST_CASE("block solve satisfies the stacked equations") {
    // random small system: check M_block U + N_block U_prev = P by
    // substituting the solution back through the definitions
    const int n = 8;
    const DenseMatrix kd = oracles::random_spd(n, 1.5);
    const SparseMatrix k = sparse_from_dense(kd);
    Vector mass(n);
    for (double& v : mass) v = oracles::uniform(0.5, 2.0);
    for (double beta : {0.0, 0.25}) {
        NewmarkParams p{0.5, beta, 0.07};
        BlockOperator op(&k, mass, p, BcTable{}, 1e-14);
        KinematicState prev{oracles::random_vector(n), oracles::random_vector(n),
                            oracles::random_vector(n)};
        const Vector load = oracles::random_vector(n);
        BlockRhs rhs = newmark_predictor(prev, p);
        rhs.a = load;
        const KinematicState s = op.solve(rhs);
        // acceleration row: M a + K u = P
        const Vector ku = k.multiply(s.disp);
        double scale = norm_inf(load) + norm_inf(ku);
        for (int i = 0; i < n; ++i)
            CHECK(std::abs(mass[i] * s.acc[i] + ku[i] - load[i]) <= 1e-10 * scale);
        // velocity and displacement rows: the Newmark update itself
        const KinematicState ref = newmark_step(prev, s.acc, p);
        for (int i = 0; i < n; ++i) {
            CHECK(s.vel[i] == doctest::Approx(ref.vel[i]).epsilon(1e-13));
            CHECK(s.disp[i] == doctest::Approx(ref.disp[i]).epsilon(1e-13));
        }
    }
}

TEST_CASE("prescribed velocity dofs follow their path") {
    const int n = 4;
    const SparseMatrix k = sparse_from_dense(oracles::random_spd(n));
    BcTable bcs;
    bcs.dofs = {0};
    bcs.velocity = {2.5};
    NewmarkParams p{0.5, 0.0, 0.01};
    BlockOperator op(&k, Vector(n, 1.0), p, bcs);
    KinematicState s = KinematicState::zero(n);
    s.vel[0] = 2.5;
    s.acc = op.initial_acceleration(Vector(n, 0.0), s.disp);
    CHECK(s.acc[0] == 0.0);
    for (int i = 1; i <= 50; ++i) {
        s = advance_dynamic_step(op, s, Vector(n, 0.0));
        CHECK(s.vel[0] == 2.5);
        CHECK(s.disp[0] == doctest::Approx(2.5 * i * p.dt).epsilon(1e-12));
    }
    // the moving boundary drags the rest of the system
    double moved = 0.0;
    for (int i = 1; i < n; ++i) moved += std::abs(s.disp[i]);
    CHECK(moved > 0.0);
    // homogeneous solves keep constrained dofs at rest
    BlockRhs rhs{Vector(n, 0.0), Vector(n, 0.0), Vector(n, 0.0)};
    rhs.a[1] = 1.0;
    const KinematicState w = op.solve(rhs, nullptr, true);
    CHECK(w.vel[0] == 0.0);
    CHECK(w.disp[0] == 0.0);
}

TEST_CASE("non-positive mass on a free dof is rejected") {
    const SparseMatrix k = scalar_matrix(1.0);
    NewmarkParams p{0.5, 0.0, 0.1};
    CHECK_THROWS_AS(BlockOperator(&k, Vector{0.0}, p, BcTable{}), SolverError);
}
