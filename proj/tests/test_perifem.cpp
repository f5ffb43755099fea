#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "perimts/perifem.hpp"
#include "support/oracles.hpp"

using namespace perimts;

namespace {

BoundsBox box2(double x0, double y0, double x1, double y1) {
    BoundsBox b;
    b.lo = {x0, y0, 0};
    b.hi = {x1, y1, 0};
    return b;
}

PDMaterial test_pd(double delta) { return {delta, delta / 4.0, 1.0e9, 0.0}; }

ElasticMaterial glass2d() { return {65e9, 1.0 / 3.0, 2235.0, Formulation::plane_stress}; }

std::vector<int> all_elements(const Mesh& m) {
    std::vector<int> v(m.element_count());
    for (int e = 0; e < m.element_count(); ++e) v[e] = e;
    return v;
}

std::function<double(const Point&)> alpha_zero() {
    return [](const Point&) { return 0.0; };
}

// dense reference: scatter every PE block into an n x n matrix by explicit
// outer products, no sparsity machinery involved
DenseMatrix dense_pd_assembly(const Mesh& mesh, const DofMap& dofs,
                              const std::vector<PeriElement>& pes,
                              const std::vector<double>& pe_weight, const PDMaterial& pd) {
    DenseMatrix k(dofs.n_dof, dofs.n_dof);
    const int d = mesh.dim;
    for (std::size_t p = 0; p < pes.size(); ++p) {
        const auto& pe = pes[p];
        const Element& ei = mesh.elements[pe.elem_i];
        const Element& ej = mesh.elements[pe.elem_j];
        for (const auto& qp : pe.quad_pairs) {
            if (!qp.mu) continue;
            const double c = micromodulus(qp.xi_norm, pd);
            std::vector<int> rows;
            std::vector<double> g;
            for (int a = 0; a < ej.node_count(); ++a)
                for (int cdir = 0; cdir < d; ++cdir) {
                    rows.push_back(dofs.dof(ej.node_ids[a], cdir));
                    g.push_back(qp.shape_j[a] * qp.xi[cdir]);
                }
            for (int a = 0; a < ei.node_count(); ++a)
                for (int cdir = 0; cdir < d; ++cdir) {
                    rows.push_back(dofs.dof(ei.node_ids[a], cdir));
                    g.push_back(-qp.shape_i[a] * qp.xi[cdir]);
                }
            const double f = pe_weight[p] * qp.weight * c;
            for (std::size_t r = 0; r < rows.size(); ++r)
                for (std::size_t s = 0; s < rows.size(); ++s)
                    k(rows[r], rows[s]) += f * g[r] * g[s];
        }
    }
    return k;
}

}  // namespace

TEST_CASE("fully broken PE has zero stiffness") {
    const Mesh m = generate_structured(box2(0, 0, 2, 1), 1.0, 2);
    auto pes = build_peri_elements(m, find_pe_pairs(m, 1.5));
    REQUIRE(pes.size() == 1);
    for (auto& qp : pes[0].quad_pairs) qp.mu = 0;
    const DenseMatrix k = pe_stiffness(m, pes[0], test_pd(1.5));
    CHECK(k.max_abs() == 0.0);
}

TEST_CASE("joint rigid translation is in the PE null space") {
    const Mesh m = generate_structured(box2(0, 0, 2, 1), 1.0, 2);
    auto pes = build_peri_elements(m, find_pe_pairs(m, 1.5), 2);
    const DenseMatrix k = pe_stiffness(m, pes[0], test_pd(1.5));
    for (int c = 0; c < 2; ++c) {
        Vector t(k.rows(), 0.0);
        for (std::size_t i = c; i < t.size(); i += 2) t[i] = 1.0;
        for (double v : k.multiply(t)) CHECK(std::abs(v) <= 1e-12 * k.max_abs());
    }
}

TEST_CASE("one-point PE stiffness matches the hand-expanded outer product") {
    const Mesh m = generate_structured(box2(0, 0, 2, 1), 1.0, 2);
    auto pes = build_peri_elements(m, find_pe_pairs(m, 1.5));
    const PDMaterial pd = test_pd(1.5);
    const DenseMatrix k = pe_stiffness(m, pes[0], pd);
    // xi = (1, 0), shape values all 1/4, weight = 1: the block is
    // c(1) * g g^T with g = [N_j xi, -N_i xi]
    const double c = micromodulus(1.0, pd);
    Vector g(16, 0.0);
    for (int a = 0; a < 4; ++a) {
        g[2 * a] = 0.25 * 1.0;       // element j entries, x-component
        g[8 + 2 * a] = -0.25 * 1.0;  // element i entries
    }
    for (int r = 0; r < 16; ++r)
        for (int s = 0; s < 16; ++s)
            CHECK(k(r, s) == doctest::Approx(c * g[r] * g[s]).epsilon(1e-13).scale(c * 0.0625));
}

namespace {

// two unit quads with disjoint node sets, centroids one apart in x
Mesh disjoint_quads() {
    Mesh m;
    m.dim = 2;
    m.nodes = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
               {1, 0, 0}, {2, 0, 0}, {2, 1, 0}, {1, 1, 0}};
    m.elements.resize(2);
    m.elements[0] = {0, ElemKind::quad4, {0, 1, 2, 3}, {}, 0};
    m.elements[1] = {1, ElemKind::quad4, {4, 5, 6, 7}, {}, 0};
    compute_element_geometry(m);
    return m;
}

}  // namespace

TEST_CASE("bond stretch of elementary configurations") {
    const Mesh m = disjoint_quads();
    auto pes = build_peri_elements(m, {{0, 1}});
    const DofMap dofs = build_dof_map(m, {0, 1});
    SUBCASE("zero displacement means zero stretch") {
        const Vector u(dofs.n_dof, 0.0);
        CHECK(bond_stretch(m, pes[0], pes[0].quad_pairs[0], u, dofs) == doctest::Approx(0.0));
    }
    SUBCASE("collinear extension: xi=(1,0), eta=(0.1,0) gives s=0.1") {
        Vector u(dofs.n_dof, 0.0);
        // move element j (the right one) 0.1 in +x
        const Element& ej = m.elements[pes[0].elem_j];
        for (int a = 0; a < 4; ++a) u[dofs.dof(ej.node_ids[a], 0)] = 0.1;
        CHECK(bond_stretch(m, pes[0], pes[0].quad_pairs[0], u, dofs) ==
              doctest::Approx(0.1).epsilon(1e-12));
    }
    SUBCASE("full collapse reports s = -1, never NaN") {
        Vector u(dofs.n_dof, 0.0);
        const Element& ej = m.elements[pes[0].elem_j];
        for (int a = 0; a < 4; ++a) u[dofs.dof(ej.node_ids[a], 0)] = -1.0;
        CHECK(bond_stretch(m, pes[0], pes[0].quad_pairs[0], u, dofs) == doctest::Approx(-1.0));
    }
}

TEST_CASE("vector arithmetic case: xi=(3,4), eta=(0.6,0.8) gives s=0.2") {
    // two single-element meshes can't produce this xi; verify via the formula
    // on a manufactured quad pair
    Mesh m;
    m.dim = 2;
    m.nodes = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
               {3, 4, 0}, {4, 4, 0}, {4, 5, 0}, {3, 5, 0}};
    m.elements.resize(2);
    m.elements[0] = {0, ElemKind::quad4, {0, 1, 2, 3}, {}, 0};
    m.elements[1] = {1, ElemKind::quad4, {4, 5, 6, 7}, {}, 0};
    compute_element_geometry(m);
    auto pes = build_peri_elements(m, {{0, 1}});
    const DofMap dofs = build_dof_map(m, {0, 1});
    Vector u(dofs.n_dof, 0.0);
    for (int n = 4; n < 8; ++n) {
        u[dofs.dof(n, 0)] = 0.6;
        u[dofs.dof(n, 1)] = 0.8;
    }
    // |xi| = 5, |xi + eta| = |(3.6, 4.8)| = 6
    CHECK(bond_stretch(m, pes[0], pes[0].quad_pairs[0], u, dofs) ==
          doctest::Approx(0.2).epsilon(1e-13));
}

TEST_CASE("bond breaking threshold is inclusive and irreversible") {
    const Mesh m = disjoint_quads();
    auto pes = build_peri_elements(m, {{0, 1}});
    const DofMap dofs = build_dof_map(m, {0, 1});
    const double s_crit = 0.1;
    Vector u(dofs.n_dof, 0.0);
    const Element& ej = m.elements[pes[0].elem_j];

    SUBCASE("just below the threshold survives") {
        for (int a = 0; a < 4; ++a)
            u[dofs.dof(ej.node_ids[a], 0)] = (s_crit - 1e-9) * 1.0;
        CHECK(update_bond_states(m, pes, u, dofs, s_crit).empty());
        CHECK(pes[0].quad_pairs[0].mu == 1);
    }
    SUBCASE("exactly the threshold breaks") {
        for (int a = 0; a < 4; ++a) u[dofs.dof(ej.node_ids[a], 0)] = s_crit * 1.0;
        const auto broken = update_bond_states(m, pes, u, dofs, s_crit);
        REQUIRE(broken.size() == 1);
        CHECK(broken[0].pe == 0);
        CHECK(pes[0].quad_pairs[0].mu == 0);
        // second call reports nothing new even at larger stretch
        for (int a = 0; a < 4; ++a) u[dofs.dof(ej.node_ids[a], 0)] = 2 * s_crit;
        CHECK(update_bond_states(m, pes, u, dofs, s_crit).empty());
        CHECK(pes[0].quad_pairs[0].mu == 0);
    }
}

TEST_CASE("damage field limits and the half-broken midpoint") {
    const Mesh m = generate_structured(box2(0, 0, 3, 1), 1.0, 2);
    auto pes = build_peri_elements(m, find_pe_pairs(m, 1.5));
    REQUIRE(pes.size() == 2);  // (0,1) and (1,2)
    SUBCASE("all intact gives zero damage") {
        const DamageField f = damage_field(m, pes);
        for (double v : f.element) CHECK(v == 0.0);
        for (double v : f.node) CHECK(v == 0.0);
    }
    SUBCASE("all broken gives full damage where bonds exist") {
        for (auto& pe : pes)
            for (auto& qp : pe.quad_pairs) qp.mu = 0;
        const DamageField f = damage_field(m, pes);
        for (int e = 0; e < 3; ++e) CHECK(f.element[e] == doctest::Approx(1.0));
    }
    SUBCASE("breaking one of two equal-weight bonds gives phi = 0.5") {
        pes[0].quad_pairs[0].mu = 0;  // the (0,1) bond
        const DamageField f = damage_field(m, pes);
        CHECK(f.element[1] == doctest::Approx(0.5));  // middle element sees both bonds
        CHECK(f.element[0] == doctest::Approx(1.0));
        CHECK(f.element[2] == doctest::Approx(0.0));
    }
    SUBCASE("element with no incident bonds reports zero by convention") {
        const Mesh m1 = generate_structured(box2(0, 0, 1, 1), 1.0, 2);
        const std::vector<PeriElement> none;
        const DamageField f = damage_field(m1, none);
        CHECK(f.element[0] == 0.0);
        CHECK(f.node[0] == 0.0);
    }
}

TEST_CASE("assembled PD stiffness matches the dense double-loop oracle") {
    const Mesh m = generate_structured(box2(0, 0, 5e-3, 4e-3), 1e-3, 2);
    REQUIRE(m.element_count() == 20);
    const PDMaterial pd{3.03e-3, 3.03e-3 / 16, 2.5e21, 0.0};
    auto pes = build_peri_elements(m, find_pe_pairs(m, pd.delta));
    LoadSpec none;
    const std::vector<double> alpha(m.element_count(), 0.0);
    PdSystem sys = assemble_pd_global(m, all_elements(m), alpha, alpha_zero(), pes, pd,
                                      glass2d(), none);
    const DenseMatrix ref =
        dense_pd_assembly(m, sys.dofs, pes, std::vector<double>(pes.size(), 1.0), pd);
    double kmax = ref.max_abs();
    for (int i = 0; i < sys.dofs.n_dof; ++i)
        for (int j = 0; j < sys.dofs.n_dof; ++j)
            CHECK(std::abs(sys.K.coeff(i, j) - ref(i, j)) <= 1e-12 * kmax);
}

TEST_CASE("PD stiffness is symmetric PSD with translations in the null space") {
    const Mesh m = generate_structured(box2(0, 0, 6e-3, 3e-3), 1e-3, 2);
    const PDMaterial pd{2.5e-3, 0.5e-3, 1e21, 0.0};
    auto pes = build_peri_elements(m, find_pe_pairs(m, pd.delta));
    LoadSpec none;
    const std::vector<double> alpha(m.element_count(), 0.0);
    PdSystem sys = assemble_pd_global(m, all_elements(m), alpha, alpha_zero(), pes, pd,
                                      glass2d(), none);
    double kmax = 0.0;
    for (double v : sys.K.values()) kmax = std::max(kmax, std::abs(v));
    for (int i = 0; i < sys.K.size(); ++i)
        for (int p = sys.K.row_ptr()[i]; p < sys.K.row_ptr()[i + 1]; ++p)
            CHECK(std::abs(sys.K.coeff(sys.K.col_idx()[p], i) - sys.K.values()[p]) <=
                  1e-13 * kmax);
    for (int c = 0; c < 2; ++c) {
        Vector t(sys.dofs.n_dof, 0.0);
        for (int i = c; i < sys.dofs.n_dof; i += 2) t[i] = 1.0;
        for (double v : sys.K.multiply(t)) CHECK(std::abs(v) <= 1e-12 * kmax);
    }
    for (int trial = 0; trial < 20; ++trial) {
        const Vector x = oracles::random_vector(sys.dofs.n_dof);
        CHECK(dot(x, sys.K.multiply(x)) >= -1e-12 * kmax * dot(x, x));
    }
}

TEST_CASE("breaking one PE removes exactly its block") {
    const Mesh m = generate_structured(box2(0, 0, 5e-3, 4e-3), 1e-3, 2);
    const PDMaterial pd{2.2e-3, 0.5e-3, 1e21, 0.0};
    auto pes = build_peri_elements(m, find_pe_pairs(m, pd.delta));
    LoadSpec none;
    const std::vector<double> alpha(m.element_count(), 0.0);
    PdSystem sys = assemble_pd_global(m, all_elements(m), alpha, alpha_zero(), pes, pd,
                                      glass2d(), none);
    // break every quad pair of PE 5 and update incrementally
    std::vector<BrokenBond> broken;
    for (std::size_t q = 0; q < pes[5].quad_pairs.size(); ++q) {
        pes[5].quad_pairs[q].mu = 0;
        broken.push_back({5, int(q)});
    }
    incremental_stiffness_update(sys.K, m, sys.dofs, pes, sys.pe_weight, broken, pd);
    // reassemble from scratch with the damaged state
    PdSystem ref = assemble_pd_global(m, all_elements(m), alpha, alpha_zero(), pes, pd,
                                      glass2d(), none);
    double kmax = 0.0;
    for (double v : ref.K.values()) kmax = std::max(kmax, std::abs(v));
    for (int i = 0; i < sys.K.size(); ++i)
        for (int p = sys.K.row_ptr()[i]; p < sys.K.row_ptr()[i + 1]; ++p)
            CHECK(std::abs(sys.K.values()[p] - ref.K.coeff(i, sys.K.col_idx()[p])) <=
                  1e-12 * kmax);
}

TEST_CASE("incremental update with an empty delta changes nothing") {
    const Mesh m = generate_structured(box2(0, 0, 3e-3, 2e-3), 1e-3, 2);
    const PDMaterial pd{2.2e-3, 0.5e-3, 1e21, 0.0};
    auto pes = build_peri_elements(m, find_pe_pairs(m, pd.delta));
    LoadSpec none;
    const std::vector<double> alpha(m.element_count(), 0.0);
    PdSystem sys = assemble_pd_global(m, all_elements(m), alpha, alpha_zero(), pes, pd,
                                      glass2d(), none);
    const std::vector<double> before = sys.K.values();
    incremental_stiffness_update(sys.K, m, sys.dofs, pes, sys.pe_weight, {}, pd);
    CHECK(sys.K.values() == before);  // bitwise
}

TEST_CASE("breaking everything zeroes the operator") {
    const Mesh m = generate_structured(box2(0, 0, 4e-3, 2e-3), 1e-3, 2);
    const PDMaterial pd{2.2e-3, 0.5e-3, 1e21, 0.0};
    auto pes = build_peri_elements(m, find_pe_pairs(m, pd.delta));
    LoadSpec none;
    const std::vector<double> alpha(m.element_count(), 0.0);
    PdSystem sys = assemble_pd_global(m, all_elements(m), alpha, alpha_zero(), pes, pd,
                                      glass2d(), none);
    std::vector<BrokenBond> broken;
    for (std::size_t p = 0; p < pes.size(); ++p)
        for (std::size_t q = 0; q < pes[p].quad_pairs.size(); ++q) {
            pes[p].quad_pairs[q].mu = 0;
            broken.push_back({int(p), int(q)});
        }
    incremental_stiffness_update(sys.K, m, sys.dofs, pes, sys.pe_weight, broken, pd);
    double kmax = 0.0, korig = 0.0;
    for (double v : sys.K.values()) kmax = std::max(kmax, std::abs(v));
    PdSystem fresh = assemble_pd_global(m, all_elements(m), alpha, alpha_zero(),
                                        build_peri_elements(m, find_pe_pairs(m, pd.delta)), pd,
                                        glass2d(), none);
    for (double v : fresh.K.values()) korig = std::max(korig, std::abs(v));
    CHECK(kmax <= 1e-12 * korig);
}

TEST_CASE("quadratic form decreases monotonically as bonds break") {
    const Mesh m = generate_structured(box2(0, 0, 6e-3, 3e-3), 1e-3, 2);
    const PDMaterial pd{2.2e-3, 0.5e-3, 1e21, 0.0};
    auto pes = build_peri_elements(m, find_pe_pairs(m, pd.delta));
    LoadSpec none;
    const std::vector<double> alpha(m.element_count(), 0.0);
    PdSystem sys = assemble_pd_global(m, all_elements(m), alpha, alpha_zero(), pes, pd,
                                      glass2d(), none);
    const Vector x = oracles::random_vector(sys.dofs.n_dof);
    double prev = dot(x, sys.K.multiply(x));
    for (std::size_t p = 0; p < pes.size(); p += 2) {
        std::vector<BrokenBond> broken;
        for (std::size_t q = 0; q < pes[p].quad_pairs.size(); ++q) {
            if (!pes[p].quad_pairs[q].mu) continue;
            pes[p].quad_pairs[q].mu = 0;
            broken.push_back({int(p), int(q)});
        }
        incremental_stiffness_update(sys.K, m, sys.dofs, pes, sys.pe_weight, broken, pd);
        const double now = dot(x, sys.K.multiply(x));
        CHECK(now <= prev * (1.0 + 1e-12) + 1e-12);
        prev = now;
    }
}

TEST_CASE("PD internal force approaches the FE force as the horizon shrinks") {
    // uniform stretch on a long strip: the force mismatch lives in the
    // delta-wide surface zones and shrinks with the horizon as long as the
    // micromodulus stays resolvable on the lattice (l = delta/8 here)
    const Mesh m = generate_structured(box2(0, 0, 40e-3, 4e-3), 1e-3, 2);
    const ElasticMaterial mat = glass2d();
    LoadSpec none;
    const std::vector<double> ones(m.element_count(), 1.0);
    const std::vector<double> zeros(m.element_count(), 0.0);
    const FeSystem fe = assemble_global(m, all_elements(m), ones, nullptr, mat, none);
    const double s = 1e-4;
    Vector u(fe.dofs.n_dof, 0.0);
    for (int n : fe.dofs.active_nodes) u[fe.dofs.dof(n, 0)] = s * m.nodes[n][0];
    const Vector f_fe = fe.K.multiply(u);
    double gap_prev = -1.0;
    for (double factor : {4.0, 2.0}) {
        PDMaterial pd;
        pd.delta = factor * 1e-3;
        pd.l = pd.delta / 8.0;
        pd.c0 = calibrate_c0(mat.E, pd.delta, pd.l, mat.formulation);
        auto pes = build_peri_elements(m, find_pe_pairs(m, pd.delta));
        PdSystem pdsys = assemble_pd_global(m, all_elements(m), zeros, alpha_zero(), pes, pd,
                                            mat, none);
        // same dof layout: both maps number all nodes in order
        const Vector f_pd = pdsys.K.multiply(u);
        Vector diff(f_fe.size());
        for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = f_pd[i] - f_fe[i];
        const double gap = norm2(diff) / norm2(f_fe);
        if (gap_prev >= 0.0) CHECK(gap < gap_prev);
        gap_prev = gap;
    }
}

TEST_CASE("PE with an end outside the PD-active set is rejected") {
    const Mesh m = generate_structured(box2(0, 0, 3, 1), 1.0, 2);
    auto pes = build_peri_elements(m, {{0, 2}});
    LoadSpec none;
    const std::vector<double> alpha(m.element_count(), 0.0);
    // active set excludes element 2
    CHECK_THROWS_AS(
        assemble_pd_global(m, {0, 1}, alpha, alpha_zero(), pes, test_pd(3.0), glass2d(), none),
        InternalError);
}
