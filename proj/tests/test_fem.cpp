#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "perimts/fem.hpp"
#include "support/oracles.hpp"

using namespace perimts;

namespace {

BoundsBox box2(double x0, double y0, double x1, double y1) {
    BoundsBox b;
    b.lo = {x0, y0, 0};
    b.hi = {x1, y1, 0};
    return b;
}

ElasticMaterial steel2d() { return {200e9, 1.0 / 3.0, 7800.0, Formulation::plane_stress}; }

std::vector<int> all_elements(const Mesh& m) {
    std::vector<int> v(m.element_count());
    for (int e = 0; e < m.element_count(); ++e) v[e] = e;
    return v;
}

}  // namespace

TEST_CASE("quad4 shape functions at the reference center") {
    const Mesh m = generate_structured(box2(0, 0, 1, 1), 1.0, 2);
    const double xi[3] = {0, 0, 0};
    const ShapeEval s = shape_and_gradients(m, m.elements[0], xi);
    for (int a = 0; a < 4; ++a) CHECK(s.N[a] == doctest::Approx(0.25));
    CHECK(s.detJ == doctest::Approx(0.25));  // quarter of the unit square
}

TEST_CASE("hex8 nodal interpolation property") {
    BoundsBox b;
    b.lo = {0, 0, 0};
    b.hi = {1, 1, 1};
    const Mesh m = generate_structured(b, 1.0, 3);
    static const double corners[8][3] = {{-1, -1, -1}, {1, -1, -1}, {1, 1, -1}, {-1, 1, -1},
                                         {-1, -1, 1},  {1, -1, 1},  {1, 1, 1},  {-1, 1, 1}};
    for (int a = 0; a < 8; ++a) {
        const ShapeEval s = shape_and_gradients(m, m.elements[0], corners[a]);
        for (int bnode = 0; bnode < 8; ++bnode)
            CHECK(s.N[bnode] == doctest::Approx(a == bnode ? 1.0 : 0.0));
    }
}

TEST_CASE("partition of unity at random points") {
    const Mesh mq = generate_structured(box2(0, 0, 2, 1), 1.0, 2);
    BoundsBox b3;
    b3.lo = {0, 0, 0};
    b3.hi = {1, 1, 1};
    const Mesh mh = generate_structured(b3, 1.0, 3);
    for (int trial = 0; trial < 200; ++trial) {
        const double xi[3] = {oracles::uniform(-1, 1), oracles::uniform(-1, 1),
                              oracles::uniform(-1, 1)};
        for (const Mesh* m : {&mq, &mh}) {
            const ShapeEval s = shape_and_gradients(*m, m->elements[0], xi);
            double sum = 0.0, gsum[3] = {0, 0, 0};
            for (int a = 0; a < s.nn; ++a) {
                sum += s.N[a];
                for (int k = 0; k < m->dim; ++k) gsum[k] += s.dNdx[a][k];
            }
            CHECK(sum == doctest::Approx(1.0).epsilon(1e-14));
            for (int k = 0; k < m->dim; ++k)
                CHECK(gsum[k] == doctest::Approx(0.0).scale(1.0));
        }
    }
}

TEST_CASE("element stiffness annihilates rigid-body modes") {
    Mesh m = generate_structured(box2(0, 0, 1, 1), 1.0, 2);
    // distort to a general quadrilateral (node 3 is the top-right corner)
    m.nodes[3] = {1.3, 1.2, 0};
    compute_element_geometry(m);
    const DenseMatrix d = elastic_matrix(steel2d());
    const DenseMatrix k = element_stiffness(m, m.elements[0], d);
    // translations
    for (int c = 0; c < 2; ++c) {
        Vector t(8, 0.0);
        for (int a = 0; a < 4; ++a) t[2 * a + c] = 1.0;
        const Vector kt = k.multiply(t);
        for (double v : kt) CHECK(std::abs(v) < 1e-9 * k.max_abs());
    }
    // infinitesimal rotation about the element center
    Vector rot(8, 0.0);
    for (int a = 0; a < 4; ++a) {
        const Point& p = m.nodes[m.elements[0].node_ids[a]];
        rot[2 * a] = -(p[1] - 0.5);
        rot[2 * a + 1] = p[0] - 0.5;
    }
    const Vector kr = k.multiply(rot);
    for (double v : kr) CHECK(std::abs(v) < 1e-9 * k.max_abs());
    // exactly three near-zero eigenvalues in 2D
    const Vector ev = symmetric_eigenvalues(k);
    int zero_modes = 0;
    for (double v : ev)
        if (std::abs(v) < 1e-9 * ev.back()) ++zero_modes;
    CHECK(zero_modes == 3);
}

TEST_CASE("element stiffness equals the finite-difference energy gradient") {
    Mesh m = generate_structured(box2(0, 0, 1, 1), 1.0, 2);
    m.nodes[3] = {1.1, 0.9, 0};
    compute_element_geometry(m);
    const DenseMatrix d = elastic_matrix(steel2d());
    const DenseMatrix k = element_stiffness(m, m.elements[0], d);
    // strain energy evaluated from pointwise strains, independent of the
    // matrix assembly path
    auto energy = [&](const Vector& u) {
        double e = 0.0;
        for (const auto& xi : gauss_points(2)) {
            const ShapeEval s = shape_and_gradients(m, m.elements[0], xi.data());
            const DenseMatrix b = strain_matrix(s, 2);
            const Vector eps = b.multiply(u);
            const Vector sig = d.multiply(eps);
            e += 0.5 * dot(eps, sig) * s.detJ;
        }
        return e;
    };
    // the energy is quadratic, so its gradient at u is exactly k u; the
    // centered difference probes it with step 1e-6
    for (int trial = 0; trial < 5; ++trial) {
        const Vector u = oracles::random_vector(8, 1e-3);
        const Vector ku = k.multiply(u);
        const double h = 1e-6 * norm_inf(u);
        const double scale_ref = norm_inf(ku);
        for (int i = 0; i < 8; ++i) {
            Vector up = u, um = u;
            up[i] += h;
            um[i] -= h;
            const double grad = (energy(up) - energy(um)) / (2.0 * h);
            CHECK(grad == doctest::Approx(ku[i]).epsilon(1e-5).scale(scale_ref));
        }
    }
}

TEST_CASE("uniaxial stretch energy of the unit square") {
    const Mesh m = generate_structured(box2(0, 0, 1, 1), 1.0, 2);
    const ElasticMaterial mat = steel2d();
    const DenseMatrix d = elastic_matrix(mat);
    const DenseMatrix k = element_stiffness(m, m.elements[0], d);
    const double s = 1e-3;
    Vector u(8, 0.0);
    for (int a = 0; a < 4; ++a) u[2 * a] = s * m.nodes[m.elements[0].node_ids[a]][0];
    const double energy = 0.5 * dot(u, k.multiply(u));
    CHECK(energy == doctest::Approx(0.5 * d(0, 0) * s * s).epsilon(1e-12));
}

TEST_CASE("lumped mass of the unit quad") {
    const Mesh m = generate_structured(box2(0, 0, 1, 1), 1.0, 2);
    const auto mass = lumped_mass(m, m.elements[0], 1.0);
    for (double v : mass) CHECK(v == doctest::Approx(0.25).epsilon(1e-14));
}

TEST_CASE("total mass of the beam mesh is rho V") {
    BoundsBox b;
    b.lo = {0, 0, 0};
    b.hi = {1, 1, 10};
    const Mesh m = generate_structured(b, 0.25, 3);
    const double rho = 2235.0;
    double total = 0.0;
    for (const auto& e : m.elements)
        for (double v : lumped_mass(m, e, rho)) total += v;
    CHECK(total == doctest::Approx(rho * 10.0).epsilon(1e-12));
}

TEST_CASE("distorted quad mass equals rho times quadrature volume") {
    Mesh m = generate_structured(box2(0, 0, 1, 1), 1.0, 2);
    m.nodes[3] = {1.4, 1.3, 0};
    m.nodes[2] = {-0.1, 0.9, 0};
    compute_element_geometry(m);
    const double rho = 3.21;
    double total = 0.0;
    for (double v : lumped_mass(m, m.elements[0], rho)) total += v;
    CHECK(total == doctest::Approx(rho * m.elements[0].volume).epsilon(1e-12));
}

TEST_CASE("uniform unit weight reproduces the plain assembly") {
    const Mesh m = generate_structured(box2(0, 0, 2, 1), 0.5, 2);
    const std::vector<double> ones(m.element_count(), 1.0);
    const std::vector<double> halves(m.element_count(), 0.5);
    LoadSpec none;
    const FeSystem full = assemble_global(m, all_elements(m), ones, nullptr, steel2d(), none);
    const FeSystem half = assemble_global(m, all_elements(m), halves, nullptr, steel2d(), none);
    REQUIRE(full.K.size() == half.K.size());
    double kmax = 0.0;
    for (double v : full.K.values()) kmax = std::max(kmax, std::abs(v));
    for (int i = 0; i < full.K.size(); ++i) {
        const auto& rp = full.K.row_ptr();
        for (int p = rp[i]; p < rp[i + 1]; ++p) {
            const int j = full.K.col_idx()[p];
            CHECK(std::abs(half.K.coeff(i, j) - 0.5 * full.K.values()[p]) <= 1e-13 * kmax);
        }
        CHECK(half.M[i] == doctest::Approx(0.5 * full.M[i]).epsilon(1e-13));
    }
}

TEST_CASE("zero weight on an FE-only element is an internal error") {
    const Mesh m = generate_structured(box2(0, 0, 2, 1), 0.5, 2);
    std::vector<double> alpha(m.element_count(), 1.0);
    alpha[3] = 0.0;
    std::vector<SubdomainLabel> labels(m.element_count(), SubdomainLabel::FE_only);
    LoadSpec none;
    CHECK_THROWS_AS(assemble_global(m, all_elements(m), alpha, &labels, steel2d(), none),
                    InternalError);
}

TEST_CASE("traction resultant matches the applied load") {
    // strip pulled on the right face
    const Mesh m = generate_structured(box2(0, 0, 10, 1), 0.05, 2);
    LoadSpec loads;
    TractionPatch patch;
    patch.box = box2(10 - 1e-6, -1, 10 + 1e-6, 2);
    patch.value = {4e6, 0, 0};
    loads.tractions.push_back(patch);
    const std::vector<double> ones(m.element_count(), 1.0);
    const FeSystem sys = assemble_global(m, all_elements(m), ones, nullptr, steel2d(), loads);
    double fx = 0.0, fy = 0.0;
    for (int i = 0; i < sys.dofs.n_dof; i += 2) {
        fx += sys.P_ext[i];
        fy += sys.P_ext[i + 1];
    }
    CHECK(fx == doctest::Approx(4e6 * 1.0).epsilon(1e-12));
    CHECK(fy == doctest::Approx(0.0).scale(4e6));
}

TEST_CASE("traction patch selecting nothing is a config error") {
    const Mesh m = generate_structured(box2(0, 0, 1, 1), 0.5, 2);
    LoadSpec loads;
    TractionPatch patch;
    patch.box = box2(5, 5, 6, 6);
    patch.value = {1, 0, 0};
    loads.tractions.push_back(patch);
    const std::vector<double> ones(m.element_count(), 1.0);
    CHECK_THROWS_AS(assemble_global(m, all_elements(m), ones, nullptr, steel2d(), loads),
                    ConfigError);
}

TEST_CASE("strain and stress recovery") {
    Mesh m = generate_structured(box2(0, 0, 1, 1), 1.0, 2);
    const DenseMatrix d = elastic_matrix(steel2d());
    SUBCASE("rigid translation gives zero strain") {
        Vector u(8);
        for (int a = 0; a < 4; ++a) {
            u[2 * a] = 0.7;
            u[2 * a + 1] = -0.3;
        }
        for (const auto& [eps, sig] : element_strain_stress(m, m.elements[0], u, d))
            for (double v : eps) CHECK(std::abs(v) < 1e-14);
    }
    SUBCASE("uniform stretch recovers the strain at all Gauss points") {
        const double s = 2.5e-4;
        Vector u(8, 0.0);
        for (int a = 0; a < 4; ++a) u[2 * a] = s * m.nodes[m.elements[0].node_ids[a]][0];
        for (const auto& [eps, sig] : element_strain_stress(m, m.elements[0], u, d)) {
            CHECK(eps[0] == doctest::Approx(s).epsilon(1e-12));
            CHECK(eps[1] == doctest::Approx(0.0).scale(s));
            CHECK(sig[0] == doctest::Approx(d(0, 0) * s).epsilon(1e-12));
        }
    }
    SUBCASE("random displacement has non-negative stress power") {
        for (int trial = 0; trial < 20; ++trial) {
            const Vector u = oracles::random_vector(8, 1e-3);
            for (const auto& [eps, sig] : element_strain_stress(m, m.elements[0], u, d)) {
                double p = 0.0;
                for (std::size_t c = 0; c < eps.size(); ++c) p += eps[c] * sig[c];
                CHECK(p >= -1e-9 * std::abs(p));
            }
        }
    }
}

TEST_CASE("global stiffness is symmetric PSD with translation null space") {
    const Mesh m = generate_structured(box2(0, 0, 2, 1), 0.25, 2);
    const std::vector<double> ones(m.element_count(), 1.0);
    LoadSpec none;
    const FeSystem sys = assemble_global(m, all_elements(m), ones, nullptr, steel2d(), none);
    // symmetry, judged against the matrix scale
    double kmax = 0.0;
    for (double v : sys.K.values()) kmax = std::max(kmax, std::abs(v));
    for (int i = 0; i < sys.K.size(); ++i) {
        const auto& rp = sys.K.row_ptr();
        for (int p = rp[i]; p < rp[i + 1]; ++p) {
            const int j = sys.K.col_idx()[p];
            const double vij = sys.K.values()[p];
            CHECK(std::abs(sys.K.coeff(j, i) - vij) <= 1e-13 * kmax);
        }
    }
    // translations in the null space
    for (int c = 0; c < 2; ++c) {
        Vector t(sys.dofs.n_dof, 0.0);
        for (int i = c; i < sys.dofs.n_dof; i += 2) t[i] = 1.0;
        for (double v : sys.K.multiply(t)) CHECK(std::abs(v) < 1e-12 * kmax);
    }
    // PSD on random vectors
    for (int trial = 0; trial < 20; ++trial) {
        const Vector x = oracles::random_vector(sys.dofs.n_dof);
        CHECK(dot(x, sys.K.multiply(x)) >= -1e-12 * kmax * dot(x, x));
    }
}

TEST_CASE("patch test: linear field from one static solve on two elements") {
    const Mesh m = generate_structured(box2(0, 0, 2, 1), 1.0, 2);
    const ElasticMaterial mat = steel2d();
    const std::vector<double> ones(m.element_count(), 1.0);
    const double sigma = 5e6;
    LoadSpec loads;
    TractionPatch patch;
    patch.box = box2(2 - 1e-9, -1, 2 + 1e-9, 2);
    patch.value = {sigma, 0, 0};
    loads.tractions.push_back(patch);
    const FeSystem sys = assemble_global(m, all_elements(m), ones, nullptr, mat, loads);

    // clamp ux on the left edge and uy at the origin, solve K u = f
    std::vector<std::uint8_t> fixed(sys.dofs.n_dof, 0);
    for (int n : sys.dofs.active_nodes) {
        const Point& p = m.nodes[n];
        if (p[0] == 0.0) fixed[sys.dofs.dof(n, 0)] = 1;
        if (p[0] == 0.0 && p[1] == 0.0) fixed[sys.dofs.dof(n, 1)] = 1;
    }
    Vector f = sys.P_ext;
    for (int i = 0; i < sys.dofs.n_dof; ++i)
        if (fixed[i]) f[i] = 0.0;
    auto apply = [&](const Vector& x, Vector& y) {
        sys.K.multiply(x, y);
        for (int i = 0; i < sys.dofs.n_dof; ++i)
            if (fixed[i]) y[i] = x[i];
    };
    Vector u(sys.dofs.n_dof, 0.0);
    cg_solve(apply, f, u, 1e-14, 10000);

    // exact uniaxial plane-stress solution: u = (sigma/E) x, v = -nu (sigma/E) y
    const double exx = sigma / mat.E;
    for (int n : sys.dofs.active_nodes) {
        const Point& p = m.nodes[n];
        CHECK(u[sys.dofs.dof(n, 0)] == doctest::Approx(exx * p[0]).epsilon(1e-10));
        CHECK(u[sys.dofs.dof(n, 1)] ==
              doctest::Approx(-mat.nu * exx * p[1]).epsilon(1e-10).scale(exx));
    }
}

TEST_CASE("assembly is independent of element order") {
    const Mesh m = generate_structured(box2(0, 0, 2, 1), 0.25, 2);
    std::vector<int> order = all_elements(m);
    std::vector<int> shuffled = order;
    std::shuffle(shuffled.begin(), shuffled.end(), oracles::rng());
    const std::vector<double> ones(m.element_count(), 1.0);
    LoadSpec none;
    const FeSystem a = assemble_global(m, order, ones, nullptr, steel2d(), none);
    const FeSystem b = assemble_global(m, shuffled, ones, nullptr, steel2d(), none);
    REQUIRE(a.K.size() == b.K.size());
    double kmax = 0.0;
    for (double v : a.K.values()) kmax = std::max(kmax, std::abs(v));
    for (int i = 0; i < a.K.size(); ++i) {
        const auto& rp = a.K.row_ptr();
        for (int p = rp[i]; p < rp[i + 1]; ++p) {
            const int j = a.K.col_idx()[p];
            const double va = a.K.values()[p];
            CHECK(std::abs(b.K.coeff(i, j) - va) <= 1e-13 * kmax);
        }
    }
}
