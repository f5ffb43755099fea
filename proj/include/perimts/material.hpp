#pragma once

#include <cmath>
#include <iostream>
#include <string>

#include "perimts/errors.hpp"
#include "perimts/linalg.hpp"

namespace perimts {

enum class Formulation { plane_stress, plane_strain, three_d };

inline Formulation formulation_from_string(const std::string& s) {
    if (s == "plane_stress") return Formulation::plane_stress;
    if (s == "plane_strain") return Formulation::plane_strain;
    if (s == "three_d" || s == "3d") return Formulation::three_d;
    throw ConfigError("unknown formulation '" + s + "'");
}

struct ElasticMaterial {
    double E = 0.0;    // Pa
    double nu = 0.0;
    double rho = 0.0;  // kg/m^3
    Formulation formulation = Formulation::plane_stress;

    void validate() const {
        if (E <= 0.0) throw ConfigError("elastic modulus must be positive");
        if (rho <= 0.0) throw ConfigError("density must be positive");
        if (nu <= -1.0 || nu >= 0.5) throw ConfigError("Poisson ratio out of (-1, 0.5)");
        const double ref = formulation == Formulation::three_d ? 0.25 : 1.0 / 3.0;
        if (std::abs(nu - ref) > 1e-9)
            std::cerr << "warning: nu=" << nu << " is not the bond-based PD value " << ref
                      << " for this formulation; PD and CCM stiffness will differ in bulk\n";
    }
};

struct PDMaterial {
    double delta = 0.0;   // horizon, m
    double l = 0.0;       // micromodulus length scale, m
    double c0 = 0.0;      // micromodulus amplitude
    double s_crit = 0.0;  // critical stretch; bonds never break when <= 0

    bool fracture_enabled() const { return s_crit > 0.0 && std::isfinite(s_crit); }

    void validate() const {
        if (delta <= 0.0) throw ConfigError("horizon must be positive");
        if (l <= 0.0 || l > delta) throw ConfigError("length scale must satisfy 0 < l <= delta");
        if (c0 <= 0.0) throw ConfigError("micromodulus amplitude must be positive");
    }
};

// Engineering-strain elastic matrix: 3x3 in 2D, 6x6 in 3D (Voigt order
// xx, yy, zz, xy, yz, zx).
inline DenseMatrix elastic_matrix(const ElasticMaterial& mat) {
    const double E = mat.E, nu = mat.nu;
    if (mat.formulation == Formulation::plane_stress) {
        DenseMatrix d(3, 3);
        const double f = E / (1.0 - nu * nu);
        d(0, 0) = d(1, 1) = f;
        d(0, 1) = d(1, 0) = f * nu;
        d(2, 2) = f * (1.0 - nu) / 2.0;
        return d;
    }
    if (std::abs(1.0 - 2.0 * nu) < 1e-12)
        throw ConfigError("nu = 0.5 is singular for plane strain / 3D");
    const double lam = E * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
    const double mu = E / (2.0 * (1.0 + nu));
    if (mat.formulation == Formulation::plane_strain) {
        DenseMatrix d(3, 3);
        d(0, 0) = d(1, 1) = lam + 2.0 * mu;
        d(0, 1) = d(1, 0) = lam;
        d(2, 2) = mu;
        return d;
    }
    DenseMatrix d(6, 6);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) d(i, j) = i == j ? lam + 2.0 * mu : lam;
    for (int i = 3; i < 6; ++i) d(i, i) = mu;
    return d;
}

// c(|xi|) = c0 exp(-|xi|/l), zero beyond the horizon.
inline double micromodulus(double xi_norm, const PDMaterial& pd) {
    if (xi_norm <= 0.0) throw ConfigError("micromodulus needs |xi| > 0");
    if (xi_norm > pd.delta) return 0.0;
    return pd.c0 * std::exp(-xi_norm / pd.l);
}

namespace detail {

// 7-point Gauss / 15-point Kronrod pair on [-1, 1].
inline const double* kronrod_abscissae() {
    static const double x[15] = {
        -0.991455371120813, -0.949107912342759, -0.864864423359769, -0.741531185599394,
        -0.586087235467691, -0.405845151377397, -0.207784955007898, 0.0,
        0.207784955007898,  0.405845151377397,  0.586087235467691,  0.741531185599394,
        0.864864423359769,  0.949107912342759,  0.991455371120813};
    return x;
}

inline const double* kronrod_weights() {
    static const double w[15] = {
        0.022935322010529, 0.063092092629979, 0.104790010322250, 0.140653259715525,
        0.169004726639267, 0.190350578064785, 0.204432940075298, 0.209482141084728,
        0.204432940075298, 0.190350578064785, 0.169004726639267, 0.140653259715525,
        0.104790010322250, 0.063092092629979, 0.022935322010529};
    return w;
}

inline const double* gauss_weights() {  // weights for abscissae 1,3,5,...,13
    static const double w[7] = {0.129484966168870, 0.279705391489277, 0.381830050505119,
                                0.417959183673469, 0.381830050505119, 0.279705391489277,
                                0.129484966168870};
    return w;
}

template <class F>
void gk15(F&& f, double a, double b, double& value, double& error) {
    const double h = 0.5 * (b - a), c = 0.5 * (a + b);
    const double* xk = kronrod_abscissae();
    const double* wk = kronrod_weights();
    const double* wg = gauss_weights();
    double sk = 0.0, sg = 0.0;
    for (int i = 0; i < 15; ++i) {
        const double fv = f(c + h * xk[i]);
        sk += wk[i] * fv;
        if (i % 2 == 1) sg += wg[i / 2] * fv;
    }
    value = sk * h;
    error = std::abs((sk - sg) * h);
}

template <class F>
double adaptive_quadrature(F&& f, double a, double b, double rel_tol, int depth = 0) {
    double v, e;
    gk15(f, a, b, v, e);
    if (e <= rel_tol * std::max(std::abs(v), 1e-300) || depth > 48) return v;
    const double m = 0.5 * (a + b);
    return adaptive_quadrature(f, a, m, rel_tol, depth + 1) +
           adaptive_quadrature(f, m, b, rel_tol, depth + 1);
}

}  // namespace detail

// Micromodulus amplitude matching the CCM strain energy density under
// isotropic extension:
//   3D:            c0 = 3E / (pi * int_0^delta r^6 exp(-r/l) dr)
//   plane stress:  c0 = 3E / (pi * int_0^delta r^5 exp(-r/l) dr)
inline double calibrate_c0(double E, double delta, double l, Formulation formulation) {
    if (E <= 0.0) throw ConfigError("elastic modulus must be positive");
    if (l <= 0.0 || l > delta) throw ConfigError("length scale must satisfy 0 < l <= delta");
    const int power = formulation == Formulation::three_d ? 6 : 5;
    // integrate in s = r/delta to keep the integrand scale near unity
    const double integral =
        detail::adaptive_quadrature(
            [&](double s) {
                const double r = s * delta;
                return std::pow(r, power) * std::exp(-r / l);
            },
            0.0, 1.0, 1e-12) *
        delta;
    constexpr double pi = 3.14159265358979323846;
    return 3.0 * E / (pi * integral);
}

// Micromodulus tensor of a bond: c(|xi|) * mu * (xi xi^T); rank one, PSD.
inline DenseMatrix bond_stiffness_matrix(const double* xi, int dim, int mu,
                                         const PDMaterial& pd) {
    double n2 = 0.0;
    for (int k = 0; k < dim; ++k) n2 += xi[k] * xi[k];
    const double norm = std::sqrt(n2);
    if (norm <= 0.0) throw ConfigError("degenerate bond: |xi| = 0");
    DenseMatrix d(dim, dim);
    if (mu == 0) return d;
    const double c = micromodulus(norm, pd);
    for (int a = 0; a < dim; ++a)
        for (int b = 0; b < dim; ++b) d(a, b) = c * xi[a] * xi[b];
    return d;
}

}  // namespace perimts
