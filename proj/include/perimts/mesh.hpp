#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "perimts/errors.hpp"
#include "perimts/parallel.hpp"

namespace perimts {

using Point = std::array<double, 3>;

inline double distance(const Point& a, const Point& b) {
    const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
    return std::sqrt(dx * dx + dy * dy + dz * dz);
}

enum class ElemKind : std::uint8_t { quad4, hex8 };

inline int nodes_per_element(ElemKind k) { return k == ElemKind::quad4 ? 4 : 8; }

inline const char* kind_name(ElemKind k) { return k == ElemKind::quad4 ? "quad4" : "hex8"; }

struct Element {
    int id = -1;
    ElemKind kind = ElemKind::quad4;
    std::array<int, 8> node_ids{};  // first nodes_per_element entries valid
    Point centroid{};
    double volume = 0.0;

    int node_count() const { return nodes_per_element(kind); }
};

struct Mesh {
    int dim = 2;
    std::vector<Point> nodes;
    std::vector<Element> elements;

    int node_count() const { return static_cast<int>(nodes.size()); }
    int element_count() const { return static_cast<int>(elements.size()); }

    // characteristic spacing: d-th root of the mean element volume
    double char_length() const {
        if (elements.empty()) return 0.0;
        double v = 0.0;
        for (const auto& e : elements) v += e.volume;
        v /= static_cast<double>(elements.size());
        return dim == 2 ? std::sqrt(v) : std::cbrt(v);
    }

    std::array<Point, 2> bounding_box() const {
        Point lo{1e300, 1e300, 1e300}, hi{-1e300, -1e300, -1e300};
        for (const auto& p : nodes)
            for (int k = 0; k < 3; ++k) {
                lo[k] = std::min(lo[k], p[k]);
                hi[k] = std::max(hi[k], p[k]);
            }
        return {lo, hi};
    }
};

namespace detail {

// Trilinear/bilinear geometry only; full shape machinery lives with the FE
// element routines.
inline void corner_gradient(ElemKind kind, const double* xi, int a, double* grad) {
    if (kind == ElemKind::quad4) {
        static const double sx[4] = {-1, 1, 1, -1};
        static const double sy[4] = {-1, -1, 1, 1};
        grad[0] = 0.25 * sx[a] * (1 + sy[a] * xi[1]);
        grad[1] = 0.25 * sy[a] * (1 + sx[a] * xi[0]);
        grad[2] = 0.0;
    } else {
        static const double sx[8] = {-1, 1, 1, -1, -1, 1, 1, -1};
        static const double sy[8] = {-1, -1, 1, 1, -1, -1, 1, 1};
        static const double sz[8] = {-1, -1, -1, -1, 1, 1, 1, 1};
        grad[0] = 0.125 * sx[a] * (1 + sy[a] * xi[1]) * (1 + sz[a] * xi[2]);
        grad[1] = 0.125 * sy[a] * (1 + sx[a] * xi[0]) * (1 + sz[a] * xi[2]);
        grad[2] = 0.125 * sz[a] * (1 + sx[a] * xi[0]) * (1 + sy[a] * xi[1]);
    }
}

inline double jacobian_det(const Mesh& m, const Element& e, const double* xi) {
    const int d = m.dim;
    double J[3][3] = {{0, 0, 0}, {0, 0, 0}, {0, 0, 0}};
    double g[3];
    for (int a = 0; a < e.node_count(); ++a) {
        corner_gradient(e.kind, xi, a, g);
        const Point& p = m.nodes[e.node_ids[a]];
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) J[i][j] += p[i] * g[j];
    }
    if (d == 2) return J[0][0] * J[1][1] - J[0][1] * J[1][0];
    return J[0][0] * (J[1][1] * J[2][2] - J[1][2] * J[2][1]) -
           J[0][1] * (J[1][0] * J[2][2] - J[1][2] * J[2][0]) +
           J[0][2] * (J[1][0] * J[2][1] - J[1][1] * J[2][0]);
}

}  // namespace detail

// Fills centroid and volume, and rejects inverted elements. The centroid is
// the image of the reference center, which for these elements equals the
// nodal average.
inline void compute_element_geometry(Mesh& mesh) {
    const double gp = 1.0 / std::sqrt(3.0);
    for (auto& e : mesh.elements) {
        const int nn = e.node_count();
        Point c{0, 0, 0};
        for (int a = 0; a < nn; ++a) {
            if (e.node_ids[a] < 0 || e.node_ids[a] >= mesh.node_count())
                throw ConfigError("element " + std::to_string(e.id) +
                                  " references missing node " + std::to_string(e.node_ids[a]));
            for (int k = 0; k < 3; ++k) c[k] += mesh.nodes[e.node_ids[a]][k];
        }
        for (int k = 0; k < 3; ++k) c[k] /= nn;
        e.centroid = c;

        double vol = 0.0;
        const int ng = mesh.dim == 2 ? 4 : 8;
        for (int q = 0; q < ng; ++q) {
            const double xi[3] = {(q & 1) ? gp : -gp, (q & 2) ? gp : -gp,
                                  (q & 4) ? gp : -gp};
            const double dj = detail::jacobian_det(mesh, e, xi);
            if (dj <= 0.0)
                throw ConfigError("inverted element " + std::to_string(e.id) +
                                  " (non-positive Jacobian)");
            vol += dj;
        }
        e.volume = vol;
    }
}

struct BoundsBox {
    Point lo{0, 0, 0};
    Point hi{0, 0, 0};

    bool contains(const Point& p, int dim, double tol = 0.0) const {
        for (int k = 0; k < dim; ++k)
            if (p[k] < lo[k] - tol || p[k] > hi[k] + tol) return false;
        return true;
    }

    // Euclidean distance from p to the box (0 inside).
    double distance(const Point& p, int dim) const {
        double s = 0.0;
        for (int k = 0; k < dim; ++k) {
            const double d = std::max({lo[k] - p[k], p[k] - hi[k], 0.0});
            s += d * d;
        }
        return std::sqrt(s);
    }

    bool empty(int dim) const {
        for (int k = 0; k < dim; ++k)
            if (hi[k] <= lo[k]) return true;
        return false;
    }
};

// Uniform grid of quad4/hex8 cells. Side lengths must be integer multiples
// of the spacing to within 1e-9*spacing.
inline Mesh generate_structured(const BoundsBox& bounds, double spacing, int dim) {
    if (spacing <= 0.0) throw ConfigError("mesh spacing must be positive");
    if (dim != 2 && dim != 3) throw ConfigError("mesh dimension must be 2 or 3");
    std::array<int, 3> n{1, 1, 1};
    const char* axis_names = "xyz";
    for (int k = 0; k < dim; ++k) {
        const double len = bounds.hi[k] - bounds.lo[k];
        if (len <= 0.0)
            throw ConfigError(std::string("degenerate extent along axis ") + axis_names[k]);
        const double cells = len / spacing;
        const double rounded = std::round(cells);
        if (std::abs(cells - rounded) > 1e-9 * std::max(1.0, cells) || rounded < 1.0)
            throw ConfigError(std::string("extent along axis ") + axis_names[k] +
                              " is not a multiple of the spacing");
        n[k] = static_cast<int>(rounded);
    }

    Mesh m;
    m.dim = dim;
    const int nx = n[0] + 1, ny = n[1] + 1, nz = dim == 3 ? n[2] + 1 : 1;
    m.nodes.reserve(static_cast<std::size_t>(nx) * ny * nz);
    for (int k = 0; k < nz; ++k)
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i)
                m.nodes.push_back({bounds.lo[0] + i * spacing, bounds.lo[1] + j * spacing,
                                   dim == 3 ? bounds.lo[2] + k * spacing : 0.0});

    auto nid = [&](int i, int j, int k) { return (k * ny + j) * nx + i; };
    int eid = 0;
    for (int k = 0; k < (dim == 3 ? n[2] : 1); ++k)
        for (int j = 0; j < n[1]; ++j)
            for (int i = 0; i < n[0]; ++i) {
                Element e;
                e.id = eid++;
                if (dim == 2) {
                    e.kind = ElemKind::quad4;
                    e.node_ids = {nid(i, j, 0), nid(i + 1, j, 0), nid(i + 1, j + 1, 0),
                                  nid(i, j + 1, 0), 0, 0, 0, 0};
                } else {
                    e.kind = ElemKind::hex8;
                    e.node_ids = {nid(i, j, k),         nid(i + 1, j, k),
                                  nid(i + 1, j + 1, k), nid(i, j + 1, k),
                                  nid(i, j, k + 1),     nid(i + 1, j, k + 1),
                                  nid(i + 1, j + 1, k + 1), nid(i, j + 1, k + 1)};
                }
                m.elements.push_back(e);
            }
    compute_element_geometry(m);
    return m;
}

// ---- ASCII mesh format ----
// header:   dim N_nodes N_elems
// nodes:    id x y [z]          (17 significant digits)
// elements: id kind n0 n1 n2 n3 [n4..n7]

inline void write_mesh(const Mesh& m, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open mesh file for writing: " + path);
    out << m.dim << ' ' << m.node_count() << ' ' << m.element_count() << '\n';
    char buf[64];
    for (int i = 0; i < m.node_count(); ++i) {
        out << i;
        for (int k = 0; k < m.dim; ++k) {
            std::snprintf(buf, sizeof buf, " %.17g", m.nodes[i][k]);
            out << buf;
        }
        out << '\n';
    }
    for (const auto& e : m.elements) {
        out << e.id << ' ' << kind_name(e.kind);
        for (int a = 0; a < e.node_count(); ++a) out << ' ' << e.node_ids[a];
        out << '\n';
    }
    if (!out) throw ConfigError("write failed: " + path);
}

inline Mesh read_mesh(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open mesh file: " + path);
    auto fail = [&](int line, const std::string& what) {
        throw ConfigError(path + ":" + std::to_string(line) + ": " + what);
    };
    std::string line;
    int lineno = 0;
    Mesh m;
    int n_nodes = 0, n_elems = 0;
    {
        if (!std::getline(in, line)) fail(1, "missing header");
        ++lineno;
        std::istringstream ss(line);
        if (!(ss >> m.dim >> n_nodes >> n_elems) || (m.dim != 2 && m.dim != 3) ||
            n_nodes <= 0 || n_elems < 0)
            fail(lineno, "malformed header, expected: dim N_nodes N_elems");
    }
    m.nodes.resize(n_nodes, Point{0, 0, 0});
    std::vector<bool> seen(n_nodes, false);
    for (int i = 0; i < n_nodes; ++i) {
        if (!std::getline(in, line)) fail(lineno + 1, "unexpected end of file in node list");
        ++lineno;
        std::istringstream ss(line);
        int id;
        double x, y, z = 0.0;
        if (!(ss >> id >> x >> y) || (m.dim == 3 && !(ss >> z)))
            fail(lineno, "malformed node line");
        if (id < 0 || id >= n_nodes) fail(lineno, "node id out of range");
        if (seen[id]) fail(lineno, "duplicate node id " + std::to_string(id));
        seen[id] = true;
        m.nodes[id] = {x, y, z};
    }
    m.elements.resize(n_elems);
    std::vector<bool> eseen(n_elems, false);
    for (int i = 0; i < n_elems; ++i) {
        if (!std::getline(in, line)) fail(lineno + 1, "unexpected end of file in element list");
        ++lineno;
        std::istringstream ss(line);
        int id;
        std::string kind;
        if (!(ss >> id >> kind)) fail(lineno, "malformed element line");
        if (id < 0 || id >= n_elems) fail(lineno, "element id out of range");
        if (eseen[id]) fail(lineno, "duplicate element id " + std::to_string(id));
        eseen[id] = true;
        Element e;
        e.id = id;
        if (kind == "quad4")
            e.kind = ElemKind::quad4;
        else if (kind == "hex8")
            e.kind = ElemKind::hex8;
        else
            fail(lineno, "unknown element kind '" + kind + "'");
        for (int a = 0; a < e.node_count(); ++a) {
            if (!(ss >> e.node_ids[a])) fail(lineno, "malformed element connectivity");
            if (e.node_ids[a] < 0 || e.node_ids[a] >= n_nodes)
                fail(lineno, "element " + std::to_string(id) + " references missing node " +
                                 std::to_string(e.node_ids[a]));
        }
        m.elements[id] = e;
    }
    compute_element_geometry(m);
    return m;
}

// ---- notch geometry ----

// Zero-thickness cut: a segment in 2D, a planar polygon in 3D. Bonds whose
// centroid-connecting segment crosses or touches it are excluded.
struct Notch {
    std::vector<Point> points;  // 2 points in 2D, >=3 coplanar points in 3D
};

namespace detail {

inline double cross2(double ax, double ay, double bx, double by) { return ax * by - ay * bx; }

inline bool segments_intersect_2d(const Point& p1, const Point& p2, const Point& q1,
                                  const Point& q2, double eps) {
    const double rx = p2[0] - p1[0], ry = p2[1] - p1[1];
    const double sx = q2[0] - q1[0], sy = q2[1] - q1[1];
    const double denom = cross2(rx, ry, sx, sy);
    const double qpx = q1[0] - p1[0], qpy = q1[1] - p1[1];
    const double tn = cross2(qpx, qpy, sx, sy);
    const double un = cross2(qpx, qpy, rx, ry);
    if (std::abs(denom) > eps * eps) {
        const double t = tn / denom;
        const double u = un / denom;
        const double tol_t = eps / std::max(std::hypot(rx, ry), eps);
        const double tol_u = eps / std::max(std::hypot(sx, sy), eps);
        return t >= -tol_t && t <= 1.0 + tol_t && u >= -tol_u && u <= 1.0 + tol_u;
    }
    // parallel: overlapping collinear segments count as touching
    if (std::abs(tn) > eps * std::max(std::hypot(sx, sy), eps)) return false;
    const double rr = rx * rx + ry * ry;
    if (rr < eps * eps) return false;
    double t0 = (qpx * rx + qpy * ry) / rr;
    double t1 = t0 + (sx * rx + sy * ry) / rr;
    if (t0 > t1) std::swap(t0, t1);
    return t1 >= 0.0 && t0 <= 1.0;
}

inline bool segment_crosses_polygon_3d(const Point& a, const Point& b,
                                       const std::vector<Point>& poly, double eps) {
    // plane from first three vertices
    const Point& o = poly[0];
    const double u[3] = {poly[1][0] - o[0], poly[1][1] - o[1], poly[1][2] - o[2]};
    const double v[3] = {poly[2][0] - o[0], poly[2][1] - o[1], poly[2][2] - o[2]};
    double n[3] = {u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2],
                   u[0] * v[1] - u[1] * v[0]};
    const double nlen = std::sqrt(n[0] * n[0] + n[1] * n[1] + n[2] * n[2]);
    if (nlen == 0.0) return false;
    for (double& c : n) c /= nlen;
    const double da = (a[0] - o[0]) * n[0] + (a[1] - o[1]) * n[1] + (a[2] - o[2]) * n[2];
    const double db = (b[0] - o[0]) * n[0] + (b[1] - o[1]) * n[1] + (b[2] - o[2]) * n[2];
    if ((da > eps && db > eps) || (da < -eps && db < -eps)) return false;
    if (std::abs(da - db) < eps) return false;  // in-plane bond does not cross the cut
    const double t = da / (da - db);
    if (t < -eps || t > 1.0 + eps) return false;
    Point p{a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]), a[2] + t * (b[2] - a[2])};
    // 2D point-in-polygon in the dominant-axis projection
    int drop = 0;
    double best = std::abs(n[0]);
    for (int k = 1; k < 3; ++k)
        if (std::abs(n[k]) > best) {
            best = std::abs(n[k]);
            drop = k;
        }
    const int i0 = (drop + 1) % 3, i1 = (drop + 2) % 3;
    bool inside = false;
    const std::size_t nv = poly.size();
    for (std::size_t e = 0, f = nv - 1; e < nv; f = e++) {
        const double xi = poly[e][i0], yi = poly[e][i1];
        const double xj = poly[f][i0], yj = poly[f][i1];
        // on-edge within eps counts as inside (conservative exclusion)
        const double ex = xj - xi, ey = yj - yi;
        const double px = p[i0] - xi, py = p[i1] - yi;
        const double elen2 = ex * ex + ey * ey;
        if (elen2 > 0.0) {
            const double s = std::clamp((px * ex + py * ey) / elen2, 0.0, 1.0);
            const double ddx = px - s * ex, ddy = py - s * ey;
            if (ddx * ddx + ddy * ddy <= eps * eps) return true;
        }
        if ((yi > p[i1]) != (yj > p[i1]) &&
            p[i0] < (xj - xi) * (p[i1] - yi) / (yj - yi) + xi)
            inside = !inside;
    }
    return inside;
}

}  // namespace detail

inline bool bond_crosses_notch(const Point& a, const Point& b, const Notch& notch, double eps) {
    if (notch.points.size() < 2) return false;
    if (notch.points.size() == 2)
        return detail::segments_intersect_2d(a, b, notch.points[0], notch.points[1], eps);
    return detail::segment_crosses_polygon_3d(a, b, notch.points, eps);
}

// ---- peridynamic element pairing ----

struct PePair {
    int i;  // lower element id
    int j;  // higher element id
};

// All unordered element pairs with centroid distance <= delta, self-pairs
// excluded, bonds through a notch excluded. Uniform spatial hash with cell
// size delta; `active` restricts the search (empty = all elements).
inline std::vector<PePair> find_pe_pairs(const Mesh& mesh, double delta,
                                         const std::vector<Notch>& notches = {},
                                         const std::vector<int>& active = {}) {
    if (delta <= 0.0) throw ConfigError("horizon delta must be positive");
    std::vector<int> ids = active;
    if (ids.empty()) {
        ids.resize(mesh.element_count());
        for (int i = 0; i < mesh.element_count(); ++i) ids[i] = i;
    }
    double min_edge = 1e300;
    for (int id : ids) {
        const auto& e = mesh.elements[id];
        const double h = mesh.dim == 2 ? std::sqrt(e.volume) : std::cbrt(e.volume);
        min_edge = std::min(min_edge, h);
    }
    if (!ids.empty() && delta < min_edge)
        std::cerr << "warning: horizon " << delta << " is below the element size " << min_edge
                  << "; only touching elements can pair\n";

    const double eps = 1e-12 * std::max(mesh.char_length(), 1e-300);

    // hash centroids into cells of size delta
    Point lo{1e300, 1e300, 1e300};
    for (int id : ids)
        for (int k = 0; k < 3; ++k) lo[k] = std::min(lo[k], mesh.elements[id].centroid[k]);
    auto cell_of = [&](const Point& p) {
        std::array<int, 3> c{0, 0, 0};
        for (int k = 0; k < mesh.dim; ++k)
            c[k] = static_cast<int>(std::floor((p[k] - lo[k]) / delta));
        return c;
    };
    // exact packing (21 bits per axis), collision-free for any realistic grid
    auto key_of = [](const std::array<int, 3>& c) {
        constexpr std::int64_t off = 1 << 20;
        return ((static_cast<std::int64_t>(c[0]) + off) << 42) |
               ((static_cast<std::int64_t>(c[1]) + off) << 21) |
               (static_cast<std::int64_t>(c[2]) + off);
    };
    std::unordered_map<std::int64_t, std::vector<int>> grid;
    grid.reserve(ids.size());
    for (int id : ids) grid[key_of(cell_of(mesh.elements[id].centroid))].push_back(id);

    const int zrange = mesh.dim == 3 ? 1 : 0;
    std::vector<std::vector<PePair>> partial(ids.size() ? worker_count() : 0);
    const std::size_t chunk = (ids.size() + partial.size() - 1) / std::max<std::size_t>(partial.size(), 1);
    parallel_for(0, partial.size(), [&](std::size_t w) {
        const std::size_t begin = w * chunk, end = std::min(ids.size(), begin + chunk);
        auto& out = partial[w];
        for (std::size_t s = begin; s < end; ++s) {
            const int i = ids[s];
            const Point& ci = mesh.elements[i].centroid;
            const auto c = cell_of(ci);
            for (int dz = -zrange; dz <= zrange; ++dz)
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        const auto it = grid.find(key_of({c[0] + dx, c[1] + dy, c[2] + dz}));
                        if (it == grid.end()) continue;
                        for (int j : it->second) {
                            if (j <= i) continue;
                            const Point& cj = mesh.elements[j].centroid;
                            if (distance(ci, cj) > delta) continue;
                            bool cut = false;
                            for (const auto& notch : notches)
                                if (bond_crosses_notch(ci, cj, notch, eps)) {
                                    cut = true;
                                    break;
                                }
                            if (cut) continue;
                            out.push_back({i, j});
                        }
                    }
        }
    }, 1);
    std::vector<PePair> pairs;
    for (const auto& part : partial) pairs.insert(pairs.end(), part.begin(), part.end());
    std::sort(pairs.begin(), pairs.end(), [](const PePair& a, const PePair& b) {
        return a.i != b.i ? a.i < b.i : a.j < b.j;
    });
    return pairs;
}

// ---- subdomain decomposition ----

// Angular sector about the z axis for the cylinder case; theta is measured
// in the xy-plane from the negative x axis.
struct SectorSpec {
    double z_min = -1e300;
    double z_max = 1e300;
    double theta_min_deg = -180.0;
    double theta_max_deg = 180.0;
    double arc_radius = 1.0;  // radius used to convert angle to arc length
};

struct RegionSpec {
    std::vector<BoundsBox> pd_boxes;
    std::optional<SectorSpec> pd_sector;
    double overlap_width = 0.0;  // l_O
    BoundsBox domain;            // global bounds; faces on it carry no overlap band

    bool has_pd() const { return !pd_boxes.empty() || pd_sector.has_value(); }
};

namespace detail {

inline double theta_from_neg_x(const Point& p) {
    return std::atan2(p[1], -p[0]) * 180.0 / 3.14159265358979323846;
}

// Shrinks a PD box by l_O on every face that is interior to the global
// domain; the remaining set is the exclusive PD core.
inline BoundsBox shrunk_box(const BoundsBox& box, const RegionSpec& region, int dim) {
    BoundsBox core = box;
    const double tol = 1e-9 * std::max(1.0, region.overlap_width);
    for (int k = 0; k < dim; ++k) {
        if (box.lo[k] > region.domain.lo[k] + tol) core.lo[k] += region.overlap_width;
        if (box.hi[k] < region.domain.hi[k] - tol) core.hi[k] -= region.overlap_width;
    }
    return core;
}

}  // namespace detail

inline bool region_inside_pd(const RegionSpec& r, const Point& p, int dim) {
    for (const auto& b : r.pd_boxes)
        if (b.contains(p, dim)) return true;
    if (r.pd_sector) {
        const auto& s = *r.pd_sector;
        const double th = detail::theta_from_neg_x(p);
        if (p[2] >= s.z_min && p[2] <= s.z_max && th >= s.theta_min_deg &&
            th <= s.theta_max_deg)
            return true;
    }
    return false;
}

// Distance from p to the exclusive PD core (the l_1 of the weight function,
// measured toward the FE side). Zero inside the core.
inline double region_distance_to_core(const RegionSpec& r, const Point& p, int dim) {
    double d = 1e300;
    for (const auto& b : r.pd_boxes) {
        const BoundsBox core = detail::shrunk_box(b, r, dim);
        if (!core.empty(dim)) d = std::min(d, core.distance(p, dim));
    }
    if (r.pd_sector) {
        const auto& s = *r.pd_sector;
        const double deg_per_arc = 180.0 / (3.14159265358979323846 * s.arc_radius);
        const double th = detail::theta_from_neg_x(p);
        // arc-length parameter distance on each shrunk face
        double dz_hi = p[2] - (s.z_max - r.overlap_width);
        double dth_lo = (s.theta_min_deg + r.overlap_width * deg_per_arc - th) / deg_per_arc;
        double dth_hi = (th - (s.theta_max_deg - r.overlap_width * deg_per_arc)) / deg_per_arc;
        const double outside = std::max({dz_hi, dth_lo, dth_hi, 0.0});
        d = std::min(d, outside);
    }
    return d;
}

inline bool region_inside_core(const RegionSpec& r, const Point& p, int dim) {
    return region_inside_pd(r, p, dim) && region_distance_to_core(r, p, dim) == 0.0;
}

enum class SubdomainLabel : std::uint8_t { FE_only, PD_only, Overlap };

struct SubdomainLabels {
    std::vector<SubdomainLabel> element_label;
    std::vector<std::uint8_t> node_in_overlap;

    std::vector<int> fe_active_elements() const {
        std::vector<int> out;
        for (std::size_t i = 0; i < element_label.size(); ++i)
            if (element_label[i] != SubdomainLabel::PD_only) out.push_back(static_cast<int>(i));
        return out;
    }
    std::vector<int> pd_active_elements() const {
        std::vector<int> out;
        for (std::size_t i = 0; i < element_label.size(); ++i)
            if (element_label[i] != SubdomainLabel::FE_only) out.push_back(static_cast<int>(i));
        return out;
    }
};

// Classifies elements by centroid membership: PD core -> PD_only, the l_O
// band inside the PD region -> Overlap, the rest -> FE_only.
inline SubdomainLabels label_subdomains(const Mesh& mesh, const RegionSpec& region) {
    if (!region.has_pd()) throw ConfigError("subdomain labeling needs a PD region");
    if (region.overlap_width <= 0.0) throw ConfigError("overlap width must be positive");
    SubdomainLabels labels;
    labels.element_label.resize(mesh.element_count(), SubdomainLabel::FE_only);
    labels.node_in_overlap.assign(mesh.node_count(), 0);
    int n_overlap = 0, n_pd = 0;
    for (int i = 0; i < mesh.element_count(); ++i) {
        const Point& c = mesh.elements[i].centroid;
        if (!region_inside_pd(region, c, mesh.dim)) continue;
        if (region_distance_to_core(region, c, mesh.dim) == 0.0) {
            labels.element_label[i] = SubdomainLabel::PD_only;
            ++n_pd;
        } else {
            labels.element_label[i] = SubdomainLabel::Overlap;
            ++n_overlap;
            const auto& e = mesh.elements[i];
            for (int a = 0; a < e.node_count(); ++a) labels.node_in_overlap[e.node_ids[a]] = 1;
        }
    }
    if (n_pd + n_overlap == 0) throw ConfigError("PD region contains no elements");
    if (n_overlap == 0)
        throw ConfigError("overlap must contain at least one element layer");
    if (n_pd == 0)
        throw ConfigError("PD region must keep a core beyond the overlap bands");
    return labels;
}

}  // namespace perimts
