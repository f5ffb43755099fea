#pragma once

#include <chrono>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "perimts/io.hpp"
#include "perimts/scenario.hpp"

namespace perimts {

struct RunArtifacts {
    std::uint64_t mesh_hash = 0;
    int n_nodes = 0, n_elements = 0;
    std::vector<double> frame_times;
    std::vector<std::vector<double>> frame_damage;  // per frame, per element
    std::vector<double> tracked_times;
    std::vector<std::vector<double>> tracked_values;  // per time: dim values per point
    std::vector<TimingRecord> timing;
    std::vector<EnergyRecord> energy;
    std::vector<double> continuity;
    std::vector<int> broken_per_step;
    int steps = 0;
    long long broken_total = 0;
    double wall_seconds = 0.0;
    int dim = 2;
    int n_tracked = 0;
};

// ||u_ref - u||_2 over time divided by ||u_ref||_2 over time, in percent.
// The reference is resampled onto the test times by linear interpolation.
inline double global_error(const std::vector<double>& t,
                           const std::vector<std::vector<double>>& u,
                           const std::vector<double>& t_ref,
                           const std::vector<std::vector<double>>& u_ref) {
    if (t.empty() || t_ref.empty() || u.size() != t.size() || u_ref.size() != t_ref.size())
        throw ConfigError("global_error: inconsistent series");
    double num = 0.0, den = 0.0;
    std::size_t seg = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        while (seg + 2 < t_ref.size() && t_ref[seg + 1] < t[i]) ++seg;
        const double t0 = t_ref[seg], t1 = t_ref[seg + 1 < t_ref.size() ? seg + 1 : seg];
        const double w = t1 > t0 ? std::clamp((t[i] - t0) / (t1 - t0), 0.0, 1.0) : 0.0;
        for (std::size_t c = 0; c < u[i].size(); ++c) {
            const double r0 = u_ref[seg][c];
            const double r1 = u_ref[seg + 1 < t_ref.size() ? seg + 1 : seg][c];
            const double ref = (1.0 - w) * r0 + w * r1;
            const double d = ref - u[i][c];
            num += d * d;
            den += ref * ref;
        }
    }
    if (den == 0.0) throw ConfigError("global_error: reference series has zero norm");
    return 100.0 * std::sqrt(num / den);
}

namespace detail {

inline int nearest_node(const Mesh& mesh, const Point& p) {
    int best = 0;
    double bd = 1e300;
    for (int n = 0; n < mesh.node_count(); ++n) {
        const double d = distance(mesh.nodes[n], p);
        if (d < bd) {
            bd = d;
            best = n;
        }
    }
    return best;
}

// Traction patches become body-force bands of width delta on the loaded
// boundary for undecomposed PD runs.
inline LoadSpec convert_tractions_to_bands(const Mesh& mesh, const LoadSpec& loads,
                                           double delta) {
    LoadSpec out = loads;
    out.tractions.clear();
    const auto bbox = mesh.bounding_box();
    const double tol = 1e-9 * std::max(mesh.char_length(), 1e-300);
    for (const auto& patch : loads.tractions) {
        // find the boundary plane the patch selects
        int axis = -1;
        bool high_side = false;
        for (int k = 0; k < mesh.dim; ++k) {
            if (std::abs(patch.box.lo[k] - patch.box.hi[k]) < 2.0 * mesh.char_length()) {
                if (std::abs(patch.box.lo[k] - bbox[0][k]) < mesh.char_length() ||
                    std::abs(patch.box.hi[k] - bbox[0][k]) < mesh.char_length()) {
                    axis = k;
                    high_side = false;
                }
                if (std::abs(patch.box.lo[k] - bbox[1][k]) < mesh.char_length() ||
                    std::abs(patch.box.hi[k] - bbox[1][k]) < mesh.char_length()) {
                    axis = k;
                    high_side = true;
                }
            }
        }
        if (axis < 0)
            throw ConfigError("cannot map a traction patch to a boundary plane for the "
                              "PD body-force band");
        BodyForcePatch band;
        band.box = patch.box;
        if (high_side) {
            band.box.hi[axis] = bbox[1][axis] + tol;
            band.box.lo[axis] = bbox[1][axis] - delta + tol;
        } else {
            band.box.lo[axis] = bbox[0][axis] - tol;
            band.box.hi[axis] = bbox[0][axis] + delta - tol;
        }
        for (int k = 0; k < mesh.dim; ++k) band.value[k] = patch.value[k] / delta;
        out.body_patches.push_back(band);
    }
    return out;
}

struct BcPrep {
    // kinematic constraints must select at least one mesh node overall;
    // per-subdomain emptiness is fine (e.g. impact faces in the FE region)
    static void validate(const Mesh& mesh, const LoadSpec& loads) {
        const double tol = 1e-9 * std::max(mesh.char_length(), 1e-300);
        for (const auto& bc : loads.kinematic) {
            bool hit = false;
            for (int n = 0; n < mesh.node_count() && !hit; ++n)
                hit = bc.box.contains(mesh.nodes[n], mesh.dim, tol);
            if (!hit) throw ConfigError("kinematic constraint selects no node");
        }
    }
};

inline BcTable resolve_bcs_quiet(const Mesh& mesh, const DofMap& dofs, const LoadSpec& loads) {
    std::map<int, double> table;
    const double tol = 1e-9 * std::max(mesh.char_length(), 1e-300);
    for (const auto& bc : loads.kinematic)
        for (int n : dofs.active_nodes) {
            if (!bc.box.contains(mesh.nodes[n], mesh.dim, tol)) continue;
            if (bc.fix_all)
                for (int c = 0; c < mesh.dim; ++c) table[dofs.dof(n, c)] = 0.0;
            else
                table[dofs.dof(n, bc.component)] = bc.velocity;
        }
    BcTable out;
    for (const auto& [dof, v] : table) {
        out.dofs.push_back(dof);
        out.velocity.push_back(v);
    }
    return out;
}

}  // namespace detail

// Everything a run needs in memory; exposed so tests and the acceptance
// suite can drive scenarios without touching the filesystem.
struct BuiltScenario {
    ScenarioConfig sc;
    Mesh mesh;
    double dx = 0.0;
    PDMaterial pd_mat;
    LoadSpec loads;  // after any pure-PD band conversion
    std::function<double(double)> load_scale;
    // decomposition (coupled mode)
    SubdomainLabels labels;
    WeightFunction weight;
    std::vector<double> alpha_elem;
    std::vector<int> fe_active, pd_active;
    std::vector<int> tracked_nodes;
};

inline BuiltScenario build_scenario(const ScenarioConfig& sc_in) {
    BuiltScenario b;
    b.sc = sc_in;
    b.mesh = sc_in.mesh_generated
                 ? generate_structured(sc_in.bounds, sc_in.spacing, sc_in.dim)
                 : read_mesh(sc_in.mesh_path);
    b.sc.dim = b.mesh.dim;
    b.dx = b.mesh.char_length();

    b.pd_mat.delta = b.sc.delta_factor * b.dx;
    b.pd_mat.l = b.pd_mat.delta / b.sc.l_factor;
    b.pd_mat.c0 = calibrate_c0(b.sc.material.E, b.pd_mat.delta, b.pd_mat.l,
                               b.sc.material.formulation);
    b.pd_mat.s_crit = b.sc.s_crit;
    b.pd_mat.validate();
    b.sc.material.validate();

    const double ramp = b.sc.load_ramp >= 0.0 ? b.sc.load_ramp : b.sc.dt_fe();
    b.load_scale = [ramp](double t) {
        if (ramp <= 0.0) return 1.0;
        return std::clamp(t / ramp, 0.0, 1.0);
    };

    b.loads = b.sc.loads;
    if (b.sc.mode == RunMode::pure_pd)
        b.loads = detail::convert_tractions_to_bands(b.mesh, b.loads, b.pd_mat.delta);
    detail::BcPrep::validate(b.mesh, b.loads);
    if (!b.loads.tractions.empty() || !b.loads.pressures.empty()) {
        const auto faces = boundary_faces(b.mesh);
        const double ftol = 1e-12 * b.mesh.char_length();
        auto covered = [&](const BoundsBox& box) {
            for (const auto& f : faces)
                if (box.contains(f.center, b.mesh.dim, ftol)) return true;
            return false;
        };
        for (const auto& p : b.loads.tractions)
            if (!covered(p.box)) throw ConfigError("traction patch selects no boundary face");
        for (const auto& p : b.loads.pressures)
            if (!covered(p.box)) throw ConfigError("pressure patch selects no boundary face");
    }

    const auto bbox = b.mesh.bounding_box();
    if (b.sc.mode == RunMode::coupled_mts) {
        b.sc.region.domain = BoundsBox{bbox[0], bbox[1]};
        b.sc.region.overlap_width = b.sc.overlap_width_factor * b.dx;
        b.labels = label_subdomains(b.mesh, b.sc.region);
        b.weight = WeightFunction{b.sc.weight_kind, b.sc.region, b.mesh.dim};
        b.alpha_elem.resize(b.mesh.element_count());
        for (int e = 0; e < b.mesh.element_count(); ++e)
            b.alpha_elem[e] = b.weight(b.mesh.elements[e].centroid);
        b.fe_active = b.labels.fe_active_elements();
        b.pd_active = b.labels.pd_active_elements();
    }

    const double tol = 1e-9 * std::max(b.dx, 1e-300);
    for (const auto& p : b.sc.tracked) {
        if (!BoundsBox{bbox[0], bbox[1]}.contains(p, b.mesh.dim, tol))
            throw ConfigError("tracked point outside the domain");
        b.tracked_nodes.push_back(detail::nearest_node(b.mesh, p));
    }
    return b;
}

namespace detail {

struct FrameWriter {
    const BuiltScenario& b;
    const std::string& out_dir;
    RunArtifacts& art;
    double interval;
    double tol;
    int next_frame = 0;
    std::vector<std::vector<double>> frame_index;  // frame, time

    FrameWriter(const BuiltScenario& b_, const std::string& dir, RunArtifacts& art_)
        : b(b_), out_dir(dir), art(art_), interval(b_.sc.output_interval),
          tol(1e-9 * std::max(b_.sc.dt_pd, 1e-300)) {}

    bool due(double t) const {
        if (interval <= 0.0) return false;
        return t + tol >= next_frame * interval;
    }

    void emit(double t, const VtkFields& f) {
        art.frame_times.push_back(t);
        art.frame_damage.push_back(f.damage);
        if (!out_dir.empty() && b.sc.write_frames) {
            char name[64];
            std::snprintf(name, sizeof name, "frame_%05d.vtk", next_frame);
            write_vtk(b.mesh, f, out_dir + "/" + name);
            frame_index.push_back({double(next_frame), t});
        }
        ++next_frame;
    }
};

}  // namespace detail

inline RunArtifacts run_built(BuiltScenario& b, const std::string& out_dir = "");

inline RunArtifacts run_scenario(const ScenarioConfig& sc, const std::string& out_dir = "") {
    BuiltScenario b = build_scenario(sc);
    return run_built(b, out_dir);
}

inline RunArtifacts run_config(Config cfg, const std::string& out_dir = "") {
    const ScenarioConfig sc = load_scenario(cfg);
    return run_scenario(sc, out_dir);
}

// ---- comparison of two runs ----

struct CompareReport {
    std::vector<double> tracked_error_pct;
    std::vector<std::pair<double, double>> damage_agreement;  // (time, fraction)
    double min_damage_agreement = 1.0;
    bool has_damage_frames = false;
    double step_cost_ratio = 0.0;  // mean per-step cost of A over B
};

inline CompareReport compare_artifacts(const RunArtifacts& a, const RunArtifacts& v) {
    if (a.mesh_hash != v.mesh_hash)
        throw ConfigError("compare: runs use different meshes");
    CompareReport rep;
    const int n_pts = a.n_tracked;
    for (int p = 0; p < n_pts && p < v.n_tracked; ++p) {
        std::vector<std::vector<double>> ua(a.tracked_times.size()),
            uv(v.tracked_times.size());
        for (std::size_t i = 0; i < a.tracked_times.size(); ++i)
            ua[i] = {a.tracked_values[i].begin() + p * a.dim,
                     a.tracked_values[i].begin() + (p + 1) * a.dim};
        for (std::size_t i = 0; i < v.tracked_times.size(); ++i)
            uv[i] = {v.tracked_values[i].begin() + p * v.dim,
                     v.tracked_values[i].begin() + (p + 1) * v.dim};
        rep.tracked_error_pct.push_back(
            global_error(a.tracked_times, ua, v.tracked_times, uv));
    }
    // damage agreement at matching frame times
    for (std::size_t fa = 0; fa < a.frame_times.size(); ++fa) {
        for (std::size_t fb = 0; fb < v.frame_times.size(); ++fb) {
            const double dt = std::abs(a.frame_times[fa] - v.frame_times[fb]);
            if (dt > 1e-12 + 1e-9 * std::max(a.frame_times[fa], 1.0)) continue;
            const auto& da = a.frame_damage[fa];
            const auto& db = v.frame_damage[fb];
            if (da.size() != db.size()) throw ConfigError("compare: frame size mismatch");
            int agree = 0;
            for (std::size_t e = 0; e < da.size(); ++e)
                if (std::abs(da[e] - db[e]) < 0.05) ++agree;
            const double frac = da.empty() ? 1.0 : double(agree) / da.size();
            rep.damage_agreement.emplace_back(a.frame_times[fa], frac);
            rep.has_damage_frames = true;
            rep.min_damage_agreement = std::min(rep.min_damage_agreement, frac);
            break;
        }
    }
    auto mean_cost = [](const RunArtifacts& r) {
        if (r.timing.empty()) return 0.0;
        double s = 0.0;
        for (const auto& t : r.timing) s += t.t_kinematic + t.t_update + t.t_lambda;
        return s / r.timing.size();
    };
    const double cb = mean_cost(v);
    rep.step_cost_ratio = cb > 0.0 ? mean_cost(a) / cb : 0.0;
    return rep;
}

inline RunArtifacts load_artifacts(const std::string& dir) {
    RunArtifacts art;
    Config meta = Config::parse_file(dir + "/meta.txt");
    art.mesh_hash = static_cast<std::uint64_t>(std::stoull(meta.get_string("run.mesh_hash")));
    art.dim = meta.get_int("run.dim");
    art.n_tracked = meta.get_int("run.tracked");
    art.n_nodes = meta.get_int("run.nodes");
    art.n_elements = meta.get_int("run.elements");
    const CsvData tracked = read_csv(dir + "/tracked.csv");
    for (const auto& row : tracked.rows) {
        art.tracked_times.push_back(row[0]);
        art.tracked_values.emplace_back(row.begin() + 1, row.end());
    }
    if (std::filesystem::exists(dir + "/frames.csv")) {
        const CsvData frames = read_csv(dir + "/frames.csv");
        for (const auto& row : frames.rows) {
            char name[64];
            std::snprintf(name, sizeof name, "frame_%05d.vtk", int(row[0]));
            const VtkData vtk = read_vtk(dir + "/" + name);
            art.frame_times.push_back(row[1]);
            const auto it = vtk.cell_scalars.find("damage");
            art.frame_damage.push_back(it != vtk.cell_scalars.end() ? it->second
                                                                    : std::vector<double>());
        }
    }
    if (std::filesystem::exists(dir + "/timing.csv")) {
        const CsvData timing = read_csv(dir + "/timing.csv");
        for (const auto& row : timing.rows)
            art.timing.push_back({row[1], row[2], row[3], row[4]});
    }
    return art;
}

inline CompareReport compare_runs(const std::string& dir_a, const std::string& dir_b) {
    return compare_artifacts(load_artifacts(dir_a), load_artifacts(dir_b));
}

}  // namespace perimts

#include "perimts/driver_run.hpp"
