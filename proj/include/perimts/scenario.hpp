#pragma once

#include <string>
#include <vector>

#include "perimts/config.hpp"
#include "perimts/coupling.hpp"
#include "perimts/fem.hpp"
#include "perimts/material.hpp"
#include "perimts/mesh.hpp"
#include "perimts/mts.hpp"

namespace perimts {

enum class RunMode { pure_fe, pure_pd, coupled_mts };

inline RunMode run_mode_from_string(const std::string& s) {
    if (s == "pure_fe") return RunMode::pure_fe;
    if (s == "pure_pd") return RunMode::pure_pd;
    if (s == "coupled_mts") return RunMode::coupled_mts;
    throw ConfigError("unknown mode '" + s + "'");
}

struct ScenarioConfig {
    // mesh
    bool mesh_generated = true;
    int dim = 2;
    BoundsBox bounds;
    double spacing = 0.0;
    std::string mesh_path;
    std::vector<Notch> notches;
    // material and PD parameters
    ElasticMaterial material;
    double delta_factor = 3.03;
    double l_factor = 16.0;
    double s_crit = 0.0;  // <= 0: fracture disabled
    int pe_quadrature = 1;
    // decomposition
    bool has_region = false;
    RegionSpec region;  // domain box filled after the mesh is built
    double overlap_width_factor = 3.0;
    WeightKind weight_kind = WeightKind::cubic;
    // loads
    LoadSpec loads;
    double load_ramp = -1.0;  // <0: one macro step
    // time integration
    double dt_pd = 0.0;
    int m = 1;
    double total_time = 0.0;
    NewmarkParams fe_nm, pd_nm;
    // run
    RunMode mode = RunMode::coupled_mts;
    InterfaceMode interface_mode = InterfaceMode::automatic;
    bool enforce_continuity = true;
    // output
    double output_interval = 0.0;  // 0: final frame only
    std::vector<Point> tracked;
    bool write_frames = true;
    bool track_energy = true;

    double dt_fe() const { return m * dt_pd; }
};

namespace detail {

inline BoundsBox box_from_values(const std::vector<double>& v, int dim,
                                 const std::string& key) {
    if (static_cast<int>(v.size()) != 2 * dim)
        throw ConfigError("key " + key + " needs " + std::to_string(2 * dim) +
                          " numbers (lo then hi per axis)");
    BoundsBox b;
    for (int k = 0; k < dim; ++k) {
        b.lo[k] = v[k];
        b.hi[k] = v[dim + k];
        if (b.hi[k] < b.lo[k]) throw ConfigError("key " + key + ": hi < lo on axis " +
                                                 std::to_string(k));
    }
    return b;
}

inline int component_index(const std::string& name, int dim) {
    if (name == "vx") return 0;
    if (name == "vy") return 1;
    if (name == "vz" && dim == 3) return 2;
    throw ConfigError("unknown velocity component '" + name + "'");
}

}  // namespace detail

inline ScenarioConfig load_scenario(Config& cfg) {
    ScenarioConfig sc;

    const std::string mesh_kind = cfg.get_string("mesh.kind", "generated");
    if (mesh_kind == "generated") {
        sc.mesh_generated = true;
        sc.dim = cfg.get_int("mesh.dim", 2);
        if (sc.dim != 2 && sc.dim != 3) throw ConfigError("mesh.dim must be 2 or 3");
        sc.bounds = detail::box_from_values(cfg.get_doubles("mesh.bounds"), sc.dim,
                                            "mesh.bounds");
        sc.spacing = cfg.get_double("mesh.spacing");
    } else if (mesh_kind == "file") {
        sc.mesh_generated = false;
        sc.mesh_path = cfg.get_string("mesh.path");
        sc.dim = 0;  // from file
    } else {
        throw ConfigError("mesh.kind must be generated or file");
    }

    sc.material.E = cfg.get_double("material.E");
    sc.material.nu = cfg.get_double("material.nu");
    sc.material.rho = cfg.get_double("material.rho");
    sc.material.formulation =
        formulation_from_string(cfg.get_string("material.formulation"));

    sc.delta_factor = cfg.get_double("pd.delta_factor");
    sc.l_factor = cfg.get_double("pd.l_factor");
    sc.s_crit = cfg.get_double("pd.s_crit", 0.0);
    sc.pe_quadrature = cfg.get_int("pd.pe_quadrature", 1);

    const int geom_dim = sc.mesh_generated ? sc.dim : 3;  // file meshes resolved later
    for (const auto& key : cfg.family("mesh", "notch")) {
        const auto v = cfg.get_doubles(key);
        Notch n;
        if (v.size() == 4 && (sc.dim == 2 || !sc.mesh_generated)) {
            n.points = {Point{v[0], v[1], 0}, Point{v[2], v[3], 0}};
        } else if (v.size() >= 9 && v.size() % 3 == 0) {
            for (std::size_t p = 0; p < v.size(); p += 3)
                n.points.push_back(Point{v[p], v[p + 1], v[p + 2]});
        } else {
            throw ConfigError("key " + key + ": a notch is 4 numbers (2D segment) or 3k (>=9) "
                                             "numbers (3D polygon)");
        }
        sc.notches.push_back(std::move(n));
    }
    (void)geom_dim;

    for (const auto& key : cfg.family("region", "pd_box")) {
        sc.region.pd_boxes.push_back(
            detail::box_from_values(cfg.get_doubles(key), sc.dim == 0 ? 3 : sc.dim, key));
        sc.has_region = true;
    }
    if (cfg.has("region.pd_sector")) {
        const auto v = cfg.get_doubles("region.pd_sector");
        if (v.size() != 5)
            throw ConfigError("region.pd_sector needs z_min z_max theta_min theta_max radius");
        sc.region.pd_sector = SectorSpec{v[0], v[1], v[2], v[3], v[4]};
        sc.has_region = true;
    }
    if (sc.has_region) {
        sc.overlap_width_factor = cfg.get_double("region.overlap_width_factor", 3.0);
        sc.weight_kind = weight_kind_from_string(cfg.get_string("region.weight_kind", "cubic"));
    }

    const int ld = sc.dim == 0 ? 3 : sc.dim;
    for (const auto& key : cfg.family("load", "traction")) {
        const auto v = cfg.get_doubles(key);
        if (static_cast<int>(v.size()) != 3 * ld)
            throw ConfigError("key " + key + " needs box (lo hi per axis) plus " +
                              std::to_string(ld) + " traction components");
        TractionPatch p;
        p.box = detail::box_from_values({v.begin(), v.begin() + 2 * ld}, ld, key);
        for (int k = 0; k < ld; ++k) p.value[k] = v[2 * ld + k];
        sc.loads.tractions.push_back(p);
    }
    for (const auto& key : cfg.family("load", "pressure")) {
        const auto v = cfg.get_doubles(key);
        if (static_cast<int>(v.size()) != 2 * ld + 1)
            throw ConfigError("key " + key + " needs box (lo hi per axis) plus the pressure");
        PressurePatch p;
        p.box = detail::box_from_values({v.begin(), v.begin() + 2 * ld}, ld, key);
        p.value = v[2 * ld];
        sc.loads.pressures.push_back(p);
    }
    if (cfg.has("load.body_force")) {
        const auto v = cfg.get_doubles("load.body_force");
        if (static_cast<int>(v.size()) != ld)
            throw ConfigError("load.body_force needs " + std::to_string(ld) + " components");
        for (int k = 0; k < ld; ++k) sc.loads.body_force[k] = v[k];
    }
    for (const auto& key : cfg.family("load", "body_patch")) {
        const auto v = cfg.get_doubles(key);
        if (static_cast<int>(v.size()) != 3 * ld)
            throw ConfigError("key " + key + " needs box plus " + std::to_string(ld) +
                              " force components");
        BodyForcePatch p;
        p.box = detail::box_from_values({v.begin(), v.begin() + 2 * ld}, ld, key);
        for (int k = 0; k < ld; ++k) p.value[k] = v[2 * ld + k];
        sc.loads.body_patches.push_back(p);
    }
    for (const auto& key : cfg.family("load", "velocity_bc")) {
        std::istringstream ss(cfg.get_string(key));
        std::vector<double> nums(2 * ld);
        for (double& x : nums)
            if (!(ss >> x)) throw ConfigError("key " + key + ": malformed box");
        std::string comp;
        double value;
        if (!(ss >> comp >> value))
            throw ConfigError("key " + key + ": expected component (vx|vy|vz) and value");
        KinematicBc bc;
        bc.box = detail::box_from_values(nums, ld, key);
        bc.component = detail::component_index(comp, ld);
        bc.velocity = value;
        sc.loads.kinematic.push_back(bc);
    }
    for (const auto& key : cfg.family("load", "fixed")) {
        KinematicBc bc;
        bc.box = detail::box_from_values(cfg.get_doubles(key), ld, key);
        bc.fix_all = true;
        sc.loads.kinematic.push_back(bc);
    }
    if (cfg.has("load.load_ramp")) {
        const std::string r = cfg.get_string("load.load_ramp");
        sc.load_ramp = r == "auto" ? -1.0 : std::stod(r);
    }

    sc.dt_pd = cfg.get_double("time.dt_pd");
    sc.m = cfg.get_int("time.m", 1);
    sc.total_time = cfg.get_double("time.total_time");
    sc.fe_nm.gamma = cfg.get_double("time.gamma_fe", 0.5);
    sc.fe_nm.beta = cfg.get_double("time.beta_fe", 0.25);
    sc.pd_nm.gamma = cfg.get_double("time.gamma_pd", 0.5);
    sc.pd_nm.beta = cfg.get_double("time.beta_pd", 0.0);

    sc.mode = run_mode_from_string(cfg.get_string("run.mode", "coupled_mts"));
    const std::string iface = cfg.get_string("run.interface", "auto");
    sc.interface_mode = iface == "auto"          ? InterfaceMode::automatic
                        : iface == "dense"       ? InterfaceMode::dense
                        : iface == "matrix_free" ? InterfaceMode::matrix_free
                                                 : throw ConfigError(
                                                       "run.interface must be auto, dense or "
                                                       "matrix_free");
    sc.enforce_continuity = cfg.get_bool("run.enforce_continuity", true);

    sc.output_interval = cfg.get_double("output.interval", 0.0);
    for (const auto& key : cfg.family("output", "tracked")) {
        const auto v = cfg.get_doubles(key);
        if (static_cast<int>(v.size()) != ld)
            throw ConfigError("key " + key + " needs " + std::to_string(ld) + " coordinates");
        Point p{0, 0, 0};
        for (int k = 0; k < ld; ++k) p[k] = v[k];
        sc.tracked.push_back(p);
    }
    sc.write_frames = cfg.get_bool("output.vtk", true);
    sc.track_energy = cfg.get_bool("output.energy", true);

    // basic consistency
    if (sc.mode == RunMode::coupled_mts && !sc.has_region)
        throw ConfigError("coupled_mts needs a [region] with a PD subdomain");
    if (sc.dt_pd <= 0.0) throw ConfigError("time.dt_pd must be positive");
    if (sc.m < 1) throw ConfigError("time.m must be >= 1");
    if (sc.total_time <= 0.0) throw ConfigError("time.total_time must be positive");
    const double steps = sc.total_time / sc.dt_fe();
    if (std::abs(steps - std::round(steps)) > 1e-6)
        throw ConfigError("time.total_time must be a multiple of m * dt_pd");

    cfg.require_all_consumed();
    return sc;
}

}  // namespace perimts
