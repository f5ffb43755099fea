#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "perimts/driver.hpp"

namespace {

int cmd_run(const std::string& config_path, const std::string& out_dir,
            const std::string& mode, const std::vector<std::string>& overrides) {
    perimts::Config cfg = perimts::Config::parse_file(config_path);
    for (const auto& ov : overrides) cfg.apply_override(ov);
    if (!mode.empty()) cfg.apply_override("run.mode=" + mode);
    const perimts::ScenarioConfig sc = perimts::load_scenario(cfg);
    const perimts::RunArtifacts art = perimts::run_scenario(sc, out_dir);
    std::printf("steps          %d\n", art.steps);
    std::printf("broken bonds   %lld\n", art.broken_total);
    std::printf("frames         %zu\n", art.frame_times.size());
    std::printf("wall time      %.3f s\n", art.wall_seconds);
    if (!art.timing.empty()) {
        double tk = 0, tu = 0, tl = 0, ty = 0;
        for (const auto& t : art.timing) {
            tk += t.t_kinematic;
            tu += t.t_update;
            tl += t.t_lambda;
            ty += t.t_unit;
        }
        const double n = double(art.timing.size());
        std::printf("per FE step    t_k=%.3f ms  t_u=%.3f ms  t_lambda=%.3f ms\n",
                    1e3 * tk / n, 1e3 * tu / n, 1e3 * tl / n);
        if (sc.mode == perimts::RunMode::coupled_mts) {
            std::printf("per PD step    t_u/m=%.3f ms  t_lambda/m=%.3f ms\n",
                        1e3 * tu / n / sc.m, 1e3 * tl / n / sc.m);
            std::printf("unit response  %.3f ms per FE step (excluded above)\n", 1e3 * ty / n);
        }
    }
    if (!art.continuity.empty()) {
        double worst = 0;
        for (double c : art.continuity) worst = std::max(worst, c);
        std::printf("continuity     max scaled residual %.3e\n", worst);
    }
    if (!out_dir.empty()) std::printf("artifacts      %s\n", out_dir.c_str());
    return 0;
}

int cmd_compare(const std::string& dir_a, const std::string& dir_b) {
    const perimts::CompareReport rep = perimts::compare_runs(dir_a, dir_b);
    for (std::size_t p = 0; p < rep.tracked_error_pct.size(); ++p)
        std::printf("tracked point %zu: global error %.4f %%\n", p, rep.tracked_error_pct[p]);
    if (rep.has_damage_frames) {
        for (const auto& [t, frac] : rep.damage_agreement)
            std::printf("damage agreement at t=%.6e: %.2f %%\n", t, 100.0 * frac);
        std::printf("minimum damage agreement: %.2f %%\n", 100.0 * rep.min_damage_agreement);
    }
    if (rep.step_cost_ratio > 0.0)
        std::printf("per-step cost ratio (A/B): %.3f\n", rep.step_cost_ratio);
    return 0;
}

int cmd_mesh_info(const std::string& path) {
    const perimts::Mesh mesh = perimts::read_mesh(path);
    const auto bbox = mesh.bounding_box();
    double volume = 0.0;
    for (const auto& e : mesh.elements) volume += e.volume;
    std::printf("dim       %d\n", mesh.dim);
    std::printf("nodes     %d\n", mesh.node_count());
    std::printf("elements  %d\n", mesh.element_count());
    std::printf("kinds     %s\n", mesh.elements.empty()
                                      ? "none"
                                      : perimts::kind_name(mesh.elements[0].kind));
    std::printf("bbox      [%g, %g]", bbox[0][0], bbox[1][0]);
    for (int k = 1; k < mesh.dim; ++k) std::printf(" x [%g, %g]", bbox[0][k], bbox[1][k]);
    std::printf("\n");
    std::printf("volume    %.17g\n", volume);
    std::printf("spacing   %.6g (mean element size)\n", mesh.char_length());
    std::printf("hash      %llu\n",
                static_cast<unsigned long long>(perimts::mesh_hash(mesh)));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"peridynamics / continuum mechanics multi-time-step fracture solver"};
    app.require_subcommand(1);

    std::string config_path, out_dir, mode;
    std::vector<std::string> overrides;
    auto* run = app.add_subcommand("run", "run a scenario config");
    run->add_option("config", config_path, "scenario config file")->required();
    run->add_option("--out", out_dir, "artifact output directory");
    run->add_option("--mode", mode, "pure_fe | pure_pd | coupled_mts")
        ->check(CLI::IsMember({"pure_fe", "pure_pd", "coupled_mts"}));
    run->add_option("--override", overrides, "section.key=value")->take_all();

    std::string dir_a, dir_b;
    auto* compare = app.add_subcommand("compare", "compare two run artifact directories");
    compare->add_option("runA", dir_a)->required();
    compare->add_option("runB", dir_b)->required();

    std::string mesh_path;
    auto* info = app.add_subcommand("mesh-info", "print mesh statistics");
    info->add_option("meshfile", mesh_path)->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(config_path, out_dir, mode, overrides);
        if (compare->parsed()) return cmd_compare(dir_a, dir_b);
        if (info->parsed()) return cmd_mesh_info(mesh_path);
    } catch (const perimts::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const perimts::SolverError& e) {
        std::cerr << "solver error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
