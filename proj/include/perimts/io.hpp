#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "perimts/errors.hpp"
#include "perimts/mesh.hpp"

namespace perimts {

struct VtkFields {
    // point data: vectors are dim components per node (padded to 3 on write)
    std::vector<double> displacement;  // dim * n_nodes
    std::vector<double> velocity;      // dim * n_nodes
    std::vector<double> damage_avg;    // n_nodes
    // cell data
    std::vector<double> damage;        // n_elements
    std::vector<int> subdomain_label;  // n_elements
    std::vector<double> alpha;         // n_elements
};

inline void write_vtk(const Mesh& mesh, const VtkFields& f, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open for writing: " + path);
    char buf[128];
    out << "# vtk DataFile Version 3.0\n";
    out << "perimts fields\n";
    out << "ASCII\n";
    out << "DATASET UNSTRUCTURED_GRID\n";
    out << "POINTS " << mesh.node_count() << " double\n";
    for (const auto& p : mesh.nodes) {
        std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g\n", p[0], p[1], p[2]);
        out << buf;
    }
    int list_len = 0;
    for (const auto& e : mesh.elements) list_len += 1 + e.node_count();
    out << "CELLS " << mesh.element_count() << ' ' << list_len << '\n';
    for (const auto& e : mesh.elements) {
        out << e.node_count();
        for (int a = 0; a < e.node_count(); ++a) out << ' ' << e.node_ids[a];
        out << '\n';
    }
    out << "CELL_TYPES " << mesh.element_count() << '\n';
    for (const auto& e : mesh.elements) out << (e.kind == ElemKind::quad4 ? 9 : 12) << '\n';

    const int nn = mesh.node_count();
    out << "POINT_DATA " << nn << '\n';
    auto write_vec = [&](const char* name, const std::vector<double>& v) {
        if (v.empty()) return;
        out << "VECTORS " << name << " double\n";
        for (int n = 0; n < nn; ++n) {
            const double x = v[n * mesh.dim];
            const double y = v[n * mesh.dim + 1];
            const double z = mesh.dim == 3 ? v[n * mesh.dim + 2] : 0.0;
            std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g\n", x, y, z);
            out << buf;
        }
    };
    write_vec("displacement", f.displacement);
    write_vec("velocity", f.velocity);
    if (!f.damage_avg.empty()) {
        out << "SCALARS damage_avg double 1\nLOOKUP_TABLE default\n";
        for (double v : f.damage_avg) {
            std::snprintf(buf, sizeof buf, "%.17g\n", v);
            out << buf;
        }
    }
    out << "CELL_DATA " << mesh.element_count() << '\n';
    if (!f.damage.empty()) {
        out << "SCALARS damage double 1\nLOOKUP_TABLE default\n";
        for (double v : f.damage) {
            std::snprintf(buf, sizeof buf, "%.17g\n", v);
            out << buf;
        }
    }
    if (!f.subdomain_label.empty()) {
        out << "SCALARS subdomain_label int 1\nLOOKUP_TABLE default\n";
        for (int v : f.subdomain_label) out << v << '\n';
    }
    if (!f.alpha.empty()) {
        out << "SCALARS alpha double 1\nLOOKUP_TABLE default\n";
        for (double v : f.alpha) {
            std::snprintf(buf, sizeof buf, "%.17g\n", v);
            out << buf;
        }
    }
    if (!out) throw ConfigError("write failed: " + path);
}

struct VtkData {
    Mesh mesh;
    std::map<std::string, std::vector<double>> point_vectors;  // 3 comps per node
    std::map<std::string, std::vector<double>> point_scalars;
    std::map<std::string, std::vector<double>> cell_scalars;
};

// Reads the subset of legacy ASCII VTK this project writes.
inline VtkData read_vtk(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open: " + path);
    VtkData data;
    std::string tok;
    int n_points = 0, n_cells = 0;
    enum { none, point_section, cell_section } section = none;
    while (in >> tok) {
        if (tok == "POINTS") {
            std::string type;
            in >> n_points >> type;
            data.mesh.nodes.resize(n_points);
            for (auto& p : data.mesh.nodes) in >> p[0] >> p[1] >> p[2];
        } else if (tok == "CELLS") {
            int list_len;
            in >> n_cells >> list_len;
            data.mesh.elements.resize(n_cells);
            for (int e = 0; e < n_cells; ++e) {
                int nn;
                in >> nn;
                auto& el = data.mesh.elements[e];
                el.id = e;
                el.kind = nn == 4 ? ElemKind::quad4 : ElemKind::hex8;
                for (int a = 0; a < nn; ++a) in >> el.node_ids[a];
            }
        } else if (tok == "CELL_TYPES") {
            int n;
            in >> n;
            for (int i = 0; i < n; ++i) in >> tok;
            bool planar = true;
            for (const auto& p : data.mesh.nodes)
                if (p[2] != 0.0) planar = false;
            data.mesh.dim =
                (!data.mesh.elements.empty() && data.mesh.elements[0].kind == ElemKind::hex8)
                    ? 3
                    : (planar ? 2 : 3);
            compute_element_geometry(data.mesh);
        } else if (tok == "POINT_DATA") {
            in >> n_points;
            section = point_section;
        } else if (tok == "CELL_DATA") {
            in >> n_cells;
            section = cell_section;
        } else if (tok == "VECTORS") {
            std::string name, type;
            in >> name >> type;
            auto& v = data.point_vectors[name];
            v.resize(3 * n_points);
            for (double& x : v) in >> x;
        } else if (tok == "SCALARS") {
            std::string name, type;
            int comps = 1;
            in >> name >> type;
            if (in.peek() != '\n') {
                std::string rest;
                std::getline(in, rest);
                std::istringstream ss(rest);
                ss >> comps;
            }
            in >> tok >> tok;  // LOOKUP_TABLE default
            const int count = section == cell_section ? n_cells : n_points;
            auto& v = section == cell_section ? data.cell_scalars[name]
                                              : data.point_scalars[name];
            v.resize(count);
            for (double& x : v) in >> x;
        }
    }
    if (data.mesh.nodes.empty()) throw ConfigError("not a VTK unstructured grid: " + path);
    return data;
}

// CSV with a header row; values in 17-significant-digit scientific form so a
// read-back reproduces the doubles exactly.
inline void write_csv(const std::vector<std::string>& header,
                      const std::vector<std::vector<double>>& rows, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open for writing: " + path);
    for (std::size_t c = 0; c < header.size(); ++c)
        out << header[c] << (c + 1 < header.size() ? ',' : '\n');
    char buf[48];
    for (const auto& row : rows) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            std::snprintf(buf, sizeof buf, "%.16e", row[c]);
            out << buf << (c + 1 < row.size() ? ',' : '\n');
        }
    }
    if (!out) throw ConfigError("write failed: " + path);
}

struct CsvData {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    int column(const std::string& name) const {
        for (std::size_t c = 0; c < header.size(); ++c)
            if (header[c] == name) return static_cast<int>(c);
        throw ConfigError("csv column not found: " + name);
    }
};

inline CsvData read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open: " + path);
    CsvData data;
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("empty csv: " + path);
    {
        std::istringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) data.header.push_back(cell);
    }
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string cell;
        std::vector<double> row;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        data.rows.push_back(std::move(row));
    }
    return data;
}

// Order-sensitive content hash over coordinates and connectivity, used to
// reject comparisons across different meshes.
inline std::uint64_t mesh_hash(const Mesh& mesh) {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](std::uint64_t v) {
        for (int b = 0; b < 8; ++b) {
            h ^= (v >> (8 * b)) & 0xff;
            h *= 1099511628211ull;
        }
    };
    mix(static_cast<std::uint64_t>(mesh.dim));
    mix(static_cast<std::uint64_t>(mesh.node_count()));
    mix(static_cast<std::uint64_t>(mesh.element_count()));
    for (const auto& p : mesh.nodes)
        for (int k = 0; k < mesh.dim; ++k) {
            std::uint64_t bits;
            static_assert(sizeof bits == sizeof p[k]);
            std::memcpy(&bits, &p[k], sizeof bits);
            mix(bits);
        }
    for (const auto& e : mesh.elements) {
        mix(static_cast<std::uint64_t>(e.kind));
        for (int a = 0; a < e.node_count(); ++a) mix(static_cast<std::uint64_t>(e.node_ids[a]));
    }
    return h;
}

}  // namespace perimts
