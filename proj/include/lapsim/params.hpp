#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "lapsim/csv.hpp"
#include "lapsim/errors.hpp"
#include "lapsim/vehicle.hpp"

namespace lapsim {

// Vehicle parameter files: one JSON document per vehicle with a schema
// version, chassis/aero/driveline sections inline, the engine map in a CSV
// next to it, and one JSON file per tire fidelity. All values SI, angles in
// radians. Loading validates the assembled parameter set and reports the
// offending key on any schema violation.

inline constexpr int kVehicleSchemaVersion = 1;

namespace params_detail {

using nlohmann::json;

inline json parse_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open parameter file: " + path.string());
    try {
        json j;
        in >> j;
        return j;
    } catch (const json::exception& e) {
        throw ConfigError("malformed JSON in " + path.string() + ": " + e.what());
    }
}

// at()/get() with json's own key/type diagnostics rewrapped as ConfigError
// so every loader reports "<file>: <which key, what went wrong>".
template <typename T>
T field(const json& j, const char* key, const std::string& context) {
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(context + ": " + e.what());
    }
}

inline void write_file(const json& j, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write parameter file: " + path.string());
    out << j.dump(2) << '\n';
}

#define LAPSIM_GET(obj, src, name) obj.name = field<double>(src, #name, context)

inline MFScaling scaling_from_json(const json& j, const std::string& context) {
    MFScaling s;
    LAPSIM_GET(s, j, l_fz0);
    LAPSIM_GET(s, j, l_mux);
    LAPSIM_GET(s, j, l_muy);
    LAPSIM_GET(s, j, l_kxk);
    LAPSIM_GET(s, j, l_kya);
    LAPSIM_GET(s, j, l_cx);
    LAPSIM_GET(s, j, l_cy);
    LAPSIM_GET(s, j, l_ex);
    LAPSIM_GET(s, j, l_ey);
    LAPSIM_GET(s, j, l_hx);
    LAPSIM_GET(s, j, l_hy);
    LAPSIM_GET(s, j, l_vx);
    LAPSIM_GET(s, j, l_vy);
    LAPSIM_GET(s, j, l_kyg);
    LAPSIM_GET(s, j, l_xa);
    LAPSIM_GET(s, j, l_yk);
    LAPSIM_GET(s, j, l_vyk);
    return s;
}

inline json scaling_to_json(const MFScaling& s) {
    return json{{"l_fz0", s.l_fz0}, {"l_mux", s.l_mux}, {"l_muy", s.l_muy},
                {"l_kxk", s.l_kxk}, {"l_kya", s.l_kya}, {"l_cx", s.l_cx},
                {"l_cy", s.l_cy},   {"l_ex", s.l_ex},   {"l_ey", s.l_ey},
                {"l_hx", s.l_hx},   {"l_hy", s.l_hy},   {"l_vx", s.l_vx},
                {"l_vy", s.l_vy},   {"l_kyg", s.l_kyg}, {"l_xa", s.l_xa},
                {"l_yk", s.l_yk},   {"l_vyk", s.l_vyk}};
}

inline MF2006Parameters full_tire_from_json(const json& j, const std::string& context) {
    MF2006Parameters p;
    LAPSIM_GET(p, j, fz0_n);
    LAPSIM_GET(p, j, p_cx1);
    LAPSIM_GET(p, j, p_dx1);
    LAPSIM_GET(p, j, p_dx2);
    LAPSIM_GET(p, j, p_dx3);
    LAPSIM_GET(p, j, p_ex1);
    LAPSIM_GET(p, j, p_ex2);
    LAPSIM_GET(p, j, p_ex3);
    LAPSIM_GET(p, j, p_ex4);
    LAPSIM_GET(p, j, p_kx1);
    LAPSIM_GET(p, j, p_kx2);
    LAPSIM_GET(p, j, p_kx3);
    LAPSIM_GET(p, j, p_hx1);
    LAPSIM_GET(p, j, p_hx2);
    LAPSIM_GET(p, j, p_vx1);
    LAPSIM_GET(p, j, p_vx2);
    LAPSIM_GET(p, j, r_bx1);
    LAPSIM_GET(p, j, r_bx2);
    LAPSIM_GET(p, j, r_bx3);
    LAPSIM_GET(p, j, r_cx1);
    LAPSIM_GET(p, j, r_ex1);
    LAPSIM_GET(p, j, r_ex2);
    LAPSIM_GET(p, j, r_hx1);
    LAPSIM_GET(p, j, p_cy1);
    LAPSIM_GET(p, j, p_dy1);
    LAPSIM_GET(p, j, p_dy2);
    LAPSIM_GET(p, j, p_dy3);
    LAPSIM_GET(p, j, p_ey1);
    LAPSIM_GET(p, j, p_ey2);
    LAPSIM_GET(p, j, p_ey3);
    LAPSIM_GET(p, j, p_ey4);
    LAPSIM_GET(p, j, p_ey5);
    LAPSIM_GET(p, j, p_ky1);
    LAPSIM_GET(p, j, p_ky2);
    LAPSIM_GET(p, j, p_ky3);
    LAPSIM_GET(p, j, p_ky4);
    LAPSIM_GET(p, j, p_ky5);
    LAPSIM_GET(p, j, p_ky6);
    LAPSIM_GET(p, j, p_ky7);
    LAPSIM_GET(p, j, p_hy1);
    LAPSIM_GET(p, j, p_hy2);
    LAPSIM_GET(p, j, p_vy1);
    LAPSIM_GET(p, j, p_vy2);
    LAPSIM_GET(p, j, p_vy3);
    LAPSIM_GET(p, j, p_vy4);
    LAPSIM_GET(p, j, r_by1);
    LAPSIM_GET(p, j, r_by2);
    LAPSIM_GET(p, j, r_by3);
    LAPSIM_GET(p, j, r_by4);
    LAPSIM_GET(p, j, r_cy1);
    LAPSIM_GET(p, j, r_ey1);
    LAPSIM_GET(p, j, r_ey2);
    LAPSIM_GET(p, j, r_hy1);
    LAPSIM_GET(p, j, r_hy2);
    LAPSIM_GET(p, j, r_vy1);
    LAPSIM_GET(p, j, r_vy2);
    LAPSIM_GET(p, j, r_vy3);
    LAPSIM_GET(p, j, r_vy4);
    LAPSIM_GET(p, j, r_vy5);
    LAPSIM_GET(p, j, r_vy6);
    p.scale = scaling_from_json(field<json>(j, "scale", context), context + " scale");
    return p;
}

inline json full_tire_to_json(const MF2006Parameters& p) {
    json j{{"fz0_n", p.fz0_n},
           {"p_cx1", p.p_cx1}, {"p_dx1", p.p_dx1}, {"p_dx2", p.p_dx2},
           {"p_dx3", p.p_dx3}, {"p_ex1", p.p_ex1}, {"p_ex2", p.p_ex2},
           {"p_ex3", p.p_ex3}, {"p_ex4", p.p_ex4}, {"p_kx1", p.p_kx1},
           {"p_kx2", p.p_kx2}, {"p_kx3", p.p_kx3}, {"p_hx1", p.p_hx1},
           {"p_hx2", p.p_hx2}, {"p_vx1", p.p_vx1}, {"p_vx2", p.p_vx2},
           {"r_bx1", p.r_bx1}, {"r_bx2", p.r_bx2}, {"r_bx3", p.r_bx3},
           {"r_cx1", p.r_cx1}, {"r_ex1", p.r_ex1}, {"r_ex2", p.r_ex2},
           {"r_hx1", p.r_hx1},
           {"p_cy1", p.p_cy1}, {"p_dy1", p.p_dy1}, {"p_dy2", p.p_dy2},
           {"p_dy3", p.p_dy3}, {"p_ey1", p.p_ey1}, {"p_ey2", p.p_ey2},
           {"p_ey3", p.p_ey3}, {"p_ey4", p.p_ey4}, {"p_ey5", p.p_ey5},
           {"p_ky1", p.p_ky1}, {"p_ky2", p.p_ky2}, {"p_ky3", p.p_ky3},
           {"p_ky4", p.p_ky4}, {"p_ky5", p.p_ky5}, {"p_ky6", p.p_ky6},
           {"p_ky7", p.p_ky7}, {"p_hy1", p.p_hy1}, {"p_hy2", p.p_hy2},
           {"p_vy1", p.p_vy1}, {"p_vy2", p.p_vy2}, {"p_vy3", p.p_vy3},
           {"p_vy4", p.p_vy4},
           {"r_by1", p.r_by1}, {"r_by2", p.r_by2}, {"r_by3", p.r_by3},
           {"r_by4", p.r_by4}, {"r_cy1", p.r_cy1}, {"r_ey1", p.r_ey1},
           {"r_ey2", p.r_ey2}, {"r_hy1", p.r_hy1}, {"r_hy2", p.r_hy2},
           {"r_vy1", p.r_vy1}, {"r_vy2", p.r_vy2}, {"r_vy3", p.r_vy3},
           {"r_vy4", p.r_vy4}, {"r_vy5", p.r_vy5}, {"r_vy6", p.r_vy6}};
    j["scale"] = scaling_to_json(p.scale);
    return j;
}

inline MFSimpleParameters simple_tire_from_json(const json& j, const std::string& context) {
    MFSimpleParameters p;
    const auto axis = [&](const char* key) {
        const json a = field<json>(j, key, context);
        MFSimpleAxis out;
        const std::string ctx = context + " " + key;
        out.b = field<double>(a, "b", ctx);
        out.c = field<double>(a, "c", ctx);
        out.d = field<double>(a, "d", ctx);
        out.e = field<double>(a, "e", ctx);
        return out;
    };
    p.lon = axis("lon");
    p.lat = axis("lat");
    return p;
}

inline json simple_tire_to_json(const MFSimpleParameters& p) {
    return json{{"lon", {{"b", p.lon.b}, {"c", p.lon.c}, {"d", p.lon.d}, {"e", p.lon.e}}},
                {"lat", {{"b", p.lat.b}, {"c", p.lat.c}, {"d", p.lat.d}, {"e", p.lat.e}}}};
}

inline LinearTireParameters linear_tire_from_json(const json& j,
                                                  const std::string& context) {
    LinearTireParameters p;
    LAPSIM_GET(p, j, c_kappa_n);
    LAPSIM_GET(p, j, c_alpha_n_per_rad);
    return p;
}

inline json linear_tire_to_json(const LinearTireParameters& p) {
    return json{{"c_kappa_n", p.c_kappa_n}, {"c_alpha_n_per_rad", p.c_alpha_n_per_rad}};
}

#undef LAPSIM_GET

}  // namespace params_detail

// Engine map CSV: first column `rpm`, remaining column headers are the
// throttle breakpoints, cells are torque in newton meters.
inline EngineMap load_engine_map(const std::filesystem::path& path) {
    const CsvTable t = read_csv(path);
    if (t.columns.size() < 3 || t.columns[0] != "rpm")
        throw ConfigError("engine map CSV needs an rpm column plus throttle columns: " +
                          path.string());
    EngineMap map;
    for (std::size_t c = 1; c < t.columns.size(); ++c) {
        try {
            std::size_t used = 0;
            map.throttle.push_back(std::stod(t.columns[c], &used));
            if (used != t.columns[c].size()) throw std::invalid_argument(t.columns[c]);
        } catch (const std::exception&) {
            throw ConfigError("engine map throttle header is not numeric: '" +
                              t.columns[c] + "' in " + path.string());
        }
    }
    for (const auto& row : t.rows) {
        map.rpm.push_back(row[0]);
        map.torque_nm.emplace_back(row.begin() + 1, row.end());
    }
    map.validate();
    return map;
}

inline void save_engine_map(const EngineMap& map, const std::filesystem::path& path) {
    std::vector<std::string> columns{"rpm"};
    for (double th : map.throttle) {
        std::ostringstream os;
        os << th;
        columns.push_back(os.str());
    }
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < map.rpm.size(); ++i) {
        std::vector<double> row{map.rpm[i]};
        row.insert(row.end(), map.torque_nm[i].begin(), map.torque_nm[i].end());
        rows.push_back(std::move(row));
    }
    write_csv(path, columns, rows);
}

// Loads a vehicle description: the top-level JSON plus the engine map CSV
// and tire files it references (paths resolved relative to the JSON file).
inline VehicleParameters load_vehicle(const std::filesystem::path& path) {
    using params_detail::field;
    using params_detail::json;
    const json j = params_detail::parse_file(path);
    const std::string ctx = path.filename().string();
    const auto dir = path.parent_path();

    const int version = field<int>(j, "version", ctx);
    if (version != kVehicleSchemaVersion)
        throw ConfigError(ctx + ": unsupported schema version " + std::to_string(version));

    VehicleParameters p;

    {
        const json c = field<json>(j, "chassis", ctx);
        const std::string context = ctx + " chassis";
        ChassisParameters& ch = p.chassis;
        ch.m_sprung_kg = field<double>(c, "m_sprung_kg", context);
        const auto unsprung = field<std::vector<double>>(c, "m_unsprung_kg", context);
        if (unsprung.size() != 4)
            throw ConfigError(context + ": m_unsprung_kg needs 4 entries");
        std::copy(unsprung.begin(), unsprung.end(), ch.m_unsprung_kg.begin());
        ch.ixx_kgm2 = field<double>(c, "ixx_kgm2", context);
        ch.iyy_kgm2 = field<double>(c, "iyy_kgm2", context);
        ch.izz_kgm2 = field<double>(c, "izz_kgm2", context);
        ch.lf_m = field<double>(c, "lf_m", context);
        ch.lr_m = field<double>(c, "lr_m", context);
        ch.bf_m = field<double>(c, "bf_m", context);
        ch.br_m = field<double>(c, "br_m", context);
        ch.h_cog_m = field<double>(c, "h_cog_m", context);
        ch.h_rp_m = field<double>(c, "h_rp_m", context);
        ch.h_pp_accel_m = field<double>(c, "h_pp_accel_m", context);
        ch.h_pp_decel_m = field<double>(c, "h_pp_decel_m", context);
        const auto springs = field<std::vector<double>>(c, "k_spring_npm", context);
        const auto dampers = field<std::vector<double>>(c, "k_damper_nspm", context);
        if (springs.size() != 4 || dampers.size() != 4)
            throw ConfigError(context + ": spring and damper rates need 4 entries");
        std::copy(springs.begin(), springs.end(), ch.k_spring_npm.begin());
        std::copy(dampers.begin(), dampers.end(), ch.k_damper_nspm.begin());
        ch.k_arb_front_npm = field<double>(c, "k_arb_front_npm", context);
        ch.k_arb_rear_npm = field<double>(c, "k_arb_rear_npm", context);
        ch.travel_limit_m = field<double>(c, "travel_limit_m", context);
    }

    {
        const json a = field<json>(j, "aero", ctx);
        const std::string context = ctx + " aero";
        p.aero.drag_area_kgpm = field<double>(a, "drag_area_kgpm", context);
        p.aero.lift_area_kgpm = field<double>(a, "lift_area_kgpm", context);
        p.aero.lever_m = field<double>(a, "lever_m", context);
    }

    {
        const json d = field<json>(j, "driveline", ctx);
        const std::string context = ctx + " driveline";
        DrivelineParameters& dl = p.driveline;
        dl.engine = load_engine_map(dir / field<std::string>(d, "engine_map_csv", context));
        dl.gear_ratio = field<std::vector<double>>(d, "gear_ratio", context);
        dl.upshift_rpm = field<double>(d, "upshift_rpm", context);
        dl.shift_hysteresis_rpm = field<double>(d, "shift_hysteresis_rpm", context);
        dl.wheel_radius_m = field<double>(d, "wheel_radius_m", context);
        dl.i_spin_front_kgm2 = field<double>(d, "i_spin_front_kgm2", context);
        dl.i_spin_rear_kgm2 = field<double>(d, "i_spin_rear_kgm2", context);
        dl.brake_gain_nm = field<double>(d, "brake_gain_nm", context);
        dl.brake_balance_front = field<double>(d, "brake_balance_front", context);
        dl.max_steer_rad = field<double>(d, "max_steer_rad", context);
        const auto timing = [&](const char* key, ActuatorTiming& t) {
            const json a = field<json>(d, key, context);
            t.dead_s = field<double>(a, "dead_s", context + " " + key);
            t.tau_s = field<double>(a, "tau_s", context + " " + key);
        };
        timing("steer_act", dl.steer_act);
        timing("throttle_act", dl.throttle_act);
        timing("brake_act", dl.brake_act);
    }

    {
        const json t = field<json>(j, "tire", ctx);
        const std::string context = ctx + " tire";
        TireSetup& ts = p.tire;
        const auto fidelity = field<std::string>(t, "fidelity", context);
        if (fidelity == "full")
            ts.fidelity = TireFidelity::full;
        else if (fidelity == "simple")
            ts.fidelity = TireFidelity::simple;
        else if (fidelity == "linear")
            ts.fidelity = TireFidelity::linear;
        else
            throw ConfigError(context + ": unknown fidelity '" + fidelity + "'");
        ts.full = params_detail::full_tire_from_json(
            params_detail::parse_file(dir / field<std::string>(t, "full_file", context)),
            context + " full");
        if (t.contains("simple_file"))
            ts.simple = params_detail::simple_tire_from_json(
                params_detail::parse_file(dir /
                                          field<std::string>(t, "simple_file", context)),
                context + " simple");
        if (t.contains("linear_file"))
            ts.linear = params_detail::linear_tire_from_json(
                params_detail::parse_file(dir /
                                          field<std::string>(t, "linear_file", context)),
                context + " linear");
        ts.vertical_rate_npm = field<double>(t, "vertical_rate_npm", context);
        ts.unloaded_radius_m = field<double>(t, "unloaded_radius_m", context);
        ts.sigma_alpha_m = field<double>(t, "sigma_alpha_m", context);
        ts.sigma_kappa_m = field<double>(t, "sigma_kappa_m", context);
        ts.fit_load_n = field<double>(t, "fit_load_n", context);
    }

    p.v_low_mps = field<double>(j, "v_low_mps", ctx);
    p.validate();
    return p;
}

// Writes the vehicle description as a bundle in one directory: the top-level
// JSON, the engine map CSV, and one file per tire fidelity.
inline std::filesystem::path save_vehicle(const VehicleParameters& p,
                                          const std::filesystem::path& dir,
                                          const std::string& stem = "vehicle") {
    using params_detail::json;
    std::filesystem::create_directories(dir);
    save_engine_map(p.driveline.engine, dir / (stem + "_engine_map.csv"));
    params_detail::write_file(params_detail::full_tire_to_json(p.tire.full),
                              dir / (stem + "_tire_full.json"));
    params_detail::write_file(params_detail::simple_tire_to_json(p.tire.simple),
                              dir / (stem + "_tire_simple.json"));
    params_detail::write_file(params_detail::linear_tire_to_json(p.tire.linear),
                              dir / (stem + "_tire_linear.json"));

    json j;
    j["version"] = kVehicleSchemaVersion;
    j["chassis"] = {
        {"m_sprung_kg", p.chassis.m_sprung_kg},
        {"m_unsprung_kg", p.chassis.m_unsprung_kg},
        {"ixx_kgm2", p.chassis.ixx_kgm2},
        {"iyy_kgm2", p.chassis.iyy_kgm2},
        {"izz_kgm2", p.chassis.izz_kgm2},
        {"lf_m", p.chassis.lf_m},
        {"lr_m", p.chassis.lr_m},
        {"bf_m", p.chassis.bf_m},
        {"br_m", p.chassis.br_m},
        {"h_cog_m", p.chassis.h_cog_m},
        {"h_rp_m", p.chassis.h_rp_m},
        {"h_pp_accel_m", p.chassis.h_pp_accel_m},
        {"h_pp_decel_m", p.chassis.h_pp_decel_m},
        {"k_spring_npm", p.chassis.k_spring_npm},
        {"k_damper_nspm", p.chassis.k_damper_nspm},
        {"k_arb_front_npm", p.chassis.k_arb_front_npm},
        {"k_arb_rear_npm", p.chassis.k_arb_rear_npm},
        {"travel_limit_m", p.chassis.travel_limit_m},
    };
    j["aero"] = {
        {"drag_area_kgpm", p.aero.drag_area_kgpm},
        {"lift_area_kgpm", p.aero.lift_area_kgpm},
        {"lever_m", p.aero.lever_m},
    };
    const auto timing_json = [](const ActuatorTiming& t) {
        return json{{"dead_s", t.dead_s}, {"tau_s", t.tau_s}};
    };
    j["driveline"] = {
        {"engine_map_csv", stem + "_engine_map.csv"},
        {"gear_ratio", p.driveline.gear_ratio},
        {"upshift_rpm", p.driveline.upshift_rpm},
        {"shift_hysteresis_rpm", p.driveline.shift_hysteresis_rpm},
        {"wheel_radius_m", p.driveline.wheel_radius_m},
        {"i_spin_front_kgm2", p.driveline.i_spin_front_kgm2},
        {"i_spin_rear_kgm2", p.driveline.i_spin_rear_kgm2},
        {"brake_gain_nm", p.driveline.brake_gain_nm},
        {"brake_balance_front", p.driveline.brake_balance_front},
        {"max_steer_rad", p.driveline.max_steer_rad},
        {"steer_act", timing_json(p.driveline.steer_act)},
        {"throttle_act", timing_json(p.driveline.throttle_act)},
        {"brake_act", timing_json(p.driveline.brake_act)},
    };
    const char* fidelity = p.tire.fidelity == TireFidelity::full     ? "full"
                           : p.tire.fidelity == TireFidelity::simple ? "simple"
                                                                     : "linear";
    j["tire"] = {
        {"fidelity", fidelity},
        {"full_file", stem + "_tire_full.json"},
        {"simple_file", stem + "_tire_simple.json"},
        {"linear_file", stem + "_tire_linear.json"},
        {"vertical_rate_npm", p.tire.vertical_rate_npm},
        {"unloaded_radius_m", p.tire.unloaded_radius_m},
        {"sigma_alpha_m", p.tire.sigma_alpha_m},
        {"sigma_kappa_m", p.tire.sigma_kappa_m},
        {"fit_load_n", p.tire.fit_load_n},
    };
    j["v_low_mps"] = p.v_low_mps;

    const auto path = dir / (stem + ".json");
    params_detail::write_file(j, path);
    return path;
}

}  // namespace lapsim
