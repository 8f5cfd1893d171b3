#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "lapsim/csv.hpp"
#include "lapsim/errors.hpp"
#include "lapsim/loop.hpp"
#include "lapsim/metrics.hpp"
#include "lapsim/params.hpp"
#include "lapsim/track.hpp"
#include "lapsim/vehicle.hpp"

namespace lapsim {

// Batch experiment runner: repeated closed-loop runs across model variants
// and velocity scale factors, with metric extraction against the baseline
// variant and tidy CSV outputs. Metric columns are bit-identical across
// reruns and across serial/parallel execution.

enum class ExperimentKind { fidelity, sweep };

struct ExperimentConfig {
    std::filesystem::path vehicle_file;
    std::filesystem::path track_file;
    std::filesystem::path lap_file;
    std::filesystem::path out_dir;
    std::optional<std::filesystem::path> reference_trace_file;

    std::vector<ModelVariant> variants{all_variants().begin(), all_variants().end()};
    int repetitions = 30;
    std::vector<double> scale_factors{1.0};
    bool noise = true;
    std::uint64_t base_seed = 2026;
    int parallelism = 1;
    double grid_spacing_m = kDefaultGridSpacingM;
    LoopConfig loop;

    // Raw config file contents, persisted as config.snapshot so results stay
    // traceable to the exact configuration that produced them.
    std::string snapshot;

    void validate() const {
        if (repetitions < 1) throw ConfigError("repetitions must be at least 1");
        if (variants.empty()) throw ConfigError("variant list must not be empty");
        if (std::find(variants.begin(), variants.end(), ModelVariant::base) ==
            variants.end())
            throw ConfigError("variant list must include the baseline variant");
        if (scale_factors.empty()) throw ConfigError("scale factor list must not be empty");
        for (double f : scale_factors)
            if (!(f > 0.0)) throw ConfigError("scale factors must be positive");
        if (!std::is_sorted(scale_factors.begin(), scale_factors.end()))
            throw ConfigError("scale factors must ascend");
        if (parallelism < 1) throw ConfigError("parallelism must be at least 1");
        if (!(grid_spacing_m > 0.0)) throw ConfigError("grid spacing must be positive");
        for (const auto* p : {&vehicle_file, &track_file, &lap_file}) {
            if (!std::filesystem::exists(*p))
                throw ConfigError("input file does not exist: " + p->string());
        }
        if (reference_trace_file && !std::filesystem::exists(*reference_trace_file))
            throw ConfigError("reference trace does not exist: " +
                              reference_trace_file->string());
        loop.validate();
    }
};

// Loads an experiment config, filling experiment-specific defaults: the
// fidelity study repeats 30 times with sensor noise at factor 1.0; the sweep
// repeats 5 times noise-free over an ascending factor grid that keeps going
// until the baseline cannot complete the lap.
inline ExperimentConfig load_experiment_config(const std::filesystem::path& path,
                                               ExperimentKind kind) {
    using nlohmann::json;
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open experiment config: " + path.string());
    std::ostringstream raw;
    raw << in.rdbuf();

    json j;
    try {
        j = json::parse(raw.str());
    } catch (const json::exception& e) {
        throw ConfigError("malformed experiment config " + path.string() + ": " + e.what());
    }

    ExperimentConfig cfg;
    cfg.snapshot = raw.str();
    if (kind == ExperimentKind::fidelity) {
        cfg.repetitions = 30;
        cfg.scale_factors = {1.0};
        cfg.noise = true;
    } else {
        cfg.repetitions = 5;
        cfg.noise = false;
        cfg.scale_factors = {0.90, 0.95, 1.00};
        for (double f = 1.02; f < 1.501; f += 0.02) cfg.scale_factors.push_back(f);
    }

    const auto dir = path.parent_path();
    const auto get_path = [&](const char* key) {
        const auto rel = std::filesystem::path(j.at(key).get<std::string>());
        return rel.is_absolute() ? rel : dir / rel;
    };
    try {
        cfg.vehicle_file = get_path("vehicle");
        cfg.track_file = get_path("track");
        cfg.lap_file = get_path("lap");
        cfg.out_dir = get_path("out_dir");
        if (j.contains("reference_trace")) cfg.reference_trace_file = get_path("reference_trace");
        if (j.contains("variants")) {
            cfg.variants.clear();
            for (const auto& v : j.at("variants"))
                cfg.variants.push_back(variant_from_name(v.get<std::string>()));
        }
        if (j.contains("repetitions")) cfg.repetitions = j.at("repetitions").get<int>();
        if (j.contains("scale_factors"))
            cfg.scale_factors = j.at("scale_factors").get<std::vector<double>>();
        if (j.contains("noise")) cfg.noise = j.at("noise").get<bool>();
        if (j.contains("base_seed")) cfg.base_seed = j.at("base_seed").get<std::uint64_t>();
        if (j.contains("parallelism")) cfg.parallelism = j.at("parallelism").get<int>();
        if (j.contains("grid_spacing_m"))
            cfg.grid_spacing_m = j.at("grid_spacing_m").get<double>();
        if (j.contains("controller")) {
            const json& c = j.at("controller");
            ControllerConfig& cc = cfg.loop.controller;
            if (c.contains("period_s")) cc.period_s = c.at("period_s").get<double>();
            if (c.contains("k_lat_err")) cc.k_lat_err = c.at("k_lat_err").get<double>();
            if (c.contains("k_heading")) cc.k_heading = c.at("k_heading").get<double>();
            if (c.contains("k_curv_ff")) cc.k_curv_ff = c.at("k_curv_ff").get<double>();
            if (c.contains("preview_time_s"))
                cc.preview_time_s = c.at("preview_time_s").get<double>();
            if (c.contains("k_speed")) cc.k_speed = c.at("k_speed").get<double>();
            if (c.contains("a_min_mps2")) cc.a_min_mps2 = c.at("a_min_mps2").get<double>();
            if (c.contains("a_max_mps2")) cc.a_max_mps2 = c.at("a_max_mps2").get<double>();
            if (c.contains("estimator_cutoff_hz"))
                cc.estimator_cutoff_hz = c.at("estimator_cutoff_hz").get<double>();
        }
        if (j.contains("sensors")) {
            const json& s = j.at("sensors");
            SensorConfig& sc = cfg.loop.sensors;
            if (s.contains("pos_std_m")) sc.pos_std_m = s.at("pos_std_m").get<double>();
            if (s.contains("vel_std_mps")) sc.vel_std_mps = s.at("vel_std_mps").get<double>();
            if (s.contains("yaw_std_rad")) sc.yaw_std_rad = s.at("yaw_std_rad").get<double>();
            if (s.contains("yaw_rate_std_radps"))
                sc.yaw_rate_std_radps = s.at("yaw_rate_std_radps").get<double>();
            if (s.contains("accel_std_mps2"))
                sc.accel_std_mps2 = s.at("accel_std_mps2").get<double>();
        }
        if (j.contains("timeout_s")) cfg.loop.timeout_s = j.at("timeout_s").get<double>();
    } catch (const json::exception& e) {
        throw ConfigError("experiment config " + path.string() + ": " + e.what());
    }
    cfg.loop.sensors.enabled = cfg.noise;
    cfg.validate();
    return cfg;
}

struct RunResult {
    int run_id = 0;
    ModelVariant variant = ModelVariant::base;
    double scale_factor = 1.0;
    std::uint64_t seed = 0;
    bool completed = false;
    double peak_a_lat_mps2 = 0.0;
    std::optional<double> lap_time_s;
    std::optional<double> d_max_m;
    std::optional<double> disparity_vs_baseline_m3;
    std::optional<double> disparity_vs_reference_m3;
    std::string fault;  // in-memory diagnostic, not a results column
};

namespace bench_detail {

// Progress can stall at zero for a few samples right after the start line;
// disparity needs a function d(s), so backtracking samples are dropped.
inline LateralErrorTrace monotone_trace(const std::vector<TraceSample>& raw) {
    LateralErrorTrace out;
    out.reserve(raw.size());
    double s_max = -std::numeric_limits<double>::infinity();
    for (const auto& p : raw) {
        if (p.s_m > s_max) {
            out.push_back(p);
            s_max = p.s_m;
        }
    }
    return out;
}

struct RunTask {
    int run_id = 0;
    ModelVariant variant = ModelVariant::base;
    int rep = 0;
    double factor = 1.0;
    const ReferenceLap* lap = nullptr;
    double peak_a_lat = 0.0;
};

// Runs tasks [0, n) on `parallelism` workers writing into preallocated
// slots. Each task is independent, so scheduling cannot change any value.
template <typename Fn>
void run_parallel(std::size_t n, int parallelism, Fn&& fn) {
    if (parallelism <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    const int workers = std::min<int>(parallelism, static_cast<int>(n));
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

inline std::string format_cell(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

inline std::string format_cell(const std::optional<double>& v) {
    return v ? format_cell(*v) : "nan";
}

}  // namespace bench_detail

struct BatchOutcome {
    std::vector<RunResult> results;
    // Metric-grid traces of completed runs, keyed by run id, as persisted.
    std::vector<std::optional<LateralErrorTrace>> traces;
};

// Shared engine behind both experiments: executes variant x repetition
// blocks factor by factor (ascending), pairing every run with the baseline
// variant's trace from the same repetition (same seed), and optionally with
// an external reference trace. When `stop_on_baseline_failure` is set,
// factors after the first one where any baseline repetition fails to
// complete are not executed.
inline BatchOutcome run_experiment_batch(const ExperimentConfig& cfg,
                                         bool stop_on_baseline_failure) {
    cfg.validate();
    const VehicleParameters vehicle = load_vehicle(cfg.vehicle_file);
    const TrackCenterline track = TrackCenterline::load(cfg.track_file);
    const ReferenceLap base_lap = ReferenceLap::load(cfg.lap_file);
    const double s_max = track.length_m();

    std::optional<LateralErrorTrace> reference_grid;
    if (cfg.reference_trace_file) {
        const CsvTable t = read_csv(*cfg.reference_trace_file);
        const std::size_t cs = t.require("s_m");
        const std::size_t cd = t.require("d_m");
        LateralErrorTrace raw;
        raw.reserve(t.rows.size());
        for (const auto& r : t.rows) raw.push_back({r[cs], r[cd]});
        reference_grid = resample(raw, cfg.grid_spacing_m, s_max);
    }

    double peak_base = 0.0;
    for (const auto& p : base_lap.samples())
        peak_base = std::max(peak_base, p.v_mps * p.v_mps * std::abs(p.kappa_radpm));

    LoopConfig loop_cfg = cfg.loop;
    loop_cfg.sensors.enabled = cfg.noise;

    const auto reps = static_cast<std::size_t>(cfg.repetitions);
    BatchOutcome out;
    int next_id = 0;

    for (const double factor : cfg.scale_factors) {
        const ReferenceLap lap = scale_velocity_profile(base_lap, factor);
        // One evaluation per factor so the column is exactly factor^2 times
        // the base lap's peak demanded lateral acceleration.
        const double peak_a_lat = factor * factor * peak_base;

        const auto run_one = [&](bench_detail::RunTask& task, RunResult& row,
                                 std::optional<LateralErrorTrace>& grid) {
            row.run_id = task.run_id;
            row.variant = task.variant;
            row.scale_factor = task.factor;
            row.seed = cfg.base_seed + static_cast<std::uint64_t>(task.rep);
            row.peak_a_lat_mps2 = task.peak_a_lat;
            const RunOutcome ro =
                run_closed_loop(vehicle, task.variant, *task.lap, track, loop_cfg, row.seed);
            row.completed = ro.completed;
            row.fault = ro.fault;
            try {
                const LateralErrorTrace mono = bench_detail::monotone_trace(ro.trace);
                if (!ro.completed) {
                    // Partial trace kept for diagnostics; failed runs get no metrics.
                    if (mono.size() >= 2) grid = resample(mono, cfg.grid_spacing_m);
                    return;
                }
                row.lap_time_s = ro.lap_time_s;
                row.d_max_m = max_lateral_error(ro.trace);
                grid = resample(mono, cfg.grid_spacing_m, s_max);
                if (reference_grid)
                    row.disparity_vs_reference_m3 = disparity(*grid, *reference_grid);
            } catch (const SimError& e) {
                row.completed = false;
                row.lap_time_s.reset();
                row.d_max_m.reset();
                row.disparity_vs_reference_m3.reset();
                grid.reset();
                row.fault = row.fault.empty() ? e.what() : row.fault + "; " + e.what();
            }
        };

        // Baseline repetitions first; their grids pair the other variants.
        std::vector<RunResult> base_rows(reps);
        std::vector<std::optional<LateralErrorTrace>> base_grids(reps);
        std::vector<bench_detail::RunTask> base_tasks(reps);
        for (std::size_t r = 0; r < reps; ++r)
            base_tasks[r] = {next_id + static_cast<int>(r), ModelVariant::base,
                             static_cast<int>(r), factor, &lap, peak_a_lat};
        next_id += static_cast<int>(reps);
        bench_detail::run_parallel(reps, cfg.parallelism, [&](std::size_t r) {
            run_one(base_tasks[r], base_rows[r], base_grids[r]);
            if (base_rows[r].completed)
                base_rows[r].disparity_vs_baseline_m3 =
                    disparity(*base_grids[r], *base_grids[r]);
        });

        // Remaining variants in config order, all repetitions in parallel.
        std::vector<ModelVariant> others;
        for (ModelVariant v : cfg.variants)
            if (v != ModelVariant::base) others.push_back(v);
        std::vector<RunResult> other_rows(others.size() * reps);
        std::vector<std::optional<LateralErrorTrace>> other_grids(others.size() * reps);
        std::vector<bench_detail::RunTask> other_tasks(others.size() * reps);
        for (std::size_t v = 0; v < others.size(); ++v) {
            for (std::size_t r = 0; r < reps; ++r) {
                const std::size_t i = v * reps + r;
                other_tasks[i] = {next_id + static_cast<int>(i), others[v],
                                  static_cast<int>(r), factor, &lap, peak_a_lat};
            }
        }
        next_id += static_cast<int>(others.size() * reps);
        bench_detail::run_parallel(other_tasks.size(), cfg.parallelism, [&](std::size_t i) {
            run_one(other_tasks[i], other_rows[i], other_grids[i]);
            const auto r = static_cast<std::size_t>(other_tasks[i].rep);
            // Completed runs resample over the identical [0, s_max] grid, so
            // pairing two completed traces can never size-mismatch.
            if (other_rows[i].completed && base_rows[r].completed)
                other_rows[i].disparity_vs_baseline_m3 =
                    disparity(*other_grids[i], *base_grids[r]);
        });

        bool baseline_failed = false;
        for (const auto& row : base_rows) baseline_failed |= !row.completed;

        for (std::size_t r = 0; r < reps; ++r) {
            out.results.push_back(std::move(base_rows[r]));
            out.traces.push_back(std::move(base_grids[r]));
        }
        for (std::size_t i = 0; i < other_rows.size(); ++i) {
            out.results.push_back(std::move(other_rows[i]));
            out.traces.push_back(std::move(other_grids[i]));
        }

        if (stop_on_baseline_failure && baseline_failed) break;
    }
    return out;
}

// Fidelity study: every variant repeated with per-repetition seeds at the
// unscaled lap, compared against the baseline run with the same seed.
inline BatchOutcome experiment_fidelity(const ExperimentConfig& cfg) {
    ExperimentConfig c = cfg;
    c.scale_factors = {1.0};
    return run_experiment_batch(c, false);
}

// Velocity sweep: ascending scale factors until the baseline variant fails
// to complete the lap; factors beyond the first baseline failure never run.
inline BatchOutcome experiment_acceleration_sweep(const ExperimentConfig& cfg) {
    return run_experiment_batch(cfg, true);
}

// ---------------------------------------------------------------------------
// Aggregation

struct MetricStats {
    int n = 0;
    double mean = std::numeric_limits<double>::quiet_NaN();
    double std_dev = std::numeric_limits<double>::quiet_NaN();
    double min = std::numeric_limits<double>::quiet_NaN();
    double max = std::numeric_limits<double>::quiet_NaN();
};

inline MetricStats metric_stats(const std::vector<double>& xs) {
    MetricStats s;
    s.n = static_cast<int>(xs.size());
    if (xs.empty()) return s;
    double sum = 0.0;
    s.min = xs.front();
    s.max = xs.front();
    for (double x : xs) {
        sum += x;
        s.min = std::min(s.min, x);
        s.max = std::max(s.max, x);
    }
    // A constant sample has mean == the value and zero spread exactly;
    // short-circuiting keeps summation round-off out of repeated-run reports.
    if (s.min == s.max) {
        s.mean = s.min;
        s.std_dev = 0.0;
        return s;
    }
    s.mean = sum / static_cast<double>(xs.size());
    double sq = 0.0;
    for (double x : xs) sq += (x - s.mean) * (x - s.mean);
    s.std_dev = xs.size() > 1 ? std::sqrt(sq / static_cast<double>(xs.size() - 1)) : 0.0;
    return s;
}

struct SummaryRow {
    ModelVariant variant = ModelVariant::base;
    double scale_factor = 1.0;
    int n_runs = 0;
    int n_completed = 0;
    double completion_rate = 0.0;
    MetricStats lap_time_s;
    MetricStats d_max_m;
    MetricStats disparity_vs_baseline_m3;
    MetricStats disparity_vs_reference_m3;
};

// Per (variant, factor): mean/std/min/max of each metric over completed
// runs; non-completed runs count only toward the completion rate.
inline std::vector<SummaryRow> aggregate(const std::vector<RunResult>& results) {
    if (results.empty()) throw ConfigError("nothing to aggregate");
    std::vector<SummaryRow> rows;
    for (const RunResult& r : results) {
        SummaryRow* row = nullptr;
        for (auto& existing : rows) {
            if (existing.variant == r.variant && existing.scale_factor == r.scale_factor) {
                row = &existing;
                break;
            }
        }
        if (!row) {
            rows.push_back({});
            row = &rows.back();
            row->variant = r.variant;
            row->scale_factor = r.scale_factor;
        }
        ++row->n_runs;
        if (r.completed) ++row->n_completed;
    }
    for (SummaryRow& row : rows) {
        std::vector<double> lap, dmax, disp, disp_ref;
        for (const RunResult& r : results) {
            if (r.variant != row.variant || r.scale_factor != row.scale_factor ||
                !r.completed)
                continue;
            if (r.lap_time_s) lap.push_back(*r.lap_time_s);
            if (r.d_max_m) dmax.push_back(*r.d_max_m);
            if (r.disparity_vs_baseline_m3) disp.push_back(*r.disparity_vs_baseline_m3);
            if (r.disparity_vs_reference_m3)
                disp_ref.push_back(*r.disparity_vs_reference_m3);
        }
        row.completion_rate =
            static_cast<double>(row.n_completed) / static_cast<double>(row.n_runs);
        row.lap_time_s = metric_stats(lap);
        row.d_max_m = metric_stats(dmax);
        row.disparity_vs_baseline_m3 = metric_stats(disp);
        row.disparity_vs_reference_m3 = metric_stats(disp_ref);
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Persistence

inline const std::vector<std::string>& results_columns() {
    static const std::vector<std::string> cols{
        "run_id",     "variant",        "scale_factor",
        "seed",       "completed",      "peak_a_lat_mps2",
        "lap_time_s", "d_max_m",        "disparity_vs_baseline_m3",
        "disparity_vs_reference_m3"};
    return cols;
}

inline void write_results_csv(const std::vector<RunResult>& results,
                              const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write results: " + path.string());
    const auto& cols = results_columns();
    for (std::size_t i = 0; i < cols.size(); ++i)
        out << cols[i] << (i + 1 < cols.size() ? ',' : '\n');
    for (const RunResult& r : results) {
        using bench_detail::format_cell;
        out << r.run_id << ',' << variant_name(r.variant) << ','
            << format_cell(r.scale_factor) << ',' << r.seed << ','
            << (r.completed ? 1 : 0) << ',' << format_cell(r.peak_a_lat_mps2) << ','
            << format_cell(r.lap_time_s) << ',' << format_cell(r.d_max_m) << ','
            << format_cell(r.disparity_vs_baseline_m3) << ','
            << format_cell(r.disparity_vs_reference_m3) << '\n';
    }
}

inline std::vector<RunResult> load_results_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open results: " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("empty results file: " + path.string());
    const auto split = [](const std::string& s) {
        std::vector<std::string> out;
        std::string cell;
        std::istringstream is(s);
        while (std::getline(is, cell, ',')) out.push_back(cell);
        return out;
    };
    if (split(line) != results_columns())
        throw ConfigError("unexpected results header in " + path.string());
    std::vector<RunResult> rows;
    const auto opt = [](const std::string& s) -> std::optional<double> {
        const double v = std::stod(s);
        if (std::isnan(v)) return std::nullopt;
        return v;
    };
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto cells = split(line);
        if (cells.size() != results_columns().size())
            throw ConfigError("ragged results row in " + path.string());
        RunResult r;
        r.run_id = std::stoi(cells[0]);
        r.variant = variant_from_name(cells[1]);
        r.scale_factor = std::stod(cells[2]);
        r.seed = static_cast<std::uint64_t>(std::stoull(cells[3]));
        r.completed = cells[4] == "1";
        r.peak_a_lat_mps2 = std::stod(cells[5]);
        r.lap_time_s = opt(cells[6]);
        r.d_max_m = opt(cells[7]);
        r.disparity_vs_baseline_m3 = opt(cells[8]);
        r.disparity_vs_reference_m3 = opt(cells[9]);
        rows.push_back(r);
    }
    return rows;
}

inline void write_summary_csv(const std::vector<SummaryRow>& rows,
                              const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write summary: " + path.string());
    out << "variant,scale_factor,n_runs,n_completed,completion_rate";
    for (const char* m : {"lap_time_s", "d_max_m", "disparity_vs_baseline_m3",
                          "disparity_vs_reference_m3"})
        out << ',' << m << "_mean," << m << "_std," << m << "_min," << m << "_max";
    out << '\n';
    for (const SummaryRow& r : rows) {
        using bench_detail::format_cell;
        out << variant_name(r.variant) << ',' << format_cell(r.scale_factor) << ','
            << r.n_runs << ',' << r.n_completed << ',' << format_cell(r.completion_rate);
        for (const MetricStats* s : {&r.lap_time_s, &r.d_max_m,
                                     &r.disparity_vs_baseline_m3,
                                     &r.disparity_vs_reference_m3})
            out << ',' << format_cell(s->mean) << ',' << format_cell(s->std_dev) << ','
                << format_cell(s->min) << ',' << format_cell(s->max);
        out << '\n';
    }
}

// Writes results.csv, summary.csv, per-run trace_<id>.csv files on the
// metric grid, and the config.snapshot copy of the originating config file.
inline void persist_batch(const BatchOutcome& batch, const ExperimentConfig& cfg) {
    std::filesystem::create_directories(cfg.out_dir);
    write_results_csv(batch.results, cfg.out_dir / "results.csv");
    write_summary_csv(aggregate(batch.results), cfg.out_dir / "summary.csv");
    for (std::size_t i = 0; i < batch.results.size(); ++i) {
        if (!batch.traces[i]) continue;
        std::vector<std::vector<double>> rows;
        rows.reserve(batch.traces[i]->size());
        for (const auto& p : *batch.traces[i]) rows.push_back({p.s_m, p.d_m});
        write_csv(cfg.out_dir /
                      ("trace_" + std::to_string(batch.results[i].run_id) + ".csv"),
                  {"s_m", "d_m"}, rows);
    }
    std::ofstream snap(cfg.out_dir / "config.snapshot");
    if (!snap) throw ConfigError("cannot write config snapshot");
    snap << cfg.snapshot;
}

// ---------------------------------------------------------------------------
// Step timing probe

struct TimingSummary {
    std::size_t steps = 0;
    double mean_us = 0.0;
    double p99_us = 0.0;
    double max_us = 0.0;
    double budget_us = 800.0;
    bool within_budget() const { return mean_us < budget_us; }
};

// Wall-clock cost of one integrator step (six derivative evaluations) of the
// requested variant, driven open loop with a gentle steering wave so the
// tire and suspension paths stay active.
inline TimingSummary step_timing_probe(const VehicleParameters& base, ModelVariant variant,
                                       std::size_t steps = 100000) {
    const VehicleParameters p = make_variant(base, variant);
    const TrimPoint trim = initial_state(p, 0.0, 0.0, 0.0, 25.0);
    VehicleState x = trim.state;
    ActuationCommand u = trim.command;
    const Wrench external{};
    const double h = 800e-6;
    const auto f = [&p, &external](const VehicleState& s, const ActuationCommand& in) {
        return vehicle_derivatives(s, in, external, p);
    };

    std::vector<double> us(steps);
    using clock = std::chrono::steady_clock;
    for (std::size_t k = 0; k < steps; ++k) {
        u.steer_rad = 0.01 * std::sin(2.0 * M_PI * 0.5 * static_cast<double>(k) * h);
        const auto t0 = clock::now();
        x = dp45_step(f, x, u, h);
        const auto t1 = clock::now();
        us[k] = std::chrono::duration<double, std::micro>(t1 - t0).count();
    }
    TimingSummary s;
    s.steps = steps;
    double sum = 0.0;
    for (double v : us) {
        sum += v;
        s.max_us = std::max(s.max_us, v);
    }
    s.mean_us = sum / static_cast<double>(steps);
    const std::size_t i99 = std::min(steps - 1, static_cast<std::size_t>(
                                                    0.99 * static_cast<double>(steps)));
    std::nth_element(us.begin(), us.begin() + static_cast<std::ptrdiff_t>(i99), us.end());
    s.p99_us = us[i99];
    return s;
}

}  // namespace lapsim
