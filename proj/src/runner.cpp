#include "tkdv/runner.hpp"

#include "tkdv/direct_filter.hpp"
#include "tkdv/integrator.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <set>
#include <thread>

namespace tkdv {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

std::string format_double(double value) {
    if (std::isnan(value)) return "nan";
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, value, std::chars_format::general);
    return {buf, res.ptr};
}

namespace {

json number_or_null(std::optional<double> v) {
    return v && std::isfinite(*v) ? json(*v) : json(nullptr);
}

json relative_error(std::optional<double> estimate, double truth) {
    if (!estimate || !std::isfinite(*estimate) || truth == 0.0) return nullptr;
    return std::abs(*estimate - truth) / std::abs(truth);
}

class CsvWriter {
public:
    CsvWriter(const fs::path& dir, const std::string& file, const std::vector<std::string>& header) {
        if (dir.empty()) return;
        out_.open(dir / file, std::ios::binary | std::ios::trunc);
        if (!out_) throw std::runtime_error("cannot write " + (dir / file).string());
        row(header);
    }

    bool active() const { return out_.is_open(); }

    void row(const std::vector<std::string>& cells) {
        if (!active()) return;
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out_ << ',';
            out_ << cells[i];
        }
        out_ << '\n';
    }

    void line(const std::string& text) {
        if (active()) out_ << text << '\n';
    }

private:
    std::ofstream out_;
};

void write_summary(const fs::path& dir, const json& summary) {
    if (dir.empty()) return;
    std::ofstream out(dir / "summary.json", std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + (dir / "summary.json").string());
    out << summary.dump(2) << '\n';
}

json run_convergence(const ExperimentConfig& c, const fs::path& dir) {
    const SpectralState start = random_initial_state(c.seed, c.truncation);
    const ConvergenceTable table = convergence_study(start, {c.solver.c2, c.solver.c3}, c.solver.t_final,
                                                     c.solver.dt_list, c.solver.dt_reference);
    CsvWriter csv(dir, "convergence.csv", {"dt", "error"});
    json rows = json::array();
    for (const auto& r : table.rows) {
        csv.row({format_double(r.dt), format_double(r.error.value_or(NAN))});
        rows.push_back({{"dt", r.dt}, {"error", number_or_null(r.error)}, {"failure", r.failure}});
    }
    csv.line("# slope=" + (table.slope ? format_double(*table.slope) : std::string("nan")));
    return {{"rows", rows}, {"slope", number_or_null(table.slope)}};
}

json run_hamiltonian(const ExperimentConfig& c, const fs::path& dir) {
    const SpectralState start = random_initial_state(c.seed, c.truncation);
    const TkdvParams params{c.solver.c2, c.solver.c3};
    const Trajectory traj = integrate(start, params, {c.dt, c.solver.t_final}, c.solver.sample_every);
    const double h0 = hamiltonian(start, params);
    const double e0 = energy(start);
    double max_h = 0.0, max_e = 0.0, max_unit = 0.0;
    for (const auto& s : traj.states) {
        max_h = std::max(max_h, std::abs(hamiltonian(s, params) - h0));
        const double e = energy(s);
        max_e = std::max(max_e, std::abs(e - e0));
        max_unit = std::max(max_unit, std::abs(e - 1.0));
    }
    CsvWriter csv(dir, "drift.csv", {"time", "abs_hamiltonian_drift", "energy_drift"});
    for (const auto& d : hamiltonian_drift(traj, params, c.solver.report_every))
        csv.row({format_double(d.time), format_double(d.hamiltonian_drift), format_double(d.energy_drift)});
    return {{"initial_energy", e0},
            {"initial_hamiltonian", h0},
            {"samples", traj.size()},
            {"max_abs_hamiltonian_drift", max_h},
            {"max_energy_drift", max_e},
            {"max_abs_energy_minus_one", max_unit}};
}

json run_heatmap(const ExperimentConfig& c, const fs::path& dir) {
    const CoefficientSchedule schedule =
        c.coefficients.segments.empty() ? CoefficientSchedule::from_depths(c.schedule) : c.coefficients;
    const auto grids = multi_region_field(schedule, c.dt, c.field.n_grid, c.field.sample_every, c.seed, c.truncation);
    std::vector<std::string> header{"time"};
    for (std::size_t j = 0; j < c.field.n_grid; ++j) header.push_back("u_" + std::to_string(j));
    json segments = json::array();
    for (std::size_t s = 0; s < grids.size(); ++s) {
        CsvWriter csv(dir, "field_" + std::to_string(s + 1) + ".csv", header);
        double worst_mean = 0.0, peak = 0.0;
        for (std::size_t i = 0; i < grids[s].rows.size(); ++i) {
            std::vector<std::string> cells{format_double(grids[s].times[i])};
            double mean = 0.0;
            for (double v : grids[s].rows[i]) {
                cells.push_back(format_double(v));
                mean += v;
                peak = std::max(peak, std::abs(v));
            }
            worst_mean = std::max(worst_mean, std::abs(mean / static_cast<double>(c.field.n_grid)));
            csv.row(cells);
        }
        segments.push_back({{"c2", grids[s].params.c2_coeff},
                            {"c3", grids[s].params.c3_coeff},
                            {"rows", grids[s].rows.size()},
                            {"max_abs_row_mean", worst_mean},
                            {"max_abs_displacement", peak}});
    }
    return {{"segments", segments}};
}

EstimationSetup setup_from(const ExperimentConfig& c, const DepthSchedule& schedule) {
    EstimationSetup s;
    s.schedule = schedule;
    s.dt = c.dt;
    s.truncation = c.truncation;
    s.seed = c.seed;
    s.state_noise_std = c.noise.state_std;
    s.obs_noise_std = c.noise.obs_std;
    s.obs_diagonal = c.noise.obs_diagonal;
    s.filter = c.filter;
    s.estimator = c.estimator;
    return s;
}

void write_estimates(const fs::path& dir, const EstimationResult& r) {
    CsvWriter csv(dir, "estimates.csv",
                  {"step", "time", "c2_post_mean", "c3_post_mean", "c2_running", "c3_running", "depth_running"});
    if (!csv.active()) return;
    for (std::size_t n = 0; n < r.posterior_means.size(); ++n) {
        std::vector<std::string> cells{std::to_string(n + 1), format_double(r.times[n]),
                                       format_double(r.posterior_means[n][0]), format_double(r.posterior_means[n][1])};
        if (n >= r.burn_in) {
            const auto& run = r.running[n - r.burn_in];
            cells.push_back(format_double(run[0]));
            cells.push_back(format_double(run[1]));
            cells.push_back(format_double(r.running_depth[n - r.burn_in]));
        } else {
            cells.insert(cells.end(), {"nan", "nan", "nan"});
        }
        csv.row(cells);
    }
}

json segment_json(const SegmentEstimate& s) {
    return {{"depth", s.true_depth},
            {"c2_true", s.true_params.c2_coeff},
            {"c3_true", s.true_params.c3_coeff},
            {"first_step", s.first_step},
            {"end_step", s.end_step},
            {"samples", s.samples},
            {"c2_estimate", number_or_null(s.c2_estimate)},
            {"c2_relative_error", relative_error(s.c2_estimate, s.true_params.c2_coeff)},
            {"c3_estimate", number_or_null(s.c3_estimate)},
            {"c3_relative_error", relative_error(s.c3_estimate, s.true_params.c3_coeff)},
            {"depth_estimate", number_or_null(s.depth_estimate)},
            {"depth_relative_error", relative_error(s.depth_estimate, s.true_depth)}};
}

json estimation_json(const EstimationResult& r) {
    json segments = json::array();
    for (const auto& s : r.segments) segments.push_back(segment_json(s));
    json final_estimate = nullptr;
    if (!r.final_estimate.empty())
        final_estimate = {{"c2", r.final_estimate[0]}, {"c3", r.final_estimate[1]}, {"depth", number_or_null(r.final_depth)}};
    return {{"steps", r.posterior_means.size()}, {"final", final_estimate}, {"segments", segments}};
}

json run_estimate(const ExperimentConfig& c, const fs::path& dir) {
    if (c.depth_sweep.empty()) {
        const EstimationResult r = run_estimation_experiment(setup_from(c, c.schedule));
        write_estimates(dir, r);
        return estimation_json(r);
    }
    json runs = json::array();
    for (double depth : c.depth_sweep) {
        DepthSchedule schedule = c.schedule;
        schedule.segments = {{c.schedule.segments.front().duration, depth}};
        const EstimationResult r = run_estimation_experiment(setup_from(c, schedule));
        fs::path sub;
        if (!dir.empty()) {
            sub = dir / ("D" + format_double(depth));
            fs::create_directories(sub);
        }
        write_estimates(sub, r);
        json entry = estimation_json(r);
        entry["depth"] = depth;
        runs.push_back(entry);
    }
    return {{"runs", runs}};
}

json run_detect(const ExperimentConfig& c, const fs::path& dir) {
    const EstimationResult r = run_estimation_experiment(setup_from(c, c.schedule));
    write_estimates(dir, r);

    std::vector<double> levels = c.detect.levels;
    if (levels.empty())
        for (const auto& s : c.schedule.segments) levels.push_back(s.depth_ratio);
    const std::span<const double> times(r.times.data() + r.burn_in, r.running_depth.size());
    const auto detections = detect_depth_changes(r.running_depth, times, levels, c.detect.hysteresis);

    CsvWriter csv(dir, "detections.csv", {"time", "new_depth_level"});
    json found = json::array();
    for (const auto& d : detections) {
        csv.row({format_double(d.time), format_double(d.level)});
        found.push_back({{"time", d.time}, {"level", d.level}, {"index", d.index + r.burn_in}});
    }

    // Latency of the first detection after each true change, before the next one.
    json changes = json::array();
    double t = 0.0;
    for (std::size_t s = 0; s + 1 < c.schedule.segments.size(); ++s) {
        t += c.schedule.segments[s].duration;
        const double next = t + c.schedule.segments[s + 1].duration;
        json latency = nullptr, level = nullptr;
        for (const auto& d : detections)
            if (d.time >= t && d.time < next) {
                latency = d.time - t;
                level = d.level;
                break;
            }
        changes.push_back({{"time", t},
                           {"from", c.schedule.segments[s].depth_ratio},
                           {"to", c.schedule.segments[s + 1].depth_ratio},
                           {"detected_level", level},
                           {"latency", latency}});
    }
    json out = estimation_json(r);
    out["levels"] = levels;
    out["detections"] = found;
    out["changes"] = changes;
    return out;
}

json run_toy(const ExperimentConfig& c, const fs::path& dir) {
    const ToyModelSpec& spec = c.toy.spec;
    const ToyData data = toy_truth_and_observations(spec, c.toy.steps, c.seed);
    const ToyParameterModel model(spec);
    ParticleEnsemble ensemble = init_ensemble(c.filter.prior_center.empty() ? std::vector<double>(4, 0.0)
                                                                            : c.filter.prior_center,
                                              c.filter.prior_spread, c.filter.particles, c.seed);
    const JitterSpec jitter = JitterSpec::from_std(std::vector<double>(4, spec.sigma3));
    const auto means =
        run_filter(ensemble, model, jitter, data.series.observations, {c.filter.positivity, c.filter.execution});
    const auto running = running_estimate(means, c.estimator);

    CsvWriter csv(dir, "estimates.csv",
                  {"step", "time", "a1_post_mean", "a2_post_mean", "a3_post_mean", "a4_post_mean", "a1_running",
                   "a2_running", "a3_running", "a4_running"});
    for (std::size_t n = 0; n < means.size(); ++n) {
        std::vector<std::string> cells{std::to_string(n + 1), format_double(data.series.times[n + 1])};
        for (double v : means[n]) cells.push_back(format_double(v));
        for (std::size_t j = 0; j < 4; ++j)
            cells.push_back(n >= c.estimator.burn_in ? format_double(running[n - c.estimator.burn_in][j]) : "nan");
        csv.row(cells);
    }
    json final_estimate = running.empty() ? json(nullptr) : json(running.back());
    json errors = json::array();
    if (!running.empty())
        for (std::size_t j = 0; j < 4; ++j) errors.push_back(relative_error(running.back()[j], spec.a[j]));
    return {{"steps", means.size()}, {"truth", spec.a}, {"final", final_estimate}, {"relative_errors", errors}};
}

}  // namespace

json run_experiment(const ExperimentConfig& config, const fs::path& output_dir) {
    config.validate();
    if (!output_dir.empty()) fs::create_directories(output_dir);
    const auto start = std::chrono::steady_clock::now();
    json result;
    switch (config.kind) {
        case ExperimentKind::convergence: result = run_convergence(config, output_dir); break;
        case ExperimentKind::hamiltonian: result = run_hamiltonian(config, output_dir); break;
        case ExperimentKind::heatmap: result = run_heatmap(config, output_dir); break;
        case ExperimentKind::estimate: result = run_estimate(config, output_dir); break;
        case ExperimentKind::detect: result = run_detect(config, output_dir); break;
        case ExperimentKind::toy: result = run_toy(config, output_dir); break;
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    json summary;
    summary["kind"] = to_string(config.kind);
    summary["name"] = config.name;
    summary["seed"] = config.seed;
    summary["result"] = result;
    summary["runtime_seconds"] = seconds;
    summary["config"] = to_json(config);
    write_summary(output_dir, summary);
    return summary;
}

int exit_code_for(const std::exception& error) {
    if (dynamic_cast<const ConfigParseError*>(&error)) return 2;
    if (dynamic_cast<const ConfigValidationError*>(&error)) return 3;
    if (dynamic_cast<const BlowUpError*>(&error)) return 4;
    if (dynamic_cast<const DegenerateUpdateError*>(&error)) return 5;
    if (dynamic_cast<const std::invalid_argument*>(&error) || dynamic_cast<const std::domain_error*>(&error)) return 3;
    return 1;
}

std::vector<BatchOutcome> run_batch(const std::vector<BatchJob>& batch, std::size_t jobs) {
    std::vector<BatchOutcome> outcomes(batch.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < batch.size(); i = next++) {
            try {
                run_experiment(batch[i].config, batch[i].output_dir);
            } catch (const std::exception& e) {
                outcomes[i] = {exit_code_for(e), e.what()};
            }
        }
    };
    const std::size_t workers = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(batch.size(), 1));
    if (workers == 1) {
        worker();
        return outcomes;
    }
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    return outcomes;
}

}  // namespace tkdv
