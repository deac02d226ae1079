// Acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance            run all criteria
//   acceptance 3 10 11    run a subset

#include "oracles.hpp"
#include "tkdv/config.hpp"
#include "tkdv/direct_filter.hpp"
#include "tkdv/random.hpp"
#include "tkdv/runner.hpp"
#include "tkdv/scenarios.hpp"
#include "tkdv/spectral.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace tkdv;

namespace {

const fs::path kWork = fs::current_path() / "acceptance_work";

struct Verdict {
    bool pass = false;
    std::string detail;
};

std::string fmt(double v, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return buf;
}

std::string pct(double v) { return std::isfinite(v) ? fmt(100.0 * v, 3) + "%" : "nan"; }

double num(const json& j) { return j.is_number() ? j.get<double>() : NAN; }

json run(const ExperimentConfig& c, const std::string& tag) { return run_experiment(c, kWork / tag); }

ExperimentConfig with_seed(ExperimentConfig c, std::uint64_t seed) {
    c.seed = seed;
    return c;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------- 1, 2

Verdict check_rk4_order() {
    const json s = run(preset("convergence"), "c1");
    const double slope = num(s["result"]["slope"]);
    const double secs = num(s["runtime_seconds"]);
    const json full = run(preset("convergence-full"), "c1_full");
    const double slope16 = num(full["result"]["slope"]);
    const bool pass = slope >= 3.8 && slope <= 4.2 && secs < 30.0 && slope16 >= 3.8 && slope16 <= 4.2;
    return {pass, "slope " + fmt(slope) + " (L=" + std::to_string(preset("convergence").truncation) + ", " +
                      fmt(secs, 2) + " s); L=16 convergence-full slope " + fmt(slope16)};
}

Verdict check_hamiltonian_drift() {
    const json s = run(preset("hamiltonian-drift"), "c2");
    const json& r = s["result"];
    const double dh = num(r["max_abs_hamiltonian_drift"]), de = num(r["max_abs_energy_minus_one"]);
    const double secs = num(s["runtime_seconds"]);
    const json f = run(preset("hamiltonian-drift-full"), "c2_full")["result"];
    const double dh16 = num(f["max_abs_hamiltonian_drift"]), de16 = num(f["max_abs_energy_minus_one"]);
    const bool pass = dh <= 1e-6 && de <= 1e-8 && secs < 120.0 && dh16 <= 1e-6 && de16 <= 1e-8;
    return {pass, "max|dH| " + fmt(dh) + ", max|E-1| " + fmt(de) + " (" + fmt(secs, 2) +
                      " s); L=16 dt=1e-6: max|dH| " + fmt(dh16) + ", max|E-1| " + fmt(de16)};
}

// ---------------------------------------------------------------- 3

double relative_gap(const SpectralState& a, const SpectralState& b) {
    double scale = 0.0, gap = 0.0;
    for (std::size_t k = 1; k <= a.truncation(); ++k) {
        scale = std::max(scale, std::abs(b.mode(k)));
        gap = std::max(gap, std::abs(a.mode(k) - b.mode(k)));
    }
    return gap / std::max(scale, 1e-300);
}

Verdict check_convolution_oracle() {
    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t L = kDefaultTruncation;
    double worst_loop = 0.0, worst_grid = 0.0;
    for (std::uint64_t i = 0; i < 100; ++i) {
        const SpectralState s = test::random_state(1000 + i, L);
        CounterRng rng(i, Stream::toy_observation, 77);
        const TkdvParams p{0.05 + rng.uniform(), 0.1 + 4.0 * rng.uniform()};
        const SpectralState fast = tkdv_rhs(s, p);
        worst_loop = std::max(worst_loop, relative_gap(fast, test::brute_force_rhs(s, p)));

        SpectralState grid = test::pseudo_spectral_nonlinear(s, 4 * L);
        for (std::size_t k = 1; k <= L; ++k) {
            const double kd = static_cast<double>(k);
            grid.set_mode(k, p.c3_coeff * grid.mode(k) + Complex{0.0, p.c2_coeff * kd * kd * kd} * s.mode(k));
        }
        worst_grid = std::max(worst_grid, relative_gap(fast, grid));
    }
    const double secs = seconds_since(t0);
    return {worst_loop <= 1e-10 && worst_grid <= 1e-10 && secs < 10.0,
            "100 states: loop gap " + fmt(worst_loop) + ", grid gap " + fmt(worst_grid) + " (" + fmt(secs, 2) + " s)"};
}

// ---------------------------------------------------------------- 4 - 6

double c2_error(const json& estimate) { return num(estimate["segments"][0]["c2_relative_error"]); }

Verdict check_c2_baseline() {
    int good = 0;
    std::string detail;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const json s = run(with_seed(preset("c2-baseline"), seed), "c4_seed" + std::to_string(seed));
        const double e = c2_error(s["result"]);
        good += std::abs(e) <= 0.10;
        detail += (seed > 1 ? ", " : "") + pct(e);
    }
    return {good >= 3, std::to_string(good) + "/5 seeds within 10% (" + detail + ")"};
}

Verdict check_table1() {
    const json s = run(preset("table1"), "c5");
    bool pass = true;
    std::string detail;
    for (const auto& r : s["result"]["runs"]) {
        const double depth = num(r["depth"]);
        const double e = c2_error(r);
        const double bound = depth < 0.2 ? 0.15 : 0.10;
        pass = pass && std::abs(e) <= bound;
        detail += (detail.empty() ? "" : ", ") + std::string("D=") + fmt(depth) + " " + pct(e) +
                  (std::abs(e) <= bound ? "" : " (>" + pct(bound) + ")");
    }
    return {pass, "C2 errors " + detail};
}

Verdict check_c3_longrun() {
    const json s = run(preset("c3-longrun"), "c6");
    const json& seg = s["result"]["segments"][0];
    const double e = num(seg["c3_relative_error"]);
    return {std::abs(e) <= 0.08, "C3 " + fmt(num(seg["c3_estimate"])) + " vs " + fmt(num(seg["c3_true"])) + " (" +
                                     pct(e) + ", bound 8%)"};
}

// ---------------------------------------------------------------- 7, 8

Verdict check_one_step() {
    const json s = run(preset("one-step"), "c7");
    const json& r = s["result"];
    const std::size_t detections = r["detections"].size();
    const double latency = num(r["changes"][0]["latency"]);
    bool pass = detections == 1 && latency <= 0.2;
    std::string errs;
    for (const auto& seg : r["segments"]) {
        const double e = num(seg["c2_relative_error"]);
        pass = pass && std::abs(e) <= 0.05;
        errs += (errs.empty() ? "" : ", ") + pct(e);
    }
    return {pass, std::to_string(detections) + " detection(s), latency " + fmt(latency) + ", C2 errors " + errs};
}

std::pair<bool, std::string> depth_errors(const json& r, double bound) {
    bool ok = true;
    std::string s;
    for (const auto& seg : r["segments"]) {
        const double e = num(seg["depth_relative_error"]);
        ok = ok && std::abs(e) <= bound;
        s += (s.empty() ? "" : ", ") + std::string("D=") + fmt(num(seg["depth"])) + " " + pct(e);
    }
    return {ok, s};
}

Verdict check_multi_step() {
    const json full = run(preset("multi-step"), "c8_full");
    const auto [full_ok, full_detail] = depth_errors(full["result"], 0.10);
    const json fast = run(preset("multi-step", true), "c8_fast");
    const auto [fast_ok, fast_detail] = depth_errors(fast["result"], 0.15);
    const double fast_secs = num(fast["runtime_seconds"]);
    return {full_ok && fast_ok && fast_secs < 300.0,
            "full (<=10%): " + full_detail + " [" + fmt(num(full["runtime_seconds"]), 3) + " s]; fast (<=15%): " +
                fast_detail + " [" + fmt(fast_secs, 3) + " s]"};
}

// ---------------------------------------------------------------- 9

Verdict check_toy() {
    int good = 0;
    double slowest = 0.0;
    std::string detail;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const json s = run(with_seed(preset("toy-appendix"), seed), "c9_seed" + std::to_string(seed));
        double worst = 0.0;
        for (const auto& e : s["result"]["relative_errors"]) worst = std::max(worst, std::abs(num(e)));
        if (s["result"]["relative_errors"].size() != 4) worst = NAN;
        good += worst <= 0.10;
        slowest = std::max(slowest, num(s["runtime_seconds"]));
        detail += (seed > 1 ? ", " : "") + pct(worst);
    }
    return {good >= 3 && slowest < 10.0,
            std::to_string(good) + "/5 seeds within 10% (worst per seed " + detail + "; slowest " + fmt(slowest, 2) +
                " s)"};
}

// ---------------------------------------------------------------- 10

SpectralState rk4_oracle(const SpectralState& u, const TkdvParams& p, double dt) {
    auto axpy = [](const SpectralState& a, double h, const SpectralState& b) {
        SpectralState out(a.truncation());
        for (std::size_t k = 1; k <= a.truncation(); ++k) out.set_mode(k, a.mode(k) + h * b.mode(k));
        return out;
    };
    const SpectralState k1 = test::brute_force_rhs(u, p);
    const SpectralState k2 = test::brute_force_rhs(axpy(u, dt / 2, k1), p);
    const SpectralState k3 = test::brute_force_rhs(axpy(u, dt / 2, k2), p);
    const SpectralState k4 = test::brute_force_rhs(axpy(u, dt, k3), p);
    SpectralState out(u.truncation());
    for (std::size_t k = 1; k <= u.truncation(); ++k)
        out.set_mode(k, u.mode(k) + dt / 6 * (k1.mode(k) + 2.0 * k2.mode(k) + 2.0 * k3.mode(k) + k4.mode(k)));
    return out;
}

struct GridBayes {
    double gap = 0.0;
    double spread_ratio = 0.0;  // posterior sd / prior sd, to show the likelihood is informative
};

// Zero jitter on a C2 grid: one filter step must equal prior x likelihood.
GridBayes grid_bayes() {
    const double dt = 5e-3, obs_std = 0.01, state_std = 1e-3;
    const std::size_t L = kDefaultTruncation;
    const TkdvParams truth = coefficients_from_depth(0.24, {});
    const SpectralState x0 = random_initial_state(5, L);
    const SpectralState x1 = rk4_oracle(x0, truth, dt);
    std::vector<double> y0 = embed(x0), y1 = embed(x1);
    CounterRng noise(5, Stream::observation_noise, 0);
    for (auto& v : y0) v += obs_std * noise.normal();
    for (auto& v : y1) v += obs_std * noise.normal();

    std::vector<double> grid, prior;
    const double prior_sd = 0.03;
    for (int i = 0; i <= 80; ++i) {
        grid.push_back(-0.05 + 0.0015 * i);
        prior.push_back(std::exp(-0.5 * std::pow((grid.back() - 0.0236) / prior_sd, 2)));
    }
    double prior_total = 0.0;
    for (double p : prior) prior_total += p;

    const double variance = obs_std * obs_std + state_std * state_std;
    std::vector<double> log_post(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const std::vector<double> pred = embed(rk4_oracle(unembed(y0), {grid[i], truth.c3_coeff}, dt));
        double chi2 = 0.0;
        for (std::size_t j = 0; j < pred.size(); ++j) chi2 += std::pow(pred[j] - y1[j], 2);
        log_post[i] = std::log(prior[i] / prior_total) - 0.5 * chi2 / variance;
    }
    const double top = *std::max_element(log_post.begin(), log_post.end());
    std::vector<double> bayes(grid.size());
    double evidence = 0.0, bayes_mean = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) evidence += bayes[i] = std::exp(log_post[i] - top);
    for (std::size_t i = 0; i < grid.size(); ++i) bayes_mean += (bayes[i] /= evidence) * grid[i];
    double bayes_var = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) bayes_var += bayes[i] * std::pow(grid[i] - bayes_mean, 2);

    ParticleEnsemble e;
    e.dim = 2;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        e.particles.insert(e.particles.end(), {grid[i], truth.c3_coeff});
        e.weights.push_back(prior[i] / prior_total);
    }
    e.rng = {11, 0};
    const auto model = tkdv_parameter_model(LinearObservation::identity(2 * L), obs_std, state_std, dt);
    double gap = 0.0;
    for (const auto exec : {Execution::serial, Execution::parallel}) {
        const ParticleEnsemble updated = update(e, model, y0, y1, exec);
        for (std::size_t i = 0; i < grid.size(); ++i) gap = std::max(gap, std::abs(updated.weights[i] - bayes[i]));
        const auto step = assimilation_step(e, model, JitterSpec{{0.0, 0.0}}, y0, y1,
                                            FilterOptions{PositivityRule::none, exec});
        gap = std::max(gap, std::abs(step.posterior_mean[0] - bayes_mean));
    }
    return {gap, std::sqrt(bayes_var) / prior_sd};
}

// Largest |mean copy count - M w| in standard errors, over the full resample path.
double resampling_z() {
    const std::size_t m = 40;
    CounterRng rng(3, Stream::toy_observation, 5);
    ParticleEnsemble e;
    e.dim = 1;
    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        e.particles.push_back(static_cast<double>(i));
        e.weights.push_back(std::pow(rng.uniform(), 3));
        total += e.weights.back();
    }
    for (auto& w : e.weights) w /= total;

    const int trials = 20000;
    std::vector<double> sum(m, 0.0), sumsq(m, 0.0);
    for (int t = 0; t < trials; ++t) {
        std::vector<double> count(m, 0.0);
        for (double idx : resample(e, 100 + static_cast<std::uint64_t>(t)).particles)
            count[static_cast<std::size_t>(idx)] += 1.0;
        for (std::size_t i = 0; i < m; ++i) {
            sum[i] += count[i];
            sumsq[i] += count[i] * count[i];
        }
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const double mean = sum[i] / trials;
        const double var = std::max(sumsq[i] / trials - mean * mean, 1e-12);
        worst = std::max(worst, std::abs(mean - static_cast<double>(m) * e.weights[i]) / std::sqrt(var / trials));
    }
    return worst;
}

double log_naive_gap() {
    CounterRng rng(21, Stream::toy_observation, 9);
    double gap = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> w(100), ll(100), naive(100);
        double wt = 0.0, total = 0.0;
        for (auto& x : w) wt += x = rng.uniform();
        for (auto& x : w) x /= wt;
        for (auto& x : ll) x = -20.0 * rng.uniform();
        for (std::size_t i = 0; i < w.size(); ++i) total += naive[i] = w[i] * std::exp(ll[i]);
        const auto lw = reweight(w, ll);
        for (std::size_t i = 0; i < w.size(); ++i) gap = std::max(gap, std::abs(lw[i] - naive[i] / total));
    }
    return gap;
}

Verdict check_micro_oracles() {
    const GridBayes bayes = grid_bayes();
    const double z = resampling_z();
    const double weights = log_naive_gap();
    // 40 counts at 5 sigma: false alarm odds ~ 2e-5
    return {bayes.gap <= 1e-10 && z <= 5.0 && weights <= 1e-10,
            "grid Bayes gap " + fmt(bayes.gap) + " (posterior/prior sd " + fmt(bayes.spread_ratio, 2) + ")" + ", resampling max |z| " + fmt(z, 3) + ", log/naive gap " + fmt(weights)};
}

// ---------------------------------------------------------------- 11

std::string quote(const std::string& s) {
    std::string out = "'";
    for (char c : s) out += c == '\'' ? std::string("'\\''") : std::string(1, c);
    return out + "'";
}

int shell(const std::string& cmd) {
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// Shrinks each preset so it runs in seconds; structure (segments, kinds, outputs) is kept.
std::vector<std::string> shrink(const std::string& name) {
    const std::string m = "filter.particles=100";
    if (name == "c2-baseline" || name == "c3-longrun")
        return {m, R"(schedule.segments=[{"duration":0.05,"depth":0.24}])", "estimator.burn_in=100"};
    if (name == "table1") return {m, R"(schedule.segments=[{"duration":0.02,"depth":1}])", "estimator.burn_in=50"};
    if (name == "one-step")
        return {m, R"(schedule.segments=[{"duration":0.05,"depth":0.42},{"duration":0.05,"depth":0.24}])",
                "estimator.window=100", "detect.hysteresis=10"};
    if (name == "multi-step" || name == "multi-step-fast")
        return {m,
                R"(schedule.segments=[{"duration":0.05,"depth":1},{"duration":0.05,"depth":0.24},)"
                R"({"duration":0.05,"depth":0.15},{"duration":0.05,"depth":0.42}])",
                "estimator.window=20", "detect.hysteresis=5"};
    if (name == "hamiltonian-drift-full") return {"solver.t_final=0.2"};
    if (name == "heatmap-sweep")
        return {R"(coefficients.segments=[{"duration":0.01,"c2":4,"c3":0},{"duration":0.01,"c2":3,"c3":1},)"
                R"({"duration":0.01,"c2":2,"c3":8},{"duration":0.01,"c2":3,"c3":18}])",
                "field.sample_every=50"};
    return {};
}

std::map<fs::path, std::string> csv_files(const fs::path& dir) {
    std::map<fs::path, std::string> out;
    if (!fs::exists(dir)) return out;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (!e.is_regular_file() || e.path().extension() != ".csv") continue;
        std::ifstream in(e.path(), std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        out[fs::relative(e.path(), dir)] = ss.str();
    }
    return out;
}

Verdict check_determinism() {
    const std::string tool = TKDV_ASSIM_PATH;
    const fs::path root = kWork / "c11";
    fs::remove_all(root);
    fs::create_directories(root);

    std::vector<std::string> names = preset_names();
    std::vector<std::string> failures, configs;
    std::size_t files = 0;
    for (const auto& name : names) {
        std::string sets;
        for (const auto& s : shrink(name)) sets += " --set " + quote(s);
        for (const char* run : {"a", "b"}) {
            const fs::path out = root / name / run;
            const std::string cmd = quote(tool) + " preset " + name + sets + " --out " + quote(out.string()) + " >" +
                                    quote((root / (name + "_" + run + ".log")).string()) + " 2>&1";
            if (shell(cmd) != 0) failures.push_back(name + " run " + run + " exited nonzero");
        }
        const fs::path cfg = root / (name + ".json");
        const std::string dump = quote(tool) + " preset " + name + sets + " --out " +
                                 quote((root / name / "batch").string()) + " --dump >" + quote(cfg.string());
        if (shell(dump) != 0) failures.push_back(name + " --dump exited nonzero");
        configs.push_back(cfg.string());
    }
    std::string batch = quote(tool) + " run";
    for (const auto& c : configs) batch += " " + quote(c);
    batch += " --jobs 4 >" + quote((root / "batch.log").string()) + " 2>&1";
    if (shell(batch) != 0) failures.push_back("batch run exited nonzero");

    for (const auto& name : names) {
        const auto a = csv_files(root / name / "a");
        if (a.empty()) failures.push_back(name + " wrote no CSV");
        for (const char* other : {"b", "batch"}) {
            const auto b = csv_files(root / name / other);
            if (a != b) failures.push_back(name + " differs in " + other);
        }
        files += a.size();
    }
    std::string detail = std::to_string(names.size()) + " presets, " + std::to_string(files) +
                         " CSV files compared across 2 serial runs and a --jobs 4 batch";
    for (const auto& f : failures) detail += "; " + f;
    return {failures.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
        {"RK4 order", check_rk4_order},
        {"Hamiltonian drift", check_hamiltonian_drift},
        {"convolution oracle", check_convolution_oracle},
        {"C2 baseline", check_c2_baseline},
        {"depth sweep", check_table1},
        {"C3 long run", check_c3_longrun},
        {"one-step detection", check_one_step},
        {"multi-step detection", check_multi_step},
        {"toy model", check_toy},
        {"filter micro-oracles", check_micro_oracles},
        {"determinism", check_determinism},
    };
    std::set<int> selected;
    for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

    fs::create_directories(kWork);
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!selected.empty() && !selected.count(id)) continue;
        Verdict v;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            v = criteria[i].second();
        } catch (const std::exception& e) {
            v = {false, std::string("threw: ") + e.what()};
        }
        failed += !v.pass;
        std::cout << (v.pass ? "PASS" : "FAIL") << "  criterion " << id << " (" << criteria[i].first << "): " << v.detail
                  << "  [" << fmt(seconds_since(t0), 3) << " s]" << std::endl;
    }
    std::cout << (failed ? std::to_string(failed) + " criteria failed" : std::string("all criteria passed"))
              << std::endl;
    return failed ? 1 : 0;
}
