#include "tkdv/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace tkdv {

using json = nlohmann::ordered_json;

std::string to_string(ExperimentKind kind) {
    switch (kind) {
        case ExperimentKind::convergence: return "convergence";
        case ExperimentKind::hamiltonian: return "hamiltonian";
        case ExperimentKind::heatmap: return "heatmap";
        case ExperimentKind::estimate: return "estimate";
        case ExperimentKind::detect: return "detect";
        case ExperimentKind::toy: return "toy";
    }
    return "unknown";
}

namespace {

ExperimentKind kind_from_string(const std::string& s) {
    for (auto k : {ExperimentKind::convergence, ExperimentKind::hamiltonian, ExperimentKind::heatmap,
                   ExperimentKind::estimate, ExperimentKind::detect, ExperimentKind::toy})
        if (to_string(k) == s) return k;
    throw ConfigParseError("unknown experiment kind '" + s + "'");
}

// Reads one JSON object, remembering which keys were used so leftovers can be
// reported as unknown.
class Section {
public:
    Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigParseError(where() + " must be an object");
    }

    bool has(const std::string& key) const { return j_.contains(key); }

    template <class T>
    void get(const std::string& key, T& out) {
        if (!j_.contains(key)) return;
        used_.insert(key);
        read(j_.at(key), key, out);
    }

    Section child(const std::string& key) {
        used_.insert(key);
        static const json empty = json::object();
        return j_.contains(key) ? Section(j_.at(key), name(key)) : Section(empty, name(key));
    }

    const json& raw(const std::string& key) {
        used_.insert(key);
        return j_.at(key);
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!used_.count(it.key())) throw ConfigParseError("unknown key '" + name(it.key()) + "'");
    }

    std::string name(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

private:
    std::string where() const { return path_.empty() ? "config" : "'" + path_ + "'"; }

    void read(const json& v, const std::string& key, double& out) const {
        if (!v.is_number()) throw ConfigParseError("'" + name(key) + "' must be a number");
        out = v.get<double>();
    }
    void read(const json& v, const std::string& key, std::uint64_t& out) const {
        if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0))
            throw ConfigParseError("'" + name(key) + "' must be a nonnegative integer");
        out = v.get<std::uint64_t>();
    }
    void read(const json& v, const std::string& key, std::string& out) const {
        if (!v.is_string()) throw ConfigParseError("'" + name(key) + "' must be a string");
        out = v.get<std::string>();
    }
    void read(const json& v, const std::string& key, std::vector<double>& out) const {
        if (!v.is_array()) throw ConfigParseError("'" + name(key) + "' must be an array of numbers");
        out.clear();
        for (const auto& e : v) {
            if (!e.is_number()) throw ConfigParseError("'" + name(key) + "' must be an array of numbers");
            out.push_back(e.get<double>());
        }
    }
    template <std::size_t N>
    void read(const json& v, const std::string& key, std::array<double, N>& out) const {
        std::vector<double> tmp;
        read(v, key, tmp);
        if (tmp.size() != N)
            throw ConfigParseError("'" + name(key) + "' must have " + std::to_string(N) + " entries");
        std::copy(tmp.begin(), tmp.end(), out.begin());
    }

    const json& j_;
    std::string path_;
    std::set<std::string> used_;
};

void get_size(Section& s, const std::string& key, std::size_t& out) {
    std::uint64_t v = out;
    s.get(key, v);
    out = static_cast<std::size_t>(v);
}

[[noreturn]] void invalid(const std::string& what) { throw ConfigValidationError(what); }

void require_positive(double v, const std::string& what) {
    if (!(v > 0.0) || !std::isfinite(v)) invalid(what + " must be positive and finite");
}

void require_nonnegative(std::span<const double> v, const std::string& what) {
    for (double x : v)
        if (!(x >= 0.0) || !std::isfinite(x)) invalid(what + " must be nonnegative and finite");
}

void require_finite(std::span<const double> v, const std::string& what) {
    for (double x : v)
        if (!std::isfinite(x)) invalid(what + " must be finite");
}

std::size_t total_steps(const DepthSchedule& schedule, double dt) {
    std::size_t steps = 0;
    for (const auto& s : schedule.segments) steps += IntegratorConfig{dt, s.duration}.step_count();
    return steps;
}

void validate_filter(const ExperimentConfig& c, std::size_t dim) {
    const auto& f = c.filter;
    if (f.particles < 2) invalid("filter.particles must be at least 2");
    if (!f.prior_center.empty() && f.prior_center.size() != dim)
        invalid("filter.prior_center must be empty or have " + std::to_string(dim) + " entries");
    require_finite(f.prior_center, "filter.prior_center");
    if (f.prior_spread.size() != dim) invalid("filter.prior_spread must have " + std::to_string(dim) + " entries");
    require_nonnegative(f.prior_spread, "filter.prior_spread");
    if (c.estimator.window && *c.estimator.window == 0) invalid("estimator.window must be positive");
}

}  // namespace

void ExperimentConfig::validate() const {
    if (output.empty()) invalid("output must be a nonempty path");
    if (truncation == 0) invalid("truncation must be at least 1");
    require_positive(dt, "dt");

    switch (kind) {
        case ExperimentKind::convergence: {
            require_positive(solver.t_final, "solver.t_final");
            if (solver.dt_list.empty()) invalid("solver.dt_list must not be empty");
            for (double v : solver.dt_list) require_positive(v, "solver.dt_list entries");
            require_positive(solver.dt_reference, "solver.dt_reference");
            if (solver.dt_reference >= *std::min_element(solver.dt_list.begin(), solver.dt_list.end()) / 10.0)
                invalid("solver.dt_reference must be below a tenth of the smallest entry of solver.dt_list");
            require_finite(std::vector<double>{solver.c2, solver.c3}, "solver coefficients");
            break;
        }
        case ExperimentKind::hamiltonian: {
            require_positive(solver.t_final, "solver.t_final");
            require_positive(solver.report_every, "solver.report_every");
            if (solver.sample_every == 0) invalid("solver.sample_every must be positive");
            require_finite(std::vector<double>{solver.c2, solver.c3}, "solver coefficients");
            break;
        }
        case ExperimentKind::heatmap: {
            try {
                if (coefficients.segments.empty())
                    schedule.validate();
                else
                    coefficients.validate();
            } catch (const std::invalid_argument& e) {
                invalid(e.what());
            }
            if (field.n_grid < 2 * truncation + 1) invalid("field.n_grid must be at least 2 truncation + 1");
            if (field.sample_every == 0) invalid("field.sample_every must be positive");
            break;
        }
        case ExperimentKind::estimate:
        case ExperimentKind::detect: {
            try {
                schedule.validate();
            } catch (const std::invalid_argument& e) {
                invalid(e.what());
            }
            if (!coefficients.segments.empty()) invalid("coefficients are only used by heatmap runs");
            if (!depth_sweep.empty()) {
                if (kind != ExperimentKind::estimate) invalid("depth_sweep is only used by estimate runs");
                if (schedule.segments.size() != 1) invalid("depth_sweep needs a single-segment schedule");
                for (double d : depth_sweep) require_positive(d, "depth_sweep entries");
            }
            if (filter.jitter_std.size() != 2) invalid("filter.jitter_std must have 2 entries");
            require_nonnegative(filter.jitter_std, "filter.jitter_std");
            validate_filter(*this, 2);
            require_positive(noise.obs_std, "noise.obs_std");
            require_nonnegative(std::vector<double>{noise.state_std}, "noise.state_std");
            if (!noise.obs_diagonal.empty()) {
                if (noise.obs_diagonal.size() != 2 * truncation)
                    invalid("noise.obs_diagonal must be empty or have 2 truncation entries");
                for (double h : noise.obs_diagonal)
                    if (h == 0.0 || !std::isfinite(h)) invalid("noise.obs_diagonal entries must be nonzero");
            }
            if (estimator.burn_in >= total_steps(schedule, dt)) invalid("estimator.burn_in must be below the step count");
            if (kind == ExperimentKind::detect) {
                for (double l : detect.levels) require_positive(l, "detect.levels entries");
                if (detect.hysteresis == 0) invalid("detect.hysteresis must be positive");
            }
            break;
        }
        case ExperimentKind::toy: {
            try {
                toy.spec.validate();
            } catch (const std::invalid_argument& e) {
                invalid(e.what());
            }
            if (toy.steps == 0) invalid("toy.steps must be positive");
            validate_filter(*this, 4);
            if (estimator.burn_in >= toy.steps) invalid("estimator.burn_in must be below toy.steps");
            break;
        }
    }
}

json to_json(const ExperimentConfig& c) {
    json j;
    j["kind"] = to_string(c.kind);
    j["name"] = c.name;
    j["seed"] = c.seed;
    j["output"] = c.output;
    j["model"] = {{"truncation", c.truncation}, {"dt", c.dt}};
    j["solver"] = {{"c2", c.solver.c2},
                   {"c3", c.solver.c3},
                   {"t_final", c.solver.t_final},
                   {"dt_list", c.solver.dt_list},
                   {"dt_reference", c.solver.dt_reference},
                   {"report_every", c.solver.report_every},
                   {"sample_every", c.solver.sample_every}};
    json segs = json::array();
    for (const auto& s : c.schedule.segments) segs.push_back({{"duration", s.duration}, {"depth", s.depth_ratio}});
    j["schedule"] = {{"segments", segs},
                     {"c2_base", c.schedule.constants.c2_base},
                     {"c3_base", c.schedule.constants.c3_base}};
    json coeffs = json::array();
    for (const auto& s : c.coefficients.segments)
        coeffs.push_back({{"duration", s.duration}, {"c2", s.params.c2_coeff}, {"c3", s.params.c3_coeff}});
    j["coefficients"] = {{"segments", coeffs}};
    j["depth_sweep"] = c.depth_sweep;
    j["noise"] = {{"state_std", c.noise.state_std}, {"obs_std", c.noise.obs_std}, {"obs_diagonal", c.noise.obs_diagonal}};
    j["filter"] = {{"particles", c.filter.particles},
                   {"jitter_std", c.filter.jitter_std},
                   {"prior_center", c.filter.prior_center},
                   {"prior_spread", c.filter.prior_spread},
                   {"positivity", c.filter.positivity == PositivityRule::reflect ? "reflect" : "none"},
                   {"execution", c.filter.execution == Execution::parallel ? "parallel" : "serial"}};
    j["estimator"] = {{"burn_in", c.estimator.burn_in},
                      {"window", c.estimator.window ? json(*c.estimator.window) : json(nullptr)}};
    j["detect"] = {{"levels", c.detect.levels}, {"hysteresis", c.detect.hysteresis}};
    j["field"] = {{"n_grid", c.field.n_grid}, {"sample_every", c.field.sample_every}};
    const auto& t = c.toy.spec;
    j["toy"] = {{"a", t.a},         {"sigma", t.sigma},     {"dt", t.dt},           {"h_diagonal", t.h_diagonal},
                {"sigma_y", t.sigma_y}, {"sigma3", t.sigma3}, {"x0", t.x0},          {"steps", c.toy.steps}};
    return j;
}

ExperimentConfig config_from_json(const json& j) {
    ExperimentConfig c;
    Section root(j, "");
    std::string kind = to_string(c.kind);
    root.get("kind", kind);
    c.kind = kind_from_string(kind);
    root.get("name", c.name);
    root.get("seed", c.seed);
    root.get("output", c.output);

    {
        auto s = root.child("model");
        get_size(s, "truncation", c.truncation);
        s.get("dt", c.dt);
        s.finish();
    }
    {
        auto s = root.child("solver");
        s.get("c2", c.solver.c2);
        s.get("c3", c.solver.c3);
        s.get("t_final", c.solver.t_final);
        s.get("dt_list", c.solver.dt_list);
        s.get("dt_reference", c.solver.dt_reference);
        s.get("report_every", c.solver.report_every);
        get_size(s, "sample_every", c.solver.sample_every);
        s.finish();
    }
    {
        auto s = root.child("schedule");
        if (s.has("segments")) {
            const json& arr = s.raw("segments");
            if (!arr.is_array()) throw ConfigParseError("'schedule.segments' must be an array");
            for (std::size_t i = 0; i < arr.size(); ++i) {
                Section seg(arr[i], "schedule.segments[" + std::to_string(i) + "]");
                DepthSegment d;
                seg.get("duration", d.duration);
                seg.get("depth", d.depth_ratio);
                seg.finish();
                c.schedule.segments.push_back(d);
            }
        }
        s.get("c2_base", c.schedule.constants.c2_base);
        s.get("c3_base", c.schedule.constants.c3_base);
        s.finish();
    }
    {
        auto s = root.child("coefficients");
        if (s.has("segments")) {
            const json& arr = s.raw("segments");
            if (!arr.is_array()) throw ConfigParseError("'coefficients.segments' must be an array");
            for (std::size_t i = 0; i < arr.size(); ++i) {
                Section seg(arr[i], "coefficients.segments[" + std::to_string(i) + "]");
                CoefficientSegment d;
                seg.get("duration", d.duration);
                seg.get("c2", d.params.c2_coeff);
                seg.get("c3", d.params.c3_coeff);
                seg.finish();
                c.coefficients.segments.push_back(d);
            }
        }
        s.finish();
    }
    root.get("depth_sweep", c.depth_sweep);
    {
        auto s = root.child("noise");
        s.get("state_std", c.noise.state_std);
        s.get("obs_std", c.noise.obs_std);
        s.get("obs_diagonal", c.noise.obs_diagonal);
        s.finish();
    }
    {
        auto s = root.child("filter");
        get_size(s, "particles", c.filter.particles);
        s.get("jitter_std", c.filter.jitter_std);
        s.get("prior_center", c.filter.prior_center);
        s.get("prior_spread", c.filter.prior_spread);
        std::string positivity = c.filter.positivity == PositivityRule::reflect ? "reflect" : "none";
        s.get("positivity", positivity);
        if (positivity == "reflect")
            c.filter.positivity = PositivityRule::reflect;
        else if (positivity == "none")
            c.filter.positivity = PositivityRule::none;
        else
            throw ConfigParseError("'filter.positivity' must be \"none\" or \"reflect\"");
        std::string execution = c.filter.execution == Execution::parallel ? "parallel" : "serial";
        s.get("execution", execution);
        if (execution == "parallel")
            c.filter.execution = Execution::parallel;
        else if (execution == "serial")
            c.filter.execution = Execution::serial;
        else
            throw ConfigParseError("'filter.execution' must be \"serial\" or \"parallel\"");
        s.finish();
    }
    {
        auto s = root.child("estimator");
        get_size(s, "burn_in", c.estimator.burn_in);
        if (s.has("window")) {
            const json& w = s.raw("window");
            if (w.is_null())
                c.estimator.window.reset();
            else if (w.is_number_integer() && (w.is_number_unsigned() || w.get<std::int64_t>() >= 0))
                c.estimator.window = w.get<std::size_t>();
            else
                throw ConfigParseError("'estimator.window' must be null or a nonnegative integer");
        }
        s.finish();
    }
    {
        auto s = root.child("detect");
        s.get("levels", c.detect.levels);
        get_size(s, "hysteresis", c.detect.hysteresis);
        s.finish();
    }
    {
        auto s = root.child("field");
        get_size(s, "n_grid", c.field.n_grid);
        get_size(s, "sample_every", c.field.sample_every);
        s.finish();
    }
    {
        auto s = root.child("toy");
        auto& t = c.toy.spec;
        s.get("a", t.a);
        s.get("sigma", t.sigma);
        s.get("dt", t.dt);
        s.get("h_diagonal", t.h_diagonal);
        s.get("sigma_y", t.sigma_y);
        s.get("sigma3", t.sigma3);
        s.get("x0", t.x0);
        get_size(s, "steps", c.toy.steps);
        s.finish();
    }
    root.finish();
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigParseError("cannot read config file '" + path.string() + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigParseError("'" + path.string() + "': " + e.what());
    }
    return config_from_json(j);
}

void apply_override(json& j, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
        throw ConfigParseError("override '" + assignment + "' is not of the form key=value");
    const std::string key = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    json value;
    try {
        value = json::parse(text);
    } catch (const json::parse_error&) {
        value = text;
    }
    json* node = &j;
    std::stringstream path(key);
    std::string part;
    std::vector<std::string> parts;
    while (std::getline(path, part, '.')) parts.push_back(part);
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (!node->is_object() || !node->contains(parts[i]))
            throw ConfigParseError("unknown key '" + key + "' in override");
        node = &(*node)[parts[i]];
    }
    *node = value;
}

namespace {

ExperimentConfig estimation_base(const std::string& name) {
    ExperimentConfig c;
    c.kind = ExperimentKind::estimate;
    c.name = name;
    c.output = "out/" + name;
    c.dt = 1e-4;
    c.filter.particles = 2000;
    c.filter.jitter_std = {0.3, 0.017};
    c.filter.prior_spread = {0.1, 0.5};
    c.noise = {1e-3, 0.01, {}};
    return c;
}

ExperimentConfig make_preset(const std::string& name, bool fast) {
    if (name == "convergence" || name == "convergence-full") {
        ExperimentConfig c;
        c.kind = ExperimentKind::convergence;
        c.name = name;
        c.output = "out/" + name;
        c.solver.c2 = 1.0;
        c.solver.c3 = 1.0;
        c.solver.t_final = 1.0;
        if (name == "convergence") {
            // Unit coefficients put the stiffest mode at C2 L^3; L = 4 keeps the
            // ladder inside the RK4 stability region.
            c.truncation = 4;
            c.solver.dt_list = {1e-2, 5e-3, 2.5e-3, 1.25e-3};
            c.solver.dt_reference = 1e-5;
        } else {
            c.truncation = 16;
            c.solver.dt_list = {1e-4, 5e-5, 2.5e-5, 1.25e-5};
            c.solver.dt_reference = 1e-6;
        }
        return c;
    }
    if (name == "hamiltonian-drift" || name == "hamiltonian-drift-full") {
        ExperimentConfig c;
        c.kind = ExperimentKind::hamiltonian;
        c.name = name;
        c.output = "out/" + name;
        c.solver.c2 = 1.0;
        c.solver.c3 = 1.0;
        c.solver.t_final = 5.0;
        c.solver.report_every = 0.01;
        if (name == "hamiltonian-drift") {
            c.truncation = 4;
            c.dt = 1e-4;
            c.solver.sample_every = 1;
        } else {
            c.truncation = 16;
            c.dt = 1e-6;
            c.solver.sample_every = 100;
        }
        return c;
    }
    if (name == "heatmap-sweep") {
        ExperimentConfig c;
        c.kind = ExperimentKind::heatmap;
        c.name = name;
        c.output = "out/" + name;
        c.dt = 1e-5;
        c.coefficients.segments = {{0.5, {4.0, 0.0}}, {0.5, {3.0, 1.0}}, {0.5, {2.0, 8.0}}, {0.5, {3.0, 18.0}}};
        c.field = {128, 500};
        return c;
    }
    if (name == "heatmap-steps") {
        ExperimentConfig c;
        c.kind = ExperimentKind::heatmap;
        c.name = name;
        c.output = "out/" + name;
        c.dt = 1e-4;
        c.schedule.segments = {{1.2, 1.0}, {1.2, 0.24}, {1.2, 0.14}, {1.2, 0.42}};
        c.field = {128, 100};
        return c;
    }
    if (name == "c2-baseline") {
        auto c = estimation_base(name);
        c.schedule.segments = {{0.25, 0.24}};
        c.estimator = {400, std::nullopt};
        return c;
    }
    if (name == "c3-longrun") {
        auto c = estimation_base(name);
        c.schedule.segments = {{0.4, 0.24}};
        c.filter.jitter_std = {0.3, 0.8};
        c.estimator = {1000, std::nullopt};
        return c;
    }
    if (name == "table1") {
        auto c = estimation_base(name);
        c.schedule.segments = {{0.25, 1.0}};
        c.depth_sweep = {1.0, 0.42, 0.24, 0.14};
        c.estimator = {400, std::nullopt};
        return c;
    }
    if (name == "one-step") {
        auto c = estimation_base(name);
        c.kind = ExperimentKind::detect;
        c.schedule.segments = {{1.2, 0.42}, {1.2, 0.24}};
        c.estimator = {0, 3500};
        c.detect.hysteresis = 100;
        return c;
    }
    if (name == "multi-step") {
        auto c = estimation_base(name);
        c.kind = ExperimentKind::detect;
        c.schedule.segments = {{1.2, 1.0}, {1.2, 0.24}, {1.2, 0.15}, {1.2, 0.42}};
        c.filter.jitter_std = {0.25, 0.01};
        c.detect.hysteresis = 100;
        c.estimator = {0, 3500};
        if (fast) {
            c.name = "multi-step-fast";
            c.output = "out/multi-step-fast";
            c.dt = 5e-4;
            c.estimator = {0, 700};
            c.detect.hysteresis = 20;
        }
        return c;
    }
    if (name == "toy-appendix") {
        ExperimentConfig c;
        c.kind = ExperimentKind::toy;
        c.name = name;
        c.output = "out/" + name;
        c.toy.steps = 400;
        c.filter.particles = 1000;
        c.filter.prior_center = {0.0, 0.0, 0.0, 0.0};
        c.filter.prior_spread = {5.0, 5.0, 5.0, 5.0};
        c.filter.jitter_std.clear();
        c.estimator = {100, std::nullopt};
        return c;
    }
    throw std::out_of_range(name);
}

}  // namespace

std::vector<std::string> preset_names() {
    return {"c2-baseline",     "c3-longrun",        "table1",
            "one-step",        "multi-step",        "multi-step-fast",
            "toy-appendix",    "heatmap-sweep",     "heatmap-steps",
            "convergence",     "convergence-full",  "hamiltonian-drift",
            "hamiltonian-drift-full"};
}

ExperimentConfig preset(const std::string& name, bool fast) {
    try {
        if (name == "multi-step-fast") return make_preset("multi-step", true);
        if (fast && name != "multi-step") throw ConfigValidationError("preset '" + name + "' has no fast variant");
        return make_preset(name, fast);
    } catch (const std::out_of_range&) {
        std::string known;
        for (const auto& n : preset_names()) known += (known.empty() ? "" : ", ") + n;
        throw ConfigValidationError("unknown preset '" + name + "'; available: " + known);
    }
}

}  // namespace tkdv
