#include "tkdv/config.hpp"
#include "tkdv/runner.hpp"

#include "CLI11.hpp"

#include <cstdlib>
#include <iostream>
#include <optional>

namespace {

using tkdv::ExperimentConfig;

// Batch width: --jobs when given, else TKDV_ASSIM_THREADS, else 1. The variable
// also caps an explicit --jobs.
std::size_t batch_width(std::optional<std::size_t> requested) {
    std::optional<std::size_t> cap;
    if (const char* env = std::getenv("TKDV_ASSIM_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v > 0) cap = static_cast<std::size_t>(v);
    }
    std::size_t width = requested.value_or(cap.value_or(1));
    if (cap) width = std::min(width, *cap);
    return std::max<std::size_t>(width, 1);
}

int report(const std::exception& e) {
    const int code = tkdv::exit_code_for(e);
    std::cerr << "tkdv-assim: " << e.what() << "\n";
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Direct particle filter experiments on the truncated KdV model"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "Run one or more config files");
    std::vector<std::string> config_paths;
    std::optional<std::size_t> jobs;
    run->add_option("configs", config_paths, "Config files (JSON)")->required();
    run->add_option("--jobs", jobs, "Run configs concurrently on N workers")->check(CLI::PositiveNumber);

    auto* pre = app.add_subcommand("preset", "Run a named preset");
    std::string preset_name;
    std::vector<std::string> overrides;
    std::string out_dir;
    bool fast = false, dump = false;
    pre->add_option("name", preset_name, "Preset name (see list-presets)")->required();
    pre->add_option("--set", overrides, "Override a config key, e.g. --set filter.particles=500");
    pre->add_option("--out", out_dir, "Output directory (default: the preset's output key)");
    pre->add_flag("--fast", fast, "Use the reduced-cost variant where one exists");
    pre->add_flag("--dump", dump, "Print the resolved config instead of running it");

    auto* list = app.add_subcommand("list-presets", "List preset names");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    if (list->parsed()) {
        for (const auto& n : tkdv::preset_names()) std::cout << n << "\n";
        return 0;
    }

    if (pre->parsed()) {
        ExperimentConfig config;
        try {
            config = tkdv::preset(preset_name, fast);
            if (!overrides.empty() || !out_dir.empty()) {
                auto json = tkdv::to_json(config);
                for (const auto& o : overrides) tkdv::apply_override(json, o);
                if (!out_dir.empty()) json["output"] = out_dir;
                config = tkdv::config_from_json(json);
            }
            config.validate();
        } catch (const std::exception& e) {
            return report(e);
        }
        if (dump) {
            std::cout << tkdv::to_json(config).dump(2) << "\n";
            return 0;
        }
        try {
            const auto summary = tkdv::run_experiment(config, config.output);
            std::cout << summary["result"].dump(2) << "\n";
        } catch (const std::exception& e) {
            return report(e);
        }
        return 0;
    }

    std::vector<tkdv::BatchJob> batch;
    for (const auto& path : config_paths) {
        try {
            auto config = tkdv::load_config(path);
            config.validate();
            batch.push_back({config, config.output});
        } catch (const std::exception& e) {
            std::cerr << "tkdv-assim: " << path << ": " << e.what() << "\n";
            return tkdv::exit_code_for(e);
        }
    }
    const auto outcomes = tkdv::run_batch(batch, batch_width(jobs));
    int code = 0;
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        if (outcomes[i].exit_code == 0) {
            std::cout << config_paths[i] << ": ok -> " << batch[i].output_dir.string() << "\n";
            continue;
        }
        std::cerr << "tkdv-assim: " << config_paths[i] << ": " << outcomes[i].message << "\n";
        if (code == 0) code = outcomes[i].exit_code;
    }
    return code;
}
