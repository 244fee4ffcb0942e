#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "destrack/common/error.hpp"
#include "destrack/pipeline/config.hpp"
#include "destrack/pipeline/stages.hpp"

int main(int argc, char** argv) {
    using namespace destrack;

    CLI::App app{"destrack: two-stage building destruction detection"};
    app.require_subcommand(1, 1);

    std::string config_path;
    bool resume = false;
    std::optional<std::uint64_t> seed_override;
    std::optional<int> jobs;

    for (const auto& name : pipeline::Pipeline::commands()) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "run config file")->required()->check(CLI::ExistingFile);
        sub->add_flag("--resume", resume, "skip stages whose inputs and outputs are unchanged");
        sub->add_option("--seed-override", seed_override, "replace every seed with one derived from this value");
        sub->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
    }
    CLI11_PARSE(app, argc, argv);

    const std::string command = app.get_subcommands().front()->get_name();
    try {
        auto cfg = pipeline::load_config(config_path);
        if (seed_override) pipeline::apply_seed_override(cfg, *seed_override);
        if (jobs) cfg.jobs = *jobs;
        pipeline::Pipeline run(std::move(cfg), resume, std::cerr);
        run.run(command);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
