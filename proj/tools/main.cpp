#include <CLI11.hpp>
#include <iostream>

#include "fedicu/errors.hpp"
#include "fedicu/experiment.hpp"

namespace {

fedicu::ExperimentConfig load_config(const std::string& config_path, std::int64_t seed_override) {
    fedicu::ExperimentConfig cfg =
        config_path.empty() ? fedicu::ExperimentConfig{}
                            : fedicu::ExperimentConfig::from_file(config_path);
    if (seed_override >= 0) cfg.seed = static_cast<std::uint64_t>(seed_override);
    cfg.validate();
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Federated ICU mortality prediction workbench"};
    app.require_subcommand(1);

    std::string config_path;
    std::int64_t seed_override = -1;

    auto* gen = app.add_subcommand("gen-data", "Write a synthetic events/outcomes CSV pair");
    std::string gen_out = "data";
    gen->add_option("--config", config_path, "Experiment config file");
    gen->add_option("--seed", seed_override, "Override the config seed");
    gen->add_option("--out", gen_out, "Output directory for events.csv and outcomes.csv");

    auto* run = app.add_subcommand("run", "Run the configured experiment grid");
    std::size_t jobs = 0;
    bool resume = false, dry_run = false;
    run->add_option("--config", config_path, "Experiment config file");
    run->add_option("--seed", seed_override, "Override the config seed");
    run->add_option("--jobs", jobs, "Run this many grid units in parallel");
    run->add_flag("--resume", resume, "Skip grid units with a completed row on disk");
    run->add_flag("--dry-run", dry_run, "Print the resolved grid and exit");

    auto* summ = app.add_subcommand("summarize", "Aggregate a results directory");
    std::string results_dir = "out";
    summ->add_option("dir", results_dir, "Directory holding results.csv");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            const fedicu::ExperimentConfig cfg = load_config(config_path, seed_override);
            const fedicu::GenDataCounts counts = fedicu::gen_data(cfg, gen_out);
            std::cout << "wrote " << gen_out << "/events.csv and " << gen_out
                      << "/outcomes.csv\n"
                      << "patients: " << counts.patients << "\n"
                      << "events:   " << counts.events << "\n"
                      << "deaths:   " << counts.deaths << "\n";
        } else if (run->parsed()) {
            const fedicu::ExperimentConfig cfg = load_config(config_path, seed_override);
            fedicu::RunOptions options;
            options.dry_run = dry_run;
            options.resume = resume;
            options.jobs_override = jobs;
            const fedicu::ExperimentOutput output = fedicu::run_experiment(cfg, options);
            if (!dry_run)
                std::cout << "wrote " << cfg.output_dir << "/results.csv ("
                          << output.rows.size() << " rows, " << output.aggregates.size()
                          << " aggregates)\n";
        } else if (summ->parsed()) {
            fedicu::summarize_results(results_dir, std::cout);
            std::cout << "wrote " << results_dir << "/summary.md\n";
        }
    } catch (const fedicu::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
