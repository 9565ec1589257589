#include <cstdio>
#include <exception>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "geoclus/pipeline.hpp"

namespace cli = geoclus::cli;

namespace {

struct CommonFlags {
    std::string config_path;
    std::string preset_name;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool seed_given = false;
    std::size_t jobs = 0;
    std::string stages;

    void attach(CLI::App* cmd, bool with_stages = false) {
        cmd->add_option("--config", config_path, "pipeline config JSON file");
        cmd->add_option("--preset", preset_name, "built-in preset name");
        cmd->add_option("--out", out_dir, "run directory (default: $GEOCLUS_OUT or ./runs)");
        cmd->add_option("--seed", seed, "master seed override")->each([this](const std::string&) {
            seed_given = true;
        });
        cmd->add_option("--jobs", jobs, "worker threads for pairwise geodesics");
        if (with_stages)
            cmd->add_option("--stages", stages, "comma-separated stage list (default: all)");
    }

    cli::PipelineConfig resolve() const {
        cli::PipelineConfig config;
        if (!config_path.empty())
            config = cli::load_config_file(config_path);
        else if (!preset_name.empty())
            config = cli::preset(preset_name);
        else
            throw CLI::ValidationError("--config or --preset is required");
        if (seed_given) config.seed = seed;
        if (!out_dir.empty()) config.out_dir = out_dir;
        if (jobs > 0) config.jobs = jobs;
        if (!stages.empty()) {
            config.stages.clear();
            std::stringstream ss(stages);
            std::string item;
            while (std::getline(ss, item, ','))
                if (!item.empty()) config.stages.push_back(item);
        }
        return config;
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"VAE latent-space geodesic distances and clustering"};
    app.require_subcommand(1);

    CommonFlags run_flags, stage_flags[6], report_flags;
    CLI::App* cmd_run = app.add_subcommand("run", "all pipeline stages");
    run_flags.attach(cmd_run, true);

    const char* stage_names[6] = {"generate-data", "train",   "fit-variance",
                                  "distances",     "cluster", "volume"};
    const char* stage_help[6] = {"write train/eval datasets",
                                 "stage 1: train the VAE",
                                 "stage 2: fit the latent GMM precision model",
                                 "stage 3a: pairwise geodesic and Euclidean distances",
                                 "stage 3b: k-medoids + spectral baselines and accuracy",
                                 "expected volume measure heatmap"};
    CLI::App* stage_cmds[6];
    for (int i = 0; i < 6; ++i) {
        stage_cmds[i] = app.add_subcommand(stage_names[i], stage_help[i]);
        stage_flags[i].attach(stage_cmds[i]);
    }

    CLI::App* cmd_report = app.add_subcommand("report", "accuracy table for a finished run");
    report_flags.attach(cmd_report);

    std::string heat_in, heat_out;
    CLI::App* cmd_heatmap =
        app.add_subcommand("render-heatmap", "matrix or volume-field CSV to 8-bit PGM");
    cmd_heatmap->add_option("input", heat_in, "source CSV")->required();
    cmd_heatmap->add_option("output", heat_out, "destination PGM")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (cmd_run->parsed()) {
            cli::PipelineConfig config = run_flags.resolve();
            auto dir = cli::run(config);
            std::cout << "run complete: " << dir.string() << "\n";
            bool clustered = std::filesystem::exists(dir / "accuracy.json");
            if (clustered) std::cout << cli::report(dir);
            return 0;
        }
        for (int i = 0; i < 6; ++i) {
            if (!stage_cmds[i]->parsed()) continue;
            cli::PipelineConfig config = stage_flags[i].resolve();
            auto dir = cli::resolve_out_dir(config);
            cli::run_stage(config, stage_names[i], dir);
            std::cout << stage_names[i] << " complete: " << dir.string() << "\n";
            return 0;
        }
        if (cmd_report->parsed()) {
            cli::PipelineConfig config = report_flags.resolve();
            std::cout << cli::report(cli::resolve_out_dir(config));
            return 0;
        }
        if (cmd_heatmap->parsed()) {
            cli::render_heatmap(heat_in, heat_out);
            std::cout << "wrote " << heat_out << "\n";
            return 0;
        }
    } catch (const CLI::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
