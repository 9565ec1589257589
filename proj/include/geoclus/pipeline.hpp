#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "geoclus/data.hpp"
#include "geoclus/geodesic.hpp"
#include "geoclus/vae.hpp"

namespace geoclus::cli {

struct DatasetConfig {
    std::string name = "two-moons";  // two-moons | aniso | idx
    std::size_t train_per_class = 100;
    std::size_t eval_per_class = 50;
    double noise_sd = 0.08;  // two-moons only
    std::string idx_images, idx_labels;
    std::vector<int> class_filter;  // idx only; empty keeps every class
};

struct GmmStageConfig {
    std::size_t components = 10;
    std::size_t wg_steps = 2000;
    double wg_learning_rate = 1e-2;
};

struct VolumeStageConfig {
    std::size_t resolution = 100;
    std::size_t samples = 100;
    double inflate = 0.2;
};

// Everything one run needs. Sub-stage seeds are derived from the master
// seed, so a config plus a seed pins every byte of the outputs.
struct PipelineConfig {
    std::string preset_name = "custom";
    std::uint64_t seed = 1;
    std::string out_dir;  // empty: resolved from GEOCLUS_OUT or ./runs
    std::size_t jobs = 1;
    std::vector<std::string> stages;  // empty: all stages in order
    DatasetConfig dataset;
    vae::VaeArch arch;
    vae::TrainConfig train;
    GmmStageConfig gmm;
    geodesic::GeodesicConfig geodesic;
    std::size_t cluster_k = 2;
    VolumeStageConfig volume;
};

const std::vector<std::string>& all_stages();
std::vector<std::string> known_presets();
PipelineConfig preset(const std::string& name);

PipelineConfig load_config_file(const std::filesystem::path& path);
void save_config_file(const std::filesystem::path& path, const PipelineConfig& config);
std::string config_hash(const PipelineConfig& config);

struct SplitDataset {
    data::Dataset train, eval;
};
SplitDataset make_datasets(const DatasetConfig& config, std::uint64_t master_seed);

// Stage entry points; each consumes the previous stage's files from `dir`
// and fails with a "run stage '<x>' first" error when they are missing.
void stage_generate(const PipelineConfig& config, const std::filesystem::path& dir);
void stage_train(const PipelineConfig& config, const std::filesystem::path& dir);
void stage_fit_variance(const PipelineConfig& config, const std::filesystem::path& dir);
void stage_distances(const PipelineConfig& config, const std::filesystem::path& dir);
void stage_cluster(const PipelineConfig& config, const std::filesystem::path& dir);
void stage_volume(const PipelineConfig& config, const std::filesystem::path& dir);

// Accuracy table plus geodesic convergence statistics; pure function of
// the run directory. Also written to report.txt.
std::string report(const std::filesystem::path& dir);

std::filesystem::path resolve_out_dir(const PipelineConfig& config);
std::filesystem::path run(const PipelineConfig& config);
void run_stage(const PipelineConfig& config, const std::string& stage,
               const std::filesystem::path& dir);

// Min-max normalized grayscale PGM from a matrix or volume-field CSV.
void render_heatmap(const std::filesystem::path& csv_path,
                    const std::filesystem::path& pgm_path);

}  // namespace geoclus::cli
