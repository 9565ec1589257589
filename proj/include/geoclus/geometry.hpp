#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "geoclus/geodesic.hpp"

namespace geoclus::geometry {

using diffcore::Tensor;
using geodesic::GeneratorModel;

// Expected Riemannian volume density over a regular latent grid,
// estimated by sampling the stochastic generator at cell corners.
struct VolumeField {
    double min_x = 0, max_x = 0, min_y = 0, max_y = 0;
    std::size_t res_x = 0, res_y = 0;  // grid nodes per axis (>= 2)
    double h = 0;                      // finite-difference step
    std::size_t samples = 0;
    std::vector<double> vol;      // res_y rows of res_x values, row-major
    std::vector<double> log_vol;  // natural log of vol

    double x_at(std::size_t ix) const;
    double y_at(std::size_t iy) const;
    double at(std::size_t ix, std::size_t iy) const { return vol[iy * res_x + ix]; }
};

// E[sqrt(det V^T V)] / h^2 over S generator draws, where
// V = [f(z + h e1) - f(z), f(z + h e2) - f(z)]. Latent space must be 2-D.
double expected_volume_at(const GeneratorModel& model, std::span<const double> z, double h,
                          std::size_t samples, std::uint64_t seed);

struct VolumeGridConfig {
    double min_x = -1, max_x = 1, min_y = -1, max_y = 1;
    std::size_t res_x = 100, res_y = 100;
    double h = 0;  // 0: use the grid spacing
    std::size_t samples = 100;
    std::uint64_t seed = 0;
};

// Bounding box of the given latent codes, inflated by `inflate` on each
// side (the default grid domain).
VolumeGridConfig grid_over_latents(const Tensor& latents, double inflate = 0.2);

VolumeField volume_grid(const GeneratorModel& model, const VolumeGridConfig& config);

// CSV rows (x, y, vol, log_vol) with a field header.
void save_volume_csv(const std::filesystem::path& path, const VolumeField& field);
VolumeField load_volume_csv(const std::filesystem::path& path);

// Min-max normalized grayscale heatmap of log-volume.
void save_volume_pgm(const std::filesystem::path& path, const VolumeField& field);

}  // namespace geoclus::geometry
