#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "geoclus/tensor.hpp"

namespace geoclus::data {

using diffcore::Tensor;

// Per-dimension affine transform already applied to the points:
// stored = (raw - shift) * scale. Identity when empty.
struct Normalization {
    std::vector<double> shift, scale;
    bool identity() const { return shift.empty() && scale.empty(); }
};

struct Dataset {
    Tensor points;  // N x D
    std::vector<int> labels;
    std::string name;
    Normalization normalization;

    std::size_t size() const { return points.rank() == 2 ? points.rows() : 0; }
    std::size_t dim() const { return points.rank() == 2 ? points.cols() : 0; }
    std::vector<double> row(std::size_t i) const;
    int class_count() const;
    void validate() const;
};

// Noise-free moon parametrizations: moon 0 is (cos t, sin t), moon 1 is
// (1 - cos t, 1/2 - sin t), t in [0, pi].
std::array<double, 2> moon_point(int moon, double theta);

// Two interleaved half-circles with isotropic Gaussian noise; indices
// [0, n_per_moon) carry label 0 and the rest label 1.
Dataset two_moons(std::size_t n_per_moon, double noise_sd, std::uint64_t seed);

// Row-major 2x2 shear applied to every blob sample.
inline constexpr std::array<double, 4> kAnisoShear{0.6, -0.6, -0.4, 0.8};
// Pre-shear blob centers, chosen so the sheared clusters form three
// parallel stripes offset along the shear's minor axis.
inline constexpr std::array<std::array<double, 2>, 3> kAnisoCenters{
    {{-9.6, -9.0}, {0.0, 0.0}, {9.6, 9.0}}};

// Three unit-variance spherical blobs pushed through kAnisoShear. Points
// are grouped by cluster in label order; counts split as evenly as the
// total allows (larger groups first).
Dataset aniso_blobs(std::size_t n_total, std::uint64_t seed);

// MNIST-family IDX ingestion. Pixels scaled to [0,1], images flattened
// row-major. An empty class filter keeps every class; per_class_limit of 0
// means unlimited. Files are validated (magic numbers, dimension record,
// image/label count agreement) with byte offsets in error messages.
Dataset load_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path, const std::set<int>& class_filter,
                 std::size_t per_class_limit);

void save_csv(const std::filesystem::path& path, const Dataset& dataset);
void save_csv(const std::filesystem::path& path, const Tensor& matrix);
Dataset load_dataset_csv(const std::filesystem::path& path);
Tensor load_matrix_csv(const std::filesystem::path& path);

}  // namespace geoclus::data
