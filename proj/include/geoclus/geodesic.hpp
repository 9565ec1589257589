#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "geoclus/latentgmm.hpp"
#include "geoclus/mlp.hpp"
#include "geoclus/tensor.hpp"
#include "geoclus/vae.hpp"

namespace geoclus::geodesic {

using diffcore::Graph;
using diffcore::Mlp;
using diffcore::NodeId;
using diffcore::Tensor;

// Generator noise models. Zero and Constant exist for analytically
// tractable geometries (flat-space oracles); the fitted latent GMM is the
// production model.
struct ZeroVariance {};
struct ConstantVariance {
    std::vector<double> variance;  // per output dimension
};
using VarianceModel = std::variant<ZeroVariance, ConstantVariance, latentgmm::PrecisionGmm>;

// The stochastic immersion f(z) = mu(z) + sigma(z) * eps: a deterministic
// mean map plus a per-dimension noise scale.
struct GeneratorModel {
    std::size_t d = 0;
    std::size_t D = 0;
    Mlp mean_map;  // latent -> data space
    VarianceModel variance = ZeroVariance{};

    void validate() const;
};

GeneratorModel make_generator(const vae::VaeModel& model, latentgmm::PrecisionGmm precision);

// sigma^2(z) per output dimension
std::vector<double> variance_at(const GeneratorModel& model, std::span<const double> z);
// mean over output dimensions of sigma^2(z), given just the noise model
double mean_variance_at(const VarianceModel& variance, std::size_t D, std::span<const double> z);

// Endpoint-constrained quadratic latent curve:
// c(t) = z0 + t (z1 - z0) + (t^2 - t) a. The d entries of `a` are the
// only free parameters; c(0) = z0 and c(1) = z1 hold structurally.
struct QuadraticCurve {
    std::vector<double> z0, z1, a;
};

QuadraticCurve straight_curve(std::span<const double> z0, std::span<const double> z1);
std::vector<double> curve_eval(const QuadraticCurve& curve, double t);  // t in [0,1]

enum class CurveInit : std::uint8_t { kStraight, kAlgorithm1 };

struct GeodesicConfig {
    std::size_t n_segments = 16;
    std::size_t max_iterations = 1000;
    double learning_rate = 1e-2;
    double convergence_tol = 1e-6;
    CurveInit init = CurveInit::kAlgorithm1;
    std::size_t init_m = 64;
    std::size_t init_max_step = 10;
    std::uint64_t seed = 0;
};

// Closed-form E[ || f(zi) - f(zj) ||^2 ] under independent generator noise
// at the two points: sum_D (mu(zi) - mu(zj))^2 + (s2(zi) + s2(zj)).
double segment_expected_sq(const GeneratorModel& model, std::span<const double> zi,
                           std::span<const double> zj);

// Discretized expected curve energy over uniform knots t_i = i/n.
double expected_energy(const GeneratorModel& model, const QuadraticCurve& curve,
                       std::size_t n_segments);

// The discretized energy as a reusable differentiable graph over the
// curve parameters. Build once per (model, n); endpoints swap per pair.
class EnergyObjective {
public:
    EnergyObjective(const GeneratorModel& model, std::size_t n_segments);

    void set_endpoints(std::span<const double> z0, std::span<const double> z1);
    double eval(std::span<const double> a);
    double eval_grad(std::span<const double> a, std::span<double> grad_out);

    std::size_t n_segments() const { return n_; }
    std::size_t latent_dim() const { return d_; }
    Graph& graph() { return graph_; }
    NodeId param_node() const { return a_param_; }
    NodeId root_node() const { return root_; }

private:
    std::size_t n_ = 0, d_ = 0;
    Graph graph_;
    NodeId a_param_ = 0, root_ = 0;
    std::vector<NodeId> knot_bases_;  // n+1 inputs [1, d]
};

// Stochastic curve-parameter search: sample M parameter sets around a
// recentered mean with a shrinking scale, scoring candidates by the
// discretized variance cost sum_t mean_D sigma^2(c_t) dt, then draw the
// returned parameters from the final distribution.
QuadraticCurve init_curve_algorithm1(const VarianceModel& variance, std::size_t D,
                                     std::span<const double> z0, std::span<const double> z1,
                                     std::size_t m_samples, std::size_t max_step,
                                     std::uint64_t seed, std::size_t n_cost_knots = 16);

struct OptimizeResult {
    QuadraticCurve curve;
    double energy = 0.0;
    bool converged = false;
    std::size_t iterations = 0;
};

// Adam over the curvature coefficients with stagnation-triggered step
// halving; returns the best iterate seen, so the final energy never
// exceeds the initial one. Non-finite energies abort the pair: the caller
// receives the straight-line fallback flagged unconverged.
OptimizeResult optimize_geodesic(const GeneratorModel& model, const QuadraticCurve& init,
                                 const GeodesicConfig& config);
OptimizeResult optimize_with(EnergyObjective& objective, const QuadraticCurve& init,
                             const GeodesicConfig& config);

struct GeodesicResult {
    double distance = 0.0;
    bool converged = true;
    std::size_t iterations = 0;
    QuadraticCurve curve;
    double energy = 0.0;
};

// Optimizes the curve, then reports the discretized length
// sum_i sqrt(E || f(c_i) - f(c_{i+1}) ||^2). Identical endpoints return
// distance 0 by convention.
GeodesicResult geodesic_distance(const GeneratorModel& model, std::span<const double> z0,
                                 std::span<const double> z1, const GeodesicConfig& config);

double curve_length(const GeneratorModel& model, const QuadraticCurve& curve,
                    std::size_t n_segments);

enum class DistanceKind : std::uint8_t { kGeodesic, kEuclideanLatent };
const char* distance_kind_name(DistanceKind k);
DistanceKind distance_kind_from_name(const std::string& name);

struct DistanceMatrix {
    std::size_t n = 0;
    std::vector<double> entries;           // n x n, symmetric, zero diagonal
    DistanceKind kind = DistanceKind::kGeodesic;
    std::vector<std::uint8_t> converged;   // n x n per-pair flags

    DistanceMatrix() = default;
    explicit DistanceMatrix(std::size_t size, DistanceKind kind);
    double at(std::size_t i, std::size_t j) const { return entries[i * n + j]; }
    void set(std::size_t i, std::size_t j, double value, bool converged_flag);
    void validate() const;
};

struct PairwiseStats {
    std::size_t pairs = 0;
    std::size_t converged_pairs = 0;
    double mean_iterations = 0.0;
};

// One geodesic per unordered pair, with per-pair RNG derived from
// (seed, i, j) so results are identical regardless of evaluation order or
// the number of worker threads.
DistanceMatrix pairwise_distances(const GeneratorModel& model, const Tensor& latents,
                                  const GeodesicConfig& config, std::size_t jobs = 1,
                                  PairwiseStats* stats = nullptr);

// CSV (17 significant digits) plus a JSON sidecar carrying kind, seed,
// config, and per-pair convergence flags.
void save_distance_matrix(const std::filesystem::path& csv_path, const DistanceMatrix& matrix,
                          const GeodesicConfig& config, std::uint64_t seed);
DistanceMatrix load_distance_matrix(const std::filesystem::path& csv_path);

}  // namespace geoclus::geodesic
