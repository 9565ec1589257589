#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "geoclus/graph.hpp"
#include "geoclus/tensor.hpp"
#include "geoclus/vae.hpp"

namespace geoclus::latentgmm {

using diffcore::Graph;
using diffcore::NodeId;
using diffcore::Tensor;

// Diagonal-covariance Gaussian mixture over latent codes (the EM-fitted
// part of the precision model, before output rescaling).
struct GaussianMixture {
    std::size_t K = 0;
    std::size_t d = 0;
    std::vector<double> weights;             // K, positive, sums to 1
    std::vector<std::vector<double>> means;  // K x d
    std::vector<std::vector<double>> cov_diag;  // K x d, strictly positive

    void validate() const;
};

// Inverse-variance model: g(z) = (sum_k w_k N(z | c_k, S_k) + floor) * W_g
// per output dimension. The additive floor keeps far-from-data variance
// large but finite.
struct PrecisionGmm {
    GaussianMixture mixture;
    std::vector<double> wg;  // D, strictly positive
    double floor = 0.0;

    std::size_t output_dim() const { return wg.size(); }
    void validate() const;
};

struct EmConfig {
    std::size_t max_iterations = 500;
    double rel_tol = 1e-7;
    int restarts = 5;
    // variance clamp, relative to the per-dimension data variance
    double var_floor_rel = 1e-6;
};

struct EmResult {
    GaussianMixture mixture;
    std::vector<double> loglik_trace;  // winning restart, one entry per iteration
    double loglik = 0.0;
};

// EM with k-means++ seeding; `restarts` independent seeded runs keep the
// best log-likelihood. A run whose component weight or raw covariance
// collapses is abandoned; if every restart collapses this throws.
EmResult em_fit(const Tensor& latents, std::size_t K, std::uint64_t seed, EmConfig config = {});

double mixture_density(const GaussianMixture& mixture, std::span<const double> z);

// floor = rel * max_k (w_k * peak density of component k)
double density_floor_for(const GaussianMixture& mixture, double rel = 1e-6);

// g(z) in R^D, strictly positive
std::vector<double> precision(const PrecisionGmm& model, std::span<const double> z);
// 1/g(z) per output dimension
std::vector<double> variance(const PrecisionGmm& model, std::span<const double> z);

// Scalar mixture density as a differentiable graph node; z is [1, d].
NodeId mixture_density_node(Graph& g, const GaussianMixture& mixture, NodeId z);

struct WgConfig {
    std::size_t steps = 2000;
    double learning_rate = 1e-2;
};

// Maximizes the ELBO reconstruction term over W_g (log-parametrized so
// positivity is structural), holding the VAE and mixture fixed. Latent
// codes are the encoder posterior means.
std::vector<double> fit_wg(const vae::VaeModel& model, const GaussianMixture& mixture,
                           const Tensor& points, WgConfig config = {});

// em_fit + density floor + fit_wg in one call.
PrecisionGmm fit_precision_model(const vae::VaeModel& model, const Tensor& points, std::size_t K,
                                 std::uint64_t seed, EmConfig em = {}, WgConfig wg = {});

}  // namespace geoclus::latentgmm
