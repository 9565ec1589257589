#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "geoclus/geodesic.hpp"
#include "geoclus/tensor.hpp"

namespace geoclus::clustering {

using diffcore::Tensor;
using geodesic::DistanceMatrix;

struct ClusteringResult {
    std::vector<int> labels;           // cluster index per point
    std::vector<std::size_t> medoids;  // k point indices
    double cost = 0.0;                 // sum of distances to assigned medoids
    std::size_t iterations = 0;        // swap rounds of the winning restart
};

// PAM-style k-medoids on a precomputed distance matrix: seeded
// k-medoids++ initialization (plus one greedy BUILD restart), then swap
// to a local optimum; best of `restarts` by total cost.
ClusteringResult kmedoids(const DistanceMatrix& dist, std::size_t k, std::uint64_t seed,
                          int restarts = 10);

DistanceMatrix euclidean_latent_matrix(const Tensor& latents);

// Standard spectral clustering on raw data: RBF affinity with the median
// pairwise-distance bandwidth, symmetric normalized Laplacian, the k
// bottom eigenvectors via a Jacobi eigensolver, row normalization, then
// seeded k-means.
std::vector<int> spectral_cluster(const Tensor& points, std::size_t k, std::uint64_t seed);

// Fraction of points whose predicted label matches the truth under the
// best label permutation (exhaustive; needs <= 3 classes).
double cluster_accuracy(std::span<const int> predicted, std::span<const int> truth);

// --- building blocks exposed for tests -------------------------------------

struct JacobiResult {
    std::vector<double> eigenvalues;  // ascending
    Tensor eigenvectors;              // columns, same order
};

// Cyclic Jacobi rotations for symmetric matrices.
JacobiResult jacobi_eigen(const Tensor& symmetric);

std::vector<int> kmeans_rows(const Tensor& rows, std::size_t k, std::uint64_t seed,
                             int restarts = 10);

}  // namespace geoclus::clustering
