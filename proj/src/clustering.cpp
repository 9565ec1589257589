#include "geoclus/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "geoclus/rng.hpp"

namespace geoclus::clustering {

namespace {

double assignment_cost(const DistanceMatrix& dist, const std::vector<std::size_t>& medoids) {
    double cost = 0.0;
    for (std::size_t i = 0; i < dist.n; ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t m : medoids) best = std::min(best, dist.at(i, m));
        cost += best;
    }
    return cost;
}

std::vector<std::size_t> build_greedy(const DistanceMatrix& dist, std::size_t k) {
    std::size_t n = dist.n;
    std::vector<std::size_t> medoids;
    std::vector<char> chosen(n, 0);
    for (std::size_t round = 0; round < k; ++round) {
        std::size_t best_idx = 0;
        double best_cost = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < n; ++c) {
            if (chosen[c]) continue;
            medoids.push_back(c);
            double cost = assignment_cost(dist, medoids);
            medoids.pop_back();
            if (cost < best_cost) {
                best_cost = cost;
                best_idx = c;
            }
        }
        medoids.push_back(best_idx);
        chosen[best_idx] = 1;
    }
    return medoids;
}

std::vector<std::size_t> plusplus_seeds(const DistanceMatrix& dist, std::size_t k, Rng& rng) {
    std::size_t n = dist.n;
    std::vector<std::size_t> medoids{static_cast<std::size_t>(rng.below(n))};
    std::vector<double> best_sq(n, std::numeric_limits<double>::infinity());
    while (medoids.size() < k) {
        std::size_t last = medoids.back();
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double d = dist.at(i, last);
            best_sq[i] = std::min(best_sq[i], d * d);
            total += best_sq[i];
        }
        std::size_t pick;
        if (total > 0.0) {
            double target = rng.uniform() * total, acc = 0.0;
            pick = n - 1;
            for (std::size_t i = 0; i < n; ++i) {
                acc += best_sq[i];
                if (acc >= target) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = static_cast<std::size_t>(rng.below(n));
        }
        if (std::find(medoids.begin(), medoids.end(), pick) != medoids.end()) {
            // degenerate duplicates: fall back to the first unchosen index
            for (std::size_t i = 0; i < n; ++i)
                if (std::find(medoids.begin(), medoids.end(), i) == medoids.end()) {
                    pick = i;
                    break;
                }
        }
        medoids.push_back(pick);
    }
    return medoids;
}

struct SwapOutcome {
    std::vector<std::size_t> medoids;
    double cost;
    std::size_t iterations;
};

SwapOutcome swap_to_local_optimum(const DistanceMatrix& dist, std::vector<std::size_t> medoids) {
    std::size_t n = dist.n;
    double cost = assignment_cost(dist, medoids);
    std::size_t rounds = 0;
    for (;;) {
        double best_cost = cost;
        std::size_t best_slot = 0, best_candidate = 0;
        bool found = false;
        for (std::size_t slot = 0; slot < medoids.size(); ++slot) {
            std::size_t original = medoids[slot];
            for (std::size_t h = 0; h < n; ++h) {
                if (std::find(medoids.begin(), medoids.end(), h) != medoids.end()) continue;
                medoids[slot] = h;
                double trial = assignment_cost(dist, medoids);
                if (trial < best_cost - 1e-15) {
                    best_cost = trial;
                    best_slot = slot;
                    best_candidate = h;
                    found = true;
                }
            }
            medoids[slot] = original;
        }
        if (!found) break;
        medoids[best_slot] = best_candidate;
        cost = best_cost;
        ++rounds;
    }
    return {std::move(medoids), cost, rounds};
}

}  // namespace

ClusteringResult kmedoids(const DistanceMatrix& dist, std::size_t k, std::uint64_t seed,
                          int restarts) {
    std::size_t n = dist.n;
    if (k == 0 || k > n)
        throw std::invalid_argument("kmedoids: k must be in [1, n]");
    if (restarts < 1) throw std::invalid_argument("kmedoids: need at least one restart");

    SwapOutcome best{{}, std::numeric_limits<double>::infinity(), 0};
    for (int r = 0; r < restarts; ++r) {
        std::vector<std::size_t> init;
        if (r == 0) {
            init = build_greedy(dist, k);
        } else {
            Rng rng(mix_seed(seed, 0x6b6d, static_cast<std::uint64_t>(r)));
            init = plusplus_seeds(dist, k, rng);
        }
        SwapOutcome outcome = swap_to_local_optimum(dist, std::move(init));
        if (outcome.cost < best.cost) best = std::move(outcome);
    }

    std::sort(best.medoids.begin(), best.medoids.end());
    ClusteringResult result;
    result.medoids = best.medoids;
    result.cost = best.cost;
    result.iterations = best.iterations;
    result.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        double best_d = std::numeric_limits<double>::infinity();
        int label = 0;
        for (std::size_t c = 0; c < best.medoids.size(); ++c) {
            double d = dist.at(i, best.medoids[c]);
            if (d < best_d) {
                best_d = d;
                label = static_cast<int>(c);
            }
        }
        result.labels[i] = label;
    }
    // a medoid is always assigned to its own cluster (distance 0, ties
    // resolved by medoid order)
    for (std::size_t c = 0; c < best.medoids.size(); ++c)
        result.labels[best.medoids[c]] = static_cast<int>(c);
    return result;
}

DistanceMatrix euclidean_latent_matrix(const Tensor& latents) {
    if (latents.rank() != 2 || latents.rows() < 2)
        throw std::invalid_argument("euclidean_latent_matrix: need at least two points");
    std::size_t n = latents.rows(), d = latents.cols();
    DistanceMatrix dm(n, geodesic::DistanceKind::kEuclideanLatent);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t c = 0; c < d; ++c) {
                double diff = latents.at(i, c) - latents.at(j, c);
                acc += diff * diff;
            }
            dm.set(i, j, std::sqrt(acc), true);
        }
    return dm;
}

// --- Jacobi eigensolver -------------------------------------------------------

JacobiResult jacobi_eigen(const Tensor& symmetric) {
    if (symmetric.rank() != 2 || symmetric.rows() != symmetric.cols())
        throw std::invalid_argument("jacobi_eigen: need a square matrix");
    std::size_t n = symmetric.rows();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (std::abs(symmetric.at(i, j) - symmetric.at(j, i)) > 1e-10)
                throw std::invalid_argument("jacobi_eigen: matrix is not symmetric");

    Tensor a = symmetric;
    Tensor v({n, n});
    for (std::size_t i = 0; i < n; ++i) v.at(i, i) = 1.0;

    double frob = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) frob += a[i] * a[i];
    frob = std::sqrt(frob);
    double tol = std::max(frob, 1.0) * 1e-14;

    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += a.at(p, q) * a.at(p, q);
        if (std::sqrt(2.0 * off) <= tol) break;

        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                double apq = a.at(p, q);
                if (std::abs(apq) <= tol / (n * n)) continue;
                double tau = (a.at(q, q) - a.at(p, p)) / (2.0 * apq);
                double t = (tau >= 0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
                double c = 1.0 / std::sqrt(1.0 + t * t);
                double s = t * c;
                for (std::size_t i = 0; i < n; ++i) {
                    double aip = a.at(i, p), aiq = a.at(i, q);
                    a.at(i, p) = c * aip - s * aiq;
                    a.at(i, q) = s * aip + c * aiq;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    double api = a.at(p, i), aqi = a.at(q, i);
                    a.at(p, i) = c * api - s * aqi;
                    a.at(q, i) = s * api + c * aqi;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    double vip = v.at(i, p), viq = v.at(i, q);
                    v.at(i, p) = c * vip - s * viq;
                    v.at(i, q) = s * vip + c * viq;
                }
            }
        }
    }

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t x, std::size_t y) { return a.at(x, x) < a.at(y, y); });

    JacobiResult result;
    result.eigenvalues.resize(n);
    result.eigenvectors = Tensor({n, n});
    for (std::size_t c = 0; c < n; ++c) {
        result.eigenvalues[c] = a.at(order[c], order[c]);
        for (std::size_t r = 0; r < n; ++r) result.eigenvectors.at(r, c) = v.at(r, order[c]);
    }
    return result;
}

// --- k-means ------------------------------------------------------------------

namespace {

double sq_dist_row(const Tensor& rows, std::size_t i, const std::vector<double>& center) {
    double acc = 0.0;
    for (std::size_t c = 0; c < center.size(); ++c) {
        double diff = rows.at(i, c) - center[c];
        acc += diff * diff;
    }
    return acc;
}

}  // namespace

std::vector<int> kmeans_rows(const Tensor& rows, std::size_t k, std::uint64_t seed,
                             int restarts) {
    std::size_t n = rows.rows(), d = rows.cols();
    if (k == 0 || k > n) throw std::invalid_argument("kmeans_rows: k must be in [1, n]");

    std::vector<int> best_labels;
    double best_cost = std::numeric_limits<double>::infinity();
    for (int r = 0; r < restarts; ++r) {
        Rng rng(mix_seed(seed, 0x6b6d65616e, static_cast<std::uint64_t>(r)));
        // k-means++ seeding
        std::vector<std::vector<double>> centers;
        std::size_t first = static_cast<std::size_t>(rng.below(n));
        centers.emplace_back(d);
        for (std::size_t c = 0; c < d; ++c) centers.back()[c] = rows.at(first, c);
        std::vector<double> best_sq(n, std::numeric_limits<double>::infinity());
        while (centers.size() < k) {
            double total = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                best_sq[i] = std::min(best_sq[i], sq_dist_row(rows, i, centers.back()));
                total += best_sq[i];
            }
            std::size_t pick = static_cast<std::size_t>(rng.below(n));
            if (total > 0.0) {
                double target = rng.uniform() * total, acc = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    acc += best_sq[i];
                    if (acc >= target) {
                        pick = i;
                        break;
                    }
                }
            }
            centers.emplace_back(d);
            for (std::size_t c = 0; c < d; ++c) centers.back()[c] = rows.at(pick, c);
        }

        std::vector<int> labels(n, 0), prev(n, -1);
        for (int iter = 0; iter < 100 && labels != prev; ++iter) {
            prev = labels;
            for (std::size_t i = 0; i < n; ++i) {
                double best = std::numeric_limits<double>::infinity();
                for (std::size_t c = 0; c < k; ++c) {
                    double dd = sq_dist_row(rows, i, centers[c]);
                    if (dd < best) {
                        best = dd;
                        labels[i] = static_cast<int>(c);
                    }
                }
            }
            for (std::size_t c = 0; c < k; ++c) {
                std::size_t count = 0;
                std::vector<double> mean(d, 0.0);
                for (std::size_t i = 0; i < n; ++i)
                    if (labels[i] == static_cast<int>(c)) {
                        ++count;
                        for (std::size_t j = 0; j < d; ++j) mean[j] += rows.at(i, j);
                    }
                if (count == 0) {
                    // reseed an empty cluster at the farthest point
                    std::size_t far = 0;
                    double far_d = -1.0;
                    for (std::size_t i = 0; i < n; ++i) {
                        double dd = sq_dist_row(rows, i, centers[labels[i]]);
                        if (dd > far_d) {
                            far_d = dd;
                            far = i;
                        }
                    }
                    for (std::size_t j = 0; j < d; ++j) centers[c][j] = rows.at(far, j);
                    continue;
                }
                for (std::size_t j = 0; j < d; ++j) centers[c][j] = mean[j] / count;
            }
        }
        double cost = 0.0;
        for (std::size_t i = 0; i < n; ++i) cost += sq_dist_row(rows, i, centers[labels[i]]);
        if (cost < best_cost) {
            best_cost = cost;
            best_labels = labels;
        }
    }
    return best_labels;
}

std::vector<int> spectral_cluster(const Tensor& points, std::size_t k, std::uint64_t seed) {
    if (points.rank() != 2 || points.rows() == 0)
        throw std::invalid_argument("spectral_cluster: need an N x D matrix");
    std::size_t n = points.rows();
    if (k == 0 || k > n) throw std::invalid_argument("spectral_cluster: k must be in [1, n]");
    if (k == 1) return std::vector<int>(n, 0);

    // pairwise distances and the median-heuristic bandwidth
    std::vector<double> d2(n * n, 0.0);
    std::vector<double> off;
    off.reserve(n * (n - 1) / 2);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t c = 0; c < points.cols(); ++c) {
                double diff = points.at(i, c) - points.at(j, c);
                acc += diff * diff;
            }
            d2[i * n + j] = d2[j * n + i] = acc;
            off.push_back(std::sqrt(acc));
        }
    std::nth_element(off.begin(), off.begin() + off.size() / 2, off.end());
    double sigma = off[off.size() / 2];
    if (!(sigma > 0.0))
        throw std::runtime_error("spectral_cluster: degenerate affinity (identical points)");

    Tensor w({n, n});
    std::vector<double> degree(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            double a = std::exp(-d2[i * n + j] / (2.0 * sigma * sigma));
            w.at(i, j) = a;
            degree[i] += a;
        }
    for (double deg : degree)
        if (!(deg > 0.0))
            throw std::runtime_error("spectral_cluster: isolated point in the affinity graph");

    // L_sym = I - D^-1/2 W D^-1/2
    Tensor lap({n, n});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double norm = w.at(i, j) / std::sqrt(degree[i] * degree[j]);
            lap.at(i, j) = (i == j ? 1.0 : 0.0) - norm;
        }

    JacobiResult eig = jacobi_eigen(lap);
    Tensor embed({n, k});
    for (std::size_t i = 0; i < n; ++i) {
        double norm = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
            embed.at(i, c) = eig.eigenvectors.at(i, c);
            norm += embed.at(i, c) * embed.at(i, c);
        }
        norm = std::sqrt(norm);
        if (norm > 0.0)
            for (std::size_t c = 0; c < k; ++c) embed.at(i, c) /= norm;
    }
    return kmeans_rows(embed, k, seed, 10);
}

double cluster_accuracy(std::span<const int> predicted, std::span<const int> truth) {
    if (predicted.size() != truth.size())
        throw std::invalid_argument("cluster_accuracy: label count mismatch");
    if (predicted.empty()) throw std::invalid_argument("cluster_accuracy: empty labels");
    int classes = 0;
    for (int l : predicted) classes = std::max(classes, l + 1);
    for (int l : truth) classes = std::max(classes, l + 1);
    if (classes > 3)
        throw std::invalid_argument("cluster_accuracy: permutation search supports <= 3 classes");

    std::vector<int> perm(classes);
    for (int i = 0; i < classes; ++i) perm[i] = i;
    double best = 0.0;
    do {
        std::size_t hits = 0;
        for (std::size_t i = 0; i < predicted.size(); ++i)
            if (perm[predicted[i]] == truth[i]) ++hits;
        best = std::max(best, static_cast<double>(hits) / predicted.size());
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

}  // namespace geoclus::clustering
