#include "geoclus/latentgmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>
#include <string>

#include "geoclus/optimizer.hpp"
#include "geoclus/rng.hpp"

namespace geoclus::latentgmm {

void GaussianMixture::validate() const {
    if (K == 0 || d == 0) throw std::invalid_argument("GaussianMixture: empty model");
    if (weights.size() != K || means.size() != K || cov_diag.size() != K)
        throw std::invalid_argument("GaussianMixture: component count mismatch");
    double total = 0.0;
    for (double w : weights) {
        if (!(w > 0.0)) throw std::invalid_argument("GaussianMixture: non-positive weight");
        total += w;
    }
    if (std::abs(total - 1.0) > 1e-12)
        throw std::invalid_argument("GaussianMixture: weights must sum to 1");
    for (std::size_t k = 0; k < K; ++k) {
        if (means[k].size() != d || cov_diag[k].size() != d)
            throw std::invalid_argument("GaussianMixture: component dimension mismatch");
        for (double v : cov_diag[k])
            if (!(v > 0.0)) throw std::invalid_argument("GaussianMixture: non-positive variance");
    }
}

void PrecisionGmm::validate() const {
    mixture.validate();
    if (wg.empty()) throw std::invalid_argument("PrecisionGmm: empty rescale vector");
    for (double w : wg)
        if (!(w > 0.0)) throw std::invalid_argument("PrecisionGmm: non-positive W_g entry");
    if (!(floor > 0.0)) throw std::invalid_argument("PrecisionGmm: non-positive floor");
}

namespace {

double log_component_density(const GaussianMixture& m, std::size_t k,
                             std::span<const double> z) {
    double acc = 0.0;
    for (std::size_t j = 0; j < m.d; ++j) {
        double v = m.cov_diag[k][j];
        double diff = z[j] - m.means[k][j];
        acc += std::log(2.0 * M_PI * v) + diff * diff / v;
    }
    return -0.5 * acc;
}

}  // namespace

double mixture_density(const GaussianMixture& mixture, std::span<const double> z) {
    if (z.size() != mixture.d) throw std::invalid_argument("mixture_density: dimension mismatch");
    double acc = 0.0;
    for (std::size_t k = 0; k < mixture.K; ++k)
        acc += mixture.weights[k] * std::exp(log_component_density(mixture, k, z));
    return acc;
}

double density_floor_for(const GaussianMixture& mixture, double rel) {
    mixture.validate();
    double peak = 0.0;
    for (std::size_t k = 0; k < mixture.K; ++k)
        peak = std::max(peak,
                        mixture.weights[k] * std::exp(log_component_density(
                                                 mixture, k, mixture.means[k])));
    return rel * peak;
}

std::vector<double> precision(const PrecisionGmm& model, std::span<const double> z) {
    double dens = mixture_density(model.mixture, z) + model.floor;
    std::vector<double> g(model.wg.size());
    for (std::size_t j = 0; j < g.size(); ++j) g[j] = dens * model.wg[j];
    return g;
}

std::vector<double> variance(const PrecisionGmm& model, std::span<const double> z) {
    std::vector<double> g = precision(model, z);
    for (double& v : g) v = 1.0 / v;
    return g;
}

NodeId mixture_density_node(Graph& g, const GaussianMixture& mixture, NodeId z) {
    mixture.validate();
    NodeId total = 0;
    bool first = true;
    for (std::size_t k = 0; k < mixture.K; ++k) {
        std::vector<double> neg_mean(mixture.d), inv_var(mixture.d);
        double log_norm = 0.0;
        for (std::size_t j = 0; j < mixture.d; ++j) {
            neg_mean[j] = -mixture.means[k][j];
            inv_var[j] = 1.0 / mixture.cov_diag[k][j];
            log_norm += std::log(2.0 * M_PI * mixture.cov_diag[k][j]);
        }
        double coeff = mixture.weights[k] * std::exp(-0.5 * log_norm);
        NodeId diff = g.add(z, g.constant(Tensor::matrix(1, mixture.d, neg_mean)));
        NodeId quad = g.sum(g.mul(g.square(diff), g.constant(Tensor::vec(inv_var))));
        NodeId term = g.scale(g.exp(g.scale(quad, -0.5)), coeff);
        total = first ? term : g.add(total, term);
        first = false;
    }
    return total;
}

// --- EM --------------------------------------------------------------------

namespace {

struct EmRun {
    GaussianMixture mixture;
    std::vector<double> trace;
    double loglik = -std::numeric_limits<double>::infinity();
    bool collapsed = false;
};

std::vector<std::size_t> kmeans_pp_seeds(const Tensor& x, std::size_t K, Rng& rng) {
    std::size_t n = x.rows(), d = x.cols();
    std::vector<std::size_t> centers;
    centers.push_back(static_cast<std::size_t>(rng.below(n)));
    std::vector<double> best_sq(n, std::numeric_limits<double>::infinity());
    while (centers.size() < K) {
        std::size_t last = centers.back();
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double sq = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                double diff = x.at(i, j) - x.at(last, j);
                sq += diff * diff;
            }
            best_sq[i] = std::min(best_sq[i], sq);
            total += best_sq[i];
        }
        std::size_t pick = 0;
        if (total > 0.0) {
            double target = rng.uniform() * total, acc = 0.0;
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
        centers.push_back(pick);
    }
    return centers;
}

EmRun run_em_once(const Tensor& x, std::size_t K, std::uint64_t seed, const EmConfig& cfg,
                  const std::vector<double>& data_var) {
    std::size_t n = x.rows(), d = x.cols();
    Rng rng(seed);
    EmRun run;
    GaussianMixture& m = run.mixture;
    m.K = K;
    m.d = d;
    m.weights.assign(K, 1.0 / static_cast<double>(K));
    m.means.resize(K);
    m.cov_diag.resize(K);
    auto seeds = kmeans_pp_seeds(x, K, rng);
    for (std::size_t k = 0; k < K; ++k) {
        m.means[k].resize(d);
        for (std::size_t j = 0; j < d; ++j) m.means[k][j] = x.at(seeds[k], j);
        m.cov_diag[k] = data_var;
    }

    // a few Lloyd refinements move the seeds onto multi-point centroids,
    // which keeps early EM iterations from locking onto single points
    std::vector<int> assign(n, 0);
    for (int lloyd = 0; lloyd < 10; ++lloyd) {
        bool moved = false;
        for (std::size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            int arg = 0;
            for (std::size_t k = 0; k < K; ++k) {
                double sq = 0.0;
                for (std::size_t j = 0; j < d; ++j) {
                    double diff = x.at(i, j) - m.means[k][j];
                    sq += diff * diff;
                }
                if (sq < best) {
                    best = sq;
                    arg = static_cast<int>(k);
                }
            }
            if (assign[i] != arg) moved = true;
            assign[i] = arg;
        }
        for (std::size_t k = 0; k < K; ++k) {
            std::size_t count = 0;
            std::vector<double> mean(d, 0.0);
            for (std::size_t i = 0; i < n; ++i)
                if (assign[i] == static_cast<int>(k)) {
                    ++count;
                    for (std::size_t j = 0; j < d; ++j) mean[j] += x.at(i, j);
                }
            if (count == 0) continue;  // keep the previous seed
            for (std::size_t j = 0; j < d; ++j) m.means[k][j] = mean[j] / count;
        }
        if (!moved) break;
    }

    std::vector<double> var_floor(d), collapse_floor(d);
    for (std::size_t j = 0; j < d; ++j) {
        var_floor[j] = std::max(cfg.var_floor_rel * data_var[j], 1e-300);
        collapse_floor[j] = std::max(1e-10 * data_var[j], 1e-300);
    }

    std::vector<double> resp(n * K);
    double prev_ll = -std::numeric_limits<double>::infinity();
    for (std::size_t iter = 0; iter < cfg.max_iterations; ++iter) {
        // E-step in log space
        double ll = 0.0;
        std::vector<double> row(K);
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<double> zi(d);
            for (std::size_t j = 0; j < d; ++j) zi[j] = x.at(i, j);
            double top = -std::numeric_limits<double>::infinity();
            for (std::size_t k = 0; k < K; ++k) {
                row[k] = std::log(m.weights[k]) + log_component_density(m, k, zi);
                top = std::max(top, row[k]);
            }
            double sum = 0.0;
            for (std::size_t k = 0; k < K; ++k) sum += std::exp(row[k] - top);
            double log_norm = top + std::log(sum);
            ll += log_norm;
            for (std::size_t k = 0; k < K; ++k) resp[i * K + k] = std::exp(row[k] - log_norm);
        }
        run.trace.push_back(ll);

        // M-step
        for (std::size_t k = 0; k < K; ++k) {
            double nk = 0.0;
            for (std::size_t i = 0; i < n; ++i) nk += resp[i * K + k];
            if (nk < 1e-10 * static_cast<double>(n)) {
                run.collapsed = true;
                return run;
            }
            m.weights[k] = nk / static_cast<double>(n);
            for (std::size_t j = 0; j < d; ++j) {
                double mean = 0.0;
                for (std::size_t i = 0; i < n; ++i) mean += resp[i * K + k] * x.at(i, j);
                mean /= nk;
                double var = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    double diff = x.at(i, j) - mean;
                    var += resp[i * K + k] * diff * diff;
                }
                var /= nk;
                if (var < collapse_floor[j]) {
                    run.collapsed = true;
                    return run;
                }
                m.means[k][j] = mean;
                m.cov_diag[k][j] = std::max(var, var_floor[j]);
            }
        }

        if (iter > 0) {
            double rel = (ll - prev_ll) / std::max(std::abs(prev_ll), 1e-12);
            if (rel < cfg.rel_tol) {
                prev_ll = ll;
                break;
            }
        }
        prev_ll = ll;
    }
    run.loglik = prev_ll;
    return run;
}

}  // namespace

EmResult em_fit(const Tensor& latents, std::size_t K, std::uint64_t seed, EmConfig config) {
    if (latents.rank() != 2 || latents.rows() == 0)
        throw std::invalid_argument("em_fit: need an N x d latent matrix");
    if (K == 0) throw std::invalid_argument("em_fit: K must be positive");
    std::size_t n = latents.rows(), d = latents.cols();

    std::set<std::vector<double>> distinct;
    for (std::size_t i = 0; i < n && distinct.size() <= K; ++i) {
        std::vector<double> row(d);
        for (std::size_t j = 0; j < d; ++j) row[j] = latents.at(i, j);
        distinct.insert(std::move(row));
    }
    if (distinct.size() < K)
        throw std::invalid_argument("em_fit: K = " + std::to_string(K) +
                                    " exceeds the number of distinct points");

    std::vector<double> data_var(d, 0.0), data_mean(d, 0.0);
    for (std::size_t j = 0; j < d; ++j) {
        for (std::size_t i = 0; i < n; ++i) data_mean[j] += latents.at(i, j);
        data_mean[j] /= static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
            double diff = latents.at(i, j) - data_mean[j];
            data_var[j] += diff * diff;
        }
        data_var[j] = std::max(data_var[j] / static_cast<double>(n), 1e-12);
    }

    EmResult best;
    bool have_best = false;
    int collapses = 0;
    for (int r = 0; r < config.restarts; ++r) {
        EmRun run = run_em_once(latents, K, mix_seed(seed, 0x656d, r), config, data_var);
        if (run.collapsed) {
            ++collapses;
            continue;
        }
        if (!have_best || run.loglik > best.loglik) {
            best.mixture = std::move(run.mixture);
            best.loglik_trace = std::move(run.trace);
            best.loglik = run.loglik;
            have_best = true;
        }
    }
    if (!have_best)
        throw std::runtime_error("em_fit: every restart collapsed (" +
                                 std::to_string(collapses) + " of " +
                                 std::to_string(config.restarts) + ")");
    best.mixture.validate();
    return best;
}

// --- W_g fit -----------------------------------------------------------------

std::vector<double> fit_wg(const vae::VaeModel& model, const GaussianMixture& mixture,
                           const Tensor& points, WgConfig config) {
    model.validate();
    mixture.validate();
    if (points.rank() != 2 || points.cols() != model.D)
        throw std::invalid_argument("fit_wg: dataset width != D");
    std::size_t n = points.rows(), D = model.D;
    double floor = density_floor_for(mixture);

    // The reconstruction term decomposes per output dimension:
    // -2 log p = sum_j [ r_ij^2 * dens_i * wg_j - log wg_j - log dens_i + log 2pi ].
    // Everything except wg is fixed, so precompute A_j = mean_i r_ij^2 dens_i.
    std::vector<double> coeff(D, 0.0);
    std::vector<double> x(D);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < D; ++c) x[c] = points.at(i, c);
        vae::LatentCode code = vae::encode(model, x);
        std::vector<double> mu = vae::decode_mean(model, code.mean);
        double dens = mixture_density(mixture, code.mean) + floor;
        for (std::size_t j = 0; j < D; ++j) {
            double r = x[j] - mu[j];
            coeff[j] += r * r * dens;
        }
    }
    for (double& c : coeff) c /= static_cast<double>(n);

    Graph g;
    NodeId log_wg = g.parameter(Tensor({D}), "log_wg");
    NodeId loss = g.add(g.sum(g.mul(g.constant(Tensor::vec(coeff)), g.exp(log_wg))),
                        g.negate(g.sum(log_wg)));
    diffcore::AdamConfig adam_cfg;
    adam_cfg.learning_rate = config.learning_rate;
    diffcore::Adam opt(g, {log_wg}, adam_cfg);
    for (std::size_t step = 0; step < config.steps; ++step) {
        g.forward(loss);
        g.backward(loss);
        opt.step();
    }
    std::vector<double> wg(D);
    for (std::size_t j = 0; j < D; ++j) wg[j] = std::exp(g.value(log_wg)[j]);
    diffcore::require_finite(wg, "W_g");
    return wg;
}

PrecisionGmm fit_precision_model(const vae::VaeModel& model, const Tensor& points, std::size_t K,
                                 std::uint64_t seed, EmConfig em, WgConfig wg) {
    Tensor latents = vae::encode_means(model, points);
    EmResult fitted = em_fit(latents, K, seed, em);
    PrecisionGmm out;
    out.mixture = std::move(fitted.mixture);
    out.floor = density_floor_for(out.mixture);
    out.wg = fit_wg(model, out.mixture, points, wg);
    out.validate();
    return out;
}

}  // namespace geoclus::latentgmm
