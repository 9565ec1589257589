#include "geoclus/geodesic.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "geoclus/io.hpp"
#include "geoclus/optimizer.hpp"
#include "geoclus/rng.hpp"

namespace geoclus::geodesic {

using nlohmann::json;

void GeneratorModel::validate() const {
    mean_map.validate();
    if (mean_map.spec.input_width() != d || mean_map.spec.output_width() != D)
        throw std::invalid_argument("GeneratorModel: mean map is not d -> D");
    if (const auto* cv = std::get_if<ConstantVariance>(&variance)) {
        if (cv->variance.size() != D)
            throw std::invalid_argument("GeneratorModel: constant variance width != D");
        for (double v : cv->variance)
            if (v < 0.0) throw std::invalid_argument("GeneratorModel: negative variance");
    } else if (const auto* pg = std::get_if<latentgmm::PrecisionGmm>(&variance)) {
        pg->validate();
        if (pg->mixture.d != d || pg->output_dim() != D)
            throw std::invalid_argument("GeneratorModel: precision model disagrees on d or D");
    }
}

GeneratorModel make_generator(const vae::VaeModel& model, latentgmm::PrecisionGmm precision) {
    model.validate();
    GeneratorModel gen;
    gen.d = model.d;
    gen.D = model.D;
    gen.mean_map = model.decoder();
    gen.variance = std::move(precision);
    gen.validate();
    return gen;
}

std::vector<double> variance_at(const GeneratorModel& model, std::span<const double> z) {
    if (std::holds_alternative<ZeroVariance>(model.variance))
        return std::vector<double>(model.D, 0.0);
    if (const auto* cv = std::get_if<ConstantVariance>(&model.variance)) return cv->variance;
    return latentgmm::variance(std::get<latentgmm::PrecisionGmm>(model.variance), z);
}

double mean_variance_at(const VarianceModel& variance, std::size_t D, std::span<const double> z) {
    if (std::holds_alternative<ZeroVariance>(variance)) return 0.0;
    if (const auto* cv = std::get_if<ConstantVariance>(&variance)) {
        double acc = 0.0;
        for (double v : cv->variance) acc += v;
        return acc / static_cast<double>(cv->variance.size());
    }
    const auto& pg = std::get<latentgmm::PrecisionGmm>(variance);
    double dens = latentgmm::mixture_density(pg.mixture, z) + pg.floor;
    double inv_wg = 0.0;
    for (double w : pg.wg) inv_wg += 1.0 / w;
    return inv_wg / (dens * static_cast<double>(D));
}

QuadraticCurve straight_curve(std::span<const double> z0, std::span<const double> z1) {
    return QuadraticCurve{{z0.begin(), z0.end()},
                          {z1.begin(), z1.end()},
                          std::vector<double>(z0.size(), 0.0)};
}

std::vector<double> curve_eval(const QuadraticCurve& curve, double t) {
    if (!(t >= 0.0 && t <= 1.0)) throw std::invalid_argument("curve_eval: t outside [0, 1]");
    std::size_t d = curve.z0.size();
    if (curve.z1.size() != d || curve.a.size() != d)
        throw std::invalid_argument("curve_eval: inconsistent curve dimensions");
    std::vector<double> out(d);
    double bend = t * t - t;
    for (std::size_t j = 0; j < d; ++j)
        out[j] = curve.z0[j] + t * (curve.z1[j] - curve.z0[j]) + bend * curve.a[j];
    return out;
}

double segment_expected_sq(const GeneratorModel& model, std::span<const double> zi,
                           std::span<const double> zj) {
    auto mu_i = diffcore::mlp_eval(model.mean_map, zi);
    auto mu_j = diffcore::mlp_eval(model.mean_map, zj);
    auto s2_i = variance_at(model, zi);
    auto s2_j = variance_at(model, zj);
    double acc = 0.0;
    for (std::size_t k = 0; k < model.D; ++k) {
        double diff = mu_i[k] - mu_j[k];
        acc += diff * diff + s2_i[k] + s2_j[k];
    }
    return acc;
}

double expected_energy(const GeneratorModel& model, const QuadraticCurve& curve,
                       std::size_t n_segments) {
    if (n_segments < 2) throw std::invalid_argument("expected_energy: need n_segments >= 2");
    double acc = 0.0;
    std::vector<double> prev = curve_eval(curve, 0.0);
    for (std::size_t i = 1; i <= n_segments; ++i) {
        std::vector<double> next = curve_eval(curve, static_cast<double>(i) / n_segments);
        acc += segment_expected_sq(model, prev, next);
        prev = std::move(next);
    }
    return acc;
}

double curve_length(const GeneratorModel& model, const QuadraticCurve& curve,
                    std::size_t n_segments) {
    if (n_segments < 2) throw std::invalid_argument("curve_length: need n_segments >= 2");
    double acc = 0.0;
    std::vector<double> prev = curve_eval(curve, 0.0);
    for (std::size_t i = 1; i <= n_segments; ++i) {
        std::vector<double> next = curve_eval(curve, static_cast<double>(i) / n_segments);
        acc += std::sqrt(std::max(segment_expected_sq(model, prev, next), 0.0));
        prev = std::move(next);
    }
    return acc;
}

// --- energy graph -----------------------------------------------------------

// All n+1 knots are evaluated as one batch: the curve matrix is
// C = Base + bend a (an outer product), the decoder runs once over the
// batch, and segment differences come from a constant differencing
// matrix. The endpoint rows of `bend` are exactly zero, so c(0) = z0 and
// c(1) = z1 hold structurally.
EnergyObjective::EnergyObjective(const GeneratorModel& model, std::size_t n_segments)
    : n_(n_segments), d_(model.d) {
    model.validate();
    if (n_ < 2) throw std::invalid_argument("EnergyObjective: need n_segments >= 2");
    Graph& g = graph_;

    a_param_ = g.parameter(Tensor({1, d_}), "curve_a");

    Tensor bend({n_ + 1, 1});
    for (std::size_t i = 0; i <= n_; ++i) {
        double t = static_cast<double>(i) / n_;
        bend[i] = t * t - t;
    }
    knot_bases_.assign(1, g.constant(Tensor({n_ + 1, d_})));
    NodeId curve = g.add(knot_bases_[0], g.matmul(g.constant(std::move(bend)), a_param_));

    auto dec_params = diffcore::mlp_add_params(g, model.mean_map, false);
    NodeId means = diffcore::mlp_apply(g, model.mean_map.spec, dec_params, curve);  // [n+1, D]

    Tensor diff({n_, n_ + 1});
    for (std::size_t i = 0; i < n_; ++i) {
        diff.at(i, i) = 1.0;
        diff.at(i, i + 1) = -1.0;
    }
    NodeId mean_term = g.sum(g.square(g.matmul(g.constant(std::move(diff)), means)));

    NodeId root = mean_term;
    if (const auto* pg = std::get_if<latentgmm::PrecisionGmm>(&model.variance)) {
        double sum_inv_wg = 0.0;
        for (double w : pg->wg) sum_inv_wg += 1.0 / w;
        const auto& mix = pg->mixture;

        NodeId ones_col = g.constant(Tensor({d_, 1}, 1.0));
        NodeId dens = 0;
        for (std::size_t k = 0; k < mix.K; ++k) {
            std::vector<double> neg_mean(d_), inv_var(d_);
            double log_norm = 0.0;
            for (std::size_t j = 0; j < d_; ++j) {
                neg_mean[j] = -mix.means[k][j];
                inv_var[j] = 1.0 / mix.cov_diag[k][j];
                log_norm += std::log(2.0 * M_PI * mix.cov_diag[k][j]);
            }
            double coeff = mix.weights[k] * std::exp(-0.5 * log_norm);
            NodeId centered = g.add(curve, g.constant(Tensor::matrix(1, d_, neg_mean)));
            NodeId quad = g.matmul(g.mul(g.square(centered), g.constant(Tensor::vec(inv_var))),
                                   ones_col);  // [n+1, 1]
            NodeId term = g.scale(g.exp(g.scale(quad, -0.5)), coeff);
            dens = k == 0 ? term : g.add(dens, term);
        }
        // per-knot sum_D sigma^2 = sum_j (1/wg_j) / (density + floor)
        NodeId noise = g.scale(g.exp(g.negate(g.log(g.shift(dens, pg->floor)))), sum_inv_wg);
        Tensor seg_weights({1, n_ + 1}, 2.0);  // interior knots border two segments
        seg_weights[0] = 1.0;
        seg_weights[n_] = 1.0;
        root = g.add(root, g.matmul(g.constant(std::move(seg_weights)), noise));
    } else if (const auto* cv = std::get_if<ConstantVariance>(&model.variance)) {
        double sum_var = 0.0;
        for (double v : cv->variance) sum_var += v;
        root = g.add(root, g.constant(Tensor::scalar(2.0 * static_cast<double>(n_) * sum_var)));
    }
    root_ = root;
}

void EnergyObjective::set_endpoints(std::span<const double> z0, std::span<const double> z1) {
    if (z0.size() != d_ || z1.size() != d_)
        throw std::invalid_argument("EnergyObjective: endpoint dimension mismatch");
    Tensor& base = graph_.leaf_value(knot_bases_[0]);
    for (std::size_t i = 0; i <= n_; ++i) {
        double t = static_cast<double>(i) / n_;
        for (std::size_t j = 0; j < d_; ++j)
            base.at(i, j) = z0[j] + t * (z1[j] - z0[j]);
    }
}

double EnergyObjective::eval(std::span<const double> a) {
    graph_.set_value(a_param_, a);
    return graph_.forward(root_)[0];
}

double EnergyObjective::eval_grad(std::span<const double> a, std::span<double> grad_out) {
    double e = eval(a);
    graph_.backward(root_);
    const Tensor& grad = graph_.grad(a_param_);
    std::copy(grad.data(), grad.data() + d_, grad_out.begin());
    return e;
}

// --- initialization -----------------------------------------------------------

namespace {

double curve_variance_cost(const VarianceModel& variance, std::size_t D,
                           const QuadraticCurve& curve, std::size_t n_knots) {
    double acc = 0.0;
    for (std::size_t i = 0; i <= n_knots; ++i) {
        auto z = curve_eval(curve, static_cast<double>(i) / n_knots);
        acc += mean_variance_at(variance, D, z);
    }
    return acc / static_cast<double>(n_knots);
}

}  // namespace

QuadraticCurve init_curve_algorithm1(const VarianceModel& variance, std::size_t D,
                                     std::span<const double> z0, std::span<const double> z1,
                                     std::size_t m_samples, std::size_t max_step,
                                     std::uint64_t seed, std::size_t n_cost_knots) {
    std::size_t d = z0.size();
    if (z1.size() != d) throw std::invalid_argument("init_curve_algorithm1: dimension mismatch");
    if (m_samples == 0 || max_step == 0)
        throw std::invalid_argument("init_curve_algorithm1: M and max_step must be positive");

    double gap = 0.0;
    for (std::size_t j = 0; j < d; ++j) gap += (z0[j] - z1[j]) * (z0[j] - z1[j]);
    gap = std::sqrt(gap);
    if (gap == 0.0) return straight_curve(z0, z1);

    Rng rng(seed);
    std::vector<double> mu(d, 0.0);
    double sigma = std::sqrt(gap);  // sampling scale; initial variance is |z0 - z1|

    QuadraticCurve candidate = straight_curve(z0, z1);
    for (std::size_t step = 0; step < max_step; ++step) {
        double best_cost = std::numeric_limits<double>::infinity();
        std::vector<double> best_theta;
        for (std::size_t s = 0; s < m_samples; ++s) {
            for (std::size_t j = 0; j < d; ++j) candidate.a[j] = mu[j] + sigma * rng.normal();
            double cost = curve_variance_cost(variance, D, candidate, n_cost_knots);
            if (cost < best_cost) {
                best_cost = cost;
                best_theta = candidate.a;
            }
        }
        mu = best_theta;
        sigma *= 0.7;
    }
    for (std::size_t j = 0; j < d; ++j) candidate.a[j] = mu[j] + sigma * rng.normal();
    return candidate;
}

// --- optimization -----------------------------------------------------------

OptimizeResult optimize_with(EnergyObjective& objective, const QuadraticCurve& init,
                             const GeodesicConfig& config) {
    std::size_t d = objective.latent_dim();
    if (init.a.size() != d) throw std::invalid_argument("optimize_with: init dimension mismatch");
    objective.set_endpoints(init.z0, init.z1);

    OptimizeResult out;
    out.curve = init;

    diffcore::AdamConfig adam_cfg;
    adam_cfg.learning_rate = config.learning_rate;
    diffcore::Adam opt(objective.graph(), {objective.param_node()}, adam_cfg);

    std::vector<double> grad(d);
    auto current_a = [&] {
        const Tensor& t = objective.graph().value(objective.param_node());
        return std::vector<double>(t.data(), t.data() + d);
    };

    try {
        double energy = objective.eval_grad(init.a, grad);
        double best = energy;
        std::vector<double> best_a = init.a;

        const std::size_t window = 10;
        double window_best = best;
        int stagnant = 0;
        std::size_t iter = 0;
        while (iter < config.max_iterations) {
            ++iter;
            opt.step();
            energy = objective.eval_grad(current_a(), grad);
            if (energy < best) {
                best = energy;
                best_a = current_a();
            }
            if (iter % window == 0) {
                double improve =
                    (window_best - best) / std::max(std::abs(window_best), 1e-300);
                if (improve < config.convergence_tol) {
                    ++stagnant;
                    if (stagnant >= 4) {
                        out.converged = true;
                        break;
                    }
                    opt.config().learning_rate *= 0.5;
                    opt.reset_moments();
                    objective.graph().set_value(objective.param_node(),
                                                Tensor::matrix(1, d, best_a));
                } else {
                    stagnant = 0;
                }
                window_best = best;
            }
        }
        out.iterations = iter;
        out.energy = best;
        out.curve.a = best_a;
        return out;
    } catch (const std::runtime_error&) {
        // non-finite energy: fall back to the straight line, unconverged
        QuadraticCurve fallback = straight_curve(init.z0, init.z1);
        objective.set_endpoints(fallback.z0, fallback.z1);
        out.curve = fallback;
        out.energy = objective.eval(fallback.a);
        out.converged = false;
        out.iterations = 0;
        return out;
    }
}

OptimizeResult optimize_geodesic(const GeneratorModel& model, const QuadraticCurve& init,
                                 const GeodesicConfig& config) {
    EnergyObjective objective(model, config.n_segments);
    return optimize_with(objective, init, config);
}

namespace {

GeodesicResult solve_pair(const GeneratorModel& model, EnergyObjective& objective,
                          std::span<const double> z0, std::span<const double> z1,
                          const GeodesicConfig& config, std::uint64_t pair_seed) {
    GeodesicResult res;
    if (std::equal(z0.begin(), z0.end(), z1.begin(), z1.end())) {
        res.curve = straight_curve(z0, z1);
        return res;  // distance 0 by convention
    }
    QuadraticCurve init =
        config.init == CurveInit::kAlgorithm1
            ? init_curve_algorithm1(model.variance, model.D, z0, z1, config.init_m,
                                    config.init_max_step, pair_seed, config.n_segments)
            : straight_curve(z0, z1);
    OptimizeResult opt = optimize_with(objective, init, config);
    res.curve = opt.curve;
    res.energy = opt.energy;
    res.converged = opt.converged;
    res.iterations = opt.iterations;
    res.distance = curve_length(model, opt.curve, config.n_segments);
    return res;
}

}  // namespace

GeodesicResult geodesic_distance(const GeneratorModel& model, std::span<const double> z0,
                                 std::span<const double> z1, const GeodesicConfig& config) {
    EnergyObjective objective(model, config.n_segments);
    return solve_pair(model, objective, z0, z1, config, config.seed);
}

// --- pairwise ---------------------------------------------------------------

DistanceMatrix::DistanceMatrix(std::size_t size, DistanceKind k)
    : n(size), entries(size * size, 0.0), kind(k), converged(size * size, 1) {}

void DistanceMatrix::set(std::size_t i, std::size_t j, double value, bool flag) {
    entries[i * n + j] = value;
    entries[j * n + i] = value;
    converged[i * n + j] = flag ? 1 : 0;
    converged[j * n + i] = flag ? 1 : 0;
}

void DistanceMatrix::validate() const {
    if (entries.size() != n * n || converged.size() != n * n)
        throw std::invalid_argument("DistanceMatrix: storage size mismatch");
    for (std::size_t i = 0; i < n; ++i) {
        if (entries[i * n + i] != 0.0)
            throw std::invalid_argument("DistanceMatrix: nonzero diagonal");
        for (std::size_t j = 0; j < n; ++j) {
            double v = entries[i * n + j];
            if (!(v >= 0.0) || !std::isfinite(v))
                throw std::invalid_argument("DistanceMatrix: negative or non-finite entry");
            if (v != entries[j * n + i])
                throw std::invalid_argument("DistanceMatrix: asymmetric entries");
        }
    }
}

DistanceMatrix pairwise_distances(const GeneratorModel& model, const Tensor& latents,
                                  const GeodesicConfig& config, std::size_t jobs,
                                  PairwiseStats* stats) {
    if (latents.rank() != 2 || latents.rows() < 2)
        throw std::invalid_argument("pairwise_distances: need at least two latent points");
    if (latents.cols() != model.d)
        throw std::invalid_argument("pairwise_distances: latent width != d");
    std::size_t n = latents.rows();

    DistanceMatrix dm(n, DistanceKind::kGeodesic);
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    pairs.reserve(n * (n - 1) / 2);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) pairs.emplace_back(i, j);

    jobs = std::max<std::size_t>(1, std::min(jobs, pairs.size()));
    std::mutex stats_mutex;
    PairwiseStats totals;
    totals.pairs = pairs.size();
    std::string first_error;

    auto worker = [&](std::size_t worker_id) {
        try {
            EnergyObjective objective(model, config.n_segments);
            std::vector<double> z0(model.d), z1(model.d);
            std::size_t converged_count = 0, iter_sum = 0;
            for (std::size_t p = worker_id; p < pairs.size(); p += jobs) {
                auto [i, j] = pairs[p];
                for (std::size_t c = 0; c < model.d; ++c) {
                    z0[c] = latents.at(i, c);
                    z1[c] = latents.at(j, c);
                }
                GeodesicResult res =
                    solve_pair(model, objective, z0, z1, config, mix_seed(config.seed, i, j));
                dm.set(i, j, res.distance, res.converged);
                if (res.converged) ++converged_count;
                iter_sum += res.iterations;
            }
            std::lock_guard<std::mutex> lock(stats_mutex);
            totals.converged_pairs += converged_count;
            totals.mean_iterations += static_cast<double>(iter_sum);
        } catch (const std::exception& e) {
            std::lock_guard<std::mutex> lock(stats_mutex);
            if (first_error.empty()) first_error = e.what();
        }
    };

    if (jobs == 1) {
        worker(0);
    } else {
        std::vector<std::thread> threads;
        for (std::size_t w = 0; w < jobs; ++w) threads.emplace_back(worker, w);
        for (auto& t : threads) t.join();
    }
    if (!first_error.empty())
        throw std::runtime_error("pairwise_distances: " + first_error);

    totals.mean_iterations /= static_cast<double>(std::max<std::size_t>(1, totals.pairs));
    if (stats) *stats = totals;
    dm.validate();
    return dm;
}

// --- serialization ------------------------------------------------------------

const char* distance_kind_name(DistanceKind k) {
    return k == DistanceKind::kGeodesic ? "geodesic" : "euclidean-latent";
}

DistanceKind distance_kind_from_name(const std::string& name) {
    if (name == "geodesic") return DistanceKind::kGeodesic;
    if (name == "euclidean-latent") return DistanceKind::kEuclideanLatent;
    throw std::invalid_argument("unknown distance kind: " + name);
}

namespace {

json config_to_json(const GeodesicConfig& c) {
    return json{{"n_segments", c.n_segments},
                {"max_iterations", c.max_iterations},
                {"learning_rate", c.learning_rate},
                {"convergence_tol", c.convergence_tol},
                {"init", c.init == CurveInit::kAlgorithm1 ? "algorithm1" : "straight"},
                {"init_m", c.init_m},
                {"init_max_step", c.init_max_step},
                {"seed", c.seed}};
}

std::filesystem::path sidecar_path(const std::filesystem::path& csv_path) {
    std::filesystem::path p = csv_path;
    p.replace_extension(".json");
    return p;
}

}  // namespace

void save_distance_matrix(const std::filesystem::path& csv_path, const DistanceMatrix& matrix,
                          const GeodesicConfig& config, std::uint64_t seed) {
    matrix.validate();
    Tensor t = Tensor::matrix(matrix.n, matrix.n, matrix.entries);
    io::CsvHeader header;
    header.kind = "distance";
    header.extras.emplace_back("distance-kind", distance_kind_name(matrix.kind));
    io::save_csv_matrix(csv_path, t, header);

    json side;
    side["kind"] = distance_kind_name(matrix.kind);
    side["seed"] = seed;
    side["config"] = config_to_json(config);
    std::vector<std::string> rows(matrix.n);
    for (std::size_t i = 0; i < matrix.n; ++i) {
        rows[i].resize(matrix.n);
        for (std::size_t j = 0; j < matrix.n; ++j)
            rows[i][j] = matrix.converged[i * matrix.n + j] ? '1' : '0';
    }
    side["converged"] = rows;
    io::write_text_file(sidecar_path(csv_path), side.dump(2) + "\n");
}

DistanceMatrix load_distance_matrix(const std::filesystem::path& csv_path) {
    io::CsvFile file = io::load_csv(csv_path);
    if (file.matrix.rows() != file.matrix.cols())
        throw std::runtime_error("distance matrix CSV is not square: " + csv_path.string());
    DistanceMatrix dm(file.matrix.rows(), DistanceKind::kGeodesic);
    dm.entries.assign(file.matrix.data(), file.matrix.data() + file.matrix.size());
    std::string kind_str = file.header.get("distance-kind");
    if (!kind_str.empty()) dm.kind = distance_kind_from_name(kind_str);

    std::filesystem::path side = sidecar_path(csv_path);
    if (std::filesystem::exists(side)) {
        json j = json::parse(io::read_text_file(side));
        if (j.contains("kind")) dm.kind = distance_kind_from_name(j["kind"].get<std::string>());
        if (j.contains("converged")) {
            auto rows = j["converged"].get<std::vector<std::string>>();
            for (std::size_t i = 0; i < dm.n && i < rows.size(); ++i)
                for (std::size_t jj = 0; jj < dm.n && jj < rows[i].size(); ++jj)
                    dm.converged[i * dm.n + jj] = rows[i][jj] == '1' ? 1 : 0;
        }
    }
    dm.validate();
    return dm;
}

}  // namespace geoclus::geodesic
