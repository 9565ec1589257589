#include "geoclus/geometry.hpp"

#include <cmath>
#include <stdexcept>

#include "geoclus/io.hpp"
#include "geoclus/rng.hpp"

namespace geoclus::geometry {

double VolumeField::x_at(std::size_t ix) const {
    return res_x < 2 ? min_x : min_x + (max_x - min_x) * ix / static_cast<double>(res_x - 1);
}

double VolumeField::y_at(std::size_t iy) const {
    return res_y < 2 ? min_y : min_y + (max_y - min_y) * iy / static_cast<double>(res_y - 1);
}

double expected_volume_at(const GeneratorModel& model, std::span<const double> z, double h,
                          std::size_t samples, std::uint64_t seed) {
    if (model.d != 2)
        throw std::invalid_argument("expected_volume_at: grid method needs a 2-D latent space");
    if (!(h > 0.0)) throw std::invalid_argument("expected_volume_at: h must be positive");
    if (samples == 0) throw std::invalid_argument("expected_volume_at: need at least one sample");
    if (z.size() != 2) throw std::invalid_argument("expected_volume_at: z must be 2-D");

    // three cell corners z, z + h e1, z + h e2; mean and noise scale are
    // deterministic per corner, only the draws vary
    std::vector<double> corners[3] = {{z[0], z[1]}, {z[0] + h, z[1]}, {z[0], z[1] + h}};
    std::vector<double> mu[3], sd[3];
    for (int c = 0; c < 3; ++c) {
        mu[c] = diffcore::mlp_eval(model.mean_map, corners[c]);
        sd[c] = variance_at(model, corners[c]);
        for (double& v : sd[c]) v = std::sqrt(v);
    }

    Rng rng(seed);
    std::size_t D = model.D;
    std::vector<double> f0(D), v1(D), v2(D);
    double acc = 0.0;
    for (std::size_t s = 0; s < samples; ++s) {
        for (std::size_t k = 0; k < D; ++k) f0[k] = mu[0][k] + sd[0][k] * rng.normal();
        for (std::size_t k = 0; k < D; ++k) v1[k] = mu[1][k] + sd[1][k] * rng.normal() - f0[k];
        for (std::size_t k = 0; k < D; ++k) v2[k] = mu[2][k] + sd[2][k] * rng.normal() - f0[k];
        double g11 = 0, g12 = 0, g22 = 0;
        for (std::size_t k = 0; k < D; ++k) {
            g11 += v1[k] * v1[k];
            g12 += v1[k] * v2[k];
            g22 += v2[k] * v2[k];
        }
        double det = g11 * g22 - g12 * g12;  // Gram determinant, >= 0 up to rounding
        if (det < 0.0) {
            if (det < -1e-9 * std::max(1.0, g11 * g22))
                throw std::logic_error("expected_volume_at: negative Gram determinant");
            det = 0.0;
        }
        acc += std::sqrt(det);
    }
    return acc / (static_cast<double>(samples) * h * h);
}

VolumeGridConfig grid_over_latents(const Tensor& latents, double inflate) {
    if (latents.rank() != 2 || latents.cols() != 2 || latents.rows() == 0)
        throw std::invalid_argument("grid_over_latents: need an N x 2 latent matrix");
    VolumeGridConfig cfg;
    cfg.min_x = cfg.max_x = latents.at(0, 0);
    cfg.min_y = cfg.max_y = latents.at(0, 1);
    for (std::size_t i = 0; i < latents.rows(); ++i) {
        cfg.min_x = std::min(cfg.min_x, latents.at(i, 0));
        cfg.max_x = std::max(cfg.max_x, latents.at(i, 0));
        cfg.min_y = std::min(cfg.min_y, latents.at(i, 1));
        cfg.max_y = std::max(cfg.max_y, latents.at(i, 1));
    }
    double pad_x = (cfg.max_x - cfg.min_x) * inflate;
    double pad_y = (cfg.max_y - cfg.min_y) * inflate;
    if (pad_x == 0.0) pad_x = 1.0;
    if (pad_y == 0.0) pad_y = 1.0;
    cfg.min_x -= pad_x;
    cfg.max_x += pad_x;
    cfg.min_y -= pad_y;
    cfg.max_y += pad_y;
    return cfg;
}

VolumeField volume_grid(const GeneratorModel& model, const VolumeGridConfig& config) {
    if (!(config.max_x > config.min_x) || !(config.max_y > config.min_y))
        throw std::invalid_argument("volume_grid: bounds must be well-ordered");
    if (config.res_x < 2 || config.res_y < 2)
        throw std::invalid_argument("volume_grid: need at least a 2x2 grid");

    VolumeField field;
    field.min_x = config.min_x;
    field.max_x = config.max_x;
    field.min_y = config.min_y;
    field.max_y = config.max_y;
    field.res_x = config.res_x;
    field.res_y = config.res_y;
    field.samples = config.samples;
    double dx = (config.max_x - config.min_x) / static_cast<double>(config.res_x - 1);
    double dy = (config.max_y - config.min_y) / static_cast<double>(config.res_y - 1);
    field.h = config.h > 0.0 ? config.h : std::min(dx, dy);

    field.vol.resize(config.res_x * config.res_y);
    field.log_vol.resize(field.vol.size());
    std::vector<double> z(2);
    for (std::size_t iy = 0; iy < config.res_y; ++iy) {
        for (std::size_t ix = 0; ix < config.res_x; ++ix) {
            z[0] = field.x_at(ix);
            z[1] = field.y_at(iy);
            double v = expected_volume_at(model, z, field.h, config.samples,
                                          mix_seed(config.seed, ix, iy));
            field.vol[iy * config.res_x + ix] = v;
            field.log_vol[iy * config.res_x + ix] = std::log(std::max(v, 1e-300));
        }
    }
    return field;
}

void save_volume_csv(const std::filesystem::path& path, const VolumeField& field) {
    Tensor rows({field.res_x * field.res_y, 4});
    std::size_t r = 0;
    for (std::size_t iy = 0; iy < field.res_y; ++iy)
        for (std::size_t ix = 0; ix < field.res_x; ++ix, ++r) {
            rows.at(r, 0) = field.x_at(ix);
            rows.at(r, 1) = field.y_at(iy);
            rows.at(r, 2) = field.vol[iy * field.res_x + ix];
            rows.at(r, 3) = field.log_vol[iy * field.res_x + ix];
        }
    io::CsvHeader header;
    header.kind = "field";
    header.extras.emplace_back("res_x", std::to_string(field.res_x));
    header.extras.emplace_back("res_y", std::to_string(field.res_y));
    header.extras.emplace_back("h", io::format_double(field.h));
    header.extras.emplace_back("samples", std::to_string(field.samples));
    io::save_csv_matrix(path, rows, header);
}

VolumeField load_volume_csv(const std::filesystem::path& path) {
    io::CsvFile file = io::load_csv(path);
    if (file.header.kind != "field")
        throw std::runtime_error("expected a volume field CSV: " + path.string());
    VolumeField field;
    field.res_x = std::stoul(file.header.get("res_x"));
    field.res_y = std::stoul(file.header.get("res_y"));
    field.h = std::stod(file.header.get("h", "0"));
    field.samples = std::stoul(file.header.get("samples", "0"));
    if (file.matrix.cols() != 4 || file.matrix.rows() != field.res_x * field.res_y)
        throw std::runtime_error("volume field CSV shape mismatch: " + path.string());
    field.vol.resize(file.matrix.rows());
    field.log_vol.resize(file.matrix.rows());
    for (std::size_t r = 0; r < file.matrix.rows(); ++r) {
        field.vol[r] = file.matrix.at(r, 2);
        field.log_vol[r] = file.matrix.at(r, 3);
    }
    field.min_x = file.matrix.at(0, 0);
    field.min_y = file.matrix.at(0, 1);
    field.max_x = file.matrix.at(field.res_x - 1, 0);
    field.max_y = file.matrix.at(file.matrix.rows() - 1, 1);
    return field;
}

void save_volume_pgm(const std::filesystem::path& path, const VolumeField& field) {
    io::write_pgm(path, field.res_x, field.res_y, field.log_vol);
}

}  // namespace geoclus::geometry
