#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "geoclus/geometry.hpp"
#include "geoclus/io.hpp"
#include "geoclus/rng.hpp"
#include "support/fixtures.hpp"

using namespace geoclus;
using namespace geoclus::geometry;
using diffcore::Activation;
using diffcore::MlpSpec;
using diffcore::Tensor;
using geodesic::ConstantVariance;
using geodesic::GeneratorModel;
using geodesic::ZeroVariance;

namespace {

GeneratorModel diagonal_model(double sx, double sy, geodesic::VarianceModel variance) {
    GeneratorModel m;
    m.d = 2;
    m.D = 2;
    m.mean_map = diffcore::mlp_zeros(MlpSpec{{2, 2}, {Activation::kIdentity}});
    m.mean_map.weights[0].at(0, 0) = sx;
    m.mean_map.weights[0].at(1, 1) = sy;
    m.variance = std::move(variance);
    return m;
}

}  // namespace

TEST_CASE("expected_volume_at: deterministic linear maps are exact") {
    GeneratorModel scaled = diagonal_model(3.0, 2.0, ZeroVariance{});
    GeneratorModel ident = diagonal_model(1.0, 1.0, ZeroVariance{});
    Rng rng(6);
    for (int t = 0; t < 5; ++t) {
        std::vector<double> z{rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0)};
        for (double h : {0.5, 0.05, 0.001}) {
            CHECK(expected_volume_at(scaled, z, h, 3, 1) == doctest::Approx(6.0).epsilon(1e-10));
            CHECK(expected_volume_at(ident, z, h, 3, 1) == doctest::Approx(1.0).epsilon(1e-10));
        }
    }
}

TEST_CASE("expected_volume_at rejects non-2-D latent spaces") {
    GeneratorModel m;
    m.d = 3;
    m.D = 3;
    m.mean_map = diffcore::mlp_zeros(MlpSpec{{3, 3}, {Activation::kIdentity}});
    CHECK_THROWS_AS(expected_volume_at(m, std::vector<double>{0, 0, 0}, 0.1, 4, 1),
                    std::invalid_argument);
}

TEST_CASE("generator noise inflates the expected volume") {
    GeneratorModel noiseless = diagonal_model(3.0, 2.0, ZeroVariance{});
    GeneratorModel noisy = diagonal_model(3.0, 2.0, ConstantVariance{{0.25, 0.25}});
    std::vector<double> z{0.3, -0.4};
    double h = 0.1;
    double base = expected_volume_at(noiseless, z, h, 1, 1);
    double inflated = expected_volume_at(noisy, z, h, 10000, 1);
    CHECK(base == doctest::Approx(6.0).epsilon(1e-10));
    CHECK(inflated > base);
}

TEST_CASE("volume_grid: flat model gives a constant field") {
    GeneratorModel ident = diagonal_model(1.0, 1.0, ZeroVariance{});
    VolumeGridConfig cfg;
    cfg.min_x = -1;
    cfg.max_x = 1;
    cfg.min_y = -1;
    cfg.max_y = 1;
    cfg.res_x = 6;
    cfg.res_y = 5;
    cfg.samples = 2;
    VolumeField field = volume_grid(ident, cfg);
    REQUIRE(field.vol.size() == 30);
    for (double v : field.vol) CHECK(v == doctest::Approx(1.0).epsilon(1e-10));
    // grid covers the requested bounds exactly
    CHECK(field.x_at(0) == -1.0);
    CHECK(field.x_at(cfg.res_x - 1) == 1.0);
    CHECK(field.y_at(cfg.res_y - 1) == 1.0);
}

TEST_CASE("volume_grid is deterministic under the seed") {
    GeneratorModel noisy = diagonal_model(2.0, 1.0, ConstantVariance{{0.1, 0.2}});
    VolumeGridConfig cfg;
    cfg.res_x = 4;
    cfg.res_y = 4;
    cfg.samples = 8;
    cfg.seed = 33;
    VolumeField a = volume_grid(noisy, cfg);
    VolumeField b = volume_grid(noisy, cfg);
    CHECK(a.vol == b.vol);
}

TEST_CASE("trained two-moons model: on-data volume below off-data volume") {
    const auto& fx = testing::two_moons_fixture();
    GeneratorModel gen = geodesic::make_generator(fx.model, fx.precision);

    VolumeGridConfig cfg = grid_over_latents(fx.latents, 0.2);
    cfg.res_x = 24;
    cfg.res_y = 24;
    cfg.samples = 32;
    cfg.seed = 11;
    VolumeField field = volume_grid(gen, cfg);

    // on-data: log-volume sampled at the latent codes themselves
    double on_data = 0.0;
    for (std::size_t i = 0; i < fx.latents.rows(); ++i) {
        std::vector<double> z{fx.latents.at(i, 0), fx.latents.at(i, 1)};
        on_data += std::log(std::max(
            expected_volume_at(gen, z, field.h, cfg.samples, mix_seed(cfg.seed, 999, i)), 1e-300));
    }
    on_data /= static_cast<double>(fx.latents.rows());

    // off-data: grid nodes far from every latent code
    double nn_acc = 0.0;
    for (std::size_t i = 0; i < fx.latents.rows(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < fx.latents.rows(); ++j) {
            if (i == j) continue;
            best = std::min(best, std::hypot(fx.latents.at(i, 0) - fx.latents.at(j, 0),
                                             fx.latents.at(i, 1) - fx.latents.at(j, 1)));
        }
        nn_acc += best;
    }
    double threshold = 3.0 * nn_acc / static_cast<double>(fx.latents.rows());

    double off_data = 0.0;
    std::size_t off_count = 0;
    for (std::size_t iy = 0; iy < field.res_y; ++iy)
        for (std::size_t ix = 0; ix < field.res_x; ++ix) {
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < fx.latents.rows(); ++i)
                best = std::min(best, std::hypot(field.x_at(ix) - fx.latents.at(i, 0),
                                                 field.y_at(iy) - fx.latents.at(i, 1)));
            if (best > threshold) {
                off_data += field.log_vol[iy * field.res_x + ix];
                ++off_count;
            }
        }
    REQUIRE(off_count > 0);
    off_data /= static_cast<double>(off_count);
    MESSAGE("log-volume on-data " << on_data << " vs off-data " << off_data);
    CHECK(on_data < off_data);
}

TEST_CASE("halving h moves smooth-surface volumes by less than 5 percent") {
    // first-order stability holds for the trained mean surface; the noise
    // term of the full stochastic estimator scales like sigma^2 / h^2 and
    // has no h-stable window by construction
    const auto& fx = testing::two_moons_fixture();
    GeneratorModel gen = geodesic::make_generator(fx.model, fx.precision);
    gen.variance = geodesic::ZeroVariance{};
    Rng probe(23);
    for (int t = 0; t < 6; ++t) {
        std::size_t i = probe.below(fx.latents.rows());
        std::vector<double> z{fx.latents.at(i, 0), fx.latents.at(i, 1)};
        double coarse = expected_volume_at(gen, z, 0.02, 1, 7);
        double fine = expected_volume_at(gen, z, 0.01, 1, 7);
        CHECK(std::abs(fine - coarse) / std::max(std::abs(coarse), 1e-12) < 0.05);
        CHECK(coarse >= 0.0);
        CHECK(fine >= 0.0);
    }
}

TEST_CASE("volume field CSV and PGM round trip") {
    GeneratorModel noisy = diagonal_model(2.0, 1.0, ConstantVariance{{0.1, 0.2}});
    VolumeGridConfig cfg;
    cfg.res_x = 5;
    cfg.res_y = 3;
    cfg.samples = 4;
    VolumeField field = volume_grid(noisy, cfg);

    auto dir = std::filesystem::temp_directory_path() / "geoclus_test_vol";
    std::filesystem::create_directories(dir);
    save_volume_csv(dir / "field.csv", field);
    VolumeField back = load_volume_csv(dir / "field.csv");
    CHECK(back.res_x == field.res_x);
    CHECK(back.res_y == field.res_y);
    for (std::size_t i = 0; i < field.vol.size(); ++i)
        CHECK(back.vol[i] == doctest::Approx(field.vol[i]).epsilon(1e-15));

    save_volume_pgm(dir / "field.pgm", field);
    std::string pgm = io::read_text_file(dir / "field.pgm");
    CHECK(pgm.rfind("P5\n5 3\n255\n", 0) == 0);
    CHECK(pgm.size() == std::string("P5\n5 3\n255\n").size() + 15);
    std::filesystem::remove_all(dir);
}
