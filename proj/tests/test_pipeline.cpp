#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <map>

#include <json.hpp>

#include "geoclus/io.hpp"
#include "geoclus/model_io.hpp"
#include "geoclus/pipeline.hpp"

using namespace geoclus;
using namespace geoclus::cli;
namespace fs = std::filesystem;

namespace {

// Small config that exercises every stage in a few seconds.
PipelineConfig tiny_config(const fs::path& dir) {
    PipelineConfig c = preset("two-moons");
    c.preset_name = "tiny";
    c.out_dir = dir.string();
    c.seed = 3;
    c.dataset.train_per_class = 24;
    c.dataset.eval_per_class = 8;
    c.train.epochs = 120;
    c.train.batch_size = 16;
    c.gmm.components = 4;
    c.gmm.wg_steps = 400;
    c.geodesic.n_segments = 8;
    c.geodesic.max_iterations = 200;
    c.volume.resolution = 8;
    c.volume.samples = 8;
    c.jobs = 2;
    return c;
}

std::map<std::string, std::string> snapshot_files(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& entry : fs::recursive_directory_iterator(dir))
        if (entry.is_regular_file())
            out[fs::relative(entry.path(), dir).string()] = io::read_text_file(entry.path());
    return out;
}

}  // namespace

TEST_CASE("model JSON round trip preserves every value") {
    vae::VaeArch arch;
    arch.enc_hidden_widths = {2, 6};
    arch.dec_hidden_widths = {2, 6};
    vae::VaeModel model = vae::init_model(arch, 12);

    latentgmm::PrecisionGmm precision;
    precision.mixture.K = 2;
    precision.mixture.d = 2;
    precision.mixture.weights = {0.25, 0.75};
    precision.mixture.means = {{0.1, -0.2}, {1.0, 2.0}};
    precision.mixture.cov_diag = {{0.5, 0.25}, {2.0, 1.0}};
    precision.wg = {3.0, 0.125};
    precision.floor = 1.25e-7;

    auto dir = fs::temp_directory_path() / "geoclus_test_model_io";
    fs::create_directories(dir);
    model_io::save_model(dir / "model.json", model, precision);
    model_io::LoadedModel back = model_io::load_model(dir / "model.json");

    REQUIRE(back.precision.has_value());
    CHECK(back.model.d == model.d);
    CHECK(back.model.D == model.D);
    CHECK(back.model.s_enc_output == model.s_enc_output);
    for (std::size_t l = 0; l < model.enc_hidden.weights.size(); ++l)
        for (std::size_t i = 0; i < model.enc_hidden.weights[l].size(); ++i)
            CHECK(back.model.enc_hidden.weights[l][i] == model.enc_hidden.weights[l][i]);
    for (std::size_t i = 0; i < model.dec_mean.weights[0].size(); ++i)
        CHECK(back.model.dec_mean.weights[0][i] == model.dec_mean.weights[0][i]);
    CHECK(back.precision->wg == precision.wg);
    CHECK(back.precision->floor == precision.floor);
    CHECK(back.precision->mixture.cov_diag == precision.mixture.cov_diag);
    fs::remove_all(dir);
}

TEST_CASE("preset catalog") {
    for (const auto& name : known_presets()) CHECK(preset(name).preset_name == name);
    CHECK_THROWS_AS(preset("nope"), std::invalid_argument);
    CHECK(preset("two-moons").cluster_k == 2);
    CHECK(preset("aniso").cluster_k == 3);
    CHECK(preset("mnist-012").cluster_k == 3);
    CHECK(preset("fashion-2").arch.enc_hidden_widths ==
          std::vector<std::size_t>{784, 500, 200, 100});
}

TEST_CASE("config JSON round trip") {
    PipelineConfig c = preset("aniso");
    c.seed = 99;
    c.jobs = 4;
    c.stages = {"train", "distances"};
    c.geodesic.n_segments = 24;
    auto dir = fs::temp_directory_path() / "geoclus_test_cfg";
    fs::create_directories(dir);
    save_config_file(dir / "c.json", c);
    PipelineConfig back = load_config_file(dir / "c.json");
    CHECK(back.preset_name == "aniso");
    CHECK(back.seed == 99);
    CHECK(back.jobs == 4);
    CHECK(back.stages == c.stages);
    CHECK(back.geodesic.n_segments == 24);
    CHECK(back.cluster_k == 3);
    CHECK(config_hash(back) == config_hash(c));
    fs::remove_all(dir);
}

TEST_CASE("pipeline end-to-end, idempotence, and report") {
    auto dir = fs::temp_directory_path() / "geoclus_test_run";
    fs::remove_all(dir);
    PipelineConfig config = tiny_config(dir);

    SUBCASE("stage 3 without stage 1 artifacts is a prerequisite error") {
        fs::create_directories(dir);
        CHECK_THROWS_WITH_AS(stage_distances(config, dir),
                             doctest::Contains("run stage 'train' first"), std::runtime_error);
        CHECK_THROWS_WITH_AS(stage_train(config, dir),
                             doctest::Contains("run stage 'generate-data' first"),
                             std::runtime_error);
        fs::remove_all(dir);
    }

    SUBCASE("full run produces the expected artifacts") {
        run(config);
        for (const char* name :
             {"train.csv", "eval.csv", "model.json", "latents.csv", "latent_scatter.csv",
              "distances_geodesic.csv", "distances_geodesic.json", "distances_euclidean.csv",
              "labels_geodesic.csv", "labels_euclidean.csv", "labels_spectral.csv",
              "accuracy.json", "accuracy.txt", "volume.csv", "volume.pgm", "config.json"}) {
            CAPTURE(name);
            CHECK(fs::exists(dir / name));
        }
        // sidecars record provenance
        for (const char* name : {"train.csv", "model.json", "accuracy.json", "volume.csv"}) {
            CAPTURE(name);
            CHECK(fs::exists(dir / (std::string(name) + ".meta.json")));
        }

        std::string table = report(dir);
        CHECK(table.find("k-medoids") != std::string::npos);
        CHECK(table.find("geodesic") != std::string::npos);
        CHECK(table.find("SC") != std::string::npos);
        CHECK(fs::exists(dir / "report.txt"));
        CHECK(fs::exists(dir / "report.txt.meta.json"));

        auto acc = io::read_text_file(dir / "accuracy.json");
        CHECK(acc.find("geodesic") != std::string::npos);
        auto parsed = nlohmann::json::parse(acc);
        for (const char* method : {"geodesic", "euclidean", "spectral"}) {
            double a = parsed.at(method).get<double>();
            CHECK(a >= 0.0);
            CHECK(a <= 1.0);
        }

        // rerun with the same config and seeds: byte-identical outputs
        auto before = snapshot_files(dir);
        run(config);
        report(dir);
        auto after = snapshot_files(dir);
        REQUIRE(before.size() == after.size());
        for (const auto& [name, content] : before) {
            CAPTURE(name);
            CHECK(after.at(name) == content);
        }
        fs::remove_all(dir);
    }
}

TEST_CASE("render_heatmap: degenerate and two-by-two fields") {
    auto dir = fs::temp_directory_path() / "geoclus_test_heat";
    fs::create_directories(dir);

    // constant field: mid-gray 128
    data::save_csv(dir / "const.csv", diffcore::Tensor::matrix(2, 2, {3.0, 3.0, 3.0, 3.0}));
    render_heatmap(dir / "const.csv", dir / "const.pgm");
    std::string constant = io::read_text_file(dir / "const.pgm");
    std::string header = "P5\n2 2\n255\n";
    REQUIRE(constant.size() == header.size() + 4);
    for (int i = 0; i < 4; ++i)
        CHECK(static_cast<unsigned char>(constant[header.size() + i]) == 128);

    // min-max endpoints map to 0 and 255
    data::save_csv(dir / "checker.csv", diffcore::Tensor::matrix(2, 2, {0.0, 1.0, 1.0, 0.0}));
    render_heatmap(dir / "checker.csv", dir / "checker.pgm");
    std::string checker = io::read_text_file(dir / "checker.pgm");
    CHECK(checker.rfind(header, 0) == 0);
    CHECK(static_cast<unsigned char>(checker[header.size() + 0]) == 0);
    CHECK(static_cast<unsigned char>(checker[header.size() + 1]) == 255);
    CHECK(static_cast<unsigned char>(checker[header.size() + 2]) == 255);
    CHECK(static_cast<unsigned char>(checker[header.size() + 3]) == 0);
    fs::remove_all(dir);
}
