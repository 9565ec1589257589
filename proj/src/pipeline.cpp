#include "geoclus/pipeline.hpp"

#include <algorithm>
#include <cstdlib>
#include <map>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "geoclus/clustering.hpp"
#include "geoclus/geometry.hpp"
#include "geoclus/io.hpp"
#include "geoclus/latentgmm.hpp"
#include "geoclus/model_io.hpp"
#include "geoclus/rng.hpp"

namespace geoclus::cli {

using diffcore::Activation;
using diffcore::Tensor;
using nlohmann::json;
namespace fs = std::filesystem;

// --- config <-> json ----------------------------------------------------------

namespace {

json dataset_to_json(const DatasetConfig& c) {
    return json{{"name", c.name},
                {"train_per_class", c.train_per_class},
                {"eval_per_class", c.eval_per_class},
                {"noise_sd", c.noise_sd},
                {"idx_images", c.idx_images},
                {"idx_labels", c.idx_labels},
                {"class_filter", c.class_filter}};
}

DatasetConfig dataset_from_json(const json& j) {
    DatasetConfig c;
    c.name = j.value("name", c.name);
    c.train_per_class = j.value("train_per_class", c.train_per_class);
    c.eval_per_class = j.value("eval_per_class", c.eval_per_class);
    c.noise_sd = j.value("noise_sd", c.noise_sd);
    c.idx_images = j.value("idx_images", c.idx_images);
    c.idx_labels = j.value("idx_labels", c.idx_labels);
    c.class_filter = j.value("class_filter", c.class_filter);
    return c;
}

json arch_to_json(const vae::VaeArch& a) {
    json acts;
    return json{{"data_dim", a.data_dim},
                {"latent_dim", a.latent_dim},
                {"enc_hidden_widths", a.enc_hidden_widths},
                {"dec_hidden_widths", a.dec_hidden_widths},
                {"hidden_activation", diffcore::activation_name(a.hidden_activation)},
                {"s_enc_activation", diffcore::activation_name(a.s_enc_activation)},
                {"s_enc_output", vae::s_enc_output_name(a.s_enc_output)},
                {"dec_mean_activation", diffcore::activation_name(a.dec_mean_activation)},
                {"output_variance", a.stage1_output_variance}};
}

vae::VaeArch arch_from_json(const json& j) {
    vae::VaeArch a;
    a.data_dim = j.value("data_dim", a.data_dim);
    a.latent_dim = j.value("latent_dim", a.latent_dim);
    a.enc_hidden_widths = j.value("enc_hidden_widths", a.enc_hidden_widths);
    a.dec_hidden_widths = j.value("dec_hidden_widths", a.dec_hidden_widths);
    if (j.contains("hidden_activation"))
        a.hidden_activation = diffcore::activation_from_name(j["hidden_activation"]);
    if (j.contains("s_enc_activation"))
        a.s_enc_activation = diffcore::activation_from_name(j["s_enc_activation"]);
    if (j.contains("s_enc_output"))
        a.s_enc_output = vae::s_enc_output_from_name(j["s_enc_output"]);
    if (j.contains("dec_mean_activation"))
        a.dec_mean_activation = diffcore::activation_from_name(j["dec_mean_activation"]);
    a.stage1_output_variance = j.value("output_variance", a.stage1_output_variance);
    return a;
}

json train_to_json(const vae::TrainConfig& t) {
    return json{{"epochs", t.epochs},
                {"batch_size", t.batch_size},
                {"learning_rate", t.learning_rate},
                {"kl_weight", t.kl_weight}};
}

vae::TrainConfig train_from_json(const json& j) {
    vae::TrainConfig t;
    t.epochs = j.value("epochs", t.epochs);
    t.batch_size = j.value("batch_size", t.batch_size);
    t.learning_rate = j.value("learning_rate", t.learning_rate);
    t.kl_weight = j.value("kl_weight", t.kl_weight);
    return t;
}

json geodesic_to_json(const geodesic::GeodesicConfig& g) {
    return json{{"n_segments", g.n_segments},
                {"max_iterations", g.max_iterations},
                {"learning_rate", g.learning_rate},
                {"convergence_tol", g.convergence_tol},
                {"init", g.init == geodesic::CurveInit::kAlgorithm1 ? "algorithm1" : "straight"},
                {"init_m", g.init_m},
                {"init_max_step", g.init_max_step}};
}

geodesic::GeodesicConfig geodesic_from_json(const json& j) {
    geodesic::GeodesicConfig g;
    g.n_segments = j.value("n_segments", g.n_segments);
    g.max_iterations = j.value("max_iterations", g.max_iterations);
    g.learning_rate = j.value("learning_rate", g.learning_rate);
    g.convergence_tol = j.value("convergence_tol", g.convergence_tol);
    std::string init = j.value("init", "algorithm1");
    g.init = init == "straight" ? geodesic::CurveInit::kStraight
                                : geodesic::CurveInit::kAlgorithm1;
    g.init_m = j.value("init_m", g.init_m);
    g.init_max_step = j.value("init_max_step", g.init_max_step);
    return g;
}

json config_to_json(const PipelineConfig& c) {
    return json{{"preset", c.preset_name},
                {"seed", c.seed},
                {"out_dir", c.out_dir},
                {"jobs", c.jobs},
                {"stages", c.stages},
                {"dataset", dataset_to_json(c.dataset)},
                {"vae", arch_to_json(c.arch)},
                {"train", train_to_json(c.train)},
                {"gmm",
                 {{"components", c.gmm.components},
                  {"wg_steps", c.gmm.wg_steps},
                  {"wg_learning_rate", c.gmm.wg_learning_rate}}},
                {"geodesic", geodesic_to_json(c.geodesic)},
                {"clustering", {{"k", c.cluster_k}}},
                {"volume",
                 {{"resolution", c.volume.resolution},
                  {"samples", c.volume.samples},
                  {"inflate", c.volume.inflate}}}};
}

PipelineConfig config_from_json(const json& j) {
    PipelineConfig c;
    c.preset_name = j.value("preset", c.preset_name);
    c.seed = j.value("seed", c.seed);
    c.out_dir = j.value("out_dir", c.out_dir);
    c.jobs = j.value("jobs", c.jobs);
    c.stages = j.value("stages", c.stages);
    if (j.contains("dataset")) c.dataset = dataset_from_json(j["dataset"]);
    if (j.contains("vae")) c.arch = arch_from_json(j["vae"]);
    if (j.contains("train")) c.train = train_from_json(j["train"]);
    if (j.contains("gmm")) {
        c.gmm.components = j["gmm"].value("components", c.gmm.components);
        c.gmm.wg_steps = j["gmm"].value("wg_steps", c.gmm.wg_steps);
        c.gmm.wg_learning_rate = j["gmm"].value("wg_learning_rate", c.gmm.wg_learning_rate);
    }
    if (j.contains("geodesic")) c.geodesic = geodesic_from_json(j["geodesic"]);
    if (j.contains("clustering")) c.cluster_k = j["clustering"].value("k", c.cluster_k);
    if (j.contains("volume")) {
        c.volume.resolution = j["volume"].value("resolution", c.volume.resolution);
        c.volume.samples = j["volume"].value("samples", c.volume.samples);
        c.volume.inflate = j["volume"].value("inflate", c.volume.inflate);
    }
    return c;
}

// stage-specific sub-seeds derived from the master seed
enum : std::uint64_t {
    kSeedData = 0x64617461,
    kSeedEval = 0x6576616c,
    kSeedTrain = 0x747261696e,
    kSeedGmm = 0x676d6d,
    kSeedGeo = 0x67656f,
    kSeedCluster = 0x636c7573,
    kSeedVolume = 0x766f6c
};

std::uint64_t sub_seed(const PipelineConfig& c, std::uint64_t stream, std::uint64_t extra = 0) {
    return mix_seed(c.seed, stream, extra);
}

void write_meta(const fs::path& artifact, const PipelineConfig& config,
                const std::string& stage, json extra = json::object()) {
    json meta;
    meta["config_hash"] = config_hash(config);
    meta["seed"] = config.seed;
    meta["stage"] = stage;
    meta["preset"] = config.preset_name;
    if (!extra.empty()) meta["extra"] = std::move(extra);
    fs::path p = artifact;
    p += ".meta.json";
    io::write_text_file(p, meta.dump(2) + "\n");
}

void require_artifact(const fs::path& path, const std::string& needed_by,
                      const std::string& producing_stage) {
    if (!fs::exists(path))
        throw std::runtime_error("stage '" + needed_by + "' requires " + path.string() +
                                 "; run stage '" + producing_stage + "' first");
}

}  // namespace

const std::vector<std::string>& all_stages() {
    static const std::vector<std::string> stages{"generate-data", "train",  "fit-variance",
                                                 "distances",     "cluster", "volume"};
    return stages;
}

std::string config_hash(const PipelineConfig& config) {
    std::string dump = config_to_json(config).dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    for (unsigned char ch : dump) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    std::ostringstream os;
    os << std::hex << h;
    return os.str();
}

PipelineConfig load_config_file(const fs::path& path) {
    return config_from_json(json::parse(io::read_text_file(path)));
}

void save_config_file(const fs::path& path, const PipelineConfig& config) {
    io::write_text_file(path, config_to_json(config).dump(2) + "\n");
}

// --- presets -------------------------------------------------------------------

namespace {

PipelineConfig synthetic_preset() {
    PipelineConfig c;
    c.arch.data_dim = 2;
    c.arch.latent_dim = 2;
    c.arch.enc_hidden_widths = {2, 64, 64};
    c.arch.dec_hidden_widths = {2, 64, 64};
    c.arch.hidden_activation = Activation::kSoftplus;
    c.arch.s_enc_activation = Activation::kSoftplus;
    c.arch.s_enc_output = vae::SEncOutput::kVariance;
    c.train.epochs = 600;
    c.train.batch_size = 64;
    c.train.learning_rate = 2e-3;
    c.train.kl_weight = 0.05;
    c.gmm.components = 10;
    c.geodesic.n_segments = 16;
    return c;
}

PipelineConfig image_preset(std::vector<std::size_t> enc, std::vector<std::size_t> dec,
                            Activation dec_mean_act, std::vector<int> classes, std::size_t k) {
    PipelineConfig c;
    c.dataset.name = "idx";
    c.dataset.train_per_class = 200;
    c.dataset.eval_per_class = k == 2 ? 50 : 30;
    c.dataset.class_filter = std::move(classes);
    c.arch.data_dim = 784;
    c.arch.latent_dim = 2;
    c.arch.enc_hidden_widths = std::move(enc);
    c.arch.dec_hidden_widths = std::move(dec);
    c.arch.hidden_activation = Activation::kRelu;
    c.arch.s_enc_activation = Activation::kSigmoid;
    c.arch.s_enc_output = vae::SEncOutput::kVariance;
    c.arch.dec_mean_activation = dec_mean_act;
    c.train.epochs = 200;
    c.train.batch_size = 64;
    c.train.learning_rate = 1e-3;
    c.train.kl_weight = 1.0;
    c.gmm.components = 50;
    c.geodesic.n_segments = 32;
    c.cluster_k = k;
    return c;
}

}  // namespace

std::vector<std::string> known_presets() {
    return {"two-moons", "aniso", "mnist-01", "mnist-012", "fashion-2", "fashion-3", "emnist-Dd"};
}

PipelineConfig preset(const std::string& name) {
    PipelineConfig c;
    if (name == "two-moons") {
        c = synthetic_preset();
        c.dataset.name = "two-moons";
        c.dataset.train_per_class = 100;
        c.dataset.eval_per_class = 50;
        c.cluster_k = 2;
    } else if (name == "aniso") {
        c = synthetic_preset();
        c.dataset.name = "aniso";
        c.dataset.train_per_class = 67;  // per cluster
        c.dataset.eval_per_class = 33;
        c.gmm.components = 6;  // two per stripe; larger K invites collapse
        c.geodesic.learning_rate = 2e-2;  // long curves across the stripes
        c.cluster_k = 3;
    } else if (name == "mnist-01") {
        c = image_preset({784, 500}, {2, 500}, Activation::kIdentity, {0, 1}, 2);
    } else if (name == "mnist-012") {
        c = image_preset({784, 500}, {2, 500}, Activation::kIdentity, {0, 1, 2}, 3);
    } else if (name == "fashion-2") {
        c = image_preset({784, 500, 200, 100}, {100, 200, 500}, Activation::kSigmoid, {0, 5}, 2);
    } else if (name == "fashion-3") {
        c = image_preset({784, 500, 200, 100}, {100, 200, 500}, Activation::kSigmoid, {0, 5, 8},
                         3);
    } else if (name == "emnist-Dd") {
        // EMNIST byclass indices: 'D' = 13, 'd' = 39
        c = image_preset({784, 500, 200, 100}, {100, 200, 500}, Activation::kSigmoid, {13, 39},
                         2);
    } else {
        throw std::invalid_argument("unknown preset '" + name + "'");
    }
    c.preset_name = name;
    return c;
}

// --- datasets -------------------------------------------------------------------

SplitDataset make_datasets(const DatasetConfig& config, std::uint64_t master_seed) {
    SplitDataset out;
    std::uint64_t train_seed = mix_seed(master_seed, kSeedData);
    std::uint64_t eval_seed = mix_seed(master_seed, kSeedEval);
    if (config.name == "two-moons") {
        out.train = data::two_moons(config.train_per_class, config.noise_sd, train_seed);
        out.eval = data::two_moons(config.eval_per_class, config.noise_sd, eval_seed);
    } else if (config.name == "aniso") {
        out.train = data::aniso_blobs(3 * config.train_per_class, train_seed);
        out.eval = data::aniso_blobs(3 * config.eval_per_class, eval_seed);
    } else if (config.name == "idx") {
        if (config.idx_images.empty() || config.idx_labels.empty())
            throw std::runtime_error(
                "dataset 'idx' needs idx_images and idx_labels paths in the config");
        std::set<int> filter(config.class_filter.begin(), config.class_filter.end());
        data::Dataset full = data::load_idx(config.idx_images, config.idx_labels, filter,
                                            config.train_per_class + config.eval_per_class);
        // seeded per-class shuffle, then split train/eval
        int classes = full.class_count();
        Rng rng(train_seed);
        std::vector<std::vector<std::size_t>> by_class(classes);
        for (std::size_t i = 0; i < full.size(); ++i) by_class[full.labels[i]].push_back(i);
        for (auto& idx : by_class) rng.shuffle(idx);
        std::vector<std::size_t> train_rows, eval_rows;
        for (auto& idx : by_class) {
            std::size_t take_train = std::min(config.train_per_class, idx.size());
            std::size_t take_eval = std::min(config.eval_per_class, idx.size() - take_train);
            for (std::size_t i = 0; i < take_train; ++i) train_rows.push_back(idx[i]);
            for (std::size_t i = 0; i < take_eval; ++i)
                eval_rows.push_back(idx[take_train + i]);
        }
        auto subset = [&](const std::vector<std::size_t>& rows) {
            data::Dataset ds;
            ds.name = "idx";
            ds.normalization = full.normalization;
            ds.points = Tensor({rows.size(), full.dim()});
            ds.labels.resize(rows.size());
            for (std::size_t r = 0; r < rows.size(); ++r) {
                for (std::size_t c = 0; c < full.dim(); ++c)
                    ds.points.at(r, c) = full.points.at(rows[r], c);
                ds.labels[r] = full.labels[rows[r]];
            }
            return ds;
        };
        out.train = subset(train_rows);
        out.eval = subset(eval_rows);
    } else {
        throw std::invalid_argument("unknown dataset '" + config.name + "'");
    }
    return out;
}

// --- stages ----------------------------------------------------------------------

void stage_generate(const PipelineConfig& config, const fs::path& dir) {
    fs::create_directories(dir);
    SplitDataset split = make_datasets(config.dataset, config.seed);
    data::save_csv(dir / "train.csv", split.train);
    data::save_csv(dir / "eval.csv", split.eval);
    write_meta(dir / "train.csv", config, "generate-data");
    write_meta(dir / "eval.csv", config, "generate-data");
    save_config_file(dir / "config.json", config);
}

void stage_train(const PipelineConfig& config, const fs::path& dir) {
    require_artifact(dir / "train.csv", "train", "generate-data");
    data::Dataset train = data::load_dataset_csv(dir / "train.csv");
    vae::VaeArch arch = config.arch;
    if (arch.data_dim != train.dim())
        throw std::runtime_error("configured data_dim " + std::to_string(arch.data_dim) +
                                 " does not match dataset width " + std::to_string(train.dim()));
    vae::TrainConfig tc = config.train;
    tc.seed = sub_seed(config, kSeedTrain);
    tc.batch_size = std::min(tc.batch_size, train.size());
    vae::TrainResult result = vae::train_stage1(train.points, arch, tc);
    model_io::save_model(dir / "model.json", result.model);
    json extra;
    extra["epochs"] = tc.epochs;
    if (!result.loss_trace.empty()) {
        extra["first_loss"] = result.loss_trace.front();
        extra["final_loss"] = result.loss_trace.back();
    }
    write_meta(dir / "model.json", config, "train", extra);
}

void stage_fit_variance(const PipelineConfig& config, const fs::path& dir) {
    require_artifact(dir / "model.json", "fit-variance", "train");
    require_artifact(dir / "train.csv", "fit-variance", "generate-data");
    model_io::LoadedModel loaded = model_io::load_model(dir / "model.json");
    data::Dataset train = data::load_dataset_csv(dir / "train.csv");
    latentgmm::EmConfig em;
    latentgmm::WgConfig wg;
    wg.steps = config.gmm.wg_steps;
    wg.learning_rate = config.gmm.wg_learning_rate;
    latentgmm::PrecisionGmm precision = latentgmm::fit_precision_model(
        loaded.model, train.points, config.gmm.components, sub_seed(config, kSeedGmm), em, wg);
    model_io::save_model(dir / "model.json", loaded.model, precision);
    write_meta(dir / "model.json", config, "fit-variance");
}

void stage_distances(const PipelineConfig& config, const fs::path& dir) {
    require_artifact(dir / "model.json", "distances", "train");
    require_artifact(dir / "eval.csv", "distances", "generate-data");
    model_io::LoadedModel loaded = model_io::load_model(dir / "model.json");
    if (!loaded.precision)
        throw std::runtime_error("model.json has no precision model; run stage 'fit-variance' first");
    data::Dataset eval = data::load_dataset_csv(dir / "eval.csv");

    Tensor latents = vae::encode_means(loaded.model, eval.points);
    data::save_csv(dir / "latents.csv", latents);
    write_meta(dir / "latents.csv", config, "distances");
    if (loaded.model.d == 2) {
        Tensor scatter({latents.rows(), 3});
        for (std::size_t i = 0; i < latents.rows(); ++i) {
            scatter.at(i, 0) = latents.at(i, 0);
            scatter.at(i, 1) = latents.at(i, 1);
            scatter.at(i, 2) = eval.labels[i];
        }
        data::save_csv(dir / "latent_scatter.csv", scatter);
        write_meta(dir / "latent_scatter.csv", config, "distances");
    }

    geodesic::GeneratorModel generator =
        geodesic::make_generator(loaded.model, *loaded.precision);
    geodesic::GeodesicConfig gc = config.geodesic;
    gc.seed = sub_seed(config, kSeedGeo);
    geodesic::PairwiseStats stats;
    geodesic::DistanceMatrix geo =
        geodesic::pairwise_distances(generator, latents, gc, std::max<std::size_t>(1, config.jobs),
                                     &stats);
    geodesic::save_distance_matrix(dir / "distances_geodesic.csv", geo, gc, gc.seed);
    json extra;
    extra["pairs"] = stats.pairs;
    extra["converged_pairs"] = stats.converged_pairs;
    extra["mean_iterations"] = stats.mean_iterations;
    write_meta(dir / "distances_geodesic.csv", config, "distances", extra);

    geodesic::DistanceMatrix euc = clustering::euclidean_latent_matrix(latents);
    geodesic::save_distance_matrix(dir / "distances_euclidean.csv", euc, gc, gc.seed);
    write_meta(dir / "distances_euclidean.csv", config, "distances");
}

namespace {

void save_labels_csv(const fs::path& path, const std::vector<int>& predicted,
                     const std::vector<int>& truth) {
    Tensor rows({predicted.size(), 3});
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        rows.at(i, 0) = static_cast<double>(i);
        rows.at(i, 1) = predicted[i];
        rows.at(i, 2) = truth[i];
    }
    io::CsvHeader header;
    header.kind = "labels";
    header.extras.emplace_back("columns", "index;predicted;truth");
    io::save_csv_matrix(path, rows, header);
}

std::string accuracy_table(double geo, double euc, double spectral) {
    std::ostringstream os;
    os << "method      data samples        distance   accuracy\n";
    char line[128];
    std::snprintf(line, sizeof(line), "%-11s %-19s %-10s %.4f\n", "k-medoids",
                  "reconstructed data", "geodesic", geo);
    os << line;
    std::snprintf(line, sizeof(line), "%-11s %-19s %-10s %.4f\n", "k-medoids", "latent variable",
                  "euclidean", euc);
    os << line;
    std::snprintf(line, sizeof(line), "%-11s %-19s %-10s %.4f\n", "SC", "original data",
                  "euclidean", spectral);
    os << line;
    return os.str();
}

}  // namespace

void stage_cluster(const PipelineConfig& config, const fs::path& dir) {
    require_artifact(dir / "distances_geodesic.csv", "cluster", "distances");
    require_artifact(dir / "distances_euclidean.csv", "cluster", "distances");
    require_artifact(dir / "eval.csv", "cluster", "generate-data");
    data::Dataset eval = data::load_dataset_csv(dir / "eval.csv");
    geodesic::DistanceMatrix geo = geodesic::load_distance_matrix(dir / "distances_geodesic.csv");
    geodesic::DistanceMatrix euc =
        geodesic::load_distance_matrix(dir / "distances_euclidean.csv");

    std::size_t k = config.cluster_k;
    auto geo_result = clustering::kmedoids(geo, k, sub_seed(config, kSeedCluster, 0));
    auto euc_result = clustering::kmedoids(euc, k, sub_seed(config, kSeedCluster, 1));
    auto spectral = clustering::spectral_cluster(eval.points, k, sub_seed(config, kSeedCluster, 2));

    save_labels_csv(dir / "labels_geodesic.csv", geo_result.labels, eval.labels);
    save_labels_csv(dir / "labels_euclidean.csv", euc_result.labels, eval.labels);
    save_labels_csv(dir / "labels_spectral.csv", spectral, eval.labels);
    for (const char* name : {"labels_geodesic.csv", "labels_euclidean.csv", "labels_spectral.csv"})
        write_meta(dir / name, config, "cluster");

    json acc;
    acc["k"] = k;
    acc["geodesic"] = clustering::cluster_accuracy(geo_result.labels, eval.labels);
    acc["euclidean"] = clustering::cluster_accuracy(euc_result.labels, eval.labels);
    acc["spectral"] = clustering::cluster_accuracy(spectral, eval.labels);
    io::write_text_file(dir / "accuracy.json", acc.dump(2) + "\n");
    write_meta(dir / "accuracy.json", config, "cluster");
    io::write_text_file(dir / "accuracy.txt",
                        accuracy_table(acc["geodesic"], acc["euclidean"], acc["spectral"]));
    write_meta(dir / "accuracy.txt", config, "cluster");
}

void stage_volume(const PipelineConfig& config, const fs::path& dir) {
    require_artifact(dir / "model.json", "volume", "train");
    require_artifact(dir / "train.csv", "volume", "generate-data");
    model_io::LoadedModel loaded = model_io::load_model(dir / "model.json");
    if (!loaded.precision)
        throw std::runtime_error("model.json has no precision model; run stage 'fit-variance' first");
    if (loaded.model.d != 2)
        throw std::runtime_error("volume stage needs a 2-D latent space, model has d=" +
                                 std::to_string(loaded.model.d));
    data::Dataset train = data::load_dataset_csv(dir / "train.csv");
    Tensor latents = vae::encode_means(loaded.model, train.points);

    geodesic::GeneratorModel generator =
        geodesic::make_generator(loaded.model, *loaded.precision);
    geometry::VolumeGridConfig grid = geometry::grid_over_latents(latents, config.volume.inflate);
    grid.res_x = grid.res_y = config.volume.resolution;
    grid.samples = config.volume.samples;
    grid.seed = sub_seed(config, kSeedVolume);
    geometry::VolumeField field = geometry::volume_grid(generator, grid);
    geometry::save_volume_csv(dir / "volume.csv", field);
    geometry::save_volume_pgm(dir / "volume.pgm", field);
    write_meta(dir / "volume.csv", config, "volume");
    write_meta(dir / "volume.pgm", config, "volume");
}

std::string report(const fs::path& dir) {
    require_artifact(dir / "accuracy.json", "report", "cluster");
    json acc = json::parse(io::read_text_file(dir / "accuracy.json"));
    std::ostringstream os;
    os << accuracy_table(acc.at("geodesic").get<double>(), acc.at("euclidean").get<double>(),
                         acc.at("spectral").get<double>());

    fs::path geo_meta = dir / "distances_geodesic.csv.meta.json";
    if (fs::exists(geo_meta)) {
        json meta = json::parse(io::read_text_file(geo_meta));
        if (meta.contains("extra")) {
            const json& extra = meta["extra"];
            std::size_t pairs = extra.value("pairs", std::size_t{0});
            std::size_t conv = extra.value("converged_pairs", std::size_t{0});
            double mean_iters = extra.value("mean_iterations", 0.0);
            char line[160];
            std::snprintf(line, sizeof(line),
                          "\ngeodesic pairs converged: %zu/%zu (%.1f%%), mean iterations %.1f\n",
                          conv, pairs, pairs ? 100.0 * conv / pairs : 0.0, mean_iters);
            os << line;
        }
    }
    std::string text = os.str();
    io::write_text_file(dir / "report.txt", text);
    // provenance sidecar, inherited from the clustering stage's record
    fs::path acc_meta = dir / "accuracy.json.meta.json";
    if (fs::exists(acc_meta)) {
        json meta = json::parse(io::read_text_file(acc_meta));
        meta["stage"] = "report";
        meta.erase("extra");
        io::write_text_file(dir / "report.txt.meta.json", meta.dump(2) + "\n");
    }
    return text;
}

// --- driver -----------------------------------------------------------------------

std::filesystem::path resolve_out_dir(const PipelineConfig& config) {
    if (!config.out_dir.empty()) return config.out_dir;
    const char* env = std::getenv("GEOCLUS_OUT");
    fs::path root = env && *env ? fs::path(env) : fs::path("runs");
    return root / (config.preset_name + "-seed" + std::to_string(config.seed));
}

void run_stage(const PipelineConfig& config, const std::string& stage, const fs::path& dir) {
    if (stage == "generate-data")
        stage_generate(config, dir);
    else if (stage == "train")
        stage_train(config, dir);
    else if (stage == "fit-variance")
        stage_fit_variance(config, dir);
    else if (stage == "distances")
        stage_distances(config, dir);
    else if (stage == "cluster")
        stage_cluster(config, dir);
    else if (stage == "volume")
        stage_volume(config, dir);
    else
        throw std::invalid_argument("unknown stage '" + stage + "'");
}

std::filesystem::path run(const PipelineConfig& config) {
    fs::path dir = resolve_out_dir(config);
    const std::vector<std::string>& stages = config.stages.empty() ? all_stages() : config.stages;
    for (const std::string& stage : stages) run_stage(config, stage, dir);
    return dir;
}

void render_heatmap(const fs::path& csv_path, const fs::path& pgm_path) {
    io::CsvFile file = io::load_csv(csv_path);
    if (file.header.kind == "field") {
        geometry::VolumeField field = geometry::load_volume_csv(csv_path);
        io::write_pgm(pgm_path, field.res_x, field.res_y, field.log_vol);
        return;
    }
    io::write_pgm(pgm_path, file.matrix.cols(), file.matrix.rows(), file.matrix.values());
}

}  // namespace geoclus::cli
