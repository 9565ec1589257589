#include "geoclus/model_io.hpp"

#include <stdexcept>

#include <json.hpp>

#include "geoclus/io.hpp"

namespace geoclus::model_io {

using diffcore::Mlp;
using diffcore::MlpSpec;
using diffcore::Tensor;
using nlohmann::json;

namespace {

constexpr int kFormatVersion = 1;

json mlp_to_json(const Mlp& mlp) {
    json j;
    j["widths"] = mlp.spec.widths;
    json acts = json::array();
    for (auto a : mlp.spec.activations) acts.push_back(diffcore::activation_name(a));
    j["activations"] = acts;
    json weights = json::array(), biases = json::array();
    for (const auto& w : mlp.weights)
        weights.push_back(std::vector<double>(w.data(), w.data() + w.size()));
    for (const auto& b : mlp.biases)
        biases.push_back(std::vector<double>(b.data(), b.data() + b.size()));
    j["weights"] = weights;
    j["biases"] = biases;
    return j;
}

Mlp mlp_from_json(const json& j) {
    MlpSpec spec;
    spec.widths = j.at("widths").get<std::vector<std::size_t>>();
    for (const auto& name : j.at("activations"))
        spec.activations.push_back(diffcore::activation_from_name(name.get<std::string>()));
    spec.validate();
    Mlp mlp{spec, {}, {}};
    const json& weights = j.at("weights");
    const json& biases = j.at("biases");
    if (weights.size() != spec.layer_count() || biases.size() != spec.layer_count())
        throw std::runtime_error("model JSON: layer parameter count mismatch");
    for (std::size_t l = 0; l < spec.layer_count(); ++l) {
        mlp.weights.push_back(Tensor::matrix(spec.widths[l], spec.widths[l + 1],
                                             weights[l].get<std::vector<double>>()));
        mlp.biases.push_back(Tensor::vec(biases[l].get<std::vector<double>>()));
    }
    mlp.validate();
    return mlp;
}

json precision_to_json(const latentgmm::PrecisionGmm& p) {
    json j;
    j["K"] = p.mixture.K;
    j["weights"] = p.mixture.weights;
    j["means"] = p.mixture.means;
    j["cov_diag"] = p.mixture.cov_diag;
    j["wg"] = p.wg;
    j["floor"] = p.floor;
    return j;
}

latentgmm::PrecisionGmm precision_from_json(const json& j) {
    latentgmm::PrecisionGmm p;
    p.mixture.K = j.at("K").get<std::size_t>();
    p.mixture.weights = j.at("weights").get<std::vector<double>>();
    p.mixture.means = j.at("means").get<std::vector<std::vector<double>>>();
    p.mixture.cov_diag = j.at("cov_diag").get<std::vector<std::vector<double>>>();
    p.mixture.d = p.mixture.means.empty() ? 0 : p.mixture.means[0].size();
    p.wg = j.at("wg").get<std::vector<double>>();
    p.floor = j.at("floor").get<double>();
    p.validate();
    return p;
}

}  // namespace

void save_model(const std::filesystem::path& path, const vae::VaeModel& model,
                const std::optional<latentgmm::PrecisionGmm>& precision) {
    model.validate();
    json j;
    j["format_version"] = kFormatVersion;
    j["d"] = model.d;
    j["D"] = model.D;
    j["stage1_output_variance"] = model.stage1_output_variance;
    j["rng_seed"] = model.rng_seed;
    j["s_enc_output"] = vae::s_enc_output_name(model.s_enc_output);
    j["networks"] = {{"enc_hidden", mlp_to_json(model.enc_hidden)},
                     {"enc_mean", mlp_to_json(model.enc_mean)},
                     {"enc_logvar", mlp_to_json(model.enc_logvar)},
                     {"dec_hidden", mlp_to_json(model.dec_hidden)},
                     {"dec_mean", mlp_to_json(model.dec_mean)}};
    if (precision) {
        precision->validate();
        j["precision"] = precision_to_json(*precision);
    }
    io::write_text_file(path, j.dump(1) + "\n");
}

LoadedModel load_model(const std::filesystem::path& path) {
    json j = json::parse(io::read_text_file(path));
    int version = j.at("format_version").get<int>();
    if (version != kFormatVersion)
        throw std::runtime_error("model JSON: unsupported format version " +
                                 std::to_string(version));
    LoadedModel out;
    out.model.d = j.at("d").get<std::size_t>();
    out.model.D = j.at("D").get<std::size_t>();
    out.model.stage1_output_variance = j.at("stage1_output_variance").get<double>();
    out.model.rng_seed = j.at("rng_seed").get<std::uint64_t>();
    out.model.s_enc_output = vae::s_enc_output_from_name(j.at("s_enc_output").get<std::string>());
    const json& nets = j.at("networks");
    out.model.enc_hidden = mlp_from_json(nets.at("enc_hidden"));
    out.model.enc_mean = mlp_from_json(nets.at("enc_mean"));
    out.model.enc_logvar = mlp_from_json(nets.at("enc_logvar"));
    out.model.dec_hidden = mlp_from_json(nets.at("dec_hidden"));
    out.model.dec_mean = mlp_from_json(nets.at("dec_mean"));
    out.model.validate();
    if (j.contains("precision")) out.precision = precision_from_json(j.at("precision"));
    return out;
}

}  // namespace geoclus::model_io
