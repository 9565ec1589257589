#include "geoclus/vae.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "geoclus/optimizer.hpp"
#include "geoclus/rng.hpp"

namespace geoclus::vae {

namespace {
// Keeps log(variance) finite when a positive head underflows.
constexpr double kVarianceFloor = 1e-12;
}  // namespace

const char* s_enc_output_name(SEncOutput s) {
    return s == SEncOutput::kLogVariance ? "log-variance" : "variance";
}

SEncOutput s_enc_output_from_name(const std::string& name) {
    if (name == "log-variance") return SEncOutput::kLogVariance;
    if (name == "variance") return SEncOutput::kVariance;
    throw std::invalid_argument("unknown s_enc output mode: " + name);
}

void VaeModel::validate() const {
    enc_hidden.validate();
    enc_mean.validate();
    enc_logvar.validate();
    dec_hidden.validate();
    dec_mean.validate();
    if (enc_hidden.spec.input_width() != D)
        throw std::invalid_argument("VaeModel: encoder input width != D");
    if (enc_mean.spec.output_width() != d || enc_logvar.spec.output_width() != d)
        throw std::invalid_argument("VaeModel: encoder head width != d");
    if (dec_hidden.spec.input_width() != d)
        throw std::invalid_argument("VaeModel: decoder input width != d");
    if (dec_mean.spec.output_width() != D)
        throw std::invalid_argument("VaeModel: decoder mean width != D");
    if (!(stage1_output_variance > 0.0))
        throw std::invalid_argument("VaeModel: stage1 output variance must be positive");
}

Mlp VaeModel::decoder() const { return diffcore::mlp_concat(dec_hidden, dec_mean); }

void VaeArch::validate() const {
    if (enc_hidden_widths.size() < 2 || dec_hidden_widths.size() < 2)
        throw std::invalid_argument("VaeArch: hidden trunks need at least two widths");
    if (enc_hidden_widths.front() != data_dim)
        throw std::invalid_argument("VaeArch: encoder trunk must start at data_dim");
    if (dec_hidden_widths.front() != latent_dim)
        throw std::invalid_argument("VaeArch: decoder trunk must start at latent_dim");
    if (!(stage1_output_variance > 0.0))
        throw std::invalid_argument("VaeArch: stage1 output variance must be positive");
}

VaeModel init_model(const VaeArch& arch, std::uint64_t seed) {
    arch.validate();
    Rng rng(seed);
    auto trunk_spec = [&](const std::vector<std::size_t>& widths) {
        MlpSpec s{widths, std::vector<Activation>(widths.size() - 1, arch.hidden_activation)};
        return s;
    };
    VaeModel m;
    m.d = arch.latent_dim;
    m.D = arch.data_dim;
    m.rng_seed = seed;
    m.s_enc_output = arch.s_enc_output;
    m.stage1_output_variance = arch.stage1_output_variance;
    m.enc_hidden = diffcore::mlp_init(trunk_spec(arch.enc_hidden_widths), rng);
    m.enc_mean = diffcore::mlp_init(
        MlpSpec{{arch.enc_hidden_widths.back(), arch.latent_dim}, {Activation::kIdentity}}, rng);
    m.enc_logvar = diffcore::mlp_init(
        MlpSpec{{arch.enc_hidden_widths.back(), arch.latent_dim}, {arch.s_enc_activation}}, rng);
    m.dec_hidden = diffcore::mlp_init(trunk_spec(arch.dec_hidden_widths), rng);
    m.dec_mean = diffcore::mlp_init(
        MlpSpec{{arch.dec_hidden_widths.back(), arch.data_dim}, {arch.dec_mean_activation}}, rng);
    m.validate();
    return m;
}

LatentCode encode(const VaeModel& model, std::span<const double> x) {
    if (x.size() != model.D)
        throw std::invalid_argument("encode: input width != D");
    LatentCode code;
    auto h = diffcore::mlp_eval(model.enc_hidden, x);
    code.mean = diffcore::mlp_eval(model.enc_mean, h);
    code.log_variance = diffcore::mlp_eval(model.enc_logvar, h);
    if (model.s_enc_output == SEncOutput::kVariance)
        for (double& v : code.log_variance) v = std::log(v + kVarianceFloor);
    diffcore::require_finite(code.mean, "latent mean");
    diffcore::require_finite(code.log_variance, "latent log-variance");
    return code;
}

std::vector<double> reparam_sample(const LatentCode& code, std::span<const double> eps) {
    if (eps.size() != code.mean.size())
        throw std::invalid_argument("reparam_sample: eps width mismatch");
    std::vector<double> z(code.mean.size());
    for (std::size_t j = 0; j < z.size(); ++j)
        z[j] = code.mean[j] + std::exp(0.5 * code.log_variance[j]) * eps[j];
    return z;
}

std::vector<double> decode_mean(const VaeModel& model, std::span<const double> z) {
    if (z.size() != model.d)
        throw std::invalid_argument("decode_mean: input width != d");
    auto h = diffcore::mlp_eval(model.dec_hidden, z);
    return diffcore::mlp_eval(model.dec_mean, h);
}

double kl_to_standard_normal(const LatentCode& code) {
    double acc = 0.0;
    for (std::size_t j = 0; j < code.mean.size(); ++j) {
        double lv = code.log_variance[j];
        acc += code.mean[j] * code.mean[j] + std::exp(lv) - 1.0 - lv;
    }
    return 0.5 * acc;
}

// --- ELBO graph -------------------------------------------------------------

ElboObjective::ElboObjective(const VaeModel& model, std::size_t batch, double kl_weight,
                             bool trainable)
    : batch_(batch) {
    model.validate();
    if (batch == 0) throw std::invalid_argument("ElboObjective: empty batch");
    Graph& g = graph_;
    double s = model.stage1_output_variance;
    double B = static_cast<double>(batch);
    double Dd = static_cast<double>(model.D);
    double dd = static_cast<double>(model.d);

    x_in_ = g.constant(Tensor({batch, model.D}));
    eps_in_ = g.constant(Tensor({batch, model.d}));

    p_enc_hidden_ = diffcore::mlp_add_params(g, model.enc_hidden, trainable);
    p_enc_mean_ = diffcore::mlp_add_params(g, model.enc_mean, trainable);
    p_enc_logvar_ = diffcore::mlp_add_params(g, model.enc_logvar, trainable);
    p_dec_hidden_ = diffcore::mlp_add_params(g, model.dec_hidden, trainable);
    p_dec_mean_ = diffcore::mlp_add_params(g, model.dec_mean, trainable);
    if (trainable) {
        p_enc_hidden_.append_to(params_);
        p_enc_mean_.append_to(params_);
        p_enc_logvar_.append_to(params_);
        p_dec_hidden_.append_to(params_);
        p_dec_mean_.append_to(params_);
    }

    NodeId h = diffcore::mlp_apply(g, model.enc_hidden.spec, p_enc_hidden_, x_in_);
    NodeId mean = diffcore::mlp_apply(g, model.enc_mean.spec, p_enc_mean_, h);
    NodeId head = diffcore::mlp_apply(g, model.enc_logvar.spec, p_enc_logvar_, h);
    NodeId logvar = model.s_enc_output == SEncOutput::kVariance
                        ? g.log(g.shift(head, kVarianceFloor))
                        : head;

    NodeId z = g.add(mean, g.mul(g.exp(g.scale(logvar, 0.5)), eps_in_));
    NodeId mu = diffcore::mlp_apply(g, model.dec_mean.spec, p_dec_mean_,
                                    diffcore::mlp_apply(g, model.dec_hidden.spec, p_dec_hidden_, z));

    NodeId resid_ss = g.sum(g.square(g.sub(x_in_, mu)));
    NodeId loglik_sum =
        g.shift(g.scale(resid_ss, -0.5 / s), -0.5 * B * Dd * std::log(2.0 * M_PI * s));

    NodeId kl_parts = g.add(g.sum(g.square(mean)),
                            g.add(g.sum(g.exp(logvar)), g.negate(g.sum(logvar))));
    NodeId kl_sum = g.shift(g.scale(kl_parts, 0.5), -0.5 * B * dd);

    elbo_ = g.scale(g.add(loglik_sum, g.scale(kl_sum, -kl_weight)), 1.0 / B);
    loss_ = g.negate(elbo_);
}

void ElboObjective::set_batch(const Tensor& x, const Tensor& eps) {
    graph_.set_value(x_in_, x);
    graph_.set_value(eps_in_, eps);
}

double ElboObjective::forward_elbo() { return graph_.forward(elbo_)[0]; }

double ElboObjective::forward_backward_loss() {
    double loss = graph_.forward(loss_)[0];
    graph_.backward(loss_);
    return loss;
}

void ElboObjective::read_back(VaeModel& into) const {
    diffcore::mlp_read_params(graph_, p_enc_hidden_, into.enc_hidden);
    diffcore::mlp_read_params(graph_, p_enc_mean_, into.enc_mean);
    diffcore::mlp_read_params(graph_, p_enc_logvar_, into.enc_logvar);
    diffcore::mlp_read_params(graph_, p_dec_hidden_, into.dec_hidden);
    diffcore::mlp_read_params(graph_, p_dec_mean_, into.dec_mean);
}

double elbo(const VaeModel& model, const Tensor& x_batch, const Tensor& eps_batch,
            double kl_weight) {
    if (x_batch.rank() != 2 || eps_batch.rank() != 2 || x_batch.rows() != eps_batch.rows())
        throw std::invalid_argument("elbo: need one eps row per batch row");
    if (x_batch.cols() != model.D || eps_batch.cols() != model.d)
        throw std::invalid_argument("elbo: batch width mismatch");
    ElboObjective obj(model, x_batch.rows(), kl_weight, false);
    obj.set_batch(x_batch, eps_batch);
    return obj.forward_elbo();
}

TrainResult train_stage1(const Tensor& points, const VaeArch& arch, const TrainConfig& config) {
    if (points.rank() != 2 || points.rows() == 0)
        throw std::invalid_argument("train_stage1: empty dataset");
    if (points.cols() != arch.data_dim)
        throw std::invalid_argument("train_stage1: dataset width != data_dim");
    std::size_t n = points.rows();
    if (config.batch_size == 0 || config.batch_size > n)
        throw std::invalid_argument("train_stage1: batch size must be in [1, dataset size]");

    TrainResult result;
    result.model = init_model(arch, config.seed);
    if (config.epochs == 0) return result;

    std::size_t B = config.batch_size;
    ElboObjective obj(result.model, B, config.kl_weight, true);
    diffcore::AdamConfig adam_cfg;
    adam_cfg.learning_rate = config.learning_rate;
    diffcore::Adam opt(obj.graph(), obj.trainable_params(), adam_cfg);

    Rng rng(mix_seed(config.seed, 0x7261696e));  // training stream
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);

    Tensor xb({B, arch.data_dim});
    Tensor epsb({B, arch.latent_dim});
    std::size_t steps_per_epoch = n / B;

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_loss = 0.0;
        for (std::size_t step = 0; step < steps_per_epoch; ++step) {
            for (std::size_t r = 0; r < B; ++r) {
                std::size_t src = order[step * B + r];
                for (std::size_t c = 0; c < arch.data_dim; ++c)
                    xb.at(r, c) = points.at(src, c);
            }
            for (std::size_t i = 0; i < epsb.size(); ++i) epsb[i] = rng.normal();
            obj.set_batch(xb, epsb);
            double loss;
            try {
                loss = obj.forward_backward_loss();
            } catch (const std::runtime_error& e) {
                throw std::runtime_error("train_stage1: non-finite loss at epoch " +
                                         std::to_string(epoch) + ", step " + std::to_string(step) +
                                         ": " + e.what());
            }
            opt.step();
            epoch_loss += loss;
        }
        result.loss_trace.push_back(epoch_loss / static_cast<double>(steps_per_epoch));
    }
    obj.read_back(result.model);
    return result;
}

Tensor encode_means(const VaeModel& model, const Tensor& points) {
    if (points.rank() != 2 || points.cols() != model.D)
        throw std::invalid_argument("encode_means: dataset width != D");
    Tensor out({points.rows(), model.d});
    std::vector<double> row(model.D);
    for (std::size_t i = 0; i < points.rows(); ++i) {
        for (std::size_t c = 0; c < model.D; ++c) row[c] = points.at(i, c);
        LatentCode code = encode(model, row);
        for (std::size_t j = 0; j < model.d; ++j) out.at(i, j) = code.mean[j];
    }
    return out;
}

}  // namespace geoclus::vae
