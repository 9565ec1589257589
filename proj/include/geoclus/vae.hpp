#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "geoclus/mlp.hpp"
#include "geoclus/tensor.hpp"

namespace geoclus::vae {

using diffcore::Activation;
using diffcore::Graph;
using diffcore::Mlp;
using diffcore::MlpGraphParams;
using diffcore::MlpSpec;
using diffcore::NodeId;
using diffcore::Tensor;

// What the log-variance head emits. With kVariance the head output is a
// positive variance (softplus/sigmoid last activation) and the log is
// taken downstream; with kLogVariance the head output is the
// log-variance itself.
enum class SEncOutput : std::uint8_t { kLogVariance, kVariance };

const char* s_enc_output_name(SEncOutput s);
SEncOutput s_enc_output_from_name(const std::string& name);

// Five-network VAE: encoder hidden trunk, mean head, log-variance head,
// decoder hidden trunk, decoder mean head. Stage 1 trains all of them
// with a fixed constant output variance.
struct VaeModel {
    std::size_t d = 0;  // latent width
    std::size_t D = 0;  // data width
    Mlp enc_hidden, enc_mean, enc_logvar, dec_hidden, dec_mean;
    SEncOutput s_enc_output = SEncOutput::kLogVariance;
    double stage1_output_variance = 1.0;
    std::uint64_t rng_seed = 0;

    void validate() const;
    // Decoder trunk and mean head fused into one network.
    Mlp decoder() const;
};

struct LatentCode {
    std::vector<double> mean;
    std::vector<double> log_variance;
};

struct TrainConfig {
    std::size_t epochs = 2000;
    std::size_t batch_size = 64;
    double learning_rate = 1e-3;
    double kl_weight = 1.0;
    std::uint64_t seed = 1;
};

// Architecture description used to initialize a fresh model.
struct VaeArch {
    std::size_t data_dim = 2;
    std::size_t latent_dim = 2;
    std::vector<std::size_t> enc_hidden_widths{2, 64, 64};  // includes input width
    std::vector<std::size_t> dec_hidden_widths{2, 64, 64};  // includes latent width
    Activation hidden_activation = Activation::kSoftplus;
    Activation s_enc_activation = Activation::kIdentity;
    SEncOutput s_enc_output = SEncOutput::kLogVariance;
    Activation dec_mean_activation = Activation::kIdentity;
    double stage1_output_variance = 1.0;

    void validate() const;
};

VaeModel init_model(const VaeArch& arch, std::uint64_t seed);

// --- core operations ------------------------------------------------------

LatentCode encode(const VaeModel& model, std::span<const double> x);

// z = mean + exp(log_variance / 2) * eps, elementwise
std::vector<double> reparam_sample(const LatentCode& code, std::span<const double> eps);

std::vector<double> decode_mean(const VaeModel& model, std::span<const double> z);

// KL(N(mean, var) || N(0, I)) = 0.5 * sum(mean^2 + var - 1 - log var)
double kl_to_standard_normal(const LatentCode& code);

// Mean over the batch of [Gaussian log-likelihood under
// N(mu(z), I * stage1_output_variance) - kl_weight * KL]; one eps row per
// batch row.
double elbo(const VaeModel& model, const Tensor& x_batch, const Tensor& eps_batch,
            double kl_weight);

// --- training graph -------------------------------------------------------

// Full ELBO computation as a reusable graph over a fixed batch size.
// Exposed so gradient tests can reach the parameter nodes.
class ElboObjective {
public:
    ElboObjective(const VaeModel& model, std::size_t batch, double kl_weight, bool trainable);

    void set_batch(const Tensor& x, const Tensor& eps);  // shapes [B,D], [B,d]
    double forward_elbo();                               // value of the bound
    double forward_backward_loss();                      // -elbo, with gradients

    Graph& graph() { return graph_; }
    const std::vector<NodeId>& trainable_params() const { return params_; }
    void read_back(VaeModel& into) const;  // copy trained values into a model

private:
    Graph graph_;
    NodeId x_in_ = 0, eps_in_ = 0, elbo_ = 0, loss_ = 0;
    std::size_t batch_ = 0;
    MlpGraphParams p_enc_hidden_, p_enc_mean_, p_enc_logvar_, p_dec_hidden_, p_dec_mean_;
    std::vector<NodeId> params_;
};

struct TrainResult {
    VaeModel model;
    std::vector<double> loss_trace;  // mean -ELBO per epoch
};

// Stage-1 training: Adam over all five networks, mini-batches from a
// seeded shuffle, one reparametrized sample per datum per step.
// Throws on non-finite loss with an epoch/step diagnostic.
TrainResult train_stage1(const Tensor& points, const VaeArch& arch, const TrainConfig& config);

// Encoder posterior means for every row of `points` (N x d).
Tensor encode_means(const VaeModel& model, const Tensor& points);

}  // namespace geoclus::vae
