#pragma once

// Shared trained two-moons model for tests that need real stage-1/2
// artifacts. Built once per test binary.

#include "geoclus/data.hpp"
#include "geoclus/latentgmm.hpp"
#include "geoclus/vae.hpp"

namespace geoclus::testing {

struct TwoMoonsFixture {
    data::Dataset train;
    vae::VaeModel model;
    latentgmm::PrecisionGmm precision;
    diffcore::Tensor latents;  // posterior means of the training points
};

inline vae::VaeArch two_moons_arch() {
    vae::VaeArch arch;
    arch.data_dim = 2;
    arch.latent_dim = 2;
    arch.enc_hidden_widths = {2, 64, 64};
    arch.dec_hidden_widths = {2, 64, 64};
    arch.hidden_activation = diffcore::Activation::kSoftplus;
    arch.s_enc_activation = diffcore::Activation::kSoftplus;
    arch.s_enc_output = vae::SEncOutput::kVariance;
    return arch;
}

inline const TwoMoonsFixture& two_moons_fixture() {
    static const TwoMoonsFixture fixture = [] {
        TwoMoonsFixture fx;
        fx.train = data::two_moons(100, 0.08, 1);
        vae::TrainConfig cfg;
        cfg.epochs = 600;
        cfg.batch_size = 64;
        cfg.learning_rate = 2e-3;
        cfg.kl_weight = 0.05;
        cfg.seed = 1;
        fx.model = vae::train_stage1(fx.train.points, two_moons_arch(), cfg).model;
        fx.latents = vae::encode_means(fx.model, fx.train.points);
        fx.precision = latentgmm::fit_precision_model(fx.model, fx.train.points, 10, 2);
        return fx;
    }();
    return fixture;
}

}  // namespace geoclus::testing
