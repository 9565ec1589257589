#pragma once

#include <filesystem>
#include <optional>

#include "geoclus/latentgmm.hpp"
#include "geoclus/vae.hpp"

namespace geoclus::model_io {

// Single JSON document: format version, dimensions, layer specs,
// parameter arrays as flat decimal lists, stage-1 output variance and the
// training seed; stage 2 adds the precision model. Values survive a
// round trip exactly (shortest-round-trip decimal printing).
void save_model(const std::filesystem::path& path, const vae::VaeModel& model,
                const std::optional<latentgmm::PrecisionGmm>& precision = std::nullopt);

struct LoadedModel {
    vae::VaeModel model;
    std::optional<latentgmm::PrecisionGmm> precision;
};

LoadedModel load_model(const std::filesystem::path& path);

}  // namespace geoclus::model_io
