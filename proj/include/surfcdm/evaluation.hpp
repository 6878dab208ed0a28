#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "surfcdm/metrics.hpp"
#include "surfcdm/sampler.hpp"

namespace surfcdm {

struct EvalItem {
    std::string id;
    CartesianImage image;
    CartesianMask mask;
    Centroid centroid;
};

/// Segment every item with `model` and score against its mask.
EvaluationReport evaluate(std::span<const EvalItem> items, const ScoreModel& model, const SamplerConfig& cfg,
                          std::uint64_t seed);

/// Same, with a perfect-oracle denoiser built from each item's mask.
EvaluationReport evaluate_oracle(std::span<const EvalItem> items, const SamplerConfig& cfg, std::uint64_t seed);

}  // namespace surfcdm
