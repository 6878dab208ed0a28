#pragma once

// Reverse diffusion: annealed Langevin-style iteration over the noise schedule.
// Each step corrects the current polar mask with the binarized denoiser output
// (xor), extracts the surface, and re-perturbs it at the next lower scale.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "surfcdm/degradation.hpp"
#include "surfcdm/denoiser.hpp"
#include "surfcdm/polar_surface.hpp"

namespace surfcdm {

enum class CentroidMode { Oracle, Estimated };

struct SamplerConfig {
    NoiseSchedule schedule = make_schedule(0.1, 1.0, 10);
    PerturbationParams perturbation;
    int num_columns = 256;
    int column_length = 200;
    double initial_radius = 0.0;  // r0 in samples; <= 0 selects L/2
    double threshold = 0.5;       // tau
    CentroidMode centroid_mode = CentroidMode::Oracle;

    double effective_initial_radius() const {
        return initial_radius > 0.0 ? initial_radius : column_length / 2.0;
    }
    void validate() const;
};

struct StepRecord {
    int step = 0;  // i
    double sigma = 0.0;
    Surface before;     // S(m_i)
    Surface corrected;  // S(m_i xor binarize(prediction))
    Surface after;      // S(m_{i-1})
    double ussd_to_previous = 0.0;  // USSD(before, after)
};

struct SampleTrace {
    PolarGridConfig grid;
    std::vector<PolarRaster> states;  // m_n, m_{n-1}, ..., m_0
    std::vector<StepRecord> steps;    // i = n .. 1
    PolarRaster final_polar;
    CartesianMask final_mask;
};

struct Segmentation {
    CartesianMask mask;
    SampleTrace trace;
};

/// Centroid of the largest dark region after Otsu thresholding of a smoothed
/// copy; the image center when no region covers at least 1% of the pixels.
Centroid estimate_centroid(const CartesianImage& image);

/// Constant surface r0 degraded once at sigma_n.
Surface init_state(const SamplerConfig& cfg, std::uint64_t seed);

/// Step size eps(sigma_i) = sigma_{i-1}^2 / 2 with sigma_0 = 0.
double epsilon(const NoiseSchedule& schedule, int i);

PolarRaster reverse_step(const PolarRaster& state, const PolarRaster& image, const ScoreModel& model,
                         const NoiseSchedule& schedule, int i, const SamplerConfig& cfg, std::uint64_t seed,
                         StepRecord* record = nullptr);

/// Full reverse process on a Cartesian image. `truth_centroid` is required in
/// CentroidMode::Oracle.
Segmentation segment(const CartesianImage& image, const ScoreModel& model, const SamplerConfig& cfg,
                     std::uint64_t seed, std::optional<Centroid> truth_centroid = std::nullopt);

std::vector<CartesianMask> sample_ensemble(const CartesianImage& image, const ScoreModel& model,
                                           const SamplerConfig& cfg, std::span<const std::uint64_t> seeds,
                                           std::optional<Centroid> truth_centroid = std::nullopt);

/// K runs with seeds derived from `seed`.
std::vector<CartesianMask> sample_ensemble(const CartesianImage& image, const ScoreModel& model,
                                           const SamplerConfig& cfg, int runs, std::uint64_t seed,
                                           std::optional<Centroid> truth_centroid = std::nullopt);

}  // namespace surfcdm
