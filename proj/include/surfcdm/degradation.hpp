#pragma once

// Cold-diffusion forward process: a noise schedule and a deterministic
// degradation operator that shifts a terrain surface vertically and rotates it
// across columns by amounts proportional to the noise scale.

#include <cstdint>
#include <vector>

#include "surfcdm/polar_surface.hpp"

namespace surfcdm {

struct NoiseSchedule {
    std::vector<double> sigmas;  // sigma_1 .. sigma_n, strictly increasing

    int n() const noexcept { return static_cast<int>(sigmas.size()); }
    /// 1-based, matching step indices i = 1..n.
    double sigma(int i) const;
    double sigma_min() const { return sigmas.front(); }
    double sigma_max() const { return sigmas.back(); }

    void validate() const;
};

/// Geometric spacing sigma_i = sigma_min * (sigma_max / sigma_min)^((i-1)/(n-1)).
NoiseSchedule make_schedule(double sigma_min = 0.1, double sigma_max = 1.0, int n = 10);

struct PerturbationParams {
    double max_vertical_fraction = 0.25;   // of L
    double max_rotation_fraction = 0.125;  // of X
    double band_low = 0.5;                 // magnitudes drawn from [band_low, band_high]
    double band_high = 1.0;

    void validate() const;
};

struct PerturbationDraw {
    int vertical_sign = 1;
    int rotation_sign = 1;
    double vertical_magnitude = 0.0;
    double rotation_magnitude = 0.0;
    std::uint64_t seed = 0;

    static PerturbationDraw sample(const PerturbationParams& params, std::uint64_t seed);

    friend bool operator==(const PerturbationDraw&, const PerturbationDraw&) = default;
};

/// f(S, sigma): circular shift by round(rs * rm * sigma * dh * X) columns, then
/// add vs * vm * sigma * dv * L and clamp to [0, L-1].
Surface perturb(const Surface& surface, double sigma, const PerturbationParams& params,
                const PerturbationDraw& draw);

/// Unsigned surface-to-surface distance: mean |a(x) - b(x)| in samples.
double ussd(const Surface& a, const Surface& b);

/// Elementwise xor of two binary polar masks (1 where they disagree).
PolarRaster perturbation_target(const PolarRaster& clean, const PolarRaster& perturbed);

struct ForwardSample {
    PolarRaster perturbed;
    PolarRaster target;
    Surface perturbed_surface;
    PerturbationDraw draw;
    double sigma = 0.0;
};

/// Degrade `clean` at scale sigma_i with a draw derived from `seed`.
ForwardSample forward_sample(const Surface& clean, const PolarGridConfig& grid, const NoiseSchedule& schedule,
                             int i, const PerturbationParams& params, std::uint64_t seed);

}  // namespace surfcdm
