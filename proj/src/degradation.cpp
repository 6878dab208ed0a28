#include "surfcdm/degradation.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "surfcdm/rng.hpp"

namespace surfcdm {

double NoiseSchedule::sigma(int i) const {
    if (i < 1 || i > n()) {
        throw Error(ErrorKind::IndexOutOfRange, "step " + std::to_string(i) + " outside 1.." + std::to_string(n()));
    }
    return sigmas[static_cast<std::size_t>(i - 1)];
}

void NoiseSchedule::validate() const {
    if (sigmas.size() < 2) throw Error(ErrorKind::InvalidSchedule, "need at least two scales");
    if (!(sigmas.front() > 0.0)) throw Error(ErrorKind::InvalidSchedule, "sigma_1 must be > 0");
    for (std::size_t k = 1; k < sigmas.size(); ++k) {
        if (!(sigmas[k] > sigmas[k - 1])) throw Error(ErrorKind::InvalidSchedule, "scales must strictly increase");
    }
}

NoiseSchedule make_schedule(double sigma_min, double sigma_max, int n) {
    if (!(sigma_min > 0.0) || !(sigma_max > sigma_min) || !std::isfinite(sigma_max)) {
        throw Error(ErrorKind::InvalidSchedule, "require 0 < sigma_min < sigma_max");
    }
    if (n < 2) throw Error(ErrorKind::InvalidSchedule, "require n >= 2");
    NoiseSchedule s;
    s.sigmas.resize(static_cast<std::size_t>(n));
    const double ratio = sigma_max / sigma_min;
    for (int i = 0; i < n; ++i) {
        s.sigmas[static_cast<std::size_t>(i)] = sigma_min * std::pow(ratio, static_cast<double>(i) / (n - 1));
    }
    s.sigmas.front() = sigma_min;
    s.sigmas.back() = sigma_max;
    return s;
}

void PerturbationParams::validate() const {
    if (!(max_vertical_fraction > 0.0 && max_vertical_fraction <= 0.5)) {
        throw Error(ErrorKind::InvalidConfig, "max_vertical_fraction must lie in (0, 0.5]");
    }
    if (!(max_rotation_fraction > 0.0 && max_rotation_fraction <= 0.5)) {
        throw Error(ErrorKind::InvalidConfig, "max_rotation_fraction must lie in (0, 0.5]");
    }
    if (!(band_low > 0.0 && band_low <= band_high && band_high <= 1.0)) {
        throw Error(ErrorKind::InvalidConfig, "magnitude band must satisfy 0 < low <= high <= 1");
    }
}

PerturbationDraw PerturbationDraw::sample(const PerturbationParams& params, std::uint64_t seed) {
    Rng rng(mix_seed(seed, 0x5eed));
    PerturbationDraw d;
    d.seed = seed;
    d.vertical_sign = rng.sign();
    d.rotation_sign = rng.sign();
    d.vertical_magnitude = rng.uniform(params.band_low, params.band_high);
    d.rotation_magnitude = rng.uniform(params.band_low, params.band_high);
    return d;
}

Surface perturb(const Surface& surface, double sigma, const PerturbationParams& params,
                const PerturbationDraw& draw) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) {
        throw Error(ErrorKind::InvalidScale, "sigma must be > 0, got " + std::to_string(sigma));
    }
    const int X = static_cast<int>(surface.size());
    const int L = surface.column_length;
    const long shift = std::lround(draw.rotation_sign * draw.rotation_magnitude * sigma *
                                   params.max_rotation_fraction * X);
    const double lift = draw.vertical_sign * draw.vertical_magnitude * sigma * params.max_vertical_fraction * L;

    Surface out(std::vector<double>(static_cast<std::size_t>(X)), L);
    for (int x = 0; x < X; ++x) {
        const long src = ((x - shift) % X + X) % X;
        out[static_cast<std::size_t>(x)] =
            std::clamp(surface[static_cast<std::size_t>(src)] + lift, 0.0, static_cast<double>(L - 1));
    }
    return out;
}

double ussd(const Surface& a, const Surface& b) {
    if (a.size() != b.size()) {
        throw Error(ErrorKind::LengthMismatch,
                    "surfaces have " + std::to_string(a.size()) + " and " + std::to_string(b.size()) + " columns");
    }
    if (a.size() == 0) return 0.0;
    double sum = 0.0;
    for (std::size_t x = 0; x < a.size(); ++x) sum += std::abs(a[x] - b[x]);
    return sum / static_cast<double>(a.size());
}

PolarRaster perturbation_target(const PolarRaster& clean, const PolarRaster& perturbed) {
    if (!(clean.config == perturbed.config)) throw Error(ErrorKind::ConfigMismatch, "polar grids differ");
    PolarRaster out(clean.config, ChannelKind::Perturbation);
    auto& dst = out.values.values();
    const auto& c = clean.values.values();
    const auto& p = perturbed.values.values();
    for (std::size_t k = 0; k < dst.size(); ++k) {
        dst[k] = ((c[k] >= 0.5f) != (p[k] >= 0.5f)) ? 1.0f : 0.0f;
    }
    return out;
}

ForwardSample forward_sample(const Surface& clean, const PolarGridConfig& grid, const NoiseSchedule& schedule,
                             int i, const PerturbationParams& params, std::uint64_t seed) {
    ForwardSample fs;
    fs.sigma = schedule.sigma(i);
    fs.draw = PerturbationDraw::sample(params, seed);
    fs.perturbed_surface = perturb(clean, fs.sigma, params, fs.draw);
    const PolarRaster clean_mask = surface_to_polar_mask(clean, grid);
    fs.perturbed = surface_to_polar_mask(fs.perturbed_surface, grid);
    fs.target = perturbation_target(clean_mask, fs.perturbed);
    return fs;
}

}  // namespace surfcdm
