#include "surfcdm/sampler.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "surfcdm/rng.hpp"

namespace surfcdm {

namespace {

Grid<float> box_blur(const Grid<float>& src, int radius) {
    const int W = src.width();
    const int H = src.height();
    Grid<float> tmp(W, H, 0.0f);
    Grid<float> out(W, H, 0.0f);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            float acc = 0.0f;
            for (int k = -radius; k <= radius; ++k) acc += src(std::clamp(x + k, 0, W - 1), y);
            tmp(x, y) = acc / static_cast<float>(2 * radius + 1);
        }
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            float acc = 0.0f;
            for (int k = -radius; k <= radius; ++k) acc += tmp(x, std::clamp(y + k, 0, H - 1));
            out(x, y) = acc / static_cast<float>(2 * radius + 1);
        }
    return out;
}

// Otsu threshold bin over a 256-bin histogram; -1 when the image has one level.
int otsu_bin(const Grid<float>& image) {
    std::array<double, 256> hist{};
    for (float v : image.values()) hist[static_cast<std::size_t>(std::clamp(std::lround(v * 255.0f), 0L, 255L))] += 1.0;
    const double total = static_cast<double>(image.size());
    double sum_all = 0.0;
    for (int k = 0; k < 256; ++k) sum_all += k * hist[static_cast<std::size_t>(k)];
    double w0 = 0.0;
    double sum0 = 0.0;
    double best = 0.0;
    int best_bin = -1;
    for (int t = 0; t < 255; ++t) {
        w0 += hist[static_cast<std::size_t>(t)];
        sum0 += t * hist[static_cast<std::size_t>(t)];
        const double w1 = total - w0;
        if (w0 <= 0.0 || w1 <= 0.0) continue;
        const double m0 = sum0 / w0;
        const double m1 = (sum_all - sum0) / w1;
        const double between = w0 * w1 * (m0 - m1) * (m0 - m1);
        if (between > best) {
            best = between;
            best_bin = t;
        }
    }
    return best_bin;
}

}  // namespace

void SamplerConfig::validate() const {
    schedule.validate();
    perturbation.validate();
    if (!(threshold > 0.0 && threshold < 1.0)) throw Error(ErrorKind::InvalidConfig, "threshold must lie in (0,1)");
    const double r0 = effective_initial_radius();
    if (!(r0 > 0.0 && r0 < column_length)) throw Error(ErrorKind::InvalidConfig, "initial radius must lie in (0, L)");
    if (num_columns < 8 || column_length < 8) throw Error(ErrorKind::InvalidConfig, "polar grid too small");
}

Centroid estimate_centroid(const CartesianImage& image) {
    const Centroid center{(image.width() - 1) / 2.0, (image.height() - 1) / 2.0};
    if (image.empty()) return center;
    const Grid<float> smooth = box_blur(box_blur(image, 2), 2);
    const int bin = otsu_bin(smooth);
    if (bin < 0) return center;
    const float cut = (static_cast<float>(bin) + 0.5f) / 255.0f;
    Grid<int> labels;
    const auto sizes = label_components(smooth, [cut](float v) { return v < cut; }, labels);
    if (sizes.empty()) return center;
    const auto largest = static_cast<int>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin()) + 1;
    if (static_cast<double>(sizes[static_cast<std::size_t>(largest - 1)]) < 0.01 * static_cast<double>(image.size())) {
        return center;
    }
    double sx = 0.0;
    double sy = 0.0;
    double n = 0.0;
    for (int y = 0; y < image.height(); ++y)
        for (int x = 0; x < image.width(); ++x)
            if (labels(x, y) == largest) {
                sx += x;
                sy += y;
                n += 1.0;
            }
    return {sx / n, sy / n};
}

double epsilon(const NoiseSchedule& schedule, int i) {
    if (i < 1 || i > schedule.n()) {
        throw Error(ErrorKind::IndexOutOfRange, "step " + std::to_string(i) + " outside 1.." + std::to_string(schedule.n()));
    }
    const double prev = i == 1 ? 0.0 : schedule.sigma(i - 1);
    return 0.5 * prev * prev;
}

Surface init_state(const SamplerConfig& cfg, std::uint64_t seed) {
    const Surface flat = Surface::constant(cfg.num_columns, cfg.column_length, cfg.effective_initial_radius());
    const auto draw = PerturbationDraw::sample(cfg.perturbation, mix_seed(seed, 0));
    return perturb(flat, cfg.schedule.sigma_max(), cfg.perturbation, draw);
}

PolarRaster reverse_step(const PolarRaster& state, const PolarRaster& image, const ScoreModel& model,
                         const NoiseSchedule& schedule, int i, const SamplerConfig& cfg, std::uint64_t seed,
                         StepRecord* record) {
    if (!(state.config == image.config)) throw Error(ErrorKind::ShapeMismatch, "state and image grids differ");
    const double sigma = schedule.sigma(i);
    const PolarRaster prediction = model.predict(state, image, sigma);

    PolarRaster corrected(state.config, ChannelKind::Mask);
    const auto& m = state.values.values();
    const auto& p = prediction.values.values();
    auto& c = corrected.values.values();
    for (std::size_t k = 0; k < c.size(); ++k) {
        const bool flip = p[k] >= cfg.threshold;
        c[k] = ((m[k] >= 0.5f) != flip) ? 1.0f : 0.0f;
    }
    const Surface s_hat = extract_surface(corrected);

    Surface next = s_hat;
    if (i > 1) {
        const double scale = std::sqrt(2.0 * epsilon(schedule, i));
        const auto draw = PerturbationDraw::sample(cfg.perturbation, seed);
        next = perturb(s_hat, scale, cfg.perturbation, draw);
    }
    PolarRaster out = surface_to_polar_mask(next, state.config);
    if (record) {
        record->step = i;
        record->sigma = sigma;
        record->before = extract_surface(state);
        record->corrected = s_hat;
        record->after = extract_surface(out);
        record->ussd_to_previous = ussd(record->before, record->after);
    }
    return out;
}

Segmentation segment(const CartesianImage& image, const ScoreModel& model, const SamplerConfig& cfg,
                     std::uint64_t seed, std::optional<Centroid> truth_centroid) {
    cfg.validate();
    Centroid centroid;
    if (cfg.centroid_mode == CentroidMode::Oracle) {
        if (!truth_centroid) throw Error(ErrorKind::InvalidConfig, "oracle centroid mode needs a ground-truth centroid");
        centroid = *truth_centroid;
    } else {
        centroid = estimate_centroid(image);
    }
    Segmentation result;
    SampleTrace& trace = result.trace;
    trace.grid = PolarGridConfig::for_image(image.width(), image.height(), centroid, cfg.num_columns, cfg.column_length);
    const PolarRaster polar_image = to_polar(image, trace.grid);

    PolarRaster state = surface_to_polar_mask(init_state(cfg, seed), trace.grid);
    trace.states.push_back(state);
    for (int i = cfg.schedule.n(); i >= 1; --i) {
        StepRecord rec;
        state = reverse_step(state, polar_image, model, cfg.schedule, i, cfg,
                             mix_seed(seed, static_cast<std::uint64_t>(i)), &rec);
        trace.states.push_back(state);
        trace.steps.push_back(std::move(rec));
    }
    trace.final_polar = state;
    trace.final_mask = from_polar(state, image.width(), image.height());
    result.mask = trace.final_mask;
    return result;
}

std::vector<CartesianMask> sample_ensemble(const CartesianImage& image, const ScoreModel& model,
                                           const SamplerConfig& cfg, std::span<const std::uint64_t> seeds,
                                           std::optional<Centroid> truth_centroid) {
    if (seeds.size() < 2) throw Error(ErrorKind::TooFewRuns, "an ensemble needs at least two runs");
    std::vector<CartesianMask> masks;
    masks.reserve(seeds.size());
    for (std::uint64_t s : seeds) masks.push_back(segment(image, model, cfg, s, truth_centroid).mask);
    return masks;
}

std::vector<CartesianMask> sample_ensemble(const CartesianImage& image, const ScoreModel& model,
                                           const SamplerConfig& cfg, int runs, std::uint64_t seed,
                                           std::optional<Centroid> truth_centroid) {
    if (runs < 2) throw Error(ErrorKind::TooFewRuns, "an ensemble needs at least two runs");
    std::vector<std::uint64_t> seeds;
    for (int k = 0; k < runs; ++k) seeds.push_back(mix_seed(seed, 0xe5e0000ull + static_cast<std::uint64_t>(k)));
    return sample_ensemble(image, model, cfg, seeds, truth_centroid);
}

}  // namespace surfcdm
