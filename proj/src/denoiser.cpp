#include "surfcdm/denoiser.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>

#include "surfcdm/rng.hpp"
#include "surfcdm/synthdata.hpp"

namespace surfcdm {

void DenoiserConfig::validate() const {
    if (input_channels != 2) throw Error(ErrorKind::InvalidConfig, "input_channels must be 2");
    if (output_channels != 1) throw Error(ErrorKind::InvalidConfig, "output_channels must be 1");
    if (levels < 1) throw Error(ErrorKind::InvalidConfig, "levels must be >= 1");
    if (static_cast<int>(channels.size()) != levels) {
        throw Error(ErrorKind::InvalidConfig, "channel list length must equal levels");
    }
    if (std::any_of(channels.begin(), channels.end(), [](int c) { return c < 1; })) {
        throw Error(ErrorKind::InvalidConfig, "channel counts must be >= 1");
    }
    const int factor = 1 << (levels - 1);
    if (num_columns < 8 || num_columns % factor != 0) {
        throw Error(ErrorKind::InvalidConfig, "num_columns must be >= 8 and divisible by 2^(levels-1)");
    }
    if (column_length < 8 || padded_length < column_length || padded_length % factor != 0) {
        throw Error(ErrorKind::InvalidConfig, "padded_length must be >= column_length and divisible by 2^(levels-1)");
    }
}

nn::UNetShape DenoiserConfig::unet_shape() const {
    return nn::UNetShape{input_channels, levels, channels};
}

DenoiserModel::DenoiserModel(const DenoiserConfig& cfg) : config_(cfg) {
    config_.validate();
    net_ = nn::UNet<float>(config_.unet_shape());
}

DenoiserModel init_model(const DenoiserConfig& cfg, std::uint64_t seed) {
    DenoiserModel model(cfg);
    model.network().initialize(seed);
    return model;
}

nn::Tensor<float> DenoiserModel::make_input(const PolarRaster& mask, const PolarRaster& image) const {
    if (!(mask.config == image.config)) throw Error(ErrorKind::ShapeMismatch, "mask and image grids differ");
    if (mask.num_columns() != config_.num_columns || mask.column_length() != config_.column_length) {
        throw Error(ErrorKind::ShapeMismatch, "polar grid does not match the denoiser extent");
    }
    const int X = config_.num_columns;
    const int L = config_.column_length;
    nn::Tensor<float> t(2, X, config_.padded_length, 0.0f);
    for (int x = 0; x < X; ++x) {
        for (int y = 0; y < L; ++y) {
            t(0, x, y) = mask.at(x, y);
            t(1, x, y) = image.at(x, y);
        }
    }
    return t;
}

PolarRaster DenoiserModel::predict(const PolarRaster& mask, const PolarRaster& image, double sigma) const {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw Error(ErrorKind::InvalidScale, "sigma must be > 0");
    const auto out = net_.forward(make_input(mask, image), static_cast<float>(sigma));
    PolarRaster pred(mask.config, ChannelKind::Perturbation);
    for (int x = 0; x < config_.num_columns; ++x)
        for (int y = 0; y < config_.column_length; ++y) pred.at(x, y) = out(0, x, y);
    return pred;
}

PolarRaster forward(const DenoiserModel& model, const PolarRaster& perturbed_mask, const PolarRaster& image,
                    double sigma) {
    return model.predict(perturbed_mask, image, sigma);
}

PolarRaster OracleDenoiser::predict(const PolarRaster& mask, const PolarRaster&, double) const {
    const PolarRaster clean = surface_to_polar_mask(extract_surface(to_polar(truth_, mask.config)), mask.config);
    return perturbation_target(clean, mask);
}

PolarRaster ZeroDenoiser::predict(const PolarRaster& mask, const PolarRaster&, double) const {
    return PolarRaster(mask.config, ChannelKind::Perturbation, 0.0f);
}

void TrainingConfig::validate() const {
    if (!(learning_rate > 0.0)) throw Error(ErrorKind::InvalidConfig, "learning rate must be > 0");
    if (batch_size < 1) throw Error(ErrorKind::InvalidConfig, "batch size must be >= 1");
    if (epochs < 1) throw Error(ErrorKind::InvalidConfig, "epochs must be >= 1");
}

template <typename T>
double accumulate_batch_gradient(nn::UNet<T>& net, std::span<const nn::Tensor<T>> inputs,
                                 std::span<const nn::Tensor<T>> targets, std::span<const double> sigmas,
                                 std::span<const double> weights, int valid_width) {
    const std::size_t batch = inputs.size();
    if (batch == 0) throw Error(ErrorKind::InvalidConfig, "empty batch");
    double loss = 0.0;
    typename nn::UNet<T>::Cache cache;
    for (std::size_t b = 0; b < batch; ++b) {
        const auto& target = targets[b];
        const auto prob = net.forward(inputs[b], static_cast<T>(sigmas[b]), &cache);
        const double count = static_cast<double>(target.height) * valid_width;
        const double w = weights.empty() ? 1.0 : weights[b];
        const double scale = w / (static_cast<double>(batch) * count);
        nn::Tensor<T> grad(1, prob.height, prob.width, T(0));
        double sq = 0.0;
        for (int h = 0; h < prob.height; ++h) {
            for (int x = 0; x < valid_width; ++x) {
                const double diff = static_cast<double>(prob(0, h, x)) - static_cast<double>(target(0, h, x));
                sq += diff * diff;
                grad(0, h, x) = static_cast<T>(2.0 * scale * diff);
            }
        }
        loss += scale * sq;
        net.backward(cache, grad);
    }
    return loss;
}

template <typename T>
void adam_update(nn::UNet<T>& net, AdamState<T>& state, const TrainingConfig& tc) {
    auto& params = net.params();
    if (state.m.size() != params.size()) {
        state.m.clear();
        state.v.clear();
        for (const auto& p : params) {
            state.m.emplace_back(p.size(), T(0));
            state.v.emplace_back(p.size(), T(0));
        }
        state.step = 0;
    }
    ++state.step;
    const double bc1 = 1.0 - std::pow(tc.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(tc.beta2, static_cast<double>(state.step));
    const T lr = static_cast<T>(tc.learning_rate * std::sqrt(bc2) / bc1);
    const T b1 = static_cast<T>(tc.beta1);
    const T b2 = static_cast<T>(tc.beta2);
    const T eps = static_cast<T>(tc.adam_epsilon * std::sqrt(bc2));
    for (std::size_t k = 0; k < params.size(); ++k) {
        auto& p = params[k];
        auto& m = state.m[k];
        auto& v = state.v[k];
        for (std::size_t j = 0; j < p.size(); ++j) {
            const T g = p.grad[j];
            m[j] = b1 * m[j] + (T(1) - b1) * g;
            v[j] = b2 * v[j] + (T(1) - b2) * g * g;
            p.value[j] -= lr * m[j] / (std::sqrt(v[j]) + eps);
        }
    }
}

template double accumulate_batch_gradient<float>(nn::UNet<float>&, std::span<const nn::Tensor<float>>,
                                                 std::span<const nn::Tensor<float>>, std::span<const double>,
                                                 std::span<const double>, int);
template double accumulate_batch_gradient<double>(nn::UNet<double>&, std::span<const nn::Tensor<double>>,
                                                  std::span<const nn::Tensor<double>>, std::span<const double>,
                                                  std::span<const double>, int);
template void adam_update<float>(nn::UNet<float>&, AdamState<float>&, const TrainingConfig&);
template void adam_update<double>(nn::UNet<double>&, AdamState<double>&, const TrainingConfig&);

namespace {

struct PreparedBatch {
    std::vector<nn::Tensor<float>> inputs;
    std::vector<nn::Tensor<float>> targets;
    std::vector<double> sigmas;
    std::vector<double> weights;
};

PreparedBatch prepare(const DenoiserModel& model, std::span<const TrainingExample> batch, LambdaMode mode) {
    const auto& cfg = model.config();
    PreparedBatch pb;
    for (const auto& ex : batch) {
        if (!(ex.target.config == ex.perturbed.config)) throw Error(ErrorKind::ShapeMismatch, "target grid differs");
        pb.inputs.push_back(model.make_input(ex.perturbed, ex.image));
        nn::Tensor<float> t(1, cfg.num_columns, cfg.padded_length, 0.0f);
        double ones = 0.0;
        for (int x = 0; x < cfg.num_columns; ++x)
            for (int y = 0; y < cfg.column_length; ++y) {
                t(0, x, y) = ex.target.at(x, y);
                ones += ex.target.at(x, y);
            }
        pb.targets.push_back(std::move(t));
        pb.sigmas.push_back(ex.sigma);
        const double pixels = static_cast<double>(cfg.num_columns) * cfg.column_length;
        pb.weights.push_back(1.0 / std::max(ones / pixels, 1.0 / pixels));
    }
    if (mode == LambdaMode::Uniform) {
        pb.weights.clear();
    } else {
        const double mean = std::accumulate(pb.weights.begin(), pb.weights.end(), 0.0) / pb.weights.size();
        for (double& w : pb.weights) w /= mean;
    }
    return pb;
}

}  // namespace

double training_step(DenoiserModel& model, std::span<const TrainingExample> batch, const TrainingConfig& tc,
                     AdamState<float>& optimizer) {
    if (batch.empty()) throw Error(ErrorKind::InvalidConfig, "empty batch");
    const PreparedBatch pb = prepare(model, batch, tc.lambda_mode);
    auto& net = model.network();
    net.zero_grad();
    const double loss = accumulate_batch_gradient<float>(net, pb.inputs, pb.targets, pb.sigmas, pb.weights,
                                                         model.config().column_length);
    if (!std::isfinite(loss)) throw Error(ErrorKind::NonFiniteLoss, "loss is not finite");
    adam_update(net, optimizer, tc);
    return loss;
}

double evaluate_loss(const DenoiserModel& model, std::span<const TrainingExample> examples) {
    if (examples.empty()) return 0.0;
    const int L = model.config().column_length;
    double total = 0.0;
    for (const auto& ex : examples) {
        const PolarRaster pred = model.predict(ex.perturbed, ex.image, ex.sigma);
        double sq = 0.0;
        for (int x = 0; x < pred.num_columns(); ++x)
            for (int y = 0; y < L; ++y) {
                const double d = pred.at(x, y) - ex.target.at(x, y);
                sq += d * d;
            }
        total += sq / (static_cast<double>(pred.num_columns()) * L);
    }
    return total / static_cast<double>(examples.size());
}

TrainingExample make_training_example(const LabeledSample& sample, const DenoiserConfig& cfg,
                                      const NoiseSchedule& schedule, const PerturbationParams& params,
                                      bool do_augment, std::uint64_t seed, std::optional<int> step) {
    CartesianImage image = sample.image;
    CartesianMask mask = sample.mask;
    Centroid centroid = sample.centroid;
    if (do_augment) {
        Augmented a = augment(image, mask, mix_seed(seed, 1));
        image = std::move(a.image);
        mask = std::move(a.mask);
        if (a.draw.flip) centroid.a = (image.width() - 1) - centroid.a;
    }
    const auto grid = PolarGridConfig::for_image(image.width(), image.height(), centroid, cfg.num_columns,
                                                 cfg.column_length);
    const Surface clean = extract_surface(to_polar(mask, grid));
    Rng rng(mix_seed(seed, 2));
    const int i = step.value_or(rng.uniform_int(1, schedule.n()));
    ForwardSample fs = forward_sample(clean, grid, schedule, i, params, mix_seed(seed, 3));
    return TrainingExample{std::move(fs.perturbed), to_polar(image, grid), std::move(fs.target), fs.sigma};
}

DenoiserModel train(DenoiserModel model, const TrainingData& data, const NoiseSchedule& schedule,
                    const PerturbationParams& params, const TrainingConfig& tc) {
    tc.validate();
    schedule.validate();
    if (data.train.empty()) throw Error(ErrorKind::InvalidConfig, "no training samples");
    const auto& cfg = model.config();

    std::vector<TrainingExample> val;
    for (std::size_t k = 0; k < data.val.size(); ++k) {
        val.push_back(make_training_example(data.val[k], cfg, schedule, params, false,
                                            mix_seed(tc.seed, 0x7a1000000ull + k)));
    }

    AdamState<float> optimizer;
    auto& meta = model.metadata();
    std::vector<std::vector<float>> best;
    double best_val = std::numeric_limits<double>::infinity();

    std::vector<std::size_t> order(data.train.size());
    std::iota(order.begin(), order.end(), 0);
    const int first_epoch = meta.epoch;
    for (int epoch = first_epoch + 1; epoch <= first_epoch + tc.epochs; ++epoch) {
        Rng shuffle_rng(mix_seed(tc.seed, static_cast<std::uint64_t>(epoch)));
        std::shuffle(order.begin(), order.end(), shuffle_rng.engine());
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(tc.batch_size)) {
            const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(tc.batch_size));
            std::vector<TrainingExample> batch;
            for (std::size_t k = start; k < stop; ++k) {
                const std::uint64_t ex_seed =
                    mix_seed(tc.seed, (static_cast<std::uint64_t>(epoch) << 32) + order[k]);
                batch.push_back(make_training_example(data.train[order[k]], cfg, schedule, params, tc.augment, ex_seed));
            }
            double loss = 0.0;
            try {
                loss = training_step(model, batch, tc, optimizer);
            } catch (const Error& e) {
                if (e.kind() != ErrorKind::NonFiniteLoss) throw;
                throw Error(ErrorKind::NonFiniteLoss, "epoch " + std::to_string(epoch) + " batch " +
                                                          std::to_string(start / tc.batch_size) + ": " + e.what());
            }
            meta.loss_history.push_back(loss);
        }
        meta.epoch = epoch;
        const double v = val.empty() ? meta.loss_history.back() : evaluate_loss(model, val);
        meta.val_history.push_back(v);
        if (tc.verbose) {
            std::cerr << "epoch " << epoch << " train_loss " << meta.loss_history.back() << " val_loss " << v << "\n";
        }
        if (val.empty() || v < best_val) {
            best_val = v;
            best.clear();
            for (const auto& p : model.network().params()) best.push_back(p.value);
        }
    }
    auto& ps = model.network().params();
    for (std::size_t k = 0; k < ps.size(); ++k) ps[k].value = best[k];
    return model;
}

}  // namespace surfcdm
