#pragma once

// Sigma-conditioned denoiser s_theta(m_i, I_t, sigma): predicts the xor
// perturbation that separates a degraded polar mask from the clean one.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "surfcdm/degradation.hpp"
#include "surfcdm/nn.hpp"
#include "surfcdm/polar_surface.hpp"

namespace surfcdm {

struct DenoiserConfig {
    int input_channels = 2;   // perturbed mask + conditioning image
    int output_channels = 1;  // perturbation map
    int levels = 4;
    std::vector<int> channels{16, 32, 64, 128};
    int num_columns = 256;    // X
    int column_length = 200;  // L
    int padded_length = 224;  // L zero-padded along the radial axis

    void validate() const;
    nn::UNetShape unet_shape() const;

    friend bool operator==(const DenoiserConfig&, const DenoiserConfig&) = default;
};

/// Anything that can play the role of the score network in the reverse process.
class ScoreModel {
public:
    virtual ~ScoreModel() = default;
    /// Perturbation prediction in [0, 1] on the grid of `mask`.
    virtual PolarRaster predict(const PolarRaster& mask, const PolarRaster& image, double sigma) const = 0;
};

struct TrainingMetadata {
    int epoch = 0;
    std::vector<double> loss_history;  // one entry per optimizer step
    std::vector<double> val_history;   // one entry per epoch
};

class DenoiserModel : public ScoreModel {
public:
    DenoiserModel() = default;
    explicit DenoiserModel(const DenoiserConfig& cfg);

    const DenoiserConfig& config() const noexcept { return config_; }
    nn::UNet<float>& network() noexcept { return net_; }
    const nn::UNet<float>& network() const noexcept { return net_; }
    TrainingMetadata& metadata() noexcept { return meta_; }
    const TrainingMetadata& metadata() const noexcept { return meta_; }

    /// Two-channel padded network input for (mask, image).
    nn::Tensor<float> make_input(const PolarRaster& mask, const PolarRaster& image) const;

    PolarRaster predict(const PolarRaster& mask, const PolarRaster& image, double sigma) const override;

private:
    DenoiserConfig config_;
    nn::UNet<float> net_;
    TrainingMetadata meta_;
};

DenoiserModel init_model(const DenoiserConfig& cfg, std::uint64_t seed);

/// Same as model.predict; named for the network evaluation in the reverse step.
PolarRaster forward(const DenoiserModel& model, const PolarRaster& perturbed_mask, const PolarRaster& image,
                    double sigma);

/// Ideal denoiser that knows the clean Cartesian mask: predicts exactly
/// mask xor clean on whatever polar grid it is queried with.
class OracleDenoiser : public ScoreModel {
public:
    explicit OracleDenoiser(CartesianMask truth) : truth_(std::move(truth)) {}
    PolarRaster predict(const PolarRaster& mask, const PolarRaster& image, double sigma) const override;

private:
    CartesianMask truth_;
};

/// Always predicts no perturbation.
class ZeroDenoiser : public ScoreModel {
public:
    PolarRaster predict(const PolarRaster& mask, const PolarRaster& image, double sigma) const override;
};

enum class LambdaMode { Uniform, InverseMagnitude };

struct TrainingConfig {
    double learning_rate = 1e-3;
    int batch_size = 8;
    int epochs = 20;
    LambdaMode lambda_mode = LambdaMode::Uniform;
    std::uint64_t seed = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_epsilon = 1e-8;
    bool augment = true;
    bool verbose = false;

    void validate() const;
};

struct TrainingExample {
    PolarRaster perturbed;
    PolarRaster image;
    PolarRaster target;
    double sigma = 0.0;
};

/// Adaptive-moment optimizer state, one slot per network parameter.
template <typename T>
struct AdamState {
    std::vector<std::vector<T>> m;
    std::vector<std::vector<T>> v;
    long step = 0;
};

/// Mean squared error and its gradient with respect to the prediction, over the
/// unpadded region of a batch. Returns the loss; grads are accumulated into the
/// network. `weights` (optional) scales each example.
template <typename T>
double accumulate_batch_gradient(nn::UNet<T>& net, std::span<const nn::Tensor<T>> inputs,
                                 std::span<const nn::Tensor<T>> targets, std::span<const double> sigmas,
                                 std::span<const double> weights, int valid_width);

template <typename T>
void adam_update(nn::UNet<T>& net, AdamState<T>& state, const TrainingConfig& tc);

/// One optimizer step on a batch. Returns the batch loss.
double training_step(DenoiserModel& model, std::span<const TrainingExample> batch, const TrainingConfig& tc,
                     AdamState<float>& optimizer);

struct LabeledSample {
    CartesianImage image;
    CartesianMask mask;
    Centroid centroid;
};

struct TrainingData {
    std::vector<LabeledSample> train;
    std::vector<LabeledSample> val;
};

/// Build one training example: augmentation (optional), polar transform around
/// the ground-truth centroid, and a forward-process draw at a random step.
TrainingExample make_training_example(const LabeledSample& sample, const DenoiserConfig& cfg,
                                      const NoiseSchedule& schedule, const PerturbationParams& params,
                                      bool augment, std::uint64_t seed, std::optional<int> step = std::nullopt);

/// Train with per-example steps drawn uniformly from the schedule and keep the
/// parameters with the best validation loss (last epoch when there is no val set).
DenoiserModel train(DenoiserModel model, const TrainingData& data, const NoiseSchedule& schedule,
                    const PerturbationParams& params, const TrainingConfig& tc);

/// Mean loss of the model over a fixed set of examples.
double evaluate_loss(const DenoiserModel& model, std::span<const TrainingExample> examples);

void save_checkpoint(const DenoiserModel& model, const std::filesystem::path& path);
DenoiserModel load_checkpoint(const std::filesystem::path& path);
/// Loads and checks that the stored config matches `expected`; FormatError names the field.
DenoiserModel load_checkpoint(const std::filesystem::path& path, const DenoiserConfig& expected);

}  // namespace surfcdm
