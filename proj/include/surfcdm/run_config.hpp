#pragma once

// Flat dotted-key run configuration shared by every CLI command. Text form is
// one `key = value` per line; `#` starts a comment. Unknown keys are rejected.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "surfcdm/degradation.hpp"
#include "surfcdm/denoiser.hpp"
#include "surfcdm/sampler.hpp"
#include "surfcdm/synthdata.hpp"

namespace surfcdm {

struct RunConfig {
    std::uint64_t seed = 0;

    int data_n_samples = 500;
    int data_frames_per_group = 10;
    int data_width = 256;
    int data_height = 256;
    double data_dropout_probability = 0.3;

    int grid_num_columns = 256;
    int grid_column_length = 200;

    double schedule_sigma_min = 0.1;
    double schedule_sigma_max = 1.0;
    int schedule_steps = 10;

    PerturbationParams perturbation;

    int denoiser_levels = 4;
    std::vector<int> denoiser_channels{16, 32, 64, 128};
    int denoiser_padded_length = 224;
    std::uint64_t denoiser_init_seed = 1;

    double train_learning_rate = 1e-3;
    int train_batch_size = 8;
    int train_epochs = 20;
    std::string train_lambda_mode = "uniform";
    bool train_augment = true;
    int train_max_samples = 0;  // 0 = whole split

    double sampler_initial_radius = 0.0;  // 0 = L/2
    double sampler_threshold = 0.5;
    std::string sampler_centroid = "oracle";
    int sampler_runs = 20;

    /// Set one key from its text value; throws InvalidConfig on unknown keys or bad values.
    void set(const std::string& key, const std::string& value);
    /// All keys in canonical order.
    static std::vector<std::string> keys();
    std::string get(const std::string& key) const;

    void load_file(const std::filesystem::path& path);
    std::string to_text() const;
    void validate() const;

    NoiseSchedule schedule() const;
    DenoiserConfig denoiser() const;
    TrainingConfig training() const;
    SamplerConfig sampler() const;
    DatasetOptions dataset() const;
};

}  // namespace surfcdm
