#pragma once

// Synthetic star-shaped, ultrasound-like segmentation data: a dark cavity
// bounded by a bright wall, multiplicative speckle, a smooth intensity ramp and
// optional boundary dropout arcs where the wall fades into the cavity.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "surfcdm/grid.hpp"
#include "surfcdm/polar_surface.hpp"
#include "surfcdm/rng.hpp"

namespace surfcdm {

struct ShapeSpec {
    double base_radius = 40.0;  // pixels
    std::vector<double> amplitudes;  // a_k, k = 1..K
    std::vector<double> phases;      // phi_k
    std::optional<Centroid> center;  // defaults to the image center
    double center_jitter = 0.0;      // uniform +- jitter in pixels

    /// r(theta) = r0 + sum_k a_k sin(k theta + phi_k)
    double radius(double theta) const;
    /// Minimum of r(theta) over a dense angular sweep.
    double min_radius() const;
    void validate() const;

    /// Random spec scaled to a width x height frame.
    static ShapeSpec random(Rng& rng, int width, int height, int harmonics = 5);
};

struct DropoutArc {
    double start = 0.0;        // radians
    double span = 0.0;         // radians, [0, 2pi)
    double attenuation = 1.0;  // [0, 1]; 1 removes the wall entirely

    bool contains(double theta) const;
};

struct ImageDegradationSpec {
    double cavity_intensity = 0.12;
    double wall_intensity = 0.80;
    double tissue_intensity = 0.45;
    double wall_thickness = 0.25;  // fraction of base radius
    double speckle = 0.5;          // multiplicative Rayleigh speckle strength
    double gradient = 0.15;        // peak-to-peak smooth intensity ramp
    double blur_radius = 1.5;      // Gaussian sigma in pixels
    std::vector<DropoutArc> dropout_arcs;

    void validate() const;
};

struct GeneratedSample {
    CartesianImage image;
    CartesianMask mask;
    Centroid centroid;
};

/// Deterministic from `seed`. Image intensities are quantized to multiples of 1/255.
GeneratedSample gen_sample(const ShapeSpec& spec, const ImageDegradationSpec& deg, int width, int height,
                           std::uint64_t seed);

/// Analytic rasterization of the star shape (pixel centers at integer coordinates).
CartesianMask rasterize_shape(const ShapeSpec& spec, Centroid center, int width, int height);

enum class Split { Train, Val, Test };
std::string to_string(Split split);
Split split_from_string(const std::string& name);

struct ManifestEntry {
    std::string id;
    int group = 0;
    Split split = Split::Train;
    std::string image_path;  // relative to the manifest root
    std::string mask_path;
    std::uint64_t seed = 0;
    Centroid centroid;

    friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct DatasetManifest {
    std::filesystem::path root;
    int width = 0;
    int height = 0;
    std::uint64_t seed = 0;
    std::vector<ManifestEntry> samples;

    std::vector<const ManifestEntry*> split(Split s) const;
    const ManifestEntry& find(const std::string& id) const;
};

struct DatasetOptions {
    int n_samples = 500;
    int frames_per_group = 10;
    int width = 256;
    int height = 256;
    std::uint64_t seed = 0;
    double dropout_probability = 0.3;
};

/// Group counts for the 70:10:20 split: {train, val, test}.
std::array<int, 3> split_group_counts(int groups);

/// Generate, write and index a dataset under out_dir/{train,val,test}/.
DatasetManifest make_dataset(const DatasetOptions& options, const std::filesystem::path& out_dir);

/// Generate the samples of a dataset in memory without touching the filesystem.
std::vector<std::pair<ManifestEntry, GeneratedSample>> generate_dataset(const DatasetOptions& options);

std::string manifest_to_json(const DatasetManifest& manifest);
DatasetManifest read_manifest(const std::filesystem::path& manifest_path);

GeneratedSample load_sample(const DatasetManifest& manifest, const std::string& id);

/// Bilinear image resize, nearest-neighbor mask resize, intensities clamped to [0,1].
std::pair<CartesianImage, CartesianMask> preprocess(const CartesianImage& image, const CartesianMask& mask,
                                                    int target_width = 256, int target_height = 352);

struct AugmentDraw {
    double offset = 0.0;  // fraction of the max intensity
    bool flip = false;

    static AugmentDraw sample(std::uint64_t seed);
};

struct Augmented {
    CartesianImage image;
    CartesianMask mask;
    AugmentDraw draw;
};

Augmented augment(const CartesianImage& image, const CartesianMask& mask, const AugmentDraw& draw);
Augmented augment(const CartesianImage& image, const CartesianMask& mask, std::uint64_t seed);

}  // namespace surfcdm
