#include "surfcdm/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numbers>
#include <numeric>

#include <json.hpp>

#include "surfcdm/image_io.hpp"

namespace surfcdm {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double wrap_angle(double theta) {
    double t = std::fmod(theta, kTwoPi);
    return t < 0.0 ? t + kTwoPi : t;
}

std::vector<double> gaussian_kernel(double sigma) {
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        k[static_cast<std::size_t>(i + radius)] = std::exp(-0.5 * i * i / (sigma * sigma));
        sum += k[static_cast<std::size_t>(i + radius)];
    }
    for (double& v : k) v /= sum;
    return k;
}

// Separable Gaussian blur with edge replication.
Grid<double> blur(const Grid<double>& src, double sigma) {
    if (sigma <= 0.0) return src;
    const auto k = gaussian_kernel(sigma);
    const int r = static_cast<int>(k.size() / 2);
    const int W = src.width();
    const int H = src.height();
    Grid<double> tmp(W, H, 0.0);
    Grid<double> out(W, H, 0.0);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            double acc = 0.0;
            for (int i = -r; i <= r; ++i) acc += k[static_cast<std::size_t>(i + r)] * src(std::clamp(x + i, 0, W - 1), y);
            tmp(x, y) = acc;
        }
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            double acc = 0.0;
            for (int i = -r; i <= r; ++i) acc += k[static_cast<std::size_t>(i + r)] * tmp(x, std::clamp(y + i, 0, H - 1));
            out(x, y) = acc;
        }
    return out;
}

// Strength of dropout at angle theta, tapered over `taper` radians at arc ends.
double dropout_strength(const std::vector<DropoutArc>& arcs, double theta) {
    constexpr double taper = 0.15;
    double best = 0.0;
    for (const auto& arc : arcs) {
        const double rel = wrap_angle(theta - arc.start);
        double w = 0.0;
        if (rel <= arc.span) {
            w = std::min({1.0, rel / taper + 0.5, (arc.span - rel) / taper + 0.5});
        } else {
            const double gap = std::min(rel - arc.span, kTwoPi - rel);
            w = std::max(0.0, 0.5 - gap / taper);
        }
        best = std::max(best, std::clamp(w, 0.0, 1.0) * arc.attenuation);
    }
    return best;
}

}  // namespace

double ShapeSpec::radius(double theta) const {
    double r = base_radius;
    for (std::size_t k = 0; k < amplitudes.size(); ++k) {
        const double phase = k < phases.size() ? phases[k] : 0.0;
        r += amplitudes[k] * std::sin(static_cast<double>(k + 1) * theta + phase);
    }
    return r;
}

double ShapeSpec::min_radius() const {
    double lo = radius(0.0);
    for (int i = 1; i < 4096; ++i) lo = std::min(lo, radius(kTwoPi * i / 4096.0));
    return lo;
}

void ShapeSpec::validate() const {
    if (!(base_radius > 0.0)) throw Error(ErrorKind::InvalidSpec, "base radius must be > 0");
    if (!phases.empty() && phases.size() != amplitudes.size()) {
        throw Error(ErrorKind::InvalidSpec, "amplitudes and phases differ in length");
    }
    if (!(min_radius() > 0.0)) throw Error(ErrorKind::InvalidSpec, "r(theta) must stay positive");
    if (center_jitter < 0.0) throw Error(ErrorKind::InvalidSpec, "center jitter must be >= 0");
}

ShapeSpec ShapeSpec::random(Rng& rng, int width, int height, int harmonics) {
    const double m = std::min(width, height);
    ShapeSpec s;
    s.base_radius = rng.uniform(0.17, 0.27) * m;
    for (int k = 1; k <= harmonics; ++k) {
        s.amplitudes.push_back(rng.uniform(0.0, 0.2 * s.base_radius / k));
        s.phases.push_back(rng.uniform(0.0, kTwoPi));
    }
    s.center_jitter = 0.04 * m;
    return s;
}

bool DropoutArc::contains(double theta) const { return wrap_angle(theta - start) <= span; }

void ImageDegradationSpec::validate() const {
    for (const auto& arc : dropout_arcs) {
        if (!(arc.attenuation >= 0.0 && arc.attenuation <= 1.0)) {
            throw Error(ErrorKind::InvalidSpec, "dropout attenuation must lie in [0,1]");
        }
        if (!(arc.span >= 0.0 && arc.span < kTwoPi)) throw Error(ErrorKind::InvalidSpec, "dropout span must lie in [0, 2pi)");
    }
    if (speckle < 0.0 || gradient < 0.0 || blur_radius < 0.0 || wall_thickness <= 0.0) {
        throw Error(ErrorKind::InvalidSpec, "degradation strengths must be non-negative");
    }
}

CartesianMask rasterize_shape(const ShapeSpec& spec, Centroid center, int width, int height) {
    CartesianMask mask(width, height, 0);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            const double dx = x - center.a;
            const double dy = y - center.b;
            mask(x, y) = std::hypot(dx, dy) < spec.radius(std::atan2(dy, dx)) ? 1 : 0;
        }
    return mask;
}

GeneratedSample gen_sample(const ShapeSpec& spec, const ImageDegradationSpec& deg, int width, int height,
                           std::uint64_t seed) {
    spec.validate();
    deg.validate();
    if (width < 16 || height < 16) throw Error(ErrorKind::InvalidSpec, "image must be at least 16x16");
    Rng rng(mix_seed(seed, 1));

    Centroid center = spec.center.value_or(Centroid{(width - 1) / 2.0, (height - 1) / 2.0});
    if (spec.center_jitter > 0.0) {
        center.a += rng.uniform(-spec.center_jitter, spec.center_jitter);
        center.b += rng.uniform(-spec.center_jitter, spec.center_jitter);
    }

    GeneratedSample out;
    out.mask = rasterize_shape(spec, center, width, height);

    const double wall = deg.wall_thickness * spec.base_radius;
    Grid<double> base(width, height, 0.0);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            const double dx = x - center.a;
            const double dy = y - center.b;
            const double theta = std::atan2(dy, dx);
            const double d = std::hypot(dx, dy) - spec.radius(theta);
            double v;
            if (d < 0.0) {
                v = deg.cavity_intensity;
            } else if (d < wall) {
                v = deg.wall_intensity;
            } else {
                const double t = std::min(1.0, (d - wall) / wall);
                v = (1.0 - t) * deg.wall_intensity + t * deg.tissue_intensity;
            }
            if (d >= 0.0 && !deg.dropout_arcs.empty()) {
                const double fade = std::clamp(3.0 - d / wall, 0.0, 1.0);
                const double a = dropout_strength(deg.dropout_arcs, theta) * fade;
                v = (1.0 - a) * v + a * deg.cavity_intensity;
            }
            base(x, y) = v;
        }
    base = blur(base, deg.blur_radius);

    if (deg.speckle > 0.0) {
        // Rayleigh samples normalized to unit mean, lightly correlated.
        const double scale = 1.0 / std::sqrt(std::numbers::pi / 2.0);
        Grid<double> field(width, height, 0.0);
        for (double& v : field.values()) {
            const double u = std::max(rng.uniform(), 1e-12);
            v = scale * std::sqrt(-2.0 * std::log(u));
        }
        field = blur(field, 0.7);
        for (std::size_t k = 0; k < base.size(); ++k) base.values()[k] *= 1.0 + deg.speckle * (field.values()[k] - 1.0);
    }

    const double phi = rng.uniform(0.0, kTwoPi);
    const double extent = std::hypot(width, height);
    out.image = CartesianImage(width, height, 0.0f);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            const double ramp =
                deg.gradient * ((x - center.a) * std::cos(phi) + (y - center.b) * std::sin(phi)) / extent;
            const double v = std::clamp(base(x, y) + ramp, 0.0, 1.0);
            out.image(x, y) = static_cast<float>(std::lround(v * 255.0)) / 255.0f;
        }
    out.centroid = compute_centroid(out.mask);
    return out;
}

std::string to_string(Split split) {
    switch (split) {
        case Split::Train: return "train";
        case Split::Val: return "val";
        case Split::Test: return "test";
    }
    return "train";
}

Split split_from_string(const std::string& name) {
    if (name == "train") return Split::Train;
    if (name == "val") return Split::Val;
    if (name == "test") return Split::Test;
    throw Error(ErrorKind::FormatError, "unknown split '" + name + "'");
}

std::vector<const ManifestEntry*> DatasetManifest::split(Split s) const {
    std::vector<const ManifestEntry*> out;
    for (const auto& e : samples)
        if (e.split == s) out.push_back(&e);
    return out;
}

const ManifestEntry& DatasetManifest::find(const std::string& id) const {
    for (const auto& e : samples)
        if (e.id == id) return e;
    throw Error(ErrorKind::IoError, "sample '" + id + "' not in manifest");
}

std::array<int, 3> split_group_counts(int groups) {
    const int test = static_cast<int>(std::lround(0.2 * groups));
    const int val = static_cast<int>(std::lround(0.1 * groups));
    return {groups - test - val, val, test};
}

std::vector<std::pair<ManifestEntry, GeneratedSample>> generate_dataset(const DatasetOptions& options) {
    if (options.n_samples < 10) throw Error(ErrorKind::InvalidConfig, "n_samples must be >= 10");
    if (options.frames_per_group < 1) throw Error(ErrorKind::InvalidConfig, "frames_per_group must be >= 1");
    const int groups = (options.n_samples + options.frames_per_group - 1) / options.frames_per_group;

    std::vector<int> order(static_cast<std::size_t>(groups));
    std::iota(order.begin(), order.end(), 0);
    Rng split_rng(mix_seed(options.seed, 0x5b1));
    std::shuffle(order.begin(), order.end(), split_rng.engine());
    const auto counts = split_group_counts(groups);
    std::vector<Split> group_split(static_cast<std::size_t>(groups), Split::Train);
    for (int k = 0; k < groups; ++k) {
        const auto g = static_cast<std::size_t>(order[static_cast<std::size_t>(k)]);
        if (k < counts[2]) group_split[g] = Split::Test;
        else if (k < counts[2] + counts[1]) group_split[g] = Split::Val;
    }

    std::vector<std::pair<ManifestEntry, GeneratedSample>> out;
    out.reserve(static_cast<std::size_t>(options.n_samples));
    for (int g = 0; g < groups; ++g) {
        Rng group_rng(mix_seed(options.seed, 0x10000ull + static_cast<std::uint64_t>(g)));
        const ShapeSpec base = ShapeSpec::random(group_rng, options.width, options.height);
        const double speckle = group_rng.uniform(0.35, 0.6);
        for (int f = 0; f < options.frames_per_group; ++f) {
            const int index = g * options.frames_per_group + f;
            if (index >= options.n_samples) break;
            const std::uint64_t seed = mix_seed(options.seed, 0x20000000ull + static_cast<std::uint64_t>(index));
            Rng frame_rng(seed);
            ShapeSpec spec = base;
            spec.base_radius *= 1.0 + 0.04 * frame_rng.normal();
            for (auto& a : spec.amplitudes) a = std::max(0.0, a * (1.0 + 0.1 * frame_rng.normal()));
            for (auto& p : spec.phases) p += 0.1 * frame_rng.normal();
            ImageDegradationSpec deg;
            deg.speckle = speckle;
            deg.gradient = frame_rng.uniform(0.0, 0.2);
            if (frame_rng.bernoulli(options.dropout_probability)) {
                deg.dropout_arcs.push_back({frame_rng.uniform(0.0, kTwoPi), frame_rng.uniform(kTwoPi / 12, kTwoPi / 6),
                                            frame_rng.uniform(0.6, 1.0)});
            }

            ManifestEntry e;
            char id[16];
            std::snprintf(id, sizeof id, "s%05d", index);
            e.id = id;
            e.group = g;
            e.split = group_split[static_cast<std::size_t>(g)];
            e.seed = seed;
            e.image_path = to_string(e.split) + "/" + e.id + "_image.png";
            e.mask_path = to_string(e.split) + "/" + e.id + "_mask.png";
            GeneratedSample s = gen_sample(spec, deg, options.width, options.height, seed);
            e.centroid = s.centroid;
            out.emplace_back(std::move(e), std::move(s));
        }
    }
    return out;
}

DatasetManifest make_dataset(const DatasetOptions& options, const std::filesystem::path& out_dir) {
    auto samples = generate_dataset(options);
    DatasetManifest manifest;
    manifest.root = out_dir;
    manifest.width = options.width;
    manifest.height = options.height;
    manifest.seed = options.seed;
    std::error_code ec;
    for (const char* sub : {"train", "val", "test"}) {
        std::filesystem::create_directories(out_dir / sub, ec);
        if (ec) throw Error(ErrorKind::IoError, "cannot create " + (out_dir / sub).string() + ": " + ec.message());
    }
    for (auto& [entry, sample] : samples) {
        write_png(out_dir / entry.image_path, to_gray8(sample.image));
        write_png(out_dir / entry.mask_path, mask_to_gray8(sample.mask));
        manifest.samples.push_back(entry);
    }
    write_text_atomic(out_dir / "manifest.json", manifest_to_json(manifest));
    return manifest;
}

std::string manifest_to_json(const DatasetManifest& manifest) {
    nlohmann::json doc;
    doc["version"] = 1;
    doc["width"] = manifest.width;
    doc["height"] = manifest.height;
    doc["seed"] = manifest.seed;
    auto& list = doc["samples"] = nlohmann::json::array();
    for (const auto& e : manifest.samples) {
        list.push_back({{"id", e.id},
                        {"group", e.group},
                        {"split", to_string(e.split)},
                        {"image_path", e.image_path},
                        {"mask_path", e.mask_path},
                        {"seed", e.seed},
                        {"centroid", {e.centroid.a, e.centroid.b}}});
    }
    return doc.dump(2) + "\n";
}

DatasetManifest read_manifest(const std::filesystem::path& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw Error(ErrorKind::IoError, "cannot open manifest " + manifest_path.string());
    DatasetManifest m;
    try {
        const auto doc = nlohmann::json::parse(in);
        m.root = manifest_path.parent_path();
        m.width = doc.at("width").get<int>();
        m.height = doc.at("height").get<int>();
        m.seed = doc.at("seed").get<std::uint64_t>();
        for (const auto& s : doc.at("samples")) {
            ManifestEntry e;
            e.id = s.at("id").get<std::string>();
            e.group = s.at("group").get<int>();
            e.split = split_from_string(s.at("split").get<std::string>());
            e.image_path = s.at("image_path").get<std::string>();
            e.mask_path = s.at("mask_path").get<std::string>();
            e.seed = s.at("seed").get<std::uint64_t>();
            e.centroid = {s.at("centroid").at(0).get<double>(), s.at("centroid").at(1).get<double>()};
            m.samples.push_back(std::move(e));
        }
    } catch (const nlohmann::json::exception& ex) {
        throw Error(ErrorKind::FormatError, "malformed manifest " + manifest_path.string() + ": " + ex.what());
    }
    return m;
}

GeneratedSample load_sample(const DatasetManifest& manifest, const std::string& id) {
    const ManifestEntry& e = manifest.find(id);
    GeneratedSample s;
    s.image = from_gray8(read_png(manifest.root / e.image_path));
    const Gray8 raw_mask = read_png(manifest.root / e.mask_path);
    if (!(raw_mask.width() == s.image.width() && raw_mask.height() == s.image.height())) throw Error(ErrorKind::CorruptSample, id + ": image and mask sizes differ");
    for (std::uint8_t v : raw_mask.values()) {
        if (v != 0 && v != 255) throw Error(ErrorKind::CorruptSample, id + ": mask not binary");
    }
    s.mask = mask_from_gray8(raw_mask);
    if (foreground_count(s.mask) == 0) throw Error(ErrorKind::CorruptSample, id + ": mask empty");
    if (count_components(s.mask) != 1) {
        throw Error(ErrorKind::CorruptSample, id + ": mask foreground is not a single connected component");
    }
    s.centroid = e.centroid;
    if (const int bad = star_violations(s.mask, s.centroid); bad > 0) {
        std::cerr << "warning: " << id << ": mask not star-shaped about its centroid (" << bad << " rays)\n";
    }
    return s;
}

std::pair<CartesianImage, CartesianMask> preprocess(const CartesianImage& image, const CartesianMask& mask,
                                                    int target_width, int target_height) {
    if (target_width < 16 || target_height < 16) throw Error(ErrorKind::InvalidSize, "target size must be >= 16");
    if (image.empty()) throw Error(ErrorKind::InvalidSize, "empty image");
    require_same_shape(image, mask, "image and mask differ in size");
    const double sx = static_cast<double>(image.width()) / target_width;
    const double sy = static_cast<double>(image.height()) / target_height;

    CartesianImage out_img(target_width, target_height, 0.0f);
    CartesianMask out_mask(target_width, target_height, 0);
    for (int y = 0; y < target_height; ++y) {
        const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, image.height() - 1.0);
        const int y0 = static_cast<int>(std::floor(fy));
        const int y1 = std::min(y0 + 1, image.height() - 1);
        const double ty = fy - y0;
        const int ny = std::min(static_cast<int>(std::floor((y + 0.5) * sy)), image.height() - 1);
        for (int x = 0; x < target_width; ++x) {
            const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, image.width() - 1.0);
            const int x0 = static_cast<int>(std::floor(fx));
            const int x1 = std::min(x0 + 1, image.width() - 1);
            const double tx = fx - x0;
            const double v = (1 - ty) * ((1 - tx) * image(x0, y0) + tx * image(x1, y0)) +
                             ty * ((1 - tx) * image(x0, y1) + tx * image(x1, y1));
            out_img(x, y) = static_cast<float>(std::clamp(v, 0.0, 1.0));
            const int nx = std::min(static_cast<int>(std::floor((x + 0.5) * sx)), image.width() - 1);
            out_mask(x, y) = mask(nx, ny) ? 1 : 0;
        }
    }
    return {std::move(out_img), std::move(out_mask)};
}

AugmentDraw AugmentDraw::sample(std::uint64_t seed) {
    Rng rng(mix_seed(seed, 0xa06));
    AugmentDraw d;
    d.offset = rng.uniform(-0.1, 0.1);
    d.flip = rng.bernoulli(0.5);
    return d;
}

Augmented augment(const CartesianImage& image, const CartesianMask& mask, const AugmentDraw& draw) {
    require_same_shape(image, mask, "image and mask differ in size");
    Augmented out{image, mask, draw};
    const float peak = image.empty() ? 0.0f : *std::max_element(image.values().begin(), image.values().end());
    const float shift = static_cast<float>(draw.offset) * peak;
    for (float& v : out.image.values()) v = std::clamp(v + shift, 0.0f, 1.0f);
    if (draw.flip) {
        for (int y = 0; y < image.height(); ++y) {
            std::reverse(out.image.row(y).begin(), out.image.row(y).end());
            std::reverse(out.mask.row(y).begin(), out.mask.row(y).end());
        }
    }
    return out;
}

Augmented augment(const CartesianImage& image, const CartesianMask& mask, std::uint64_t seed) {
    return augment(image, mask, AugmentDraw::sample(seed));
}

}  // namespace surfcdm
