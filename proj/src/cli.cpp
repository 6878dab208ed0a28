#include "surfcdm/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "surfcdm/denoiser.hpp"
#include "surfcdm/errors.hpp"
#include "surfcdm/evaluation.hpp"
#include "surfcdm/image_io.hpp"
#include "surfcdm/metrics.hpp"
#include "surfcdm/run_config.hpp"
#include "surfcdm/sampler.hpp"
#include "surfcdm/synthdata.hpp"

namespace fs = std::filesystem;

namespace surfcdm {

namespace {

// Thrown for argument problems detected after parsing; maps to exit code 1.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

int exit_code_for(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::InvalidConfig:
        case ErrorKind::InvalidSchedule:
        case ErrorKind::InvalidScale:
        case ErrorKind::ConfigMismatch:
        case ErrorKind::TooFewRuns:
        case ErrorKind::InvalidSize:
        case ErrorKind::InvalidSpec:
            return 1;
        default:
            return 2;
    }
}

// Flags shared by every subcommand. `overrides` maps a flag to its config key.
struct Common {
    std::string config_path;
    std::vector<std::string> sets;
    std::vector<std::pair<CLI::Option*, std::string>> overrides;
    std::map<std::string, std::string> values;
    std::string out_dir;

    void add(CLI::App* cmd, const std::string& flag, const std::string& key, const std::string& help) {
        auto* opt = cmd->add_option(flag, values[key], help);
        overrides.emplace_back(opt, key);
    }

    RunConfig resolve() const {
        RunConfig cfg;
        if (const char* env = std::getenv("SURFCDM_SEED"); env != nullptr && *env != '\0') cfg.set("seed", env);
        if (!config_path.empty()) cfg.load_file(config_path);
        for (const auto& kv : sets) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + kv + "'");
            cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
        }
        for (const auto& [opt, key] : overrides) {
            if (opt->count() > 0) cfg.set(key, values.at(key));
        }
        cfg.validate();
        return cfg;
    }
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--config", c.config_path, "Configuration file (key = value lines)");
    cmd->add_option("--set", c.sets, "Override a config key: --set key=value");
    c.add(cmd, "--seed", "seed", "Random seed");
}

// Creates `dir` and checks a file can be written there.
void ensure_writable_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw UsageError("output directory " + dir.string() + " is not writable: " + ec.message());
    const fs::path probe = dir / ".surfcdm_probe";
    {
        std::ofstream f(probe);
        if (!f) throw UsageError("output directory " + dir.string() + " is not writable");
    }
    fs::remove(probe, ec);
}

void echo_config(const fs::path& dir, const RunConfig& cfg) {
    write_text_atomic(dir / "effective_config.txt", cfg.to_text());
}

std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

Centroid parse_centroid(const std::string& s) {
    const auto comma = s.find(',');
    if (comma == std::string::npos) throw UsageError("--centroid-xy expects a,b");
    try {
        return {std::stod(s.substr(0, comma)), std::stod(s.substr(comma + 1))};
    } catch (const std::logic_error&) {
        throw UsageError("--centroid-xy expects a,b");
    }
}

void require_file(const std::string& path, const std::string& what) {
    if (path.empty()) throw UsageError(what + " is required");
    if (!fs::exists(path)) throw Error(ErrorKind::IoError, what + " not found: " + path);
}

// Model source for segment / eval / uncertainty: a checkpoint path or "oracle".
struct ModelSource {
    std::string spec;
    std::optional<DenoiserModel> network;

    bool is_oracle() const { return spec == "oracle"; }

    void load(const RunConfig& cfg) {
        if (spec.empty()) throw UsageError("--model is required (checkpoint path or 'oracle')");
        if (is_oracle()) return;
        require_file(spec, "model checkpoint");
        network = load_checkpoint(spec);
        (void)cfg;
    }

    // Sampler config restricted to the grid the network was trained on.
    SamplerConfig sampler(const RunConfig& cfg) const {
        SamplerConfig s = cfg.sampler();
        if (network) {
            s.num_columns = network->config().num_columns;
            s.column_length = network->config().column_length;
        }
        return s;
    }
};

std::vector<EvalItem> load_split(const fs::path& data_dir, Split split) {
    const DatasetManifest manifest = read_manifest(data_dir / "manifest.json");
    std::vector<EvalItem> items;
    for (const auto& e : manifest.split(split)) {
        GeneratedSample s = load_sample(manifest, e->id);
        items.push_back({e->id, std::move(s.image), std::move(s.mask), s.centroid});
    }
    return items;
}

// Polar mask drawn with columns along the horizontal axis and radius downward.
Gray8 polar_to_gray(const PolarRaster& p) {
    const int X = p.config.num_columns;
    const int L = p.config.column_length;
    Gray8 g(X, L, 0);
    for (int x = 0; x < X; ++x)
        for (int y = 0; y < L; ++y) g(x, y) = p.at(x, y) >= 0.5f ? 255 : 0;
    return g;
}

Gray8 horizontal_strip(const std::vector<Gray8>& tiles, int gap) {
    if (tiles.empty()) return Gray8();
    int w = 0;
    int h = 0;
    for (const auto& t : tiles) {
        w += t.width();
        h = std::max(h, t.height());
    }
    w += gap * static_cast<int>(tiles.size() - 1);
    Gray8 strip(w, h, 128);
    int x0 = 0;
    for (const auto& t : tiles) {
        for (int y = 0; y < t.height(); ++y)
            for (int x = 0; x < t.width(); ++x) strip(x0 + x, y) = t(x, y);
        x0 += t.width() + gap;
    }
    return strip;
}

// Blue-to-red ramp for values in [0, vmax].
std::array<std::uint8_t, 3> heat(double v, double vmax) {
    const double t = vmax > 0.0 ? std::clamp(v / vmax, 0.0, 1.0) : 0.0;
    const auto c = [](double x) { return static_cast<std::uint8_t>(std::lround(std::clamp(x, 0.0, 1.0) * 255.0)); };
    return {c(1.5 * t), c(1.0 - std::abs(2.0 * t - 1.0)), c(1.5 * (1.0 - t))};
}

struct ImageInput {
    std::string image_path;
    std::string truth_path;
    std::string centroid_xy;
    std::string centroid_mode;

    void add(CLI::App* cmd, Common& c) {
        cmd->add_option("--image", image_path, "Input image PNG")->required();
        cmd->add_option("--truth-mask", truth_path, "Ground-truth mask PNG (oracle centroid and oracle model)");
        cmd->add_option("--centroid-xy", centroid_xy, "Oracle centroid as a,b (column,row)");
        c.add(cmd, "--centroid", "sampler.centroid", "Centroid source: oracle or estimated");
    }

    CartesianImage image() const {
        require_file(image_path, "image");
        return from_gray8(read_png(image_path));
    }

    std::optional<CartesianMask> truth() const {
        if (truth_path.empty()) return std::nullopt;
        require_file(truth_path, "truth mask");
        return mask_from_gray8(read_png(truth_path));
    }

    std::optional<Centroid> centroid(const std::optional<CartesianMask>& truth) const {
        if (!centroid_xy.empty()) return parse_centroid(centroid_xy);
        if (truth) return compute_centroid(*truth);
        return std::nullopt;
    }
};

void check_model_inputs(const ModelSource& model, const SamplerConfig& s, const std::optional<CartesianMask>& truth,
                        const std::optional<Centroid>& centroid) {
    if (model.is_oracle() && !truth) throw UsageError("--model oracle needs --truth-mask");
    if (s.centroid_mode == CentroidMode::Oracle && !centroid) {
        throw UsageError("oracle centroid needs --truth-mask or --centroid-xy (or use --centroid estimated)");
    }
}

std::unique_ptr<ScoreModel> make_scorer(const ModelSource& model, const std::optional<CartesianMask>& truth) {
    if (model.is_oracle()) return std::make_unique<OracleDenoiser>(*truth);
    return std::make_unique<DenoiserModel>(*model.network);
}

// ---------------------------------------------------------------------------

int cmd_gen_data(const Common& c, std::ostream& out) {
    const RunConfig cfg = c.resolve();
    if (c.out_dir.empty()) throw UsageError("--out is required");
    const fs::path dir = c.out_dir;
    ensure_writable_dir(dir);
    const DatasetManifest m = make_dataset(cfg.dataset(), dir);
    echo_config(dir, cfg);
    out << "wrote " << m.samples.size() << " samples to " << dir.string() << " (train "
        << m.split(Split::Train).size() << ", val " << m.split(Split::Val).size() << ", test "
        << m.split(Split::Test).size() << ")\n";
    return 0;
}

int cmd_train(const Common& c, const std::string& data_dir, bool verbose, std::ostream& out) {
    const RunConfig cfg = c.resolve();
    if (data_dir.empty()) throw UsageError("--data is required");
    if (c.out_dir.empty()) throw UsageError("--out is required");
    const fs::path manifest_path = fs::path(data_dir) / "manifest.json";
    require_file(manifest_path.string(), "dataset manifest");
    const fs::path dir = c.out_dir;
    ensure_writable_dir(dir);

    const DatasetManifest manifest = read_manifest(manifest_path);
    TrainingData data;
    for (const auto& e : manifest.split(Split::Train)) {
        if (cfg.train_max_samples > 0 && static_cast<int>(data.train.size()) >= cfg.train_max_samples) break;
        GeneratedSample s = load_sample(manifest, e->id);
        data.train.push_back({std::move(s.image), std::move(s.mask), s.centroid});
    }
    for (const auto& e : manifest.split(Split::Val)) {
        GeneratedSample s = load_sample(manifest, e->id);
        data.val.push_back({std::move(s.image), std::move(s.mask), s.centroid});
    }
    if (data.train.empty()) throw Error(ErrorKind::InvalidConfig, "training split is empty");

    TrainingConfig tc = cfg.training();
    tc.verbose = verbose;
    DenoiserModel model = init_model(cfg.denoiser(), cfg.denoiser_init_seed);
    model = train(std::move(model), data, cfg.schedule(), cfg.perturbation, tc);

    save_checkpoint(model, dir / "model.ckpt");
    std::string csv = "step,loss\n";
    const auto& hist = model.metadata().loss_history;
    for (std::size_t i = 0; i < hist.size(); ++i) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%zu,%.9g\n", i + 1, hist[i]);
        csv += buf;
    }
    write_text_atomic(dir / "loss_history.csv", csv);
    std::string vcsv = "epoch,val_loss\n";
    const auto& vh = model.metadata().val_history;
    for (std::size_t i = 0; i < vh.size(); ++i) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%zu,%.9g\n", i + 1, vh[i]);
        vcsv += buf;
    }
    write_text_atomic(dir / "val_history.csv", vcsv);
    echo_config(dir, cfg);
    out << "trained " << hist.size() << " steps on " << data.train.size() << " samples; checkpoint "
        << (dir / "model.ckpt").string() << "\n";
    return 0;
}

int cmd_segment(const Common& c, ModelSource model, const ImageInput& in, bool trace, std::ostream& out) {
    const RunConfig cfg = c.resolve();
    if (c.out_dir.empty()) throw UsageError("--out is required");
    model.load(cfg);
    const SamplerConfig s = model.sampler(cfg);
    const CartesianImage image = in.image();
    const auto truth = in.truth();
    const auto centroid = in.centroid(truth);
    check_model_inputs(model, s, truth, centroid);
    const fs::path dir = c.out_dir;
    ensure_writable_dir(dir);

    const auto scorer = make_scorer(model, truth);
    const Segmentation seg = segment(image, *scorer, s, cfg.seed, centroid);
    write_png(dir / "mask.png", mask_to_gray8(seg.mask));
    if (trace) {
        const fs::path tdir = dir / "trace";
        fs::create_directories(tdir);
        std::vector<Gray8> tiles;
        for (std::size_t k = 0; k < seg.trace.states.size(); ++k) {
            tiles.push_back(polar_to_gray(seg.trace.states[k]));
            char name[32];
            std::snprintf(name, sizeof name, "step_%02zu.png", k);
            write_png(tdir / name, tiles.back());
        }
        write_png(tdir / "strip.png", horizontal_strip(tiles, 4));
    }
    echo_config(dir, cfg);
    out << "mask written to " << (dir / "mask.png").string() << " (" << foreground_count(seg.mask)
        << " foreground pixels)\n";
    if (truth) {
        const MetricsRecord r = compute_metrics(seg.mask, *truth);
        out << "DSC " << fixed(r.dsc, 4) << " IoU " << fixed(r.iou, 4) << " HD95 " << fixed(r.hd95, 3) << "\n";
    }
    return 0;
}

int cmd_eval(const Common& c, ModelSource model, const std::string& data_dir, const std::string& split_name,
             std::ostream& out) {
    const RunConfig cfg = c.resolve();
    if (data_dir.empty()) throw UsageError("--data is required");
    if (c.out_dir.empty()) throw UsageError("--out is required");
    if (split_name != "train" && split_name != "val" && split_name != "test") {
        throw UsageError("--split must be train, val or test");
    }
    const Split split = split_from_string(split_name);
    model.load(cfg);
    const SamplerConfig s = model.sampler(cfg);
    require_file((fs::path(data_dir) / "manifest.json").string(), "dataset manifest");
    const auto items = load_split(data_dir, split);
    if (items.empty()) throw UsageError("split '" + split_name + "' is empty");
    const fs::path dir = c.out_dir;
    ensure_writable_dir(dir);

    const EvaluationReport report =
        model.is_oracle() ? evaluate_oracle(items, s, cfg.seed) : evaluate(items, *model.network, s, cfg.seed);
    write_text_atomic(dir / "metrics.csv", report_to_csv(report));
    echo_config(dir, cfg);
    out << "evaluated " << items.size() << " samples (" << split_name << ")\n";
    out << "DSC  " << fixed(report.dsc.mean, 4) << " ± " << fixed(report.dsc.sd, 4) << "\n";
    out << "IoU  " << fixed(report.iou.mean, 4) << " ± " << fixed(report.iou.sd, 4) << "\n";
    out << "HD95 " << fixed(report.hd95.mean, 3) << " ± " << fixed(report.hd95.sd, 3) << "\n";
    return 0;
}

int cmd_uncertainty(const Common& c, ModelSource model, const ImageInput& in, std::ostream& out) {
    const RunConfig cfg = c.resolve();
    if (c.out_dir.empty()) throw UsageError("--out is required");
    model.load(cfg);
    const SamplerConfig s = model.sampler(cfg);
    const CartesianImage image = in.image();
    const auto truth = in.truth();
    const auto centroid = in.centroid(truth);
    check_model_inputs(model, s, truth, centroid);
    const fs::path dir = c.out_dir;
    ensure_writable_dir(dir);

    const auto scorer = make_scorer(model, truth);
    const auto masks = sample_ensemble(image, *scorer, s, cfg.sampler_runs, cfg.seed, centroid);
    const UncertaintyMap u = uncertainty(masks);

    const int w = image.width();
    const int h = image.height();
    Rgb8 overlay(w, h);
    Rgb8 heatmap(w, h);
    double sd_max = 0.0;
    for (double v : u.sd.values()) sd_max = std::max(sd_max, v);
    std::string csv;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double g = image(x, y);
            const double m = u.mean(x, y);
            const auto px = [](double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); };
            overlay(x, y) = {px(g * (1.0 - 0.5 * m) + 0.5 * m), px(g * (1.0 - 0.5 * m)), px(g * (1.0 - 0.5 * m))};
            heatmap(x, y) = heat(u.sd(x, y), sd_max);
            char buf[32];
            std::snprintf(buf, sizeof buf, "%s%.6g", x ? "," : "", static_cast<double>(u.sd(x, y)));
            csv += buf;
        }
        csv += '\n';
    }
    write_png(dir / "mean_overlay.png", overlay);
    write_png(dir / "sd_heatmap.png", heatmap);
    write_text_atomic(dir / "sd.csv", csv);
    echo_config(dir, cfg);
    out << u.runs << " runs; max SD " << fixed(sd_max, 4) << "; outputs in " << dir.string() << "\n";
    return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Surface cold-diffusion segmentation", "surfcdm"};
    app.require_subcommand(1);

    Common gen_c;
    auto* gen = app.add_subcommand("gen-data", "Generate a synthetic dataset");
    add_common(gen, gen_c);
    gen->add_option("--out", gen_c.out_dir, "Output directory");
    gen_c.add(gen, "--n", "data.n_samples", "Number of samples");
    gen_c.add(gen, "--frames-per-group", "data.frames_per_group", "Frames per group");
    gen_c.add(gen, "--width", "data.width", "Image width");
    gen_c.add(gen, "--height", "data.height", "Image height");

    Common train_c;
    std::string train_data;
    bool train_verbose = false;
    auto* tr = app.add_subcommand("train", "Train the denoiser");
    add_common(tr, train_c);
    tr->add_option("--data", train_data, "Dataset directory (with manifest.json)");
    tr->add_option("--out", train_c.out_dir, "Output directory");
    tr->add_flag("--verbose", train_verbose, "Print per-epoch losses");
    train_c.add(tr, "--epochs", "train.epochs", "Training epochs");
    train_c.add(tr, "--lr", "train.learning_rate", "Learning rate");
    train_c.add(tr, "--batch-size", "train.batch_size", "Batch size");
    train_c.add(tr, "--max-samples", "train.max_samples", "Use at most this many training samples (0 = all)");

    Common seg_c;
    ModelSource seg_model;
    ImageInput seg_in;
    bool seg_trace = false;
    auto* sg = app.add_subcommand("segment", "Segment one image");
    add_common(sg, seg_c);
    sg->add_option("--model", seg_model.spec, "Checkpoint path or 'oracle'");
    sg->add_option("--out", seg_c.out_dir, "Output directory");
    sg->add_flag("--trace", seg_trace, "Write per-step polar masks");
    seg_in.add(sg, seg_c);
    seg_c.add(sg, "--steps", "schedule.steps", "Number of reverse steps");

    Common ev_c;
    ModelSource ev_model;
    std::string ev_data;
    std::string ev_split = "test";
    auto* ev = app.add_subcommand("eval", "Evaluate on a dataset split");
    add_common(ev, ev_c);
    ev->add_option("--model", ev_model.spec, "Checkpoint path or 'oracle'");
    ev->add_option("--data", ev_data, "Dataset directory");
    ev->add_option("--split", ev_split, "train, val or test");
    ev->add_option("--out", ev_c.out_dir, "Output directory");
    ev_c.add(ev, "--steps", "schedule.steps", "Number of reverse steps");
    ev_c.add(ev, "--centroid", "sampler.centroid", "Centroid source: oracle or estimated");

    Common un_c;
    ModelSource un_model;
    ImageInput un_in;
    auto* un = app.add_subcommand("uncertainty", "Ensemble uncertainty map for one image");
    add_common(un, un_c);
    un->add_option("--model", un_model.spec, "Checkpoint path or 'oracle'");
    un->add_option("--out", un_c.out_dir, "Output directory");
    un_in.add(un, un_c);
    un_c.add(un, "--runs", "sampler.runs", "Number of sampling runs (>= 2)");
    un_c.add(un, "--steps", "schedule.steps", "Number of reverse steps");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 1;
    }

    try {
        if (gen->parsed()) return cmd_gen_data(gen_c, out);
        if (tr->parsed()) return cmd_train(train_c, train_data, train_verbose, out);
        if (sg->parsed()) return cmd_segment(seg_c, seg_model, seg_in, seg_trace, out);
        if (ev->parsed()) return cmd_eval(ev_c, ev_model, ev_data, ev_split, out);
        if (un->parsed()) return cmd_uncertainty(un_c, un_model, un_in, out);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return exit_code_for(e.kind());
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}

}  // namespace surfcdm
