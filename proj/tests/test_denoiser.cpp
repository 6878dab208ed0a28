#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "fixtures.hpp"
#include "gradcheck.hpp"
#include "surfcdm/denoiser.hpp"
#include "surfcdm/errors.hpp"
#include "surfcdm/nn.hpp"

using namespace surfcdm;
namespace fs = std::filesystem;

namespace {

DenoiserConfig tiny_config() {
    DenoiserConfig c;
    c.levels = 2;
    c.channels = {4, 8};
    c.num_columns = 16;
    c.column_length = 14;
    c.padded_length = 16;
    return c;
}

PolarGridConfig tiny_grid(const DenoiserConfig& c) {
    PolarGridConfig g;
    g.num_columns = c.num_columns;
    g.column_length = c.column_length;
    g.radial_step = 1.0;
    g.centroid = {20, 20};
    return g;
}

PolarRaster random_image(const PolarGridConfig& g, Rng& rng) {
    PolarRaster p(g, ChannelKind::Image);
    for (auto& v : p.values.values()) v = static_cast<float>(rng.uniform());
    return p;
}

ErrorKind kind_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("no error thrown");
    return ErrorKind::IoError;
}

fs::path temp_path(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "surfcdm_unit";
    fs::create_directories(dir);
    return dir / name;
}

}  // namespace

TEST_CASE("analytic gradients match central differences") {
    const auto r = gradcheck::run(2, {4, 4}, 16, 10, 5);
    CHECK(r.min_per_layer >= 10);
    CHECK(r.layers == 2 * 2 + 2 + 1);  // encoder + bottleneck, one decoder level, head
    CHECK(r.head_checked == 4 + 1);
    CHECK(r.max_rel_error < 1e-4);
}

TEST_CASE("config validation and init") {
    DenoiserConfig c;
    CHECK_NOTHROW(c.validate());
    c.channels = {16, 32, 64};
    CHECK(kind_of([&] { c.validate(); }) == ErrorKind::InvalidConfig);
    CHECK(kind_of([&] { init_model(c, 1); }) == ErrorKind::InvalidConfig);
    c = {};
    c.padded_length = 220;  // not divisible by 8
    CHECK(kind_of([&] { c.validate(); }) == ErrorKind::InvalidConfig);
    c = {};
    c.padded_length = 192;  // smaller than L
    CHECK(kind_of([&] { c.validate(); }) == ErrorKind::InvalidConfig);

    const DenoiserModel a = init_model(tiny_config(), 42);
    const DenoiserModel b = init_model(tiny_config(), 42);
    const DenoiserModel d = init_model(tiny_config(), 43);
    for (std::size_t k = 0; k < a.network().params().size(); ++k)
        CHECK(a.network().params()[k].value == b.network().params()[k].value);
    CHECK(a.network().params()[0].value != d.network().params()[0].value);
}

TEST_CASE("bottleneck extent for the default network") {
    nn::UNet<float> net(DenoiserConfig{}.unet_shape());
    net.initialize(1);
    nn::Tensor<float> in(2, 256, 224, 0.1f);
    nn::UNet<float>::Cache cache;
    const auto out = net.forward(in, 0.5f, &cache);
    CHECK(out.height == 256);
    CHECK(out.width == 224);
    // deepest encoder unit sees the bottleneck
    const auto& deepest = cache.units[2 * 3];
    CHECK(deepest.input.height == 32);
    CHECK(deepest.input.width == 28);
}

TEST_CASE("forward is finite, in range and deterministic") {
    const auto cfg = tiny_config();
    const DenoiserModel m = init_model(cfg, 7);
    const auto g = tiny_grid(cfg);
    Rng rng(1);
    for (int t = 0; t < 5; ++t) {
        const PolarRaster mask = surface_to_polar_mask(Surface::constant(16, 14, rng.uniform_int(0, 13)), g);
        const PolarRaster img = random_image(g, rng);
        const PolarRaster p = forward(m, mask, img, 0.5);
        CHECK(p.kind == ChannelKind::Perturbation);
        CHECK(p.config == g);
        for (float v : p.values.values()) {
            CHECK(std::isfinite(v));
            CHECK(v >= 0.0f);
            CHECK(v <= 1.0f);
        }
        CHECK(forward(m, mask, img, 0.5).values == p.values);
    }
    const PolarRaster mask = surface_to_polar_mask(Surface::constant(16, 14, 5), g);
    CHECK(kind_of([&] { forward(m, mask, random_image(g, rng), 0.0); }) == ErrorKind::InvalidScale);

    auto other = g;
    other.num_columns = 32;
    CHECK(kind_of([&] { forward(m, PolarRaster(other, ChannelKind::Mask), PolarRaster(other, ChannelKind::Image), 0.5); }) ==
          ErrorKind::ShapeMismatch);
}

TEST_CASE("zeroed gate silences its unit") {
    nn::UNet<float> net(nn::UNetShape{2, 2, {4, 8}});
    net.initialize(3);
    const auto idx = net.unit_params(1);
    for (auto& v : net.params()[idx[2]].value) v = 0.0f;
    for (auto& v : net.params()[idx[3]].value) v = 0.0f;
    Rng rng(2);
    nn::Tensor<float> in(2, 16, 16);
    for (auto& v : in.data) v = static_cast<float>(rng.uniform());
    nn::UNet<float>::Cache cache;
    net.forward(in, 0.4f, &cache);
    const auto out = nn::UNet<float>::unit_output(cache.units[1]);
    for (float v : out.data) CHECK(v == 0.0f);
    const auto live = nn::UNet<float>::unit_output(cache.units[0]);
    CHECK(std::any_of(live.data.begin(), live.data.end(), [](float v) { return v != 0.0f; }));
}

TEST_CASE("non-finite activations are reported") {
    nn::UNet<float> net(nn::UNetShape{2, 2, {4, 8}});
    net.initialize(3);
    net.params()[0].value[0] = std::numeric_limits<float>::infinity();
    nn::Tensor<float> in(2, 16, 16, 1.0f);
    CHECK(kind_of([&] { net.forward(in, 0.4f); }) == ErrorKind::NonFiniteActivation);
}

TEST_CASE("MSE definition") {
    nn::UNet<double> net(nn::UNetShape{2, 2, {4, 4}});
    net.initialize(9);
    nn::Tensor<double> in(2, 16, 16, 0.5);
    const auto prob = net.forward(in, 0.5);

    // target equal to the prediction: zero loss and zero gradient
    net.zero_grad();
    std::vector<nn::Tensor<double>> inputs{in}, targets{prob};
    std::vector<double> sigmas{0.5};
    const double l0 = accumulate_batch_gradient<double>(net, inputs, targets, sigmas, {}, 16);
    CHECK(l0 == 0.0);
    for (const auto& p : net.params())
        for (double g : p.grad) CHECK(g == 0.0);

    // saturate the head to zero and compare with an all-one target
    net.params()[net.head_bias_index()].value[0] = -1e3;
    for (auto& v : net.params()[net.head_weight_index()].value) v = 0.0;
    targets[0] = nn::Tensor<double>(1, 16, 16, 1.0);
    net.zero_grad();
    const double l1 = accumulate_batch_gradient<double>(net, inputs, targets, sigmas, {}, 16);
    CHECK(l1 == doctest::Approx(1.0));
}

TEST_CASE("overfitting one example drives the loss down") {
    const auto cfg = tiny_config();
    DenoiserModel m = init_model(cfg, 11);
    const auto g = tiny_grid(cfg);
    Rng rng(4);
    std::vector<double> s(16);
    for (int x = 0; x < 16; ++x) s[x] = 5 + (x % 4);
    const Surface clean(s, 14);
    const ForwardSample f = forward_sample(clean, g, make_schedule(), 6, {}, 99);
    PolarRaster img = random_image(g, rng);
    const TrainingExample ex{f.perturbed, img, f.target, f.sigma};
    TrainingConfig tc;
    tc.learning_rate = 1e-2;
    AdamState<float> opt;
    const double first = training_step(m, std::span(&ex, 1), tc, opt);
    double last = first;
    for (int k = 0; k < 400; ++k) last = training_step(m, std::span(&ex, 1), tc, opt);
    CHECK(last < 1e-3);
    CHECK(last < first);
    const std::vector<TrainingExample> exs{ex};
    CHECK(evaluate_loss(m, exs) == doctest::Approx(last).epsilon(0.5));
}

TEST_CASE("training bookkeeping and determinism") {
    auto cfg = tiny_config();
    cfg.num_columns = 16;
    cfg.column_length = 12;
    cfg.padded_length = 12;
    TrainingData data;
    for (int k = 0; k < 12; ++k) {
        Rng rng(100 + k);
        auto spec = ShapeSpec::random(rng, 32, 32);
        const auto gs = gen_sample(spec, {}, 32, 32, 200 + k);
        (k < 10 ? data.train : data.val).push_back({gs.image, gs.mask, gs.centroid});
    }
    TrainingConfig tc;
    tc.epochs = 1;
    tc.batch_size = 4;
    tc.seed = 5;
    const auto sched = make_schedule();
    const DenoiserModel a = train(init_model(cfg, 1), data, sched, {}, tc);
    CHECK(a.metadata().loss_history.size() == 3);  // ceil(10 / 4)
    CHECK(a.metadata().val_history.size() == 1);
    CHECK(a.metadata().epoch == 1);
    const DenoiserModel b = train(init_model(cfg, 1), data, sched, {}, tc);
    CHECK(a.metadata().loss_history == b.metadata().loss_history);

    tc.epochs = 0;
    CHECK(kind_of([&] { train(init_model(cfg, 1), data, sched, {}, tc); }) == ErrorKind::InvalidConfig);
    tc.epochs = 1;
    tc.learning_rate = 0.0;
    CHECK(kind_of([&] { tc.validate(); }) == ErrorKind::InvalidConfig);
    tc.learning_rate = 1e-3;
    tc.batch_size = 0;
    CHECK(kind_of([&] { tc.validate(); }) == ErrorKind::InvalidConfig);
}

TEST_CASE("training examples use the ground-truth centroid and flip consistently") {
    DenoiserConfig cfg = tiny_config();
    Rng rng(6);
    auto spec = ShapeSpec::random(rng, 40, 40);
    const auto gs = gen_sample(spec, {}, 40, 40, 3);
    const LabeledSample ls{gs.image, gs.mask, gs.centroid};
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const TrainingExample ex = make_training_example(ls, cfg, make_schedule(), {}, true, seed);
        CHECK(is_terrain(ex.perturbed));
        CHECK(ex.sigma >= 0.1);
        CHECK(ex.sigma <= 1.0);
        // clean = perturbed xor target must be terrain too
        PolarRaster clean = ex.perturbed;
        for (std::size_t k = 0; k < clean.values.size(); ++k)
            clean.values.values()[k] = (ex.perturbed.values.values()[k] != ex.target.values.values()[k]) ? 1.0f : 0.0f;
        CHECK(is_terrain(clean));
    }
    const TrainingExample fixed = make_training_example(ls, cfg, make_schedule(), {}, false, 1, 3);
    CHECK(fixed.sigma == make_schedule().sigma(3));
}

TEST_CASE("checkpoint round trip") {
    const auto cfg = tiny_config();
    DenoiserModel m = init_model(cfg, 21);
    m.metadata().epoch = 3;
    m.metadata().loss_history = {0.5, 0.25, 0.125};
    m.metadata().val_history = {0.3};
    const fs::path p = temp_path("rt.ckpt");
    save_checkpoint(m, p);
    const DenoiserModel back = load_checkpoint(p);
    CHECK(back.config() == cfg);
    CHECK(back.metadata().epoch == 3);
    CHECK(back.metadata().loss_history == m.metadata().loss_history);
    for (std::size_t k = 0; k < m.network().params().size(); ++k)
        CHECK(back.network().params()[k].value == m.network().params()[k].value);

    const auto g = tiny_grid(cfg);
    Rng rng(3);
    const PolarRaster img = random_image(g, rng);
    const PolarRaster mask = surface_to_polar_mask(Surface::constant(16, 14, 6), g);
    CHECK(forward(back, mask, img, 0.3).values == forward(m, mask, img, 0.3).values);
    CHECK_NOTHROW(load_checkpoint(p, cfg));
}

TEST_CASE("checkpoint errors") {
    const auto cfg = tiny_config();
    const fs::path p = temp_path("err.ckpt");
    save_checkpoint(init_model(cfg, 2), p);

    CHECK(kind_of([&] { load_checkpoint(temp_path("missing.ckpt")); }) == ErrorKind::IoError);

    std::string bytes;
    {
        std::ifstream in(p, std::ios::binary);
        bytes.assign(std::istreambuf_iterator<char>(in), {});
    }
    const fs::path trunc = temp_path("trunc.ckpt");
    {
        std::ofstream out(trunc, std::ios::binary);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
    }
    CHECK(kind_of([&] { load_checkpoint(trunc); }) == ErrorKind::FormatError);

    const fs::path bad = temp_path("magic.ckpt");
    {
        std::string b = bytes;
        b[0] = 'X';
        std::ofstream out(bad, std::ios::binary);
        out << b;
    }
    CHECK(kind_of([&] { load_checkpoint(bad); }) == ErrorKind::FormatError);

    const fs::path ver = temp_path("version.ckpt");
    {
        std::string b = bytes;
        b[8] = 9;  // version field follows the 8-byte magic
        std::ofstream out(ver, std::ios::binary);
        out << b;
    }
    try {
        load_checkpoint(ver);
        FAIL("expected FormatError");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::FormatError);
        CHECK(std::string(e.what()).find("version") != std::string::npos);
    }

    auto other = cfg;
    other.channels = {4, 16};
    try {
        load_checkpoint(p, other);
        FAIL("expected FormatError");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::FormatError);
        CHECK(std::string(e.what()).find("channels") != std::string::npos);
    }
}
