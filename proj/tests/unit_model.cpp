#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <sstream>
#include <vector>

#include "pptv/checkpoint.hpp"
#include "pptv/error.hpp"
#include "pptv/model.hpp"
#include "pptv/rng.hpp"

using pptv::Model;
using pptv::ModelConfig;
using pptv::Rng;
using pptv::Tensor;

namespace {

Tensor random_fields(const ModelConfig& cfg, Rng& rng) {
    Tensor t = Tensor::zeros({pptv::kFieldChannels, cfg.nlat, cfg.nlon});
    for (double& v : t.data) v = rng.uniform(-1.5, 1.5);
    return t;
}

// Small grid that still leaves every conv stage a positive extent.
ModelConfig small_config() {
    ModelConfig c;
    c.conv_filters = {2, 2, 2};
    c.dense_neurons = 3;
    c.nlat = 8;
    c.nlon = 12;
    c.seed = 9;
    return c;
}

// Parameter count recomputed from first principles, independent of
// LayerShapes: stride-1 convs with pads (1,3), ceil-halving pools.
std::size_t expected_param_count(const ModelConfig& c) {
    std::size_t total = 0;
    int in_ch = pptv::kFieldChannels, h = c.nlat, w = c.nlon;
    for (int i = 0; i < 3; ++i) {
        const int out_ch = c.conv_filters[i];
        total += static_cast<std::size_t>(out_ch) * in_ch * c.kernel_h * c.kernel_w + out_ch;
        h = h + 2 - c.kernel_h + 1;
        w = w + 6 - c.kernel_w + 1;
        if (c.calibration_enabled) total += 2 * static_cast<std::size_t>(out_ch) * h * w;
        if (i < 2) {
            h = (h + 1) / 2;
            w = (w + 1) / 2;
        }
        in_ch = out_ch;
    }
    const std::size_t flat = static_cast<std::size_t>(c.conv_filters[2]) * h * w;
    total += static_cast<std::size_t>(c.dense_neurons) * flat + c.dense_neurons;
    total += c.dense_neurons + 1;
    return total;
}

struct ModelFn : pptv::ScalarFn {
    const Model* m;
    std::vector<int> shp;
    explicit ModelFn(const Model& model)
        : m(&model), shp{pptv::kFieldChannels, model.config.nlat, model.config.nlon} {}
    const std::vector<int>& input_shape() const override { return shp; }
    double value(const Tensor& x) const override { return m->predict(x); }
    double value_and_grad(const Tensor& x, std::vector<double>& grad) const override {
        Tensor g;
        const double v = m->forward_grad(x, g);
        grad = g.data;
        return v;
    }
};

}  // namespace

TEST_CASE("parameter count matches an independent closed form") {
    // The documented reference case.
    ModelConfig ref;
    ref.conv_filters = {2, 2, 2};
    ref.dense_neurons = 4;
    ref.calibration_enabled = true;
    CHECK(Model::build(ref).parameter_count() == 9747);
    CHECK(expected_param_count(ref) == 9747);

    for (bool calib : {false, true})
        for (int f : {1, 3})
            for (int n : {1, 5}) {
                ModelConfig c = small_config();
                c.conv_filters = {f, f + 1, f};
                c.dense_neurons = n;
                c.calibration_enabled = calib;
                Model m = Model::build(c);
                CHECK(m.parameter_count() == expected_param_count(c));

                // parameters() exposes exactly the engaged tensors.
                std::size_t listed = 0;
                for (Tensor* t : m.parameters()) listed += t->numel();
                CHECK(listed == m.parameter_count());
                CHECK(m.parameters().size() == (calib ? 16 : 10));
            }
}

TEST_CASE("config validation names bad fields") {
    ModelConfig c = small_config();
    c.lead_months = 0;
    CHECK_THROWS_AS(c.validate(), pptv::ConfigError);
    c.lead_months = 24;
    CHECK_THROWS_AS(c.validate(), pptv::ConfigError);
    c = small_config();
    c.conv_filters[1] = 0;
    CHECK_THROWS_AS(c.validate(), pptv::ConfigError);
    c = small_config();
    c.dense_neurons = -1;
    CHECK_THROWS_AS(c.validate(), pptv::ConfigError);
    c = small_config();
    c.target_month = 13;
    CHECK_THROWS_AS(c.validate(), pptv::ConfigError);
    c = small_config();
    c.nlat = 4;  // conv3 input collapses to zero rows
    CHECK_THROWS_AS(Model::build(c), pptv::ConfigError);
    c = small_config();
    c.target_month = 12;
    CHECK_NOTHROW(c.validate());
}

TEST_CASE("building is deterministic in the seed") {
    ModelConfig c = small_config();
    const Model a = Model::build(c);
    const Model b = Model::build(c);
    for (int i = 0; i < 3; ++i) {
        CHECK(a.conv_w[i].data == b.conv_w[i].data);
        CHECK(a.conv_b[i].data == b.conv_b[i].data);
    }
    for (int i = 0; i < 2; ++i) {
        CHECK(a.dense_w[i].data == b.dense_w[i].data);
        CHECK(a.dense_b[i].data == b.dense_b[i].data);
    }

    c.seed = 10;
    const Model d = Model::build(c);
    CHECK(a.conv_w[0].data != d.conv_w[0].data);

    // Init respects the fan-in bound.
    const double bound0 = std::sqrt(1.0 / (pptv::kFieldChannels * c.kernel_h * c.kernel_w));
    for (double v : a.conv_w[0].data) CHECK(std::abs(v) <= bound0);
}

TEST_CASE("calibration starts as the identity and consumes no draws") {
    ModelConfig off = small_config();
    ModelConfig on = off;
    on.calibration_enabled = true;

    const Model moff = Model::build(off);
    const Model mon = Model::build(on);

    for (int i = 0; i < 3; ++i) {
        for (double v : mon.gamma[i].data) CHECK(v == 1.0);
        for (double v : mon.beta[i].data) CHECK(v == 0.0);
        // Same seed, same weight stream: calibration draws nothing.
        CHECK(mon.conv_w[i].data == moff.conv_w[i].data);
    }
    CHECK(mon.dense_w[0].data == moff.dense_w[0].data);

    Rng rng(77);
    for (int rep = 0; rep < 4; ++rep) {
        const Tensor x = random_fields(off, rng);
        CHECK(mon.predict(x) == moff.predict(x));
    }
}

TEST_CASE("a zeroed model predicts exactly zero") {
    Model m = Model::build(small_config());
    for (Tensor* t : m.parameters())
        for (double& v : t->data) v = 0.0;
    Rng rng(5);
    const Tensor x = random_fields(m.config, rng);
    CHECK(m.predict(x) == 0.0);
}

TEST_CASE("forward gradients agree with central differences") {
    for (bool calib : {false, true}) {
        ModelConfig c = small_config();
        c.calibration_enabled = calib;
        const Model m = Model::build(c);
        const ModelFn f(m);
        Rng rng(31);
        Tensor x = random_fields(c, rng);
        // Coordinates with near-zero analytic gradient inflate the relative
        // discrepancy; genuine gradient bugs show up as O(1) values.
        CHECK(pptv::finite_diff_check(f, x, 1e-5) < 1e-3);

        // First-order Taylor control in a random direction.
        Tensor g;
        const double f0 = m.forward_grad(x, g);
        CHECK(g.shape == x.shape);
        double dot = 0.0;
        Tensor x2 = x;
        const double delta = 1e-4;
        for (std::size_t i = 0; i < x.data.size(); ++i) {
            const double d = rng.uniform(-1.0, 1.0);
            x2.data[i] += delta * d;
            dot += g.data[i] * d;
        }
        const double lhs = m.predict(x2) - f0;
        CHECK(lhs == doctest::Approx(delta * dot).epsilon(1e-2));
    }
}

TEST_CASE("forward_trace exposes every preactivation") {
    ModelConfig c = small_config();
    const Model m = Model::build(c);
    Rng rng(13);
    const Tensor x = random_fields(c, rng);
    const pptv::ForwardTrace tr = m.forward_trace(x);

    CHECK(tr.value == m.predict(x));
    REQUIRE(tr.preact.size() == 4);
    const pptv::LayerShapes& s = m.shapes();
    for (int i = 0; i < 3; ++i)
        CHECK(tr.preact[i].shape == std::vector<int>{c.conv_filters[i], s.conv_h[i], s.conv_w[i]});
    CHECK(tr.preact[3].shape == std::vector<int>{c.dense_neurons});
    CHECK(tr.final_conv_act.shape == tr.preact[2].shape);
    for (std::size_t i = 0; i < tr.final_conv_act.data.size(); ++i)
        CHECK(tr.final_conv_act.data[i] == std::tanh(tr.preact[2].data[i]));
}

TEST_CASE("gradcam_forward returns final conv activations and exact gradients") {
    // With one hidden neuron the chain rule collapses to a hand formula:
    // df/da_i = w2 * (1 - h^2) * w1_i.
    ModelConfig c = small_config();
    c.dense_neurons = 1;
    const Model m = Model::build(c);
    Rng rng(17);
    const Tensor x = random_fields(c, rng);

    Tensor act, act_grad;
    const double v = m.gradcam_forward(x, act, act_grad);
    CHECK(v == m.predict(x));
    CHECK(act.data == m.forward_trace(x).final_conv_act.data);
    REQUIRE(act_grad.shape == act.shape);

    double z = m.dense_b[0].data[0];
    for (std::size_t i = 0; i < act.data.size(); ++i) z += m.dense_w[0].data[i] * act.data[i];
    const double h = std::tanh(z);
    const double w2 = m.dense_w[1].data[0];
    for (std::size_t i = 0; i < act_grad.data.size(); ++i) {
        const double want = w2 * (1.0 - h * h) * m.dense_w[0].data[i];
        CHECK(act_grad.data[i] == doctest::Approx(want).epsilon(1e-12));
    }
}

TEST_CASE("ensemble_predict averages member outputs") {
    ModelConfig c = small_config();
    const Model a = Model::build(c);
    c.seed = 123;
    const Model b = Model::build(c);

    pptv::GridSample sample;
    Rng rng(3);
    sample.fields = random_fields(c, rng);

    const double pa = a.predict(sample.fields);
    const double pb = b.predict(sample.fields);
    CHECK(pptv::ensemble_predict({&a}, sample) == pa);
    const double both = pptv::ensemble_predict({&a, &b}, sample);
    CHECK(both == doctest::Approx(0.5 * (pa + pb)).epsilon(1e-15));
    CHECK(pptv::ensemble_predict({&b, &a}, sample) == doctest::Approx(both).epsilon(1e-15));
    CHECK_THROWS_AS(pptv::ensemble_predict({}, sample), pptv::ConfigError);
}

TEST_CASE("saturation report separates healthy and saturated networks") {
    ModelConfig c = small_config();
    Model m = Model::build(c);

    pptv::Dataset ds;
    ds.grid.nlat = c.nlat;
    ds.grid.nlon = c.nlon;
    Rng rng(21);
    for (int i = 0; i < 8; ++i) {
        pptv::GridSample s;
        s.fields = random_fields(c, rng);
        s.targets = {0.0};
        ds.samples.push_back(std::move(s));
    }

    const pptv::SaturationReport fresh = pptv::saturation_report(m, ds, 2.5);
    REQUIRE(fresh.layer_fraction.size() == 4);
    for (double f : fresh.layer_fraction) {
        CHECK(f >= 0.0);
        CHECK(f <= 1.0);
    }
    CHECK(fresh.overall_fraction < 0.05);
    CHECK(fresh.dead_gradient_fraction >= 0.0);
    CHECK(fresh.dead_gradient_fraction <= 1.0);

    // Pushing dense1 far into the tanh tails saturates the layer and kills
    // every input gradient.
    for (double& v : m.dense_b[0].data) v += 100.0;
    const pptv::SaturationReport sat = pptv::saturation_report(m, ds, 2.5);
    CHECK(sat.layer_fraction[3] == 1.0);
    CHECK(sat.overall_fraction > fresh.overall_fraction);
    CHECK(sat.dead_gradient_fraction == 1.0);

    pptv::Dataset empty;
    CHECK_THROWS_AS(pptv::saturation_report(m, empty, 2.5), pptv::EmptyResultError);
    CHECK_THROWS_AS(pptv::saturation_report(m, ds, 0.0), pptv::ConfigError);
}

TEST_CASE("checkpoint round trip is bit-exact") {
    ModelConfig c = small_config();
    c.calibration_enabled = true;
    c.lead_months = 7;
    c.target_month = 4;
    c.seed = 424242;
    Model m = Model::build(c);
    // Perturb away from init so the trip carries arbitrary values.
    Rng rng(55);
    for (Tensor* t : m.parameters())
        for (double& v : t->data) v += rng.normal();

    const char* path = "unit_model_ckpt.bin";
    pptv::save_model(path, m);
    const Model r = pptv::load_model(path);
    std::remove(path);

    CHECK(r.config == m.config);
    for (int i = 0; i < 3; ++i) {
        CHECK(r.conv_w[i].data == m.conv_w[i].data);
        CHECK(r.conv_b[i].data == m.conv_b[i].data);
        CHECK(r.gamma[i].data == m.gamma[i].data);
        CHECK(r.beta[i].data == m.beta[i].data);
    }
    for (int i = 0; i < 2; ++i) {
        CHECK(r.dense_w[i].data == m.dense_w[i].data);
        CHECK(r.dense_b[i].data == m.dense_b[i].data);
    }
    Rng xr(66);
    const Tensor x = random_fields(c, xr);
    CHECK(r.predict(x) == m.predict(x));

    CHECK_THROWS_AS(pptv::load_model("no_such_checkpoint.bin"), pptv::IoError);
}

TEST_CASE("checkpoint loader rejects malformed payloads") {
    const Model m = Model::build(small_config());
    std::ostringstream os;
    pptv::save_model(os, m);
    const std::string good = os.str();

    auto load_bytes = [](std::string bytes) {
        std::istringstream is(std::move(bytes));
        return pptv::load_model(is);
    };

    CHECK_NOTHROW(load_bytes(good));

    std::string bad_magic = good;
    bad_magic.replace(0, 8, "PPTVXXXX");
    CHECK_THROWS_AS(load_bytes(bad_magic), pptv::BadMagicError);

    CHECK_THROWS_AS(load_bytes(good.substr(0, good.size() / 2)), pptv::TruncatedError);
    CHECK_THROWS_AS(load_bytes(good.substr(0, 4)), pptv::TruncatedError);

    // Renaming a config key leaves a missing required key behind.
    std::string bad_key = good;
    bad_key.replace(bad_key.find("kernel_h"), 8, "kernel_x");
    CHECK_THROWS_AS(load_bytes(bad_key), pptv::IoError);

    std::string bad_tensor = good;
    bad_tensor.replace(bad_tensor.find("conv1.weight"), 5, "convX");
    CHECK_THROWS_AS(load_bytes(bad_tensor), pptv::IoError);

    // Bump the first extent of conv1.weight: shape no longer matches.
    std::string bad_shape = good;
    const std::size_t name_pos = bad_shape.find("conv1.weight");
    bad_shape[name_pos + 12 + 8] = 3;
    CHECK_THROWS_AS(load_bytes(bad_shape), pptv::ExtentError);

    // Corrupt the tensor count (u64 just before the first name's length).
    std::string bad_count = good;
    bad_count[name_pos - 16] = 9;
    CHECK_THROWS_AS(load_bytes(bad_count), pptv::ExtentError);
}
