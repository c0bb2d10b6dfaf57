#include "pptv/model.hpp"

#include <cmath>
#include <sstream>
#include <string>

#include "pptv/error.hpp"
#include "pptv/rng.hpp"

namespace pptv {

namespace {
constexpr int kPadH = 1;
constexpr int kPadW = 3;

int pool_out(int n) { return (n + 1) / 2; }
}  // namespace

LayerShapes LayerShapes::from(const ModelConfig& cfg) {
    LayerShapes s{};
    int h = cfg.nlat, w = cfg.nlon;
    for (int i = 0; i < 3; ++i) {
        s.in_h[i] = h;
        s.in_w[i] = w;
        s.conv_h[i] = h + 2 * kPadH - cfg.kernel_h + 1;
        s.conv_w[i] = w + 2 * kPadW - cfg.kernel_w + 1;
        h = s.conv_h[i];
        w = s.conv_w[i];
        if (i < 2) {
            h = pool_out(h);
            w = pool_out(w);
        }
    }
    s.flat = cfg.conv_filters[2] * h * w;
    return s;
}

void ModelConfig::validate() const {
    for (int f : conv_filters)
        if (f <= 0) throw ConfigError("conv_filters entries must be positive");
    if (dense_neurons <= 0) throw ConfigError("dense_neurons must be positive");
    if (lead_months < 1 || lead_months > 23) throw ConfigError("lead_months must lie in [1, 23]");
    if (target_month < 0 || target_month > 12)
        throw ConfigError("target_month must be 1..12, or 0 for all months");
    if (nlat < 1) throw ConfigError("nlat must be positive");
    if (nlon < 1) throw ConfigError("nlon must be positive");
    if (kernel_h < 1) throw ConfigError("kernel_h must be positive");
    if (kernel_w < 1) throw ConfigError("kernel_w must be positive");
    const LayerShapes s = LayerShapes::from(*this);
    for (int i = 0; i < 3; ++i)
        if (s.conv_h[i] < 1 || s.conv_w[i] < 1)
            throw ConfigError("nlat/nlon too small: conv layer " + std::to_string(i + 1) +
                              " output would be " + std::to_string(s.conv_h[i]) + "x" +
                              std::to_string(s.conv_w[i]));
}

Model Model::build(const ModelConfig& cfg) {
    cfg.validate();
    Model m;
    m.config = cfg;
    m.shapes_ = LayerShapes::from(cfg);
    Rng rng(cfg.seed);
    auto fill_uniform = [&rng](Tensor& t, double bound) {
        for (double& v : t.data) v = rng.uniform(-bound, bound);
    };
    int in_ch = kFieldChannels;
    for (int i = 0; i < 3; ++i) {
        const int out_ch = cfg.conv_filters[i];
        m.conv_w[i] = Tensor::zeros({out_ch, in_ch, cfg.kernel_h, cfg.kernel_w});
        m.conv_b[i] = Tensor::zeros({out_ch});
        const double bound = std::sqrt(1.0 / (in_ch * cfg.kernel_h * cfg.kernel_w));
        fill_uniform(m.conv_w[i], bound);
        fill_uniform(m.conv_b[i], bound);
        in_ch = out_ch;
    }
    m.dense_w[0] = Tensor::zeros({cfg.dense_neurons, m.shapes_.flat});
    m.dense_b[0] = Tensor::zeros({cfg.dense_neurons});
    const double bound1 = std::sqrt(1.0 / m.shapes_.flat);
    fill_uniform(m.dense_w[0], bound1);
    fill_uniform(m.dense_b[0], bound1);
    m.dense_w[1] = Tensor::zeros({1, cfg.dense_neurons});
    m.dense_b[1] = Tensor::zeros({1});
    const double bound2 = std::sqrt(1.0 / cfg.dense_neurons);
    fill_uniform(m.dense_w[1], bound2);
    fill_uniform(m.dense_b[1], bound2);
    // Calibration starts as the identity and draws nothing from the stream,
    // so paired seeds give bitwise-equal conv and dense parameters.
    if (cfg.calibration_enabled) {
        for (int i = 0; i < 3; ++i) {
            const std::vector<int> shape{cfg.conv_filters[i], m.shapes_.conv_h[i], m.shapes_.conv_w[i]};
            m.gamma[i] = Tensor::full(shape, 1.0);
            m.beta[i] = Tensor::zeros(shape);
        }
    }
    return m;
}

template <class Self, class Reg>
Model::GraphHandles Model::wire_impl(Self& self, Tape& t, int input, Reg reg) {
    GraphHandles h;
    h.input = input;
    int x = input;
    for (int i = 0; i < 3; ++i) {
        x = t.conv2d(x, reg(self.conv_w[i]), reg(self.conv_b[i]), kPadH, kPadW);
        if (self.config.calibration_enabled)
            x = t.scale_shift(x, reg(self.gamma[i]), reg(self.beta[i]));
        h.preact[i] = x;
        x = t.tanh_act(x);
        if (i == 2)
            h.final_conv_act = x;
        else
            x = t.maxpool2(x);
    }
    x = t.flatten(x);
    x = t.dense(x, reg(self.dense_w[0]), reg(self.dense_b[0]));
    h.preact[3] = x;
    x = t.tanh_act(x);
    x = t.dense(x, reg(self.dense_w[1]), reg(self.dense_b[1]));
    h.output = x;
    return h;
}

Model::GraphHandles Model::wire(Tape& t, int input) const {
    return wire_impl(*this, t, input, [&t](const Tensor& p) { return t.constant(p); });
}

Model::GraphHandles Model::wire_trainable(Tape& t, int input) {
    return wire_impl(*this, t, input, [&t](Tensor& p) { return t.leaf(p); });
}

void Model::check_input(const Tensor& fields) const {
    const std::vector<int> want{kFieldChannels, config.nlat, config.nlon};
    if (fields.shape != want)
        throw ConfigError("input fields must be [6, " + std::to_string(config.nlat) + ", " +
                          std::to_string(config.nlon) + "]");
}

double Model::predict(const Tensor& fields) const {
    check_input(fields);
    Tape t;
    const GraphHandles h = wire(t, t.constant(fields));
    return t.value(h.output)[0];
}

double Model::forward_grad(const Tensor& fields, Tensor& grad) const {
    check_input(fields);
    Tensor x = fields;
    x.set_requires_grad(true);
    Tape t;
    const GraphHandles h = wire(t, t.leaf(x));
    t.backward(h.output);
    grad = Tensor::zeros(fields.shape);
    grad.data = x.grad;
    return t.value(h.output)[0];
}

ForwardTrace Model::forward_trace(const Tensor& fields) const {
    check_input(fields);
    Tape t;
    const GraphHandles h = wire(t, t.constant(fields));
    ForwardTrace tr;
    tr.value = t.value(h.output)[0];
    for (int id : h.preact) {
        Tensor z = Tensor::zeros(t.shape(id));
        z.data = t.value(id);
        tr.preact.push_back(std::move(z));
    }
    tr.final_conv_act = Tensor::zeros(t.shape(h.final_conv_act));
    tr.final_conv_act.data = t.value(h.final_conv_act);
    return tr;
}

double Model::gradcam_forward(const Tensor& fields, Tensor& act, Tensor& act_grad) const {
    check_input(fields);
    Tensor x = fields;
    x.set_requires_grad(true);
    Tape t;
    const GraphHandles h = wire(t, t.leaf(x));
    t.backward(h.output);
    act = Tensor::zeros(t.shape(h.final_conv_act));
    act.data = t.value(h.final_conv_act);
    act_grad = Tensor::zeros(t.shape(h.final_conv_act));
    act_grad.data = t.adjoint(h.final_conv_act);
    return t.value(h.output)[0];
}

std::vector<Tensor*> Model::parameters() {
    std::vector<Tensor*> ps;
    for (int i = 0; i < 3; ++i) {
        ps.push_back(&conv_w[i]);
        ps.push_back(&conv_b[i]);
        if (config.calibration_enabled) {
            ps.push_back(&gamma[i]);
            ps.push_back(&beta[i]);
        }
    }
    for (int i = 0; i < 2; ++i) {
        ps.push_back(&dense_w[i]);
        ps.push_back(&dense_b[i]);
    }
    return ps;
}

std::size_t Model::parameter_count() const {
    std::size_t n = 0;
    for (int i = 0; i < 3; ++i) {
        n += conv_w[i].numel() + conv_b[i].numel();
        if (config.calibration_enabled) n += gamma[i].numel() + beta[i].numel();
    }
    for (int i = 0; i < 2; ++i) n += dense_w[i].numel() + dense_b[i].numel();
    return n;
}

std::vector<std::string> config_lines(const ModelConfig& c) {
    std::vector<std::string> lines;
    std::ostringstream f;
    f << "conv_filters=" << c.conv_filters[0] << ',' << c.conv_filters[1] << ',' << c.conv_filters[2];
    lines.push_back(f.str());
    lines.push_back("dense_neurons=" + std::to_string(c.dense_neurons));
    lines.push_back("lead_months=" + std::to_string(c.lead_months));
    lines.push_back("target_month=" + (c.target_month == 0 ? std::string("all")
                                                           : std::to_string(c.target_month)));
    lines.push_back("calibration_enabled=" + std::string(c.calibration_enabled ? "1" : "0"));
    lines.push_back("seed=" + std::to_string(c.seed));
    lines.push_back("nlat=" + std::to_string(c.nlat));
    lines.push_back("nlon=" + std::to_string(c.nlon));
    lines.push_back("kernel_h=" + std::to_string(c.kernel_h));
    lines.push_back("kernel_w=" + std::to_string(c.kernel_w));
    return lines;
}

double ensemble_predict(const std::vector<const Model*>& models, const GridSample& sample) {
    if (models.empty()) throw ConfigError("ensemble needs at least one model");
    double acc = 0.0;
    for (const Model* m : models) acc += m->predict(sample);
    return acc / static_cast<double>(models.size());
}

SaturationReport saturation_report(const Model& model, const Dataset& dataset, double z_sat) {
    if (dataset.samples.empty()) throw EmptyResultError("saturation report over an empty dataset");
    if (!(z_sat > 0.0)) throw ConfigError("z_sat must be positive");
    SaturationReport rep;
    rep.z_sat = z_sat;
    std::vector<std::size_t> hot(4, 0), tot(4, 0);
    std::size_t dead = 0, cells = 0;
    Tensor grad;
    for (const GridSample& s : dataset.samples) {
        const ForwardTrace tr = model.forward_trace(s.fields);
        for (std::size_t l = 0; l < tr.preact.size(); ++l) {
            for (double z : tr.preact[l].data)
                if (std::abs(z) > z_sat) ++hot[l];
            tot[l] += tr.preact[l].numel();
        }
        model.forward_grad(s.fields, grad);
        for (double g : grad.data)
            if (std::abs(g) < 1e-9) ++dead;
        cells += grad.numel();
    }
    std::size_t hot_all = 0, tot_all = 0;
    for (int l = 0; l < 4; ++l) {
        rep.layer_fraction.push_back(tot[l] ? static_cast<double>(hot[l]) / tot[l] : 0.0);
        hot_all += hot[l];
        tot_all += tot[l];
    }
    rep.overall_fraction = tot_all ? static_cast<double>(hot_all) / tot_all : 0.0;
    rep.dead_gradient_fraction = cells ? static_cast<double>(dead) / cells : 0.0;
    return rep;
}

}  // namespace pptv
