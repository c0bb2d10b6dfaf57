#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "pptv/grid.hpp"
#include "pptv/tensor.hpp"

namespace pptv {

struct ModelConfig {
    std::array<int, 3> conv_filters{8, 8, 8};
    int dense_neurons = 16;
    int lead_months = 1;
    int target_month = 0;  // 1..12, or 0 for all calendar months
    bool calibration_enabled = false;
    std::uint64_t seed = 1;
    int nlat = 24;
    int nlon = 72;
    int kernel_h = 4;
    int kernel_w = 8;

    void validate() const;  // throws ConfigError naming the offending field
    bool operator==(const ModelConfig&) const = default;
};

/// Spatial extent of each stage, derived from the config. Conv layers use
/// stride 1 with fixed padding (1, 3); pools halve with ceil rounding.
struct LayerShapes {
    std::array<int, 3> conv_h, conv_w;  // pre-activation map extents
    std::array<int, 3> in_h, in_w;      // conv input extents
    int flat = 0;                       // flattened size entering dense1

    static LayerShapes from(const ModelConfig& cfg);
};

struct ForwardTrace {
    double value = 0.0;
    // Values entering each tanh: conv1..conv3 (post-calibration), dense1.
    std::vector<Tensor> preact;
    Tensor final_conv_act;
};

struct SaturationReport {
    double z_sat = 2.5;
    std::vector<double> layer_fraction;  // conv1, conv2, conv3, dense1
    double overall_fraction = 0.0;
    double dead_gradient_fraction = 0.0;  // input cells with |df/dx| < 1e-9
};

class Model {
  public:
    ModelConfig config;
    std::array<Tensor, 3> conv_w, conv_b;
    std::array<Tensor, 3> gamma, beta;  // engaged only when calibration_enabled
    std::array<Tensor, 2> dense_w, dense_b;

    static Model build(const ModelConfig& cfg);

    double predict(const Tensor& fields) const;
    double predict(const GridSample& sample) const { return predict(sample.fields); }

    // Scalar output plus d(output)/d(input); grad has the input shape.
    double forward_grad(const Tensor& fields, Tensor& grad) const;

    ForwardTrace forward_trace(const Tensor& fields) const;

    // Final conv activation maps and d(output)/d(those maps).
    double gradcam_forward(const Tensor& fields, Tensor& act, Tensor& act_grad) const;

    std::size_t parameter_count() const;
    std::vector<Tensor*> parameters();  // training order, engaged tensors only
    const LayerShapes& shapes() const { return shapes_; }

    struct GraphHandles {
        int input = -1, output = -1, final_conv_act = -1;
        std::array<int, 4> preact{-1, -1, -1, -1};
    };
    // Wires the network onto a tape starting from an existing input node.
    // The const overload captures parameters by value; the trainable one
    // registers them as accumulating leaves.
    GraphHandles wire(Tape& t, int input) const;
    GraphHandles wire_trainable(Tape& t, int input);

  private:
    LayerShapes shapes_;
    template <class Self, class Reg>
    static GraphHandles wire_impl(Self& self, Tape& t, int input, Reg reg);
    void check_input(const Tensor& fields) const;
};

double ensemble_predict(const std::vector<const Model*>& models, const GridSample& sample);

// Canonical key=value rendering, shared by the checkpoint format and reports.
std::vector<std::string> config_lines(const ModelConfig& config);

SaturationReport saturation_report(const Model& model, const Dataset& dataset, double z_sat = 2.5);

}  // namespace pptv
