#pragma once

#include <functional>
#include <vector>

#include "pptv/model.hpp"
#include "pptv/saliency.hpp"

namespace pptv {

/// Mean absolute input gradient over the dataset, one backward pass per
/// sample. Per-sample work may run on several workers; the reduction uses
/// fixed-size index blocks summed in block order, so the result is
/// byte-identical for any worker count.
SaliencyMap pptv(const Model& model, const Dataset& dataset, int workers = 1);

// Same estimator over an arbitrary differentiable scalar function; pptv()
// delegates here. Used directly by tests for closed-form gradients.
SaliencyMap pptv_fn(const ScalarFn& f, const std::vector<Tensor>& inputs, int workers = 1);

// Single-sample absolute-gradient map (the method's historical form).
SaliencyMap vbp_single(const Model& model, const GridSample& sample);
// Dataset-level VBP: the same mean of absolute gradients as pptv.
SaliencyMap vbp_saliency(const Model& model, const Dataset& dataset, int workers = 1);

/// Occlusion sensitivity: per-channel patches are set to the fill value and
/// the prediction delta is shared equally among covered cells. Patch starts
/// step by `stride` and always include the far edge so every cell is covered.
SaliencyMap perturbation_saliency(const Model& model, const Dataset& dataset, int patch_h,
                                  int patch_w, int stride = 1, double fill = 0.0,
                                  int workers = 1);

/// Regression Grad-CAM: channel weights are spatial means of d(output)/dA_c
/// over the final conv activations; |sum_c w_c A_c| is bilinearly upsampled
/// (corner-aligned) to the input grid, averaged over samples, and broadcast
/// across the 6 input channels.
SaliencyMap gradcam_saliency(const Model& model, const Dataset& dataset, int workers = 1);

/// Tensor-product midpoint quadrature of the density-weighted mean absolute
/// partial derivative, for up to 3 variables. Partials use central
/// differences. Test oracle for the Monte Carlo estimator.
std::vector<double> pptv_quadrature_oracle(
    const std::function<double(const std::vector<double>&)>& f,
    const std::function<double(const std::vector<double>&)>& density,
    const std::vector<double>& lo, const std::vector<double>& hi, int n_per_dim);

}  // namespace pptv
