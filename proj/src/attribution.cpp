#include "pptv/attribution.hpp"

#include <cmath>
#include <string>

#include "parallel.hpp"
#include "pptv/error.hpp"

namespace pptv {

namespace {

class ModelFn : public ScalarFn {
  public:
    explicit ModelFn(const Model& m)
        : m_(m), shape_{kFieldChannels, m.config.nlat, m.config.nlon} {}
    const std::vector<int>& input_shape() const override { return shape_; }
    double value(const Tensor& x) const override { return m_.predict(x); }
    double value_and_grad(const Tensor& x, std::vector<double>& grad) const override {
        Tensor g;
        const double v = m_.forward_grad(x, g);
        grad = std::move(g.data);
        return v;
    }

  private:
    const Model& m_;
    std::vector<int> shape_;
};

std::vector<const Tensor*> field_ptrs(const Dataset& ds) {
    std::vector<const Tensor*> xs;
    xs.reserve(ds.samples.size());
    for (const GridSample& s : ds.samples) xs.push_back(&s.fields);
    return xs;
}

SaliencyMap mean_abs_grad(const ScalarFn& f, const std::vector<const Tensor*>& xs, int workers,
                          const char* method) {
    if (xs.empty()) throw EmptyResultError("attribution over an empty dataset");
    const std::vector<int>& shape = f.input_shape();
    const std::size_t n = shape_numel(shape);
    std::vector<std::vector<double>> partial(block_count(xs.size()));
    run_blocks(xs.size(), workers, [&](std::size_t b, std::size_t begin, std::size_t end) {
        std::vector<double>& acc = partial[b];
        acc.assign(n, 0.0);
        std::vector<double> grad;
        for (std::size_t i = begin; i < end; ++i) {
            if (xs[i]->shape != shape)
                throw ConfigError("sample " + std::to_string(i) + " does not match the model input shape");
            try {
                f.value_and_grad(*xs[i], grad);
            } catch (const NumericError& e) {
                throw NumericError(std::string(e.what()) + " at sample " + std::to_string(i));
            }
            for (std::size_t k = 0; k < n; ++k) {
                if (!std::isfinite(grad[k]))
                    throw NumericError("non-finite gradient at sample " + std::to_string(i));
                acc[k] += std::abs(grad[k]);
            }
        }
    });
    SaliencyMap map;
    map.method = method;
    map.sample_count = static_cast<int>(xs.size());
    map.raw = Tensor::zeros(shape);
    for (const auto& acc : partial)
        for (std::size_t k = 0; k < n; ++k) map.raw.data[k] += acc[k];
    for (double& v : map.raw.data) v /= static_cast<double>(xs.size());
    finalize(map);
    return map;
}

// Patch starts: every `stride` cells, plus the far edge so coverage is total.
std::vector<int> patch_starts(int extent, int patch, int stride) {
    std::vector<int> starts;
    for (int s = 0; s + patch <= extent; s += stride) starts.push_back(s);
    if (starts.back() != extent - patch) starts.push_back(extent - patch);
    return starts;
}

}  // namespace

SaliencyMap pptv_fn(const ScalarFn& f, const std::vector<Tensor>& inputs, int workers) {
    std::vector<const Tensor*> xs;
    xs.reserve(inputs.size());
    for (const Tensor& t : inputs) xs.push_back(&t);
    return mean_abs_grad(f, xs, workers, "pptv");
}

SaliencyMap pptv(const Model& model, const Dataset& dataset, int workers) {
    return mean_abs_grad(ModelFn(model), field_ptrs(dataset), workers, "pptv");
}

SaliencyMap vbp_saliency(const Model& model, const Dataset& dataset, int workers) {
    return mean_abs_grad(ModelFn(model), field_ptrs(dataset), workers, "vbp");
}

SaliencyMap vbp_single(const Model& model, const GridSample& sample) {
    return mean_abs_grad(ModelFn(model), {&sample.fields}, 1, "vbp");
}

SaliencyMap perturbation_saliency(const Model& model, const Dataset& dataset, int patch_h,
                                  int patch_w, int stride, double fill, int workers) {
    if (dataset.samples.empty()) throw EmptyResultError("attribution over an empty dataset");
    const int H = model.config.nlat, W = model.config.nlon;
    if (patch_h < 1 || patch_w < 1) throw ConfigError("patch extents must be positive");
    if (patch_h > H || patch_w > W) throw ConfigError("patch is larger than the grid");
    if (stride < 1) throw ConfigError("stride must be at least 1");
    if (!std::isfinite(fill)) throw ConfigError("fill value must be finite");
    const std::vector<int> starts_h = patch_starts(H, patch_h, stride);
    const std::vector<int> starts_w = patch_starts(W, patch_w, stride);

    // Covering-patch count per cell; identical for every channel and sample.
    std::vector<double> cover(static_cast<std::size_t>(H) * W, 0.0);
    for (int ph : starts_h)
        for (int pw : starts_w)
            for (int i = ph; i < ph + patch_h; ++i)
                for (int j = pw; j < pw + patch_w; ++j) cover[static_cast<std::size_t>(i) * W + j] += 1.0;

    const std::size_t n = static_cast<std::size_t>(kFieldChannels) * H * W;
    const auto& samples = dataset.samples;
    std::vector<std::vector<double>> partial(block_count(samples.size()));
    run_blocks(samples.size(), workers, [&](std::size_t b, std::size_t begin, std::size_t end) {
        std::vector<double>& acc = partial[b];
        acc.assign(n, 0.0);
        std::vector<double> saved(static_cast<std::size_t>(patch_h) * patch_w);
        for (std::size_t s = begin; s < end; ++s) {
            Tensor x = samples[s].fields;
            const double base = model.predict(x);
            for (int c = 0; c < kFieldChannels; ++c)
                for (int ph : starts_h)
                    for (int pw : starts_w) {
                        std::size_t k = 0;
                        for (int i = ph; i < ph + patch_h; ++i)
                            for (int j = pw; j < pw + patch_w; ++j) {
                                saved[k++] = x.at(c, i, j);
                                x.at(c, i, j) = fill;
                            }
                        const double d = std::abs(model.predict(x) - base);
                        k = 0;
                        for (int i = ph; i < ph + patch_h; ++i)
                            for (int j = pw; j < pw + patch_w; ++j) {
                                acc[(static_cast<std::size_t>(c) * H + i) * W + j] += d;
                                x.at(c, i, j) = saved[k++];
                            }
                    }
        }
    });
    SaliencyMap map;
    map.method = "perturbation";
    map.sample_count = static_cast<int>(samples.size());
    map.raw = Tensor::zeros({kFieldChannels, H, W});
    for (const auto& acc : partial)
        for (std::size_t k = 0; k < n; ++k) map.raw.data[k] += acc[k];
    const std::size_t plane = static_cast<std::size_t>(H) * W;
    for (std::size_t k = 0; k < n; ++k)
        map.raw.data[k] /= cover[k % plane] * static_cast<double>(samples.size());
    finalize(map);
    return map;
}

SaliencyMap gradcam_saliency(const Model& model, const Dataset& dataset, int workers) {
    if (dataset.samples.empty()) throw EmptyResultError("attribution over an empty dataset");
    const int H = model.config.nlat, W = model.config.nlon;
    const int C = model.config.conv_filters[2];
    const int h3 = model.shapes().conv_h[2], w3 = model.shapes().conv_w[2];
    const std::size_t plane = static_cast<std::size_t>(H) * W;
    const auto& samples = dataset.samples;
    std::vector<std::vector<double>> partial(block_count(samples.size()));
    run_blocks(samples.size(), workers, [&](std::size_t b, std::size_t begin, std::size_t end) {
        std::vector<double>& acc = partial[b];
        acc.assign(plane, 0.0);
        Tensor act, act_grad;
        std::vector<double> cam(static_cast<std::size_t>(h3) * w3);
        for (std::size_t s = begin; s < end; ++s) {
            model.gradcam_forward(samples[s].fields, act, act_grad);
            std::fill(cam.begin(), cam.end(), 0.0);
            for (int c = 0; c < C; ++c) {
                double w_c = 0.0;
                for (int i = 0; i < h3; ++i)
                    for (int j = 0; j < w3; ++j) w_c += act_grad.at(c, i, j);
                w_c /= static_cast<double>(h3) * w3;
                for (int i = 0; i < h3; ++i)
                    for (int j = 0; j < w3; ++j)
                        cam[static_cast<std::size_t>(i) * w3 + j] += w_c * act.at(c, i, j);
            }
            for (double& v : cam) v = std::abs(v);
            // Corner-aligned bilinear upsample onto the input grid.
            for (int i = 0; i < H; ++i) {
                const double si = H == 1 ? 0.0 : static_cast<double>(i) * (h3 - 1) / (H - 1);
                const int i0 = static_cast<int>(si);
                const int i1 = std::min(i0 + 1, h3 - 1);
                const double fi = si - i0;
                for (int j = 0; j < W; ++j) {
                    const double sj = W == 1 ? 0.0 : static_cast<double>(j) * (w3 - 1) / (W - 1);
                    const int j0 = static_cast<int>(sj);
                    const int j1 = std::min(j0 + 1, w3 - 1);
                    const double fj = sj - j0;
                    const double top = cam[static_cast<std::size_t>(i0) * w3 + j0] * (1.0 - fj) +
                                       cam[static_cast<std::size_t>(i0) * w3 + j1] * fj;
                    const double bot = cam[static_cast<std::size_t>(i1) * w3 + j0] * (1.0 - fj) +
                                       cam[static_cast<std::size_t>(i1) * w3 + j1] * fj;
                    acc[static_cast<std::size_t>(i) * W + j] += top * (1.0 - fi) + bot * fi;
                }
            }
        }
    });
    std::vector<double> mean(plane, 0.0);
    for (const auto& acc : partial)
        for (std::size_t k = 0; k < plane; ++k) mean[k] += acc[k];
    for (double& v : mean) v /= static_cast<double>(samples.size());
    SaliencyMap map;
    map.method = "gradcam";
    map.sample_count = static_cast<int>(samples.size());
    map.raw = Tensor::zeros({kFieldChannels, H, W});
    for (int c = 0; c < kFieldChannels; ++c)
        std::copy(mean.begin(), mean.end(), map.raw.data.begin() + static_cast<std::ptrdiff_t>(c * plane));
    finalize(map);
    return map;
}

std::vector<double> pptv_quadrature_oracle(
    const std::function<double(const std::vector<double>&)>& f,
    const std::function<double(const std::vector<double>&)>& density,
    const std::vector<double>& lo, const std::vector<double>& hi, int n_per_dim) {
    const std::size_t dim = lo.size();
    if (dim < 1 || dim > 3) throw ConfigError("quadrature oracle supports 1 to 3 variables");
    if (hi.size() != dim) throw ConfigError("lo and hi must have the same dimension");
    if (n_per_dim < 2) throw ConfigError("n_per_dim must be at least 2");
    std::vector<double> step(dim);
    double vol = 1.0;
    for (std::size_t k = 0; k < dim; ++k) {
        if (!(hi[k] > lo[k])) throw ConfigError("hi must exceed lo in every dimension");
        step[k] = (hi[k] - lo[k]) / n_per_dim;
        vol *= step[k];
    }
    std::size_t cells = 1;
    for (std::size_t k = 0; k < dim; ++k) cells *= static_cast<std::size_t>(n_per_dim);

    std::vector<double> result(dim, 0.0), x(dim), xp(dim);
    double mass = 0.0;
    for (std::size_t cell = 0; cell < cells; ++cell) {
        std::size_t rest = cell;
        for (std::size_t k = 0; k < dim; ++k) {
            const std::size_t idx = rest % n_per_dim;
            rest /= n_per_dim;
            x[k] = lo[k] + (static_cast<double>(idx) + 0.5) * step[k];
        }
        const double p = density(x);
        mass += p * vol;
        if (p == 0.0) continue;
        for (std::size_t k = 0; k < dim; ++k) {
            const double h = step[k] * 1e-3;
            xp = x;
            xp[k] = x[k] + h;
            const double fp = f(xp);
            xp[k] = x[k] - h;
            const double fm = f(xp);
            result[k] += p * std::abs((fp - fm) / (2.0 * h)) * vol;
        }
    }
    if (std::abs(mass - 1.0) > 1e-3)
        throw ConfigError("density does not integrate to 1 on the grid (mass=" + std::to_string(mass) + ")");
    return result;
}

}  // namespace pptv
