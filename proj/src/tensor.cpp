#include "pptv/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "pptv/error.hpp"

namespace pptv {

namespace {

void require(bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
}

void check_finite(const std::vector<double>& values, const char* op_name) {
    for (double v : values) {
        if (!std::isfinite(v)) {
            throw NumericError(std::string(op_name) + " produced a non-finite value");
        }
    }
}

}  // namespace

std::size_t shape_numel(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int e : shape) {
        if (e <= 0) throw ConfigError("tensor extent must be positive");
        n *= static_cast<std::size_t>(e);
    }
    return n;
}

Tensor::Tensor(std::vector<int> s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
    require(data.size() == shape_numel(shape), "tensor data length does not match shape");
}

Tensor Tensor::zeros(std::vector<int> shape) {
    const std::size_t n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<double>(n, 0.0));
}

Tensor Tensor::full(std::vector<int> shape, double value) {
    const std::size_t n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<double>(n, value));
}

void Tensor::set_requires_grad(bool on) {
    requires_grad = on;
    if (on) {
        grad.assign(data.size(), 0.0);
    } else {
        grad.clear();
    }
}

void Tensor::zero_grad() {
    std::fill(grad.begin(), grad.end(), 0.0);
}

double& Tensor::at(int c, int i, int j) {
    const int H = shape[1], W = shape[2];
    return data[(static_cast<std::size_t>(c) * H + i) * W + j];
}

double Tensor::at(int c, int i, int j) const {
    const int H = shape[1], W = shape[2];
    return data[(static_cast<std::size_t>(c) * H + i) * W + j];
}

// ---------------------------------------------------------------------------
// Tape
// ---------------------------------------------------------------------------

int Tape::leaf(Tensor& t) {
    require(t.data.size() == shape_numel(t.shape), "leaf tensor data length does not match shape");
    if (t.requires_grad && t.grad.size() != t.data.size()) t.grad.assign(t.data.size(), 0.0);
    Node n;
    n.shape = t.shape;
    n.external = &t;
    n.needs_grad = t.requires_grad;
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
}

int Tape::constant(const Tensor& t) {
    require(t.data.size() == shape_numel(t.shape), "constant tensor data length does not match shape");
    Node n;
    n.shape = t.shape;
    n.external_const = &t;
    n.needs_grad = false;
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
}

void Tape::check_id(int id) const {
    if (id < 0 || id >= static_cast<int>(nodes_.size())) throw ConfigError("tape node id out of range");
}

const std::vector<double>& Tape::node_value(int id) const {
    const Node& n = nodes_[id];
    if (n.external) return n.external->data;
    if (n.external_const) return n.external_const->data;
    return n.value;
}

const std::vector<double>& Tape::value(int id) const {
    check_id(id);
    return node_value(id);
}

const std::vector<int>& Tape::shape(int id) const {
    check_id(id);
    return nodes_[id].shape;
}

int Tape::push(Node node, const char* op_name) {
    check_finite(node.value, op_name);
    nodes_.push_back(std::move(node));
    has_adjoints_ = false;
    return static_cast<int>(nodes_.size()) - 1;
}

int Tape::conv2d(int input, int kernels, int bias, int pad_h, int pad_w) {
    check_id(input);
    check_id(kernels);
    check_id(bias);
    const auto& xs = nodes_[input].shape;
    const auto& ks = nodes_[kernels].shape;
    const auto& bs = nodes_[bias].shape;
    require(xs.size() == 3, "conv2d: input must be [C,H,W]");
    require(ks.size() == 4, "conv2d: kernels must be [Cout,Cin,kH,kW]");
    require(bs.size() == 1, "conv2d: bias must be [Cout]");
    require(pad_h >= 0 && pad_w >= 0, "conv2d: padding must be non-negative");
    const int Cin = xs[0], H = xs[1], W = xs[2];
    const int Cout = ks[0], kH = ks[2], kW = ks[3];
    require(ks[1] == Cin, "conv2d: kernel input channels do not match input");
    require(bs[0] == Cout, "conv2d: bias length does not match kernel count");
    require(kH <= H + 2 * pad_h && kW <= W + 2 * pad_w, "conv2d: kernel larger than padded input");

    const int Ho = H + 2 * pad_h - kH + 1;
    const int Wo = W + 2 * pad_w - kW + 1;

    const std::vector<double>& x = node_value(input);
    const std::vector<double>& k = node_value(kernels);
    const std::vector<double>& b = node_value(bias);

    Node out;
    out.shape = {Cout, Ho, Wo};
    out.value.assign(static_cast<std::size_t>(Cout) * Ho * Wo, 0.0);
    for (int co = 0; co < Cout; ++co) {
        double* om = out.value.data() + static_cast<std::size_t>(co) * Ho * Wo;
        std::fill(om, om + static_cast<std::size_t>(Ho) * Wo, b[co]);
        for (int ci = 0; ci < Cin; ++ci) {
            const double* xm = x.data() + static_cast<std::size_t>(ci) * H * W;
            const double* km = k.data() + (static_cast<std::size_t>(co) * Cin + ci) * kH * kW;
            for (int u = 0; u < kH; ++u) {
                const int ilo = std::max(0, pad_h - u);
                const int ihi = std::min(Ho - 1, H - 1 - u + pad_h);
                for (int v = 0; v < kW; ++v) {
                    const double w = km[u * kW + v];
                    if (w == 0.0) continue;
                    const int jlo = std::max(0, pad_w - v);
                    const int jhi = std::min(Wo - 1, W - 1 - v + pad_w);
                    for (int i = ilo; i <= ihi; ++i) {
                        const double* xrow = xm + static_cast<std::size_t>(i + u - pad_h) * W + (v - pad_w);
                        double* orow = om + static_cast<std::size_t>(i) * Wo;
                        for (int j = jlo; j <= jhi; ++j) orow[j] += w * xrow[j];
                    }
                }
            }
        }
    }

    const bool ng = nodes_[input].needs_grad || nodes_[kernels].needs_grad || nodes_[bias].needs_grad;
    out.needs_grad = ng;
    if (ng) {
        out.backprop = [=](Tape& t) {
            const std::vector<double>& go = t.adjoint_[t.out_id_];
            const std::vector<double>& xv = t.node_value(input);
            const std::vector<double>& kv = t.node_value(kernels);
            const bool gx = t.nodes_[input].needs_grad;
            const bool gk = t.nodes_[kernels].needs_grad;
            const bool gb = t.nodes_[bias].needs_grad;
            if (gb) {
                std::vector<double>& db = t.adjoint_[bias];
                for (int co = 0; co < Cout; ++co) {
                    const double* gm = go.data() + static_cast<std::size_t>(co) * Ho * Wo;
                    double s = 0.0;
                    for (std::size_t p = 0; p < static_cast<std::size_t>(Ho) * Wo; ++p) s += gm[p];
                    db[co] += s;
                }
            }
            for (int co = 0; co < Cout && (gx || gk); ++co) {
                const double* gm = go.data() + static_cast<std::size_t>(co) * Ho * Wo;
                for (int ci = 0; ci < Cin; ++ci) {
                    const double* xm = xv.data() + static_cast<std::size_t>(ci) * H * W;
                    const double* km = kv.data() + (static_cast<std::size_t>(co) * Cin + ci) * kH * kW;
                    double* dxm = gx ? t.adjoint_[input].data() + static_cast<std::size_t>(ci) * H * W : nullptr;
                    double* dkm = gk ? t.adjoint_[kernels].data() + (static_cast<std::size_t>(co) * Cin + ci) * kH * kW
                                     : nullptr;
                    for (int u = 0; u < kH; ++u) {
                        const int ilo = std::max(0, pad_h - u);
                        const int ihi = std::min(Ho - 1, H - 1 - u + pad_h);
                        for (int v = 0; v < kW; ++v) {
                            const int jlo = std::max(0, pad_w - v);
                            const int jhi = std::min(Wo - 1, W - 1 - v + pad_w);
                            const double w = km[u * kW + v];
                            double acc = 0.0;
                            for (int i = ilo; i <= ihi; ++i) {
                                const std::size_t xoff = static_cast<std::size_t>(i + u - pad_h) * W + (v - pad_w);
                                const double* grow = gm + static_cast<std::size_t>(i) * Wo;
                                const double* xrow = xm + xoff;
                                if (gx) {
                                    double* dxrow = dxm + xoff;
                                    for (int j = jlo; j <= jhi; ++j) dxrow[j] += w * grow[j];
                                }
                                if (gk) {
                                    for (int j = jlo; j <= jhi; ++j) acc += grow[j] * xrow[j];
                                }
                            }
                            if (gk) dkm[u * kW + v] += acc;
                        }
                    }
                }
            }
        };
    }
    return push(std::move(out), "conv2d");
}

int Tape::maxpool2(int input) {
    check_id(input);
    const auto& xs = nodes_[input].shape;
    require(xs.size() == 3, "maxpool2: input must be [C,H,W]");
    const int C = xs[0], H = xs[1], W = xs[2];
    const int Ho = (H + 1) / 2, Wo = (W + 1) / 2;

    const std::vector<double>& x = node_value(input);
    Node out;
    out.shape = {C, Ho, Wo};
    out.value.resize(static_cast<std::size_t>(C) * Ho * Wo);
    std::vector<int> argmax(out.value.size());
    for (int c = 0; c < C; ++c) {
        const double* xm = x.data() + static_cast<std::size_t>(c) * H * W;
        for (int oi = 0; oi < Ho; ++oi) {
            for (int oj = 0; oj < Wo; ++oj) {
                // Ties keep the first cell in row-major scan order.
                double best = -1.0;
                int best_idx = -1;
                for (int di = 0; di < 2; ++di) {
                    const int i = 2 * oi + di;
                    if (i >= H) break;
                    for (int dj = 0; dj < 2; ++dj) {
                        const int j = 2 * oj + dj;
                        if (j >= W) break;
                        const int idx = i * W + j;
                        if (best_idx < 0 || xm[idx] > best) {
                            best = xm[idx];
                            best_idx = idx;
                        }
                    }
                }
                const std::size_t o = (static_cast<std::size_t>(c) * Ho + oi) * Wo + oj;
                out.value[o] = best;
                argmax[o] = best_idx;
            }
        }
    }

    out.needs_grad = nodes_[input].needs_grad;
    if (out.needs_grad) {
        out.backprop = [=, argmax = std::move(argmax)](Tape& t) {
            const std::vector<double>& go = t.adjoint_[t.out_id_];
            std::vector<double>& dx = t.adjoint_[input];
            for (int c = 0; c < C; ++c) {
                double* dxm = dx.data() + static_cast<std::size_t>(c) * H * W;
                const std::size_t base = static_cast<std::size_t>(c) * Ho * Wo;
                for (std::size_t o = 0; o < static_cast<std::size_t>(Ho) * Wo; ++o) {
                    dxm[argmax[base + o]] += go[base + o];
                }
            }
        };
    }
    return push(std::move(out), "maxpool2");
}

int Tape::dense(int input, int weights, int bias) {
    check_id(input);
    check_id(weights);
    check_id(bias);
    const auto& xs = nodes_[input].shape;
    const auto& ws = nodes_[weights].shape;
    const auto& bs = nodes_[bias].shape;
    require(xs.size() == 1, "dense: input must be rank 1");
    require(ws.size() == 2, "dense: weights must be [M,N]");
    require(bs.size() == 1, "dense: bias must be [M]");
    const int N = xs[0], M = ws[0];
    require(ws[1] == N, "dense: weight columns do not match input length");
    require(bs[0] == M, "dense: bias length does not match weight rows");

    const std::vector<double>& x = node_value(input);
    const std::vector<double>& w = node_value(weights);
    const std::vector<double>& b = node_value(bias);

    Node out;
    out.shape = {M};
    out.value.resize(M);
    for (int m = 0; m < M; ++m) {
        const double* wrow = w.data() + static_cast<std::size_t>(m) * N;
        double s = b[m];
        for (int n = 0; n < N; ++n) s += wrow[n] * x[n];
        out.value[m] = s;
    }

    out.needs_grad = nodes_[input].needs_grad || nodes_[weights].needs_grad || nodes_[bias].needs_grad;
    if (out.needs_grad) {
        out.backprop = [=](Tape& t) {
            const std::vector<double>& go = t.adjoint_[t.out_id_];
            const std::vector<double>& xv = t.node_value(input);
            const std::vector<double>& wv = t.node_value(weights);
            if (t.nodes_[bias].needs_grad) {
                std::vector<double>& db = t.adjoint_[bias];
                for (int m = 0; m < M; ++m) db[m] += go[m];
            }
            if (t.nodes_[weights].needs_grad) {
                std::vector<double>& dw = t.adjoint_[weights];
                for (int m = 0; m < M; ++m) {
                    double* drow = dw.data() + static_cast<std::size_t>(m) * N;
                    const double g = go[m];
                    for (int n = 0; n < N; ++n) drow[n] += g * xv[n];
                }
            }
            if (t.nodes_[input].needs_grad) {
                std::vector<double>& dx = t.adjoint_[input];
                for (int m = 0; m < M; ++m) {
                    const double* wrow = wv.data() + static_cast<std::size_t>(m) * N;
                    const double g = go[m];
                    for (int n = 0; n < N; ++n) dx[n] += g * wrow[n];
                }
            }
        };
    }
    return push(std::move(out), "dense");
}

int Tape::tanh_act(int input) {
    check_id(input);
    const std::vector<double>& x = node_value(input);
    Node out;
    out.shape = nodes_[input].shape;
    out.value.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out.value[i] = std::tanh(x[i]);

    out.needs_grad = nodes_[input].needs_grad;
    if (out.needs_grad) {
        out.backprop = [=](Tape& t) {
            const std::vector<double>& go = t.adjoint_[t.out_id_];
            const std::vector<double>& y = t.nodes_[t.out_id_].value;
            std::vector<double>& dx = t.adjoint_[input];
            for (std::size_t i = 0; i < y.size(); ++i) dx[i] += go[i] * (1.0 - y[i] * y[i]);
        };
    }
    return push(std::move(out), "tanh_act");
}

int Tape::scale_shift(int input, int gamma, int beta) {
    check_id(input);
    check_id(gamma);
    check_id(beta);
    require(nodes_[gamma].shape == nodes_[input].shape, "scale_shift: gamma shape does not match input");
    require(nodes_[beta].shape == nodes_[input].shape, "scale_shift: beta shape does not match input");

    const std::vector<double>& x = node_value(input);
    const std::vector<double>& g = node_value(gamma);
    const std::vector<double>& b = node_value(beta);
    Node out;
    out.shape = nodes_[input].shape;
    out.value.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out.value[i] = g[i] * x[i] + b[i];

    out.needs_grad = nodes_[input].needs_grad || nodes_[gamma].needs_grad || nodes_[beta].needs_grad;
    if (out.needs_grad) {
        out.backprop = [=](Tape& t) {
            const std::vector<double>& go = t.adjoint_[t.out_id_];
            const std::vector<double>& xv = t.node_value(input);
            const std::vector<double>& gv = t.node_value(gamma);
            if (t.nodes_[input].needs_grad) {
                std::vector<double>& dx = t.adjoint_[input];
                for (std::size_t i = 0; i < go.size(); ++i) dx[i] += go[i] * gv[i];
            }
            if (t.nodes_[gamma].needs_grad) {
                std::vector<double>& dg = t.adjoint_[gamma];
                for (std::size_t i = 0; i < go.size(); ++i) dg[i] += go[i] * xv[i];
            }
            if (t.nodes_[beta].needs_grad) {
                std::vector<double>& db = t.adjoint_[beta];
                for (std::size_t i = 0; i < go.size(); ++i) db[i] += go[i];
            }
        };
    }
    return push(std::move(out), "scale_shift");
}

int Tape::flatten(int input) {
    check_id(input);
    const std::vector<double>& x = node_value(input);
    Node out;
    out.shape = {static_cast<int>(x.size())};
    out.value = x;
    out.needs_grad = nodes_[input].needs_grad;
    if (out.needs_grad) {
        out.backprop = [=](Tape& t) {
            const std::vector<double>& go = t.adjoint_[t.out_id_];
            std::vector<double>& dx = t.adjoint_[input];
            for (std::size_t i = 0; i < go.size(); ++i) dx[i] += go[i];
        };
    }
    return push(std::move(out), "flatten");
}

void Tape::backward(int output, double seed) {
    if (nodes_.empty()) throw ConfigError("backward: tape is empty");
    check_id(output);
    if (shape_numel(nodes_[output].shape) != 1) throw ConfigError("backward: output must be a scalar");

    adjoint_.resize(nodes_.size());
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        const std::size_t n = nodes_[i].needs_grad || static_cast<int>(i) == output ? node_value(i).size() : 0;
        adjoint_[i].assign(n, 0.0);
    }
    adjoint_[output][0] = seed;

    for (int id = output; id >= 0; --id) {
        Node& n = nodes_[id];
        if (!n.backprop || adjoint_[id].empty()) continue;
        out_id_ = id;
        n.backprop(*this);
    }
    has_adjoints_ = true;

    // Flush leaf adjoints into their tensors' grad buffers (accumulating).
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        Node& n = nodes_[i];
        if (n.external && n.needs_grad) {
            const std::vector<double>& a = adjoint_[i];
            for (std::size_t k = 0; k < a.size(); ++k) n.external->grad[k] += a[k];
        }
    }
}

const std::vector<double>& Tape::adjoint(int id) const {
    check_id(id);
    if (!has_adjoints_) throw ConfigError("adjoint: no backward pass has run on this tape");
    return adjoint_[id];
}

void Tape::zero_leaf_grads() {
    for (Node& n : nodes_) {
        if (n.external && n.needs_grad) n.external->zero_grad();
    }
}

double finite_diff_check(const ScalarFn& f, const Tensor& point, double step) {
    if (step <= 0.0) throw ConfigError("finite_diff_check: step must be positive");
    std::vector<double> analytic;
    f.value_and_grad(point, analytic);

    Tensor probe = point;
    double worst = 0.0;
    for (std::size_t k = 0; k < probe.data.size(); ++k) {
        const double x0 = probe.data[k];
        probe.data[k] = x0 + step;
        const double fp = f.value(probe);
        probe.data[k] = x0 - step;
        const double fm = f.value(probe);
        probe.data[k] = x0;
        const double fd = (fp - fm) / (2.0 * step);
        const double disc = std::abs(analytic[k] - fd) / (std::abs(analytic[k]) + 1e-12);
        worst = std::max(worst, disc);
    }
    return worst;
}

}  // namespace pptv
