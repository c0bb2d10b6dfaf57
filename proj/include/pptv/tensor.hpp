#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace pptv {

std::size_t shape_numel(const std::vector<int>& shape);

/// Dense row-major value type shared by the whole stack. 64-bit floats
/// throughout; grad is allocated only when requires_grad is set.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;
    std::vector<double> grad;
    bool requires_grad = false;

    Tensor() = default;
    Tensor(std::vector<int> s, std::vector<double> d);

    static Tensor zeros(std::vector<int> shape);
    static Tensor full(std::vector<int> shape, double value);

    std::size_t numel() const { return data.size(); }
    void set_requires_grad(bool on);
    void zero_grad();

    // 3-D accessor for [C,H,W] fields.
    double& at(int c, int i, int j);
    double at(int c, int i, int j) const;
};

/// Reverse-mode tape. Leaves are external tensors owned by the caller;
/// interior values live on the tape. Records forward values plus one local
/// gradient rule per operation, replayed in reverse by backward().
///
/// A tape is confined to one execution context. Run one tape per sample for
/// parallel work and merge results in a fixed order above this layer.
class Tape {
  public:
    // Registers an external tensor. If t.requires_grad, backward() will
    // accumulate into t.grad (until the caller resets it), which is how
    // gradients sum over samples across successive tapes.
    int leaf(Tensor& t);

    // Read-only external tensor; never receives gradient.
    int constant(const Tensor& t);

    int conv2d(int input, int kernels, int bias, int pad_h, int pad_w);
    int maxpool2(int input);
    int dense(int input, int weights, int bias);
    int tanh_act(int input);
    // Elementwise gamma * x + beta with all three shapes identical.
    int scale_shift(int input, int gamma, int beta);
    int flatten(int input);

    // Reverse sweep from a scalar node. Adjoints are scratch per call and
    // readable through adjoint(); leaf tensors accumulate seed * d(out)/d(leaf)
    // into their grad buffers. Repeated calls accumulate; reset with
    // zero_leaf_grads() or Tensor::zero_grad().
    void backward(int output, double seed = 1.0);

    // Adjoint of any node from the most recent backward().
    const std::vector<double>& adjoint(int id) const;

    void zero_leaf_grads();

    const std::vector<double>& value(int id) const;
    const std::vector<int>& shape(int id) const;
    std::size_t size() const { return nodes_.size(); }

  private:
    struct Node {
        std::vector<int> shape;
        std::vector<double> value;           // empty for external leaves
        Tensor* external = nullptr;          // leaf binding (grad target)
        const Tensor* external_const = nullptr;
        bool needs_grad = false;
        std::function<void(Tape&)> backprop; // null for leaves
    };

    const std::vector<double>& node_value(int id) const;
    int push(Node node, const char* op_name);
    void check_id(int id) const;

    std::vector<Node> nodes_;
    std::vector<std::vector<double>> adjoint_;
    int out_id_ = -1;  // node whose rule is being replayed
    bool has_adjoints_ = false;
};

/// Differentiable scalar-valued function of a single tensor. Implemented by
/// the regression model and by the toy functions the tests use.
class ScalarFn {
  public:
    virtual ~ScalarFn() = default;
    virtual const std::vector<int>& input_shape() const = 0;
    virtual double value(const Tensor& x) const = 0;
    // Returns f(x) and writes df/dx (same layout as x.data) into grad.
    virtual double value_and_grad(const Tensor& x, std::vector<double>& grad) const = 0;
};

// Max over coordinates of |analytic - central difference| / (|analytic| + 1e-12).
double finite_diff_check(const ScalarFn& f, const Tensor& point, double step);

}  // namespace pptv
