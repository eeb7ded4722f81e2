#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace stam {

class Tensor;

/// Storage plus graph bookkeeping for one tensor. Operations that take a
/// differentiable input record their parents and a pull-back here; the graph
/// is rebuilt on every forward pass (define-by-run).
struct TensorNode {
    std::vector<int> shape;
    std::vector<double> values;
    bool requires_grad = false;

    // Persistent accumulated gradient. Empty until backward() or zero_grad()
    // touches it; accumulates across backward() calls until zeroed.
    std::vector<double> grad;

    // Scratch adjoint used during a single backward() sweep.
    std::vector<double> adjoint;

    std::vector<Tensor> parents;
    std::function<void(TensorNode&)> backward_fn;
};

/// Dense row-major 64-bit float tensor, value-semantic handle to a shared
/// node. Single-threaded within one graph; independent graphs may live on
/// different threads.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
    static Tensor constant(std::vector<int> shape, double value, bool requires_grad = false);
    static Tensor from_values(std::vector<int> shape, std::vector<double> values,
                              bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);

    /// Internal: wrap an op-produced node.
    static Tensor adopt(std::shared_ptr<TensorNode> node);

    bool defined() const { return node_ != nullptr; }
    const std::vector<int>& shape() const;
    int rank() const;
    int dim(int axis) const;
    int size() const;
    bool requires_grad() const;

    std::vector<double>& values();
    const std::vector<double>& values() const;

    /// Value of a size-1 tensor.
    double scalar_value() const;

    bool has_grad() const;
    const std::vector<double>& grad() const;
    void zero_grad();

    TensorNode* node() const { return node_.get(); }

private:
    explicit Tensor(std::shared_ptr<TensorNode> node) : node_(std::move(node)) {}

    std::shared_ptr<TensorNode> node_;
};

std::string shape_string(const std::vector<int>& shape);
std::string shape_string(const Tensor& t);

// ---- elementwise ----
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);

// ---- linear algebra ----
/// Standard matrix product [m x k] * [k x n] -> [m x n].
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
/// [m x n] * [n] -> [m].
Tensor matvec(const Tensor& a, const Tensor& x);
/// [m] * [m x n] -> [n]  (row vector times matrix).
Tensor vecmat(const Tensor& x, const Tensor& a);
Tensor dot(const Tensor& a, const Tensor& b);

// ---- reductions and reshaping ----
Tensor sum(const Tensor& a);
/// Column-wise mean of a matrix: [m x n] -> [n].
Tensor mean_rows(const Tensor& a);
/// Column-wise max of a matrix: [m x n] -> [n]; the subgradient is routed to
/// the first row attaining each maximum.
Tensor max_rows(const Tensor& a);
Tensor row(const Tensor& a, int index);
Tensor slice(const Tensor& a, int start, int length);
Tensor concat(const Tensor& a, const Tensor& b);

// ---- softmax family ----
/// Numerically stable softmax of a vector (max-subtraction).
Tensor softmax(const Tensor& a);
/// Row-wise softmax of a matrix.
Tensor row_softmax(const Tensor& a);
/// log(sum(exp(x))) of a vector, computed stably; scalar output.
Tensor logsumexp(const Tensor& a);
/// Single element of a vector as a scalar tensor.
Tensor pick(const Tensor& a, int index);

/// Per-vector layer normalization with learnable affine:
/// (x - mean) / sqrt(var + eps) * gain + bias.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);

/// Full-span temporal convolution: kernel [n x d x d], clips [n x d],
/// bias [d] -> out[c] = sum_t sum_j kernel[t][c][j] * clips[t][j] + bias[c].
Tensor temporal_conv_full(const Tensor& kernel, const Tensor& clips, const Tensor& bias);

/// Reverse-mode sweep from a scalar loss. Accumulates d loss / d t into the
/// persistent grad of every reachable tensor with requires_grad; calling it
/// again without zeroing adds the same gradient again.
void backward(const Tensor& loss);

}  // namespace stam
