#include "stam/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>
#include <utility>

#include "stam/errors.hpp"

namespace stam {

namespace {

int checked_size(const std::vector<int>& shape) {
    if (shape.empty()) {
        throw DimensionError("tensor shape must have at least one axis");
    }
    long long total = 1;
    for (int extent : shape) {
        if (extent < 1) {
            throw DimensionError("tensor extents must be positive, got " + shape_string(shape));
        }
        total *= extent;
    }
    return static_cast<int>(total);
}

std::shared_ptr<TensorNode> make_node(std::vector<int> shape, std::vector<double> values) {
    auto node = std::make_shared<TensorNode>();
    node->shape = std::move(shape);
    node->values = std::move(values);
    return node;
}

// Wraps an op result. Parents and the pull-back are only retained when some
// parent is differentiable, so constant subgraphs stay graph-free.
Tensor make_op(std::vector<int> shape, std::vector<double> values, std::vector<Tensor> parents,
               std::function<void(TensorNode&)> backward_fn) {
    auto node = make_node(std::move(shape), std::move(values));
    bool requires_grad = false;
    for (const Tensor& parent : parents) {
        requires_grad = requires_grad || parent.requires_grad();
    }
    node->requires_grad = requires_grad;
    if (requires_grad) {
        node->parents = std::move(parents);
        node->backward_fn = std::move(backward_fn);
    }
    return Tensor::adopt(std::move(node));
}

void require_defined(const Tensor& t, const char* op) {
    if (!t.defined()) {
        throw DomainError(std::string(op) + ": tensor is default-constructed");
    }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a) + " vs " +
                             shape_string(b));
    }
}

void require_rank(const Tensor& t, int rank, const char* op) {
    if (t.rank() != rank) {
        throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) +
                             " tensor, got " + shape_string(t));
    }
}

double stable_sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    double e = std::exp(x);
    return e / (1.0 + e);
}

// Stable softmax of values[offset .. offset+n) into out[offset .. offset+n).
void softmax_span(const std::vector<double>& values, std::vector<double>& out, int offset, int n) {
    double max_value = values[offset];
    for (int i = 1; i < n; ++i) {
        max_value = std::max(max_value, values[offset + i]);
    }
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        double e = std::exp(values[offset + i] - max_value);
        out[offset + i] = e;
        total += e;
    }
    for (int i = 0; i < n; ++i) {
        out[offset + i] /= total;
    }
}

// Pull-back of a softmax span: d_in = y * (d_out - <d_out, y>).
void softmax_span_backward(const std::vector<double>& y, const std::vector<double>& adj,
                           std::vector<double>& parent_adj, int offset, int n) {
    double mix = 0.0;
    for (int i = 0; i < n; ++i) {
        mix += adj[offset + i] * y[offset + i];
    }
    for (int i = 0; i < n; ++i) {
        parent_adj[offset + i] += y[offset + i] * (adj[offset + i] - mix);
    }
}

}  // namespace

std::string shape_string(const std::vector<int>& shape) {
    std::ostringstream out;
    out << "[";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i > 0) {
            out << " x ";
        }
        out << shape[i];
    }
    out << "]";
    return out.str();
}

std::string shape_string(const Tensor& t) {
    return shape_string(t.shape());
}

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
    return constant(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::constant(std::vector<int> shape, double value, bool requires_grad) {
    int size = checked_size(shape);
    auto node = make_node(std::move(shape), std::vector<double>(size, value));
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

Tensor Tensor::from_values(std::vector<int> shape, std::vector<double> values, bool requires_grad) {
    int size = checked_size(shape);
    if (static_cast<int>(values.size()) != size) {
        throw DimensionError("from_values: " + std::to_string(values.size()) +
                             " values do not fill shape " + shape_string(shape));
    }
    auto node = make_node(std::move(shape), std::move(values));
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return from_values({1}, {value}, requires_grad);
}

Tensor Tensor::adopt(std::shared_ptr<TensorNode> node) {
    return Tensor(std::move(node));
}

const std::vector<int>& Tensor::shape() const {
    require_defined(*this, "shape");
    return node_->shape;
}

int Tensor::rank() const {
    return static_cast<int>(shape().size());
}

int Tensor::dim(int axis) const {
    const auto& s = shape();
    if (axis < 0 || axis >= static_cast<int>(s.size())) {
        throw DimensionError("dim: axis " + std::to_string(axis) + " out of range for " +
                             shape_string(s));
    }
    return s[axis];
}

int Tensor::size() const {
    require_defined(*this, "size");
    return static_cast<int>(node_->values.size());
}

bool Tensor::requires_grad() const {
    require_defined(*this, "requires_grad");
    return node_->requires_grad;
}

std::vector<double>& Tensor::values() {
    require_defined(*this, "values");
    return node_->values;
}

const std::vector<double>& Tensor::values() const {
    require_defined(*this, "values");
    return node_->values;
}

double Tensor::scalar_value() const {
    if (size() != 1) {
        throw DomainError("scalar_value: tensor has shape " + shape_string(*this));
    }
    return node_->values[0];
}

bool Tensor::has_grad() const {
    require_defined(*this, "has_grad");
    return !node_->grad.empty();
}

const std::vector<double>& Tensor::grad() const {
    require_defined(*this, "grad");
    if (node_->grad.empty()) {
        throw DomainError("grad: no gradient accumulated for this tensor");
    }
    return node_->grad;
}

void Tensor::zero_grad() {
    require_defined(*this, "zero_grad");
    node_->grad.assign(node_->values.size(), 0.0);
}

Tensor add(const Tensor& a, const Tensor& b) {
    require_defined(a, "add");
    require_defined(b, "add");
    require_same_shape(a, b, "add");
    std::vector<double> out(a.values());
    for (int i = 0; i < b.size(); ++i) {
        out[i] += b.values()[i];
    }
    return make_op(a.shape(), std::move(out), {a, b}, [a, b](TensorNode& self) {
        for (size_t i = 0; i < self.adjoint.size(); ++i) {
            a.node()->adjoint[i] += self.adjoint[i];
            b.node()->adjoint[i] += self.adjoint[i];
        }
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_defined(a, "sub");
    require_defined(b, "sub");
    require_same_shape(a, b, "sub");
    std::vector<double> out(a.values());
    for (int i = 0; i < b.size(); ++i) {
        out[i] -= b.values()[i];
    }
    return make_op(a.shape(), std::move(out), {a, b}, [a, b](TensorNode& self) {
        for (size_t i = 0; i < self.adjoint.size(); ++i) {
            a.node()->adjoint[i] += self.adjoint[i];
            b.node()->adjoint[i] -= self.adjoint[i];
        }
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_defined(a, "mul");
    require_defined(b, "mul");
    require_same_shape(a, b, "mul");
    std::vector<double> out(a.values());
    for (int i = 0; i < b.size(); ++i) {
        out[i] *= b.values()[i];
    }
    return make_op(a.shape(), std::move(out), {a, b}, [a, b](TensorNode& self) {
        for (size_t i = 0; i < self.adjoint.size(); ++i) {
            a.node()->adjoint[i] += self.adjoint[i] * b.node()->values[i];
            b.node()->adjoint[i] += self.adjoint[i] * a.node()->values[i];
        }
    });
}

Tensor scale(const Tensor& a, double factor) {
    require_defined(a, "scale");
    std::vector<double> out(a.values());
    for (double& v : out) {
        v *= factor;
    }
    return make_op(a.shape(), std::move(out), {a}, [a, factor](TensorNode& self) {
        for (size_t i = 0; i < self.adjoint.size(); ++i) {
            a.node()->adjoint[i] += factor * self.adjoint[i];
        }
    });
}

Tensor sigmoid(const Tensor& a) {
    require_defined(a, "sigmoid");
    std::vector<double> out(a.size());
    for (int i = 0; i < a.size(); ++i) {
        out[i] = stable_sigmoid(a.values()[i]);
    }
    return make_op(a.shape(), std::move(out), {a}, [a](TensorNode& self) {
        for (size_t i = 0; i < self.adjoint.size(); ++i) {
            double y = self.values[i];
            a.node()->adjoint[i] += self.adjoint[i] * y * (1.0 - y);
        }
    });
}

Tensor tanh(const Tensor& a) {
    require_defined(a, "tanh");
    std::vector<double> out(a.size());
    for (int i = 0; i < a.size(); ++i) {
        out[i] = std::tanh(a.values()[i]);
    }
    return make_op(a.shape(), std::move(out), {a}, [a](TensorNode& self) {
        for (size_t i = 0; i < self.adjoint.size(); ++i) {
            double y = self.values[i];
            a.node()->adjoint[i] += self.adjoint[i] * (1.0 - y * y);
        }
    });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_defined(a, "matmul");
    require_defined(b, "matmul");
    require_rank(a, 2, "matmul");
    require_rank(b, 2, "matmul");
    int m = a.dim(0);
    int k = a.dim(1);
    int n = b.dim(1);
    if (b.dim(0) != k) {
        throw DimensionError("matmul: inner dimensions disagree, " + shape_string(a) + " vs " +
                             shape_string(b));
    }
    std::vector<double> out(static_cast<size_t>(m) * n, 0.0);
    const auto& av = a.values();
    const auto& bv = b.values();
    for (int i = 0; i < m; ++i) {
        for (int p = 0; p < k; ++p) {
            double left = av[i * k + p];
            for (int j = 0; j < n; ++j) {
                out[i * n + j] += left * bv[p * n + j];
            }
        }
    }
    return make_op({m, n}, std::move(out), {a, b}, [a, b, m, k, n](TensorNode& self) {
        const auto& adj = self.adjoint;
        auto& da = a.node()->adjoint;
        auto& db = b.node()->adjoint;
        const auto& av = a.node()->values;
        const auto& bv = b.node()->values;
        for (int i = 0; i < m; ++i) {
            for (int p = 0; p < k; ++p) {
                double acc = 0.0;
                for (int j = 0; j < n; ++j) {
                    acc += adj[i * n + j] * bv[p * n + j];
                }
                da[i * k + p] += acc;
            }
        }
        for (int p = 0; p < k; ++p) {
            for (int i = 0; i < m; ++i) {
                double left = av[i * k + p];
                for (int j = 0; j < n; ++j) {
                    db[p * n + j] += left * adj[i * n + j];
                }
            }
        }
    });
}

Tensor transpose(const Tensor& a) {
    require_defined(a, "transpose");
    require_rank(a, 2, "transpose");
    int m = a.dim(0);
    int n = a.dim(1);
    std::vector<double> out(static_cast<size_t>(m) * n);
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            out[j * m + i] = a.values()[i * n + j];
        }
    }
    return make_op({n, m}, std::move(out), {a}, [a, m, n](TensorNode& self) {
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j < n; ++j) {
                a.node()->adjoint[i * n + j] += self.adjoint[j * m + i];
            }
        }
    });
}

Tensor matvec(const Tensor& a, const Tensor& x) {
    require_defined(a, "matvec");
    require_defined(x, "matvec");
    require_rank(a, 2, "matvec");
    require_rank(x, 1, "matvec");
    int m = a.dim(0);
    int n = a.dim(1);
    if (x.dim(0) != n) {
        throw DimensionError("matvec: " + shape_string(a) + " cannot act on " + shape_string(x));
    }
    std::vector<double> out(m, 0.0);
    for (int i = 0; i < m; ++i) {
        double acc = 0.0;
        for (int j = 0; j < n; ++j) {
            acc += a.values()[i * n + j] * x.values()[j];
        }
        out[i] = acc;
    }
    return make_op({m}, std::move(out), {a, x}, [a, x, m, n](TensorNode& self) {
        auto& da = a.node()->adjoint;
        auto& dx = x.node()->adjoint;
        for (int i = 0; i < m; ++i) {
            double gi = self.adjoint[i];
            for (int j = 0; j < n; ++j) {
                da[i * n + j] += gi * x.node()->values[j];
                dx[j] += gi * a.node()->values[i * n + j];
            }
        }
    });
}

Tensor vecmat(const Tensor& x, const Tensor& a) {
    require_defined(x, "vecmat");
    require_defined(a, "vecmat");
    require_rank(x, 1, "vecmat");
    require_rank(a, 2, "vecmat");
    int m = a.dim(0);
    int n = a.dim(1);
    if (x.dim(0) != m) {
        throw DimensionError("vecmat: " + shape_string(x) + " cannot act on " + shape_string(a));
    }
    std::vector<double> out(n, 0.0);
    for (int i = 0; i < m; ++i) {
        double left = x.values()[i];
        for (int j = 0; j < n; ++j) {
            out[j] += left * a.values()[i * n + j];
        }
    }
    return make_op({n}, std::move(out), {x, a}, [x, a, m, n](TensorNode& self) {
        auto& dx = x.node()->adjoint;
        auto& da = a.node()->adjoint;
        for (int i = 0; i < m; ++i) {
            double acc = 0.0;
            for (int j = 0; j < n; ++j) {
                acc += self.adjoint[j] * a.node()->values[i * n + j];
                da[i * n + j] += x.node()->values[i] * self.adjoint[j];
            }
            dx[i] += acc;
        }
    });
}

Tensor dot(const Tensor& a, const Tensor& b) {
    require_defined(a, "dot");
    require_defined(b, "dot");
    require_rank(a, 1, "dot");
    require_rank(b, 1, "dot");
    require_same_shape(a, b, "dot");
    double acc = 0.0;
    for (int i = 0; i < a.size(); ++i) {
        acc += a.values()[i] * b.values()[i];
    }
    return make_op({1}, {acc}, {a, b}, [a, b](TensorNode& self) {
        double g = self.adjoint[0];
        for (size_t i = 0; i < a.node()->values.size(); ++i) {
            a.node()->adjoint[i] += g * b.node()->values[i];
            b.node()->adjoint[i] += g * a.node()->values[i];
        }
    });
}

Tensor sum(const Tensor& a) {
    require_defined(a, "sum");
    double acc = 0.0;
    for (double v : a.values()) {
        acc += v;
    }
    return make_op({1}, {acc}, {a}, [a](TensorNode& self) {
        double g = self.adjoint[0];
        for (double& d : a.node()->adjoint) {
            d += g;
        }
    });
}

Tensor mean_rows(const Tensor& a) {
    require_defined(a, "mean_rows");
    require_rank(a, 2, "mean_rows");
    int m = a.dim(0);
    int n = a.dim(1);
    std::vector<double> out(n, 0.0);
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            out[j] += a.values()[i * n + j];
        }
    }
    for (double& v : out) {
        v /= m;
    }
    return make_op({n}, std::move(out), {a}, [a, m, n](TensorNode& self) {
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j < n; ++j) {
                a.node()->adjoint[i * n + j] += self.adjoint[j] / m;
            }
        }
    });
}

Tensor max_rows(const Tensor& a) {
    require_defined(a, "max_rows");
    require_rank(a, 2, "max_rows");
    int m = a.dim(0);
    int n = a.dim(1);
    std::vector<double> out(n);
    // Ties resolve to the earliest row so the subgradient is deterministic.
    std::vector<int> argmax(n, 0);
    for (int j = 0; j < n; ++j) {
        double best = a.values()[j];
        for (int i = 1; i < m; ++i) {
            double v = a.values()[i * n + j];
            if (v > best) {
                best = v;
                argmax[j] = i;
            }
        }
        out[j] = best;
    }
    return make_op({n}, std::move(out), {a},
                   [a, n, argmax = std::move(argmax)](TensorNode& self) {
                       for (int j = 0; j < n; ++j) {
                           a.node()->adjoint[argmax[j] * n + j] += self.adjoint[j];
                       }
                   });
}

Tensor row(const Tensor& a, int index) {
    require_defined(a, "row");
    require_rank(a, 2, "row");
    int m = a.dim(0);
    int n = a.dim(1);
    if (index < 0 || index >= m) {
        throw DimensionError("row: index " + std::to_string(index) + " out of range for " +
                             shape_string(a));
    }
    std::vector<double> out(a.values().begin() + static_cast<size_t>(index) * n,
                            a.values().begin() + static_cast<size_t>(index + 1) * n);
    return make_op({n}, std::move(out), {a}, [a, index, n](TensorNode& self) {
        for (int j = 0; j < n; ++j) {
            a.node()->adjoint[index * n + j] += self.adjoint[j];
        }
    });
}

Tensor slice(const Tensor& a, int start, int length) {
    require_defined(a, "slice");
    require_rank(a, 1, "slice");
    int n = a.dim(0);
    if (start < 0 || length < 1 || start + length > n) {
        throw DimensionError("slice: range [" + std::to_string(start) + ", " +
                             std::to_string(start + length) + ") invalid for " + shape_string(a));
    }
    std::vector<double> out(a.values().begin() + start, a.values().begin() + start + length);
    return make_op({length}, std::move(out), {a}, [a, start, length](TensorNode& self) {
        for (int i = 0; i < length; ++i) {
            a.node()->adjoint[start + i] += self.adjoint[i];
        }
    });
}

Tensor concat(const Tensor& a, const Tensor& b) {
    require_defined(a, "concat");
    require_defined(b, "concat");
    require_rank(a, 1, "concat");
    require_rank(b, 1, "concat");
    int m = a.dim(0);
    int n = b.dim(0);
    std::vector<double> out;
    out.reserve(m + n);
    out.insert(out.end(), a.values().begin(), a.values().end());
    out.insert(out.end(), b.values().begin(), b.values().end());
    return make_op({m + n}, std::move(out), {a, b}, [a, b, m, n](TensorNode& self) {
        for (int i = 0; i < m; ++i) {
            a.node()->adjoint[i] += self.adjoint[i];
        }
        for (int j = 0; j < n; ++j) {
            b.node()->adjoint[j] += self.adjoint[m + j];
        }
    });
}

Tensor softmax(const Tensor& a) {
    require_defined(a, "softmax");
    require_rank(a, 1, "softmax");
    int n = a.dim(0);
    std::vector<double> out(n);
    softmax_span(a.values(), out, 0, n);
    return make_op({n}, std::move(out), {a}, [a, n](TensorNode& self) {
        softmax_span_backward(self.values, self.adjoint, a.node()->adjoint, 0, n);
    });
}

Tensor row_softmax(const Tensor& a) {
    require_defined(a, "row_softmax");
    require_rank(a, 2, "row_softmax");
    int m = a.dim(0);
    int n = a.dim(1);
    std::vector<double> out(static_cast<size_t>(m) * n);
    for (int i = 0; i < m; ++i) {
        softmax_span(a.values(), out, i * n, n);
    }
    return make_op({m, n}, std::move(out), {a}, [a, m, n](TensorNode& self) {
        for (int i = 0; i < m; ++i) {
            softmax_span_backward(self.values, self.adjoint, a.node()->adjoint, i * n, n);
        }
    });
}

Tensor logsumexp(const Tensor& a) {
    require_defined(a, "logsumexp");
    require_rank(a, 1, "logsumexp");
    int n = a.dim(0);
    double max_value = a.values()[0];
    for (int i = 1; i < n; ++i) {
        max_value = std::max(max_value, a.values()[i]);
    }
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        total += std::exp(a.values()[i] - max_value);
    }
    double result = max_value + std::log(total);
    return make_op({1}, {result}, {a}, [a, n](TensorNode& self) {
        double g = self.adjoint[0];
        double out = self.values[0];
        for (int i = 0; i < n; ++i) {
            a.node()->adjoint[i] += g * std::exp(a.node()->values[i] - out);
        }
    });
}

Tensor pick(const Tensor& a, int index) {
    require_defined(a, "pick");
    require_rank(a, 1, "pick");
    if (index < 0 || index >= a.dim(0)) {
        throw DimensionError("pick: index " + std::to_string(index) + " out of range for " +
                             shape_string(a));
    }
    return make_op({1}, {a.values()[index]}, {a}, [a, index](TensorNode& self) {
        a.node()->adjoint[index] += self.adjoint[0];
    });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
    require_defined(x, "layer_norm");
    require_defined(gain, "layer_norm");
    require_defined(bias, "layer_norm");
    require_rank(x, 1, "layer_norm");
    require_same_shape(x, gain, "layer_norm");
    require_same_shape(x, bias, "layer_norm");
    int n = x.dim(0);
    double mean = 0.0;
    for (double v : x.values()) {
        mean += v;
    }
    mean /= n;
    double var = 0.0;
    for (double v : x.values()) {
        var += (v - mean) * (v - mean);
    }
    var /= n;
    double inv_std = 1.0 / std::sqrt(var + eps);
    std::vector<double> normalized(n);
    std::vector<double> out(n);
    for (int i = 0; i < n; ++i) {
        normalized[i] = (x.values()[i] - mean) * inv_std;
        out[i] = normalized[i] * gain.values()[i] + bias.values()[i];
    }
    return make_op({n}, std::move(out), {x, gain, bias},
                   [x, gain, bias, n, inv_std, normalized = std::move(normalized)](TensorNode& self) {
                       // d_normalized, then the centered/scaled pull-back.
                       double mean_dn = 0.0;
                       double mean_dn_norm = 0.0;
                       std::vector<double> dn(n);
                       for (int i = 0; i < n; ++i) {
                           dn[i] = self.adjoint[i] * gain.node()->values[i];
                           gain.node()->adjoint[i] += self.adjoint[i] * normalized[i];
                           bias.node()->adjoint[i] += self.adjoint[i];
                           mean_dn += dn[i];
                           mean_dn_norm += dn[i] * normalized[i];
                       }
                       mean_dn /= n;
                       mean_dn_norm /= n;
                       for (int i = 0; i < n; ++i) {
                           x.node()->adjoint[i] +=
                               inv_std * (dn[i] - mean_dn - normalized[i] * mean_dn_norm);
                       }
                   });
}

Tensor temporal_conv_full(const Tensor& kernel, const Tensor& clips, const Tensor& bias) {
    require_defined(kernel, "temporal_conv_full");
    require_defined(clips, "temporal_conv_full");
    require_defined(bias, "temporal_conv_full");
    require_rank(kernel, 3, "temporal_conv_full");
    require_rank(clips, 2, "temporal_conv_full");
    require_rank(bias, 1, "temporal_conv_full");
    int n = clips.dim(0);
    int d = clips.dim(1);
    if (kernel.dim(0) != n || kernel.dim(1) != d || kernel.dim(2) != d || bias.dim(0) != d) {
        throw DimensionError("temporal_conv_full: kernel " + shape_string(kernel) + ", bias " +
                             shape_string(bias) + " incompatible with clips " +
                             shape_string(clips));
    }
    std::vector<double> out(bias.values());
    const auto& kv = kernel.values();
    const auto& xv = clips.values();
    for (int t = 0; t < n; ++t) {
        for (int c = 0; c < d; ++c) {
            double acc = 0.0;
            for (int j = 0; j < d; ++j) {
                acc += kv[(t * d + c) * d + j] * xv[t * d + j];
            }
            out[c] += acc;
        }
    }
    return make_op({d}, std::move(out), {kernel, clips, bias},
                   [kernel, clips, bias, n, d](TensorNode& self) {
                       auto& dk = kernel.node()->adjoint;
                       auto& dx = clips.node()->adjoint;
                       auto& db = bias.node()->adjoint;
                       const auto& kv = kernel.node()->values;
                       const auto& xv = clips.node()->values;
                       for (int c = 0; c < d; ++c) {
                           db[c] += self.adjoint[c];
                       }
                       for (int t = 0; t < n; ++t) {
                           for (int c = 0; c < d; ++c) {
                               double g = self.adjoint[c];
                               for (int j = 0; j < d; ++j) {
                                   dk[(t * d + c) * d + j] += g * xv[t * d + j];
                                   dx[t * d + j] += g * kv[(t * d + c) * d + j];
                               }
                           }
                       }
                   });
}

void backward(const Tensor& loss) {
    require_defined(loss, "backward");
    if (loss.size() != 1) {
        throw DomainError("backward: loss must be scalar, got " + shape_string(loss));
    }
    TensorNode* root = loss.node();

    // Iterative postorder over parent edges; reversed it yields every node
    // before any of its parents, so adjoints are complete when pulled back.
    std::vector<TensorNode*> order;
    std::unordered_set<TensorNode*> visited;
    std::vector<std::pair<TensorNode*, size_t>> stack;
    stack.push_back({root, 0});
    visited.insert(root);
    while (!stack.empty()) {
        auto& [node, next_parent] = stack.back();
        if (next_parent < node->parents.size()) {
            TensorNode* parent = node->parents[next_parent].node();
            ++next_parent;
            if (visited.insert(parent).second) {
                stack.push_back({parent, 0});
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    for (TensorNode* node : order) {
        node->adjoint.assign(node->values.size(), 0.0);
    }
    root->adjoint[0] = 1.0;

    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        TensorNode* node = *it;
        if (node->backward_fn) {
            node->backward_fn(*node);
        }
    }

    for (TensorNode* node : order) {
        if (!node->requires_grad) {
            continue;
        }
        if (node->grad.empty()) {
            node->grad.assign(node->values.size(), 0.0);
        }
        for (size_t i = 0; i < node->adjoint.size(); ++i) {
            node->grad[i] += node->adjoint[i];
        }
    }
}

}  // namespace stam
