#include "vjscc/tensor.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

namespace vjscc {

namespace {

using detail::Node;

using MatrixRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<MatrixRM>;
using ConstMapRM = Eigen::Map<const MatrixRM>;

size_t shape_numel(const std::vector<size_t>& shape) {
    size_t n = 1;
    for (size_t d : shape) n *= d;
    return n;
}

std::vector<size_t> row_major_strides(const std::vector<size_t>& shape) {
    std::vector<size_t> s(shape.size(), 1);
    for (size_t i = shape.size(); i-- > 1;) s[i - 1] = s[i] * shape[i];
    return s;
}

void check_defined(const Tensor& t, const char* op) {
    if (!t.defined()) throw DimensionError(std::string(op) + ": undefined tensor");
}

// Per-element map from a's flat index to b's flat index under the
// b-broadcasts-into-a rule. Returns b strides aligned to a's rank (0 where
// broadcast), or throws.
std::vector<size_t> broadcast_strides(const std::vector<size_t>& a_shape,
                                      const std::vector<size_t>& b_shape, const char* op) {
    if (b_shape.size() > a_shape.size())
        throw DimensionError(std::string(op) + ": cannot broadcast " + shape_str(b_shape) +
                             " into " + shape_str(a_shape));
    const size_t pad = a_shape.size() - b_shape.size();
    std::vector<size_t> padded(a_shape.size(), 1);
    for (size_t i = 0; i < b_shape.size(); ++i) padded[pad + i] = b_shape[i];
    const auto bs = row_major_strides(padded);
    std::vector<size_t> strides(a_shape.size(), 0);
    for (size_t i = 0; i < a_shape.size(); ++i) {
        if (padded[i] == a_shape[i])
            strides[i] = bs[i];
        else if (padded[i] == 1)
            strides[i] = 0;
        else
            throw DimensionError(std::string(op) + ": cannot broadcast " + shape_str(b_shape) +
                                 " into " + shape_str(a_shape));
    }
    return strides;
}

// Applies fn(a_flat_index, b_flat_index) over all elements of a.
template <typename Fn>
void for_each_broadcast(const std::vector<size_t>& a_shape, const std::vector<size_t>& b_strides,
                        Fn&& fn) {
    const size_t n = shape_numel(a_shape);
    const auto a_strides = row_major_strides(a_shape);
    std::vector<size_t> idx(a_shape.size(), 0);
    size_t bi = 0;
    for (size_t ai = 0; ai < n; ++ai) {
        fn(ai, bi);
        for (size_t d = a_shape.size(); d-- > 0;) {
            idx[d]++;
            bi += b_strides[d];
            if (idx[d] < a_shape[d]) break;
            bi -= a_shape[d] * b_strides[d];
            idx[d] = 0;
        }
    }
}

bool any_requires(const std::vector<Tensor>& ts) {
    for (const auto& t : ts)
        if (t.requires_grad()) return true;
    return false;
}

void accumulate(Node* n, size_t i, double v) { n->grad[i] += v; }

}  // namespace

// ---------------------------------------------------------------------------
// Tensor basics
// ---------------------------------------------------------------------------

Tensor Tensor::zeros(std::vector<size_t> shape) { return full(std::move(shape), 0.0); }

Tensor Tensor::full(std::vector<size_t> shape, double value) {
    auto node = std::make_shared<detail::Node>();
    node->data.assign(shape_numel(shape), value);
    node->shape = std::move(shape);
    return Tensor(std::move(node));
}

Tensor Tensor::from_data(std::vector<size_t> shape, std::vector<double> data) {
    if (shape_numel(shape) != data.size())
        throw DimensionError("from_data: shape " + shape_str(shape) + " needs " +
                             std::to_string(shape_numel(shape)) + " values, got " +
                             std::to_string(data.size()));
    auto node = std::make_shared<detail::Node>();
    node->shape = std::move(shape);
    node->data = std::move(data);
    return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value) { return from_data({1}, {value}); }

Tensor Tensor::param(std::vector<size_t> shape, std::vector<double> data) {
    Tensor t = from_data(std::move(shape), std::move(data));
    t.set_requires_grad(true);
    return t;
}

double Tensor::item() const {
    if (numel() != 1)
        throw DimensionError("item: tensor " + shape_str(shape()) + " is not scalar");
    return node_->data[0];
}

std::vector<double> Tensor::grad() const {
    if (node_->grad.empty()) return std::vector<double>(numel(), 0.0);
    return node_->grad;
}

Tensor make_op(const std::vector<Tensor>& parents, std::vector<size_t> shape,
               std::vector<double> data, std::function<void(detail::Node&)> backward_fn) {
    if (shape_numel(shape) != data.size())
        throw DimensionError("make_op: shape/data size mismatch");
    auto node = std::make_shared<detail::Node>();
    node->shape = std::move(shape);
    node->data = std::move(data);
    if (any_requires(parents)) {
        node->requires_grad = true;
        node->parents.reserve(parents.size());
        for (const auto& p : parents) node->parents.push_back(p.node_ptr());
        node->backward_fn = std::move(backward_fn);
    }
    return Tensor(std::move(node));
}

// ---------------------------------------------------------------------------
// Elementwise ops
// ---------------------------------------------------------------------------

namespace {

enum class BinKind { Add, Sub, Mul };

Tensor binary_op(const Tensor& a, const Tensor& b, BinKind kind, const char* name) {
    check_defined(a, name);
    check_defined(b, name);
    const auto& ash = a.shape();
    const auto b_strides = broadcast_strides(ash, b.shape(), name);
    std::vector<double> out(a.numel());
    const auto& ad = a.values();
    const auto& bd = b.values();
    switch (kind) {
        case BinKind::Add:
            for_each_broadcast(ash, b_strides, [&](size_t ai, size_t bi) { out[ai] = ad[ai] + bd[bi]; });
            break;
        case BinKind::Sub:
            for_each_broadcast(ash, b_strides, [&](size_t ai, size_t bi) { out[ai] = ad[ai] - bd[bi]; });
            break;
        case BinKind::Mul:
            for_each_broadcast(ash, b_strides, [&](size_t ai, size_t bi) { out[ai] = ad[ai] * bd[bi]; });
            break;
    }
    auto an = a.node_ptr();
    auto bn = b.node_ptr();
    auto shape = ash;
    return make_op({a, b}, ash, std::move(out), [an, bn, b_strides, shape, kind](Node& self) {
        if (an->requires_grad) {
            an->ensure_grad();
            if (kind == BinKind::Mul) {
                for_each_broadcast(shape, b_strides, [&](size_t ai, size_t bi) {
                    accumulate(an.get(), ai, self.grad[ai] * bn->data[bi]);
                });
            } else {
                for (size_t i = 0; i < self.grad.size(); ++i) accumulate(an.get(), i, self.grad[i]);
            }
        }
        if (bn->requires_grad) {
            bn->ensure_grad();
            const double sgn = (kind == BinKind::Sub) ? -1.0 : 1.0;
            if (kind == BinKind::Mul) {
                for_each_broadcast(shape, b_strides, [&](size_t ai, size_t bi) {
                    accumulate(bn.get(), bi, self.grad[ai] * an->data[ai]);
                });
            } else {
                for_each_broadcast(shape, b_strides, [&](size_t ai, size_t bi) {
                    accumulate(bn.get(), bi, sgn * self.grad[ai]);
                });
            }
        }
    });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinKind::Add, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinKind::Sub, "sub"); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinKind::Mul, "mul"); }

Tensor scale(const Tensor& a, double c) {
    check_defined(a, "scale");
    std::vector<double> out(a.numel());
    for (size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * c;
    auto an = a.node_ptr();
    return make_op({a}, a.shape(), std::move(out), [an, c](Node& self) {
        an->ensure_grad();
        for (size_t i = 0; i < self.grad.size(); ++i) accumulate(an.get(), i, self.grad[i] * c);
    });
}

Tensor gelu(const Tensor& x) {
    check_defined(x, "gelu");
    constexpr double inv_sqrt2 = 0.70710678118654752440;
    constexpr double inv_sqrt2pi = 0.39894228040143267794;
    std::vector<double> out(x.numel());
    for (size_t i = 0; i < out.size(); ++i) {
        const double v = x.values()[i];
        out[i] = 0.5 * v * (1.0 + std::erf(v * inv_sqrt2));
    }
    auto xn = x.node_ptr();
    return make_op({x}, x.shape(), std::move(out), [xn](Node& self) {
        xn->ensure_grad();
        for (size_t i = 0; i < self.grad.size(); ++i) {
            const double v = xn->data[i];
            const double cdf = 0.5 * (1.0 + std::erf(v * inv_sqrt2));
            const double pdf = inv_sqrt2pi * std::exp(-0.5 * v * v);
            accumulate(xn.get(), i, self.grad[i] * (cdf + v * pdf));
        }
    });
}

Tensor sigmoid(const Tensor& x) {
    check_defined(x, "sigmoid");
    std::vector<double> out(x.numel());
    for (size_t i = 0; i < out.size(); ++i) {
        const double v = x.values()[i];
        out[i] = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
    }
    auto xn = x.node_ptr();
    return make_op({x}, x.shape(), std::move(out), [xn](Node& self) {
        xn->ensure_grad();
        for (size_t i = 0; i < self.grad.size(); ++i) {
            const double y = self.data[i];
            accumulate(xn.get(), i, self.grad[i] * y * (1.0 - y));
        }
    });
}

// ---------------------------------------------------------------------------
// Linear algebra
// ---------------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    check_defined(a, "matmul");
    check_defined(b, "matmul");
    if (a.ndim() < 2 || b.ndim() < 2)
        throw DimensionError("matmul: operands must be at least 2-D, got " + shape_str(a.shape()) +
                             " and " + shape_str(b.shape()));
    const auto& ash = a.shape();
    const auto& bsh = b.shape();
    const size_t m = ash[ash.size() - 2];
    const size_t k = ash[ash.size() - 1];
    const size_t kb = bsh[bsh.size() - 2];
    const size_t n = bsh[bsh.size() - 1];
    if (k != kb)
        throw DimensionError("matmul: inner dimensions disagree, " + shape_str(ash) + " vs " +
                             shape_str(bsh));
    std::vector<size_t> a_batch(ash.begin(), ash.end() - 2);
    std::vector<size_t> b_batch(bsh.begin(), bsh.end() - 2);
    if (!b_batch.empty() && !a_batch.empty() && a_batch != b_batch)
        throw DimensionError("matmul: batch dimensions disagree, " + shape_str(ash) + " vs " +
                             shape_str(bsh));
    const bool b_shared = b_batch.empty();
    const bool a_shared = a_batch.empty() && !b_batch.empty();
    const auto& batch = a_batch.empty() ? b_batch : a_batch;
    const size_t n_batch = shape_numel(batch);

    std::vector<size_t> out_shape(batch);
    out_shape.push_back(m);
    out_shape.push_back(n);
    std::vector<double> out(n_batch * m * n);
    for (size_t i = 0; i < n_batch; ++i) {
        ConstMapRM A(a.values().data() + (a_shared ? 0 : i * m * k), m, k);
        ConstMapRM B(b.values().data() + (b_shared ? 0 : i * k * n), k, n);
        MapRM C(out.data() + i * m * n, m, n);
        C.noalias() = A * B;
    }
    auto an = a.node_ptr();
    auto bn = b.node_ptr();
    return make_op({a, b}, std::move(out_shape), std::move(out),
                   [an, bn, m, k, n, n_batch, a_shared, b_shared](Node& self) {
                       if (an->requires_grad) an->ensure_grad();
                       if (bn->requires_grad) bn->ensure_grad();
                       for (size_t i = 0; i < n_batch; ++i) {
                           ConstMapRM G(self.grad.data() + i * m * n, m, n);
                           if (an->requires_grad) {
                               ConstMapRM B(bn->data.data() + (b_shared ? 0 : i * k * n), k, n);
                               MapRM dA(an->grad.data() + (a_shared ? 0 : i * m * k), m, k);
                               dA.noalias() += G * B.transpose();
                           }
                           if (bn->requires_grad) {
                               ConstMapRM A(an->data.data() + (a_shared ? 0 : i * m * k), m, k);
                               MapRM dB(bn->grad.data() + (b_shared ? 0 : i * k * n), k, n);
                               dB.noalias() += A.transpose() * G;
                           }
                       }
                   });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
    check_defined(x, "linear");
    check_defined(weight, "linear");
    check_defined(bias, "linear");
    if (weight.ndim() != 2)
        throw DimensionError("linear: weight must be 2-D, got " + shape_str(weight.shape()));
    const size_t in = weight.dim(0);
    const size_t out_dim = weight.dim(1);
    if (x.ndim() < 1 || x.shape().back() != in)
        throw DimensionError("linear: input " + shape_str(x.shape()) + " does not match weight " +
                             shape_str(weight.shape()));
    if (bias.ndim() != 1 || bias.dim(0) != out_dim)
        throw DimensionError("linear: bias " + shape_str(bias.shape()) + " does not match weight " +
                             shape_str(weight.shape()));
    const size_t rows = x.numel() / in;
    std::vector<double> out(rows * out_dim);
    {
        ConstMapRM X(x.values().data(), rows, in);
        ConstMapRM W(weight.values().data(), in, out_dim);
        MapRM Y(out.data(), rows, out_dim);
        Y.noalias() = X * W;
        Y.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(bias.values().data(), out_dim);
    }
    std::vector<size_t> out_shape(x.shape());
    out_shape.back() = out_dim;
    auto xn = x.node_ptr();
    auto wn = weight.node_ptr();
    auto bn = bias.node_ptr();
    return make_op({x, weight, bias}, std::move(out_shape), std::move(out),
                   [xn, wn, bn, rows, in, out_dim](Node& self) {
                       ConstMapRM G(self.grad.data(), rows, out_dim);
                       if (xn->requires_grad) {
                           xn->ensure_grad();
                           ConstMapRM W(wn->data.data(), in, out_dim);
                           MapRM dX(xn->grad.data(), rows, in);
                           dX.noalias() += G * W.transpose();
                       }
                       if (wn->requires_grad) {
                           wn->ensure_grad();
                           ConstMapRM X(xn->data.data(), rows, in);
                           MapRM dW(wn->grad.data(), in, out_dim);
                           dW.noalias() += X.transpose() * G;
                       }
                       if (bn->requires_grad) {
                           bn->ensure_grad();
                           Eigen::Map<Eigen::RowVectorXd> dB(bn->grad.data(), out_dim);
                           dB += G.colwise().sum();
                       }
                   });
}

// ---------------------------------------------------------------------------
// Normalization and reductions
// ---------------------------------------------------------------------------

namespace {

// Splits shape around `axis` into (outer, axis_len, inner) for strided slices.
void axis_split(const std::vector<size_t>& shape, size_t axis, size_t& outer, size_t& len,
                size_t& inner, const char* op) {
    if (axis >= shape.size())
        throw DimensionError(std::string(op) + ": axis " + std::to_string(axis) +
                             " out of range for " + shape_str(shape));
    outer = 1;
    for (size_t i = 0; i < axis; ++i) outer *= shape[i];
    len = shape[axis];
    inner = 1;
    for (size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
}

}  // namespace

Tensor softmax(const Tensor& x, size_t axis) {
    check_defined(x, "softmax");
    size_t outer, len, inner;
    axis_split(x.shape(), axis, outer, len, inner, "softmax");
    std::vector<double> out(x.numel());
    const auto& xd = x.values();
    for (size_t o = 0; o < outer; ++o) {
        for (size_t in = 0; in < inner; ++in) {
            const size_t base = o * len * inner + in;
            double mx = xd[base];
            for (size_t j = 1; j < len; ++j) mx = std::max(mx, xd[base + j * inner]);
            double sum = 0.0;
            for (size_t j = 0; j < len; ++j) {
                const double e = std::exp(xd[base + j * inner] - mx);
                out[base + j * inner] = e;
                sum += e;
            }
            for (size_t j = 0; j < len; ++j) out[base + j * inner] /= sum;
        }
    }
    auto xn = x.node_ptr();
    return make_op({x}, x.shape(), std::move(out), [xn, outer, len, inner](Node& self) {
        xn->ensure_grad();
        for (size_t o = 0; o < outer; ++o) {
            for (size_t in = 0; in < inner; ++in) {
                const size_t base = o * len * inner + in;
                double dot = 0.0;
                for (size_t j = 0; j < len; ++j) {
                    const size_t idx = base + j * inner;
                    dot += self.grad[idx] * self.data[idx];
                }
                for (size_t j = 0; j < len; ++j) {
                    const size_t idx = base + j * inner;
                    accumulate(xn.get(), idx, self.data[idx] * (self.grad[idx] - dot));
                }
            }
        }
    });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
    check_defined(x, "layer_norm");
    check_defined(gain, "layer_norm");
    check_defined(bias, "layer_norm");
    if (x.ndim() < 1) throw DimensionError("layer_norm: input must have at least one dimension");
    const size_t d = x.shape().back();
    if (gain.numel() != d || bias.numel() != d)
        throw DimensionError("layer_norm: gain " + shape_str(gain.shape()) + " / bias " +
                             shape_str(bias.shape()) + " do not match last dim of " +
                             shape_str(x.shape()));
    const size_t rows = x.numel() / d;
    std::vector<double> out(x.numel());
    std::vector<double> inv_std(rows), mean(rows);
    const auto& xd = x.values();
    for (size_t r = 0; r < rows; ++r) {
        const double* xr = xd.data() + r * d;
        double mu = 0.0;
        for (size_t j = 0; j < d; ++j) mu += xr[j];
        mu /= static_cast<double>(d);
        double var = 0.0;
        for (size_t j = 0; j < d; ++j) var += (xr[j] - mu) * (xr[j] - mu);
        var /= static_cast<double>(d);
        const double is = 1.0 / std::sqrt(var + eps);
        mean[r] = mu;
        inv_std[r] = is;
        for (size_t j = 0; j < d; ++j)
            out[r * d + j] = (xr[j] - mu) * is * gain.values()[j] + bias.values()[j];
    }
    auto xn = x.node_ptr();
    auto gn = gain.node_ptr();
    auto bn = bias.node_ptr();
    return make_op({x, gain, bias}, x.shape(), std::move(out),
                   [xn, gn, bn, rows, d, mean, inv_std](Node& self) {
                       if (xn->requires_grad) xn->ensure_grad();
                       if (gn->requires_grad) gn->ensure_grad();
                       if (bn->requires_grad) bn->ensure_grad();
                       for (size_t r = 0; r < rows; ++r) {
                           const double* xr = xn->data.data() + r * d;
                           const double* gr = self.grad.data() + r * d;
                           const double is = inv_std[r];
                           const double mu = mean[r];
                           if (gn->requires_grad || bn->requires_grad) {
                               for (size_t j = 0; j < d; ++j) {
                                   const double xhat = (xr[j] - mu) * is;
                                   if (gn->requires_grad) accumulate(gn.get(), j, gr[j] * xhat);
                                   if (bn->requires_grad) accumulate(bn.get(), j, gr[j]);
                               }
                           }
                           if (xn->requires_grad) {
                               double sum_gd = 0.0, sum_gdx = 0.0;
                               for (size_t j = 0; j < d; ++j) {
                                   const double gd = gr[j] * gn->data[j];
                                   const double xhat = (xr[j] - mu) * is;
                                   sum_gd += gd;
                                   sum_gdx += gd * xhat;
                               }
                               const double inv_d = 1.0 / static_cast<double>(d);
                               for (size_t j = 0; j < d; ++j) {
                                   const double gd = gr[j] * gn->data[j];
                                   const double xhat = (xr[j] - mu) * is;
                                   accumulate(xn.get(), r * d + j,
                                              is * (gd - inv_d * sum_gd - xhat * inv_d * sum_gdx));
                               }
                           }
                       }
                   });
}

Tensor sum_all(const Tensor& x) {
    check_defined(x, "sum_all");
    double s = 0.0;
    for (double v : x.values()) s += v;
    auto xn = x.node_ptr();
    return make_op({x}, {1}, {s}, [xn](Node& self) {
        xn->ensure_grad();
        for (size_t i = 0; i < xn->grad.size(); ++i) accumulate(xn.get(), i, self.grad[0]);
    });
}

Tensor mean_all(const Tensor& x) {
    check_defined(x, "mean_all");
    const double inv_n = 1.0 / static_cast<double>(x.numel());
    double s = 0.0;
    for (double v : x.values()) s += v;
    auto xn = x.node_ptr();
    return make_op({x}, {1}, {s * inv_n}, [xn, inv_n](Node& self) {
        xn->ensure_grad();
        for (size_t i = 0; i < xn->grad.size(); ++i) accumulate(xn.get(), i, self.grad[0] * inv_n);
    });
}

Tensor mean_axis(const Tensor& x, size_t axis) {
    check_defined(x, "mean_axis");
    size_t outer, len, inner;
    axis_split(x.shape(), axis, outer, len, inner, "mean_axis");
    std::vector<size_t> out_shape(x.shape());
    out_shape[axis] = 1;
    std::vector<double> out(outer * inner, 0.0);
    const double inv_len = 1.0 / static_cast<double>(len);
    for (size_t o = 0; o < outer; ++o)
        for (size_t j = 0; j < len; ++j)
            for (size_t in = 0; in < inner; ++in)
                out[o * inner + in] += x.values()[(o * len + j) * inner + in];
    for (double& v : out) v *= inv_len;
    auto xn = x.node_ptr();
    return make_op({x}, std::move(out_shape), std::move(out),
                   [xn, outer, len, inner, inv_len](Node& self) {
                       xn->ensure_grad();
                       for (size_t o = 0; o < outer; ++o)
                           for (size_t j = 0; j < len; ++j)
                               for (size_t in = 0; in < inner; ++in)
                                   accumulate(xn.get(), (o * len + j) * inner + in,
                                              self.grad[o * inner + in] * inv_len);
                   });
}

// ---------------------------------------------------------------------------
// Shape and data movement
// ---------------------------------------------------------------------------

Tensor reshape(const Tensor& x, std::vector<size_t> shape) {
    check_defined(x, "reshape");
    if (shape_numel(shape) != x.numel())
        throw DimensionError("reshape: cannot view " + shape_str(x.shape()) + " as " +
                             shape_str(shape));
    auto xn = x.node_ptr();
    return make_op({x}, std::move(shape), x.values(), [xn](Node& self) {
        xn->ensure_grad();
        for (size_t i = 0; i < self.grad.size(); ++i) accumulate(xn.get(), i, self.grad[i]);
    });
}

Tensor transpose_axes(const Tensor& x, const std::vector<size_t>& perm) {
    check_defined(x, "transpose_axes");
    const size_t nd = x.ndim();
    if (perm.size() != nd) throw DimensionError("transpose_axes: permutation length mismatch");
    std::vector<bool> seen(nd, false);
    for (size_t p : perm) {
        if (p >= nd || seen[p]) throw DimensionError("transpose_axes: invalid permutation");
        seen[p] = true;
    }
    std::vector<size_t> out_shape(nd);
    for (size_t i = 0; i < nd; ++i) out_shape[i] = x.dim(perm[i]);
    const auto in_strides = row_major_strides(x.shape());
    const auto out_strides = row_major_strides(out_shape);
    // source_index[i] = flat index in x of the i-th output element
    std::vector<size_t> source_index(x.numel());
    std::vector<size_t> idx(nd, 0);
    for (size_t oi = 0; oi < source_index.size(); ++oi) {
        size_t src = 0;
        for (size_t d = 0; d < nd; ++d) src += idx[d] * in_strides[perm[d]];
        source_index[oi] = src;
        for (size_t d = nd; d-- > 0;) {
            if (++idx[d] < out_shape[d]) break;
            idx[d] = 0;
        }
    }
    std::vector<double> out(x.numel());
    for (size_t i = 0; i < out.size(); ++i) out[i] = x.values()[source_index[i]];
    auto xn = x.node_ptr();
    return make_op({x}, std::move(out_shape), std::move(out),
                   [xn, source_index = std::move(source_index)](Node& self) {
                       xn->ensure_grad();
                       for (size_t i = 0; i < self.grad.size(); ++i)
                           accumulate(xn.get(), source_index[i], self.grad[i]);
                   });
}

Tensor concat(const Tensor& a, const Tensor& b, size_t axis) {
    check_defined(a, "concat");
    check_defined(b, "concat");
    if (a.ndim() != b.ndim())
        throw DimensionError("concat: rank mismatch, " + shape_str(a.shape()) + " vs " +
                             shape_str(b.shape()));
    for (size_t i = 0; i < a.ndim(); ++i)
        if (i != axis && a.dim(i) != b.dim(i))
            throw DimensionError("concat: shapes " + shape_str(a.shape()) + " and " +
                                 shape_str(b.shape()) + " differ off axis " + std::to_string(axis));
    size_t outer, la, inner;
    axis_split(a.shape(), axis, outer, la, inner, "concat");
    const size_t lb = b.dim(axis);
    std::vector<size_t> out_shape(a.shape());
    out_shape[axis] = la + lb;
    std::vector<double> out(a.numel() + b.numel());
    for (size_t o = 0; o < outer; ++o) {
        std::copy_n(a.values().data() + o * la * inner, la * inner,
                    out.data() + o * (la + lb) * inner);
        std::copy_n(b.values().data() + o * lb * inner, lb * inner,
                    out.data() + o * (la + lb) * inner + la * inner);
    }
    auto an = a.node_ptr();
    auto bn = b.node_ptr();
    return make_op({a, b}, std::move(out_shape), std::move(out),
                   [an, bn, outer, la, lb, inner](Node& self) {
                       if (an->requires_grad) an->ensure_grad();
                       if (bn->requires_grad) bn->ensure_grad();
                       for (size_t o = 0; o < outer; ++o) {
                           const double* g = self.grad.data() + o * (la + lb) * inner;
                           if (an->requires_grad)
                               for (size_t i = 0; i < la * inner; ++i)
                                   accumulate(an.get(), o * la * inner + i, g[i]);
                           if (bn->requires_grad)
                               for (size_t i = 0; i < lb * inner; ++i)
                                   accumulate(bn.get(), o * lb * inner + i, g[la * inner + i]);
                       }
                   });
}

Tensor broadcast_axis(const Tensor& x, size_t axis, size_t n) {
    check_defined(x, "broadcast_axis");
    size_t outer, len, inner;
    axis_split(x.shape(), axis, outer, len, inner, "broadcast_axis");
    if (len != 1)
        throw DimensionError("broadcast_axis: axis " + std::to_string(axis) + " of " +
                             shape_str(x.shape()) + " must have size 1");
    std::vector<size_t> out_shape(x.shape());
    out_shape[axis] = n;
    std::vector<double> out(outer * n * inner);
    for (size_t o = 0; o < outer; ++o)
        for (size_t j = 0; j < n; ++j)
            std::copy_n(x.values().data() + o * inner, inner, out.data() + (o * n + j) * inner);
    auto xn = x.node_ptr();
    return make_op({x}, std::move(out_shape), std::move(out), [xn, outer, n, inner](Node& self) {
        xn->ensure_grad();
        for (size_t o = 0; o < outer; ++o)
            for (size_t j = 0; j < n; ++j)
                for (size_t in = 0; in < inner; ++in)
                    accumulate(xn.get(), o * inner + in, self.grad[(o * n + j) * inner + in]);
    });
}

Tensor slice(const Tensor& x, size_t axis, size_t start, size_t stop) {
    check_defined(x, "slice");
    size_t outer, len, inner;
    axis_split(x.shape(), axis, outer, len, inner, "slice");
    if (start > stop || stop > len)
        throw DimensionError("slice: range [" + std::to_string(start) + ", " +
                             std::to_string(stop) + ") invalid for axis of length " +
                             std::to_string(len));
    const size_t out_len = stop - start;
    std::vector<size_t> out_shape(x.shape());
    out_shape[axis] = out_len;
    std::vector<double> out(outer * out_len * inner);
    for (size_t o = 0; o < outer; ++o)
        std::copy_n(x.values().data() + (o * len + start) * inner, out_len * inner,
                    out.data() + o * out_len * inner);
    auto xn = x.node_ptr();
    return make_op({x}, std::move(out_shape), std::move(out),
                   [xn, outer, len, inner, start, out_len](Node& self) {
                       xn->ensure_grad();
                       for (size_t o = 0; o < outer; ++o)
                           for (size_t i = 0; i < out_len * inner; ++i)
                               accumulate(xn.get(), (o * len + start) * inner + i,
                                          self.grad[o * out_len * inner + i]);
                   });
}

Tensor gather(const Tensor& x, const std::vector<size_t>& indices) {
    check_defined(x, "gather");
    if (x.ndim() < 1) throw DimensionError("gather: input must have at least one dimension");
    const size_t dim0 = x.dim(0);
    const size_t row = x.numel() / std::max<size_t>(dim0, 1);
    for (size_t idx : indices)
        if (idx >= dim0)
            throw DimensionError("gather: index " + std::to_string(idx) + " out of range for " +
                                 shape_str(x.shape()));
    std::vector<size_t> out_shape(x.shape());
    out_shape[0] = indices.size();
    std::vector<double> out(indices.size() * row);
    for (size_t r = 0; r < indices.size(); ++r)
        std::copy_n(x.values().data() + indices[r] * row, row, out.data() + r * row);
    auto xn = x.node_ptr();
    return make_op({x}, std::move(out_shape), std::move(out), [xn, indices, row](Node& self) {
        xn->ensure_grad();
        for (size_t r = 0; r < indices.size(); ++r)
            for (size_t i = 0; i < row; ++i)
                accumulate(xn.get(), indices[r] * row + i, self.grad[r * row + i]);
    });
}

Tensor scatter_zeros(const Tensor& x, const std::vector<size_t>& indices, size_t dim0) {
    check_defined(x, "scatter_zeros");
    if (x.ndim() < 1 || x.dim(0) != indices.size())
        throw DimensionError("scatter_zeros: leading dim of " + shape_str(x.shape()) +
                             " must equal index count " + std::to_string(indices.size()));
    std::unordered_set<size_t> seen;
    for (size_t idx : indices) {
        if (idx >= dim0)
            throw DimensionError("scatter_zeros: index " + std::to_string(idx) +
                                 " out of range for target dim " + std::to_string(dim0));
        if (!seen.insert(idx).second)
            throw DimensionError("scatter_zeros: duplicate index " + std::to_string(idx));
    }
    const size_t row = x.numel() / std::max<size_t>(indices.size(), 1);
    std::vector<size_t> out_shape(x.shape());
    out_shape[0] = dim0;
    std::vector<double> out(dim0 * row, 0.0);
    for (size_t r = 0; r < indices.size(); ++r)
        std::copy_n(x.values().data() + r * row, row, out.data() + indices[r] * row);
    auto xn = x.node_ptr();
    return make_op({x}, std::move(out_shape), std::move(out), [xn, indices, row](Node& self) {
        xn->ensure_grad();
        for (size_t r = 0; r < indices.size(); ++r)
            for (size_t i = 0; i < row; ++i)
                accumulate(xn.get(), r * row + i, self.grad[indices[r] * row + i]);
    });
}

Tensor apply_permutation(const Tensor& x, const std::vector<size_t>& source_index,
                         std::vector<size_t> out_shape) {
    check_defined(x, "apply_permutation");
    if (source_index.size() != x.numel() || shape_numel(out_shape) != x.numel())
        throw DimensionError("apply_permutation: map size " + std::to_string(source_index.size()) +
                             " and shape " + shape_str(out_shape) + " must both match " +
                             shape_str(x.shape()));
    std::vector<double> out(x.numel());
    for (size_t i = 0; i < out.size(); ++i) out[i] = x.values()[source_index[i]];
    auto xn = x.node_ptr();
    return make_op({x}, std::move(out_shape), std::move(out), [xn, source_index](Node& self) {
        xn->ensure_grad();
        for (size_t i = 0; i < self.grad.size(); ++i)
            accumulate(xn.get(), source_index[i], self.grad[i]);
    });
}

Tensor detach(const Tensor& x) {
    check_defined(x, "detach");
    return Tensor::from_data(x.shape(), x.values());
}

// ---------------------------------------------------------------------------
// Reverse pass
// ---------------------------------------------------------------------------

void backward(const Tensor& loss) {
    check_defined(loss, "backward");
    if (loss.numel() != 1)
        throw DimensionError("backward: loss must be scalar, got " + shape_str(loss.shape()));

    // Iterative post-order DFS; the resulting order is deterministic for a
    // given graph, which makes repeated backward calls bit-identical.
    std::vector<Node*> topo;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, size_t>> stack;
    stack.emplace_back(loss.node(), 0);
    visited.insert(loss.node());
    while (!stack.empty()) {
        auto& [node, next_child] = stack.back();
        if (next_child < node->parents.size()) {
            Node* child = node->parents[next_child++].get();
            if (!visited.count(child)) {
                visited.insert(child);
                stack.emplace_back(child, 0);
            }
        } else {
            topo.push_back(node);
            stack.pop_back();
        }
    }

    for (Node* n : topo) n->grad.assign(n->data.size(), 0.0);
    loss.node()->grad[0] = 1.0;
    for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
        Node* n = *it;
        if (n->backward_fn) n->backward_fn(*n);
    }
}

}  // namespace vjscc
