// Copyright 2026 The XBusNet Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <Eigen/Core>

#include <cmath>
#include <numbers>
#include <optional>

#include "xbus/core/tensor.hpp"

namespace xbus {

namespace detail {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

inline std::vector<std::size_t> strides_of(const Shape& shape)
{
    std::vector<std::size_t> s(shape.size(), 1);
    for (std::size_t i = shape.size(); i-- > 1;)
        s[i - 1] = s[i] * shape[i];
    return s;
}

/// Numpy-style broadcast of two shapes.
inline Shape broadcast_shapes(const Shape& a, const Shape& b)
{
    const std::size_t r = std::max(a.size(), b.size());
    Shape out(r, 1);
    for (std::size_t i = 0; i < r; ++i) {
        const std::size_t da = i < r - a.size() ? 1 : a[i - (r - a.size())];
        const std::size_t db = i < r - b.size() ? 1 : b[i - (r - b.size())];
        if (da != db && da != 1 && db != 1)
            throw ShapeError("cannot broadcast " + to_string(a) + " with " + to_string(b));
        out[i] = std::max(da, db);
    }
    return out;
}

/// For every element of `out`, the flat index of the element of `in` it
/// reads under broadcasting.
inline std::vector<std::size_t> broadcast_index(const Shape& in, const Shape& out)
{
    const std::size_t r = out.size();
    const std::size_t off = r - in.size();
    std::vector<std::size_t> in_strides(r, 0);
    const auto s = strides_of(in);
    for (std::size_t i = 0; i < in.size(); ++i)
        in_strides[i + off] = in[i] == 1 ? 0 : s[i];

    std::vector<std::size_t> map(numel(out));
    std::vector<std::size_t> idx(r, 0);
    std::size_t flat_in = 0;
    for (std::size_t k = 0; k < map.size(); ++k) {
        map[k] = flat_in;
        for (std::size_t d = r; d-- > 0;) {
            ++idx[d];
            flat_in += in_strides[d];
            if (idx[d] < out[d])
                break;
            flat_in -= in_strides[d] * idx[d];
            idx[d] = 0;
        }
    }
    return map;
}

template <typename F, typename DA, typename DB>
Tensor binary_op(std::string_view name, const Tensor& a, const Tensor& b, F f, DA dfa, DB dfb)
{
    const auto& av = a.data();
    const auto& bv = b.data();
    if (a.shape() == b.shape()) {
        std::vector<double> out(av.size());
        for (std::size_t i = 0; i < out.size(); ++i)
            out[i] = f(av[i], bv[i]);
        return make_result(name, a.shape(), std::move(out), {a, b},
                           [a, b, dfa, dfb](const Node& self) {
                               const auto ga = grad_sink(a);
                               const auto gb = grad_sink(b);
                               const auto x = a.data();
                               const auto y = b.data();
                               for (std::size_t i = 0; i < self.grad.size(); ++i) {
                                   const double g = self.grad[i];
                                   if (!ga.empty())
                                       ga[i] += g * dfa(x[i], y[i], self.data[i]);
                                   if (!gb.empty())
                                       gb[i] += g * dfb(x[i], y[i], self.data[i]);
                               }
                           });
    }
    Shape shape = broadcast_shapes(a.shape(), b.shape());
    auto ia = std::make_shared<std::vector<std::size_t>>(broadcast_index(a.shape(), shape));
    auto ib = std::make_shared<std::vector<std::size_t>>(broadcast_index(b.shape(), shape));
    std::vector<double> out(numel(shape));
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = f(av[(*ia)[i]], bv[(*ib)[i]]);
    return make_result(name, std::move(shape), std::move(out), {a, b},
                       [a, b, ia, ib, dfa, dfb](const Node& self) {
                           const auto ga = grad_sink(a);
                           const auto gb = grad_sink(b);
                           const auto x = a.data();
                           const auto y = b.data();
                           for (std::size_t i = 0; i < self.grad.size(); ++i) {
                               const double g = self.grad[i];
                               const double xa = x[(*ia)[i]];
                               const double yb = y[(*ib)[i]];
                               if (!ga.empty())
                                   ga[(*ia)[i]] += g * dfa(xa, yb, self.data[i]);
                               if (!gb.empty())
                                   gb[(*ib)[i]] += g * dfb(xa, yb, self.data[i]);
                           }
                       });
}

/// Elementwise map whose derivative is expressed through input and output.
template <typename F, typename D>
Tensor unary_op(std::string_view name, const Tensor& x, F f, D df)
{
    const auto v = x.data();
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = f(v[i]);
    return make_result(name, x.shape(), std::move(out), {x}, [x, df](const Node& self) {
        const auto gx = grad_sink(x);
        const auto v = x.data();
        for (std::size_t i = 0; i < self.grad.size(); ++i)
            gx[i] += self.grad[i] * df(v[i], self.data[i]);
    });
}

inline std::size_t normalize_axis(int axis, std::size_t rank)
{
    const int r = static_cast<int>(rank);
    const int a = axis < 0 ? axis + r : axis;
    if (a < 0 || a >= r)
        throw ShapeError("axis " + std::to_string(axis) + " out of range for rank "
                         + std::to_string(rank));
    return static_cast<std::size_t>(a);
}

} // namespace detail

// ---------------------------------------------------------------------------
// Elementwise arithmetic (numpy broadcasting)

inline Tensor add(const Tensor& a, const Tensor& b)
{
    return detail::binary_op(
        "add", a, b, [](double x, double y) { return x + y; },
        [](double, double, double) { return 1.0; }, [](double, double, double) { return 1.0; });
}

inline Tensor sub(const Tensor& a, const Tensor& b)
{
    return detail::binary_op(
        "sub", a, b, [](double x, double y) { return x - y; },
        [](double, double, double) { return 1.0; }, [](double, double, double) { return -1.0; });
}

inline Tensor mul(const Tensor& a, const Tensor& b)
{
    return detail::binary_op(
        "mul", a, b, [](double x, double y) { return x * y; },
        [](double, double y, double) { return y; }, [](double x, double, double) { return x; });
}

inline Tensor div(const Tensor& a, const Tensor& b)
{
    return detail::binary_op(
        "div", a, b, [](double x, double y) { return x / y; },
        [](double, double y, double) { return 1.0 / y; },
        [](double x, double y, double) { return -x / (y * y); });
}

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }

inline Tensor scale(const Tensor& x, double s)
{
    return detail::unary_op(
        "scale", x, [s](double v) { return s * v; }, [s](double, double) { return s; });
}

inline Tensor add_scalar(const Tensor& x, double s)
{
    return detail::unary_op(
        "add_scalar", x, [s](double v) { return v + s; }, [](double, double) { return 1.0; });
}

inline Tensor neg(const Tensor& x) { return scale(x, -1.0); }

// ---------------------------------------------------------------------------
// Activations

inline Tensor relu(const Tensor& x)
{
    return detail::unary_op(
        "relu", x, [](double v) { return v > 0.0 ? v : 0.0; },
        [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

/// Exact (erf-based) GELU.
inline Tensor gelu(const Tensor& x)
{
    constexpr double inv_sqrt2 = 0.70710678118654752440;
    constexpr double inv_sqrt2pi = 0.39894228040143267794;
    return detail::unary_op(
        "gelu", x, [](double v) { return 0.5 * v * (1.0 + std::erf(v * inv_sqrt2)); },
        [](double v, double) {
            return 0.5 * (1.0 + std::erf(v * inv_sqrt2)) + v * inv_sqrt2pi * std::exp(-0.5 * v * v);
        });
}

inline double sigmoid(double v)
{
    if (v >= 0.0)
        return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
}

inline Tensor sigmoid(const Tensor& x)
{
    return detail::unary_op(
        "sigmoid", x, [](double v) { return sigmoid(v); },
        [](double, double y) { return y * (1.0 - y); });
}

inline Tensor exp(const Tensor& x)
{
    return detail::unary_op(
        "exp", x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

inline Tensor log(const Tensor& x)
{
    return detail::unary_op(
        "log", x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

/// log(1 + e^x), evaluated without overflow.
inline Tensor softplus(const Tensor& x)
{
    return detail::unary_op(
        "softplus", x,
        [](double v) { return std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v))); },
        [](double v, double) { return sigmoid(v); });
}

inline Tensor square(const Tensor& x)
{
    return detail::unary_op(
        "square", x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

// ---------------------------------------------------------------------------
// Reductions

inline Tensor sum(const Tensor& x)
{
    double s = 0.0;
    for (double v : x.data())
        s += v;
    return detail::make_result("sum", Shape{}, {s}, {x}, [x](const detail::Node& self) {
        const auto gx = detail::grad_sink(x);
        for (double& g : gx)
            g += self.grad[0];
    });
}

inline Tensor mean(const Tensor& x)
{
    return scale(sum(x), 1.0 / static_cast<double>(x.size()));
}

/// Sum over the listed axes.
inline Tensor sum(const Tensor& x, std::vector<int> axes, bool keepdim = false)
{
    const Shape& in = x.shape();
    std::vector<bool> reduced(in.size(), false);
    for (int a : axes)
        reduced[detail::normalize_axis(a, in.size())] = true;
    Shape kept(in.size());
    Shape out_shape;
    for (std::size_t i = 0; i < in.size(); ++i) {
        kept[i] = reduced[i] ? 1 : in[i];
        if (!reduced[i] || keepdim)
            out_shape.push_back(kept[i]);
    }
    // Indices of the reduced output under broadcasting back to `in`.
    auto map = std::make_shared<std::vector<std::size_t>>(detail::broadcast_index(kept, in));
    std::vector<double> out(numel(kept), 0.0);
    const auto v = x.data();
    for (std::size_t i = 0; i < v.size(); ++i)
        out[(*map)[i]] += v[i];
    return detail::make_result("sum_axes", std::move(out_shape), std::move(out), {x},
                               [x, map](const detail::Node& self) {
                                   const auto gx = detail::grad_sink(x);
                                   for (std::size_t i = 0; i < gx.size(); ++i)
                                       gx[i] += self.grad[(*map)[i]];
                               });
}

inline Tensor mean(const Tensor& x, std::vector<int> axes, bool keepdim = false)
{
    std::size_t count = 1;
    for (int a : axes)
        count *= x.shape()[detail::normalize_axis(a, x.rank())];
    return scale(sum(x, std::move(axes), keepdim), 1.0 / static_cast<double>(count));
}

// ---------------------------------------------------------------------------
// Shape manipulation

inline Tensor reshape(const Tensor& x, Shape shape)
{
    if (numel(shape) != x.size())
        throw ShapeError("cannot reshape " + to_string(x.shape()) + " to " + to_string(shape));
    std::vector<double> values(x.data().begin(), x.data().end());
    return detail::make_result("reshape", std::move(shape), std::move(values), {x},
                               [x](const detail::Node& self) {
                                   const auto gx = detail::grad_sink(x);
                                   for (std::size_t i = 0; i < gx.size(); ++i)
                                       gx[i] += self.grad[i];
                               });
}

/// Reorders axes: output axis i is input axis perm[i].
inline Tensor permute(const Tensor& x, std::vector<std::size_t> perm)
{
    const Shape& in = x.shape();
    if (perm.size() != in.size())
        throw ShapeError("permutation rank mismatch for " + to_string(in));
    std::vector<bool> seen(in.size(), false);
    Shape out_shape(in.size());
    for (std::size_t i = 0; i < perm.size(); ++i) {
        if (perm[i] >= in.size() || seen[perm[i]])
            throw ShapeError("invalid permutation");
        seen[perm[i]] = true;
        out_shape[i] = in[perm[i]];
    }
    const auto in_strides = detail::strides_of(in);
    std::vector<std::size_t> step(in.size());
    for (std::size_t i = 0; i < perm.size(); ++i)
        step[i] = in_strides[perm[i]];

    auto map = std::make_shared<std::vector<std::size_t>>(x.size());
    std::vector<std::size_t> idx(in.size(), 0);
    std::size_t src = 0;
    for (std::size_t k = 0; k < map->size(); ++k) {
        (*map)[k] = src;
        for (std::size_t d = out_shape.size(); d-- > 0;) {
            ++idx[d];
            src += step[d];
            if (idx[d] < out_shape[d])
                break;
            src -= step[d] * idx[d];
            idx[d] = 0;
        }
    }
    std::vector<double> out(x.size());
    const auto v = x.data();
    for (std::size_t k = 0; k < out.size(); ++k)
        out[k] = v[(*map)[k]];
    return detail::make_result("permute", std::move(out_shape), std::move(out), {x},
                               [x, map](const detail::Node& self) {
                                   const auto gx = detail::grad_sink(x);
                                   for (std::size_t k = 0; k < self.grad.size(); ++k)
                                       gx[(*map)[k]] += self.grad[k];
                               });
}

/// Swaps the two trailing axes.
inline Tensor transpose_last(const Tensor& x)
{
    std::vector<std::size_t> perm(x.rank());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    if (perm.size() < 2)
        throw ShapeError("transpose_last needs rank >= 2");
    std::swap(perm[perm.size() - 1], perm[perm.size() - 2]);
    return permute(x, std::move(perm));
}

/// Contiguous range [start, start + length) along `axis`.
inline Tensor slice(const Tensor& x, int axis, std::size_t start, std::size_t length)
{
    const std::size_t ax = detail::normalize_axis(axis, x.rank());
    const Shape& in = x.shape();
    if (start + length > in[ax])
        throw ShapeError("slice [" + std::to_string(start) + ", " + std::to_string(start + length)
                         + ") exceeds axis of size " + std::to_string(in[ax]));
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < ax; ++i)
        outer *= in[i];
    for (std::size_t i = ax + 1; i < in.size(); ++i)
        inner *= in[i];
    Shape out_shape = in;
    out_shape[ax] = length;
    std::vector<double> out(outer * length * inner);
    const auto v = x.data();
    for (std::size_t o = 0; o < outer; ++o)
        std::copy_n(v.begin() + static_cast<std::ptrdiff_t>((o * in[ax] + start) * inner),
                    length * inner, out.begin() + static_cast<std::ptrdiff_t>(o * length * inner));
    const std::size_t full = in[ax];
    return detail::make_result(
        "slice", std::move(out_shape), std::move(out), {x},
        [x, outer, inner, full, start, length](const detail::Node& self) {
            const auto gx = detail::grad_sink(x);
            for (std::size_t o = 0; o < outer; ++o)
                for (std::size_t k = 0; k < length * inner; ++k)
                    gx[(o * full + start) * inner + k] += self.grad[o * length * inner + k];
        });
}

/// Concatenation along `axis`; all other dimensions must agree.
inline Tensor concat(const std::vector<Tensor>& parts, int axis)
{
    if (parts.empty())
        throw ShapeError("concat of zero tensors");
    const std::size_t ax = detail::normalize_axis(axis, parts[0].rank());
    Shape out_shape = parts[0].shape();
    out_shape[ax] = 0;
    for (const auto& p : parts) {
        if (p.rank() != out_shape.size())
            throw ShapeError("concat rank mismatch");
        for (std::size_t i = 0; i < out_shape.size(); ++i)
            if (i != ax && p.shape()[i] != out_shape[i])
                throw ShapeError("concat mismatch: " + to_string(p.shape()) + " vs "
                                 + to_string(parts[0].shape()) + " on axis "
                                 + std::to_string(ax));
        out_shape[ax] += p.shape()[ax];
    }
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < ax; ++i)
        outer *= out_shape[i];
    for (std::size_t i = ax + 1; i < out_shape.size(); ++i)
        inner *= out_shape[i];
    const std::size_t total = out_shape[ax];
    std::vector<double> out(numel(out_shape));
    std::size_t offset = 0;
    for (const auto& p : parts) {
        const std::size_t n = p.shape()[ax];
        const auto v = p.data();
        for (std::size_t o = 0; o < outer; ++o)
            std::copy_n(v.begin() + static_cast<std::ptrdiff_t>(o * n * inner), n * inner,
                        out.begin() + static_cast<std::ptrdiff_t>((o * total + offset) * inner));
        offset += n;
    }
    return detail::make_result("concat", std::move(out_shape), std::move(out), parts,
                               [parts, ax, outer, inner, total](const detail::Node& self) {
                                   std::size_t offset = 0;
                                   for (const auto& p : parts) {
                                       const std::size_t n = p.shape()[ax];
                                       const auto gp = detail::grad_sink(p);
                                       if (!gp.empty()) {
                                           for (std::size_t o = 0; o < outer; ++o)
                                               for (std::size_t k = 0; k < n * inner; ++k)
                                                   gp[o * n * inner + k]
                                                       += self.grad[(o * total + offset) * inner
                                                                    + k];
                                       }
                                       offset += n;
                                   }
                               });
}

inline Tensor concat_channels(const std::vector<Tensor>& parts) { return concat(parts, 1); }

// ---------------------------------------------------------------------------
// Row-wise normalizations over the last axis

inline Tensor softmax(const Tensor& x)
{
    const std::size_t n = x.dim(-1);
    const std::size_t rows = x.size() / n;
    std::vector<double> out(x.size());
    const auto v = x.data();
    for (std::size_t r = 0; r < rows; ++r) {
        const double* in = v.data() + r * n;
        double* o = out.data() + r * n;
        const double mx = *std::max_element(in, in + n);
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            o[i] = std::exp(in[i] - mx);
            s += o[i];
        }
        for (std::size_t i = 0; i < n; ++i)
            o[i] /= s;
    }
    return detail::make_result("softmax", x.shape(), std::move(out), {x},
                               [x, n, rows](const detail::Node& self) {
                                   const auto gx = detail::grad_sink(x);
                                   for (std::size_t r = 0; r < rows; ++r) {
                                       const double* y = self.data.data() + r * n;
                                       const double* g = self.grad.data() + r * n;
                                       double dot = 0.0;
                                       for (std::size_t i = 0; i < n; ++i)
                                           dot += y[i] * g[i];
                                       for (std::size_t i = 0; i < n; ++i)
                                           gx[r * n + i] += y[i] * (g[i] - dot);
                                   }
                               });
}

/// Normalizes the last axis to zero mean / unit variance, then applies
/// elementwise `gamma` and `beta` (both of length last-dim).
inline Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                         double eps = 1e-5)
{
    const std::size_t n = x.dim(-1);
    if (gamma.size() != n || beta.size() != n)
        throw ShapeError("layer_norm affine size mismatch");
    const std::size_t rows = x.size() / n;
    auto xhat = std::make_shared<std::vector<double>>(x.size());
    auto inv_std = std::make_shared<std::vector<double>>(rows);
    std::vector<double> out(x.size());
    const auto v = x.data();
    const auto g = gamma.data();
    const auto b = beta.data();
    for (std::size_t r = 0; r < rows; ++r) {
        const double* in = v.data() + r * n;
        double mu = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            mu += in[i];
        mu /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            var += (in[i] - mu) * (in[i] - mu);
        var /= static_cast<double>(n);
        const double is = 1.0 / std::sqrt(var + eps);
        (*inv_std)[r] = is;
        for (std::size_t i = 0; i < n; ++i) {
            const double h = (in[i] - mu) * is;
            (*xhat)[r * n + i] = h;
            out[r * n + i] = h * g[i] + b[i];
        }
    }
    return detail::make_result(
        "layer_norm", x.shape(), std::move(out), {x, gamma, beta},
        [x, gamma, beta, xhat, inv_std, n, rows](const detail::Node& self) {
            const auto gx = detail::grad_sink(x);
            const auto gg = detail::grad_sink(gamma);
            const auto gb = detail::grad_sink(beta);
            const auto gam = gamma.data();
            for (std::size_t r = 0; r < rows; ++r) {
                const double* dy = self.grad.data() + r * n;
                const double* h = xhat->data() + r * n;
                double sum_dh = 0.0, sum_dh_h = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    const double dh = dy[i] * gam[i];
                    sum_dh += dh;
                    sum_dh_h += dh * h[i];
                    if (!gg.empty())
                        gg[i] += dy[i] * h[i];
                    if (!gb.empty())
                        gb[i] += dy[i];
                }
                if (!gx.empty()) {
                    const double inv_n = 1.0 / static_cast<double>(n);
                    for (std::size_t i = 0; i < n; ++i) {
                        const double dh = dy[i] * gam[i];
                        gx[r * n + i]
                            += (*inv_std)[r] * (dh - inv_n * sum_dh - inv_n * h[i] * sum_dh_h);
                    }
                }
            }
        });
}

// ---------------------------------------------------------------------------
// Matrix products

/// Batched matrix product [..., m, k] x [..., k, n] with broadcast batch dims.
inline Tensor matmul(const Tensor& a, const Tensor& b)
{
    if (a.rank() < 2 || b.rank() < 2)
        throw ShapeError("matmul needs rank >= 2 operands");
    const std::size_t m = a.dim(-2), k = a.dim(-1), k2 = b.dim(-2), n = b.dim(-1);
    if (k != k2)
        throw ShapeError("matmul inner dimension mismatch: " + to_string(a.shape()) + " x "
                         + to_string(b.shape()));
    const Shape a_batch(a.shape().begin(), a.shape().end() - 2);
    const Shape b_batch(b.shape().begin(), b.shape().end() - 2);
    const Shape batch = detail::broadcast_shapes(a_batch, b_batch);
    auto ia = std::make_shared<std::vector<std::size_t>>(detail::broadcast_index(a_batch, batch));
    auto ib = std::make_shared<std::vector<std::size_t>>(detail::broadcast_index(b_batch, batch));
    const std::size_t nb = numel(batch);

    Shape out_shape = batch;
    out_shape.push_back(m);
    out_shape.push_back(n);
    std::vector<double> out(nb * m * n);
    const auto av = a.data();
    const auto bv = b.data();
    const auto em = static_cast<Eigen::Index>(m), ek = static_cast<Eigen::Index>(k),
               en = static_cast<Eigen::Index>(n);
    for (std::size_t t = 0; t < nb; ++t) {
        detail::ConstMatMap A(av.data() + (*ia)[t] * m * k, em, ek);
        detail::ConstMatMap B(bv.data() + (*ib)[t] * k * n, ek, en);
        detail::MatMap C(out.data() + t * m * n, em, en);
        C.noalias() = A * B;
    }
    return detail::make_result(
        "matmul", std::move(out_shape), std::move(out), {a, b},
        [a, b, ia, ib, nb, em, ek, en](const detail::Node& self) {
            const auto ga = detail::grad_sink(a);
            const auto gb = detail::grad_sink(b);
            const auto av = a.data();
            const auto bv = b.data();
            const auto m = static_cast<std::size_t>(em), k = static_cast<std::size_t>(ek),
                       n = static_cast<std::size_t>(en);
            for (std::size_t t = 0; t < nb; ++t) {
                detail::ConstMatMap G(self.grad.data() + t * m * n, em, en);
                if (!ga.empty()) {
                    detail::ConstMatMap B(bv.data() + (*ib)[t] * k * n, ek, en);
                    detail::MatMap GA(ga.data() + (*ia)[t] * m * k, em, ek);
                    GA.noalias() += G * B.transpose();
                }
                if (!gb.empty()) {
                    detail::ConstMatMap A(av.data() + (*ia)[t] * m * k, em, ek);
                    detail::MatMap GB(gb.data() + (*ib)[t] * k * n, ek, en);
                    GB.noalias() += A.transpose() * G;
                }
            }
        });
}

/// y = x W^T + b over the last axis; W is [out, in], b is [out] or undefined.
inline Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias = Tensor())
{
    const std::size_t in = x.dim(-1);
    if (weight.rank() != 2 || weight.dim(1) != in)
        throw ShapeError("linear: weight " + to_string(weight.shape()) + " does not accept input "
                         + to_string(x.shape()));
    const std::size_t out_f = weight.dim(0);
    if (bias.defined() && bias.size() != out_f)
        throw ShapeError("linear: bias size mismatch");
    const std::size_t rows = x.size() / in;
    Shape out_shape = x.shape();
    out_shape.back() = out_f;
    std::vector<double> out(rows * out_f);
    const auto er = static_cast<Eigen::Index>(rows), ei = static_cast<Eigen::Index>(in),
               eo = static_cast<Eigen::Index>(out_f);
    detail::ConstMatMap X(x.data().data(), er, ei);
    detail::ConstMatMap W(weight.data().data(), eo, ei);
    detail::MatMap Y(out.data(), er, eo);
    Y.noalias() = X * W.transpose();
    if (bias.defined()) {
        Eigen::Map<const Eigen::RowVectorXd> bvec(bias.data().data(), eo);
        Y.rowwise() += bvec;
    }
    std::vector<Tensor> inputs{x, weight};
    if (bias.defined())
        inputs.push_back(bias);
    return detail::make_result(
        "linear", std::move(out_shape), std::move(out), inputs,
        [x, weight, bias, er, ei, eo](const detail::Node& self) {
            detail::ConstMatMap G(self.grad.data(), er, eo);
            if (const auto gx = detail::grad_sink(x); !gx.empty()) {
                detail::ConstMatMap W(weight.data().data(), eo, ei);
                detail::MatMap GX(gx.data(), er, ei);
                GX.noalias() += G * W;
            }
            if (const auto gw = detail::grad_sink(weight); !gw.empty()) {
                detail::ConstMatMap X(x.data().data(), er, ei);
                detail::MatMap GW(gw.data(), eo, ei);
                GW.noalias() += G.transpose() * X;
            }
            if (bias.defined()) {
                if (const auto gb = detail::grad_sink(bias); !gb.empty()) {
                    // plain loop: Eigen's column reduction peels by address alignment
                    for (Eigen::Index r = 0; r < er; ++r)
                        for (Eigen::Index o = 0; o < eo; ++o)
                            gb[static_cast<std::size_t>(o)] += G(r, o);
                }
            }
        });
}

} // namespace xbus
