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

#include "xbus/core/ops.hpp"

namespace xbus {

struct ConvGeometry {
    std::size_t stride = 1;
    std::size_t padding = 0;
};

namespace detail {

struct PatchLayout {
    std::size_t channels, height, width, kh, kw, stride, padding, out_h, out_w;

    std::size_t rows() const { return channels * kh * kw; }
    std::size_t cols() const { return out_h * out_w; }
};

/// Unfolds one [C,H,W] image into a [C*kh*kw, out_h*out_w] matrix.
inline void im2col(const double* img, const PatchLayout& p, double* cols)
{
    const auto pad = static_cast<std::ptrdiff_t>(p.padding);
    for (std::size_t c = 0; c < p.channels; ++c)
        for (std::size_t i = 0; i < p.kh; ++i)
            for (std::size_t j = 0; j < p.kw; ++j) {
                double* row = cols + ((c * p.kh + i) * p.kw + j) * p.cols();
                for (std::size_t oy = 0; oy < p.out_h; ++oy) {
                    const auto y = static_cast<std::ptrdiff_t>(oy * p.stride + i) - pad;
                    for (std::size_t ox = 0; ox < p.out_w; ++ox) {
                        const auto x = static_cast<std::ptrdiff_t>(ox * p.stride + j) - pad;
                        const bool inside = y >= 0 && x >= 0
                                            && y < static_cast<std::ptrdiff_t>(p.height)
                                            && x < static_cast<std::ptrdiff_t>(p.width);
                        row[oy * p.out_w + ox]
                            = inside ? img[(c * p.height + static_cast<std::size_t>(y)) * p.width
                                           + static_cast<std::size_t>(x)]
                                     : 0.0;
                    }
                }
            }
}

/// Adjoint of im2col: scatters-adds columns back into a [C,H,W] image.
inline void col2im(const double* cols, const PatchLayout& p, double* img)
{
    const auto pad = static_cast<std::ptrdiff_t>(p.padding);
    for (std::size_t c = 0; c < p.channels; ++c)
        for (std::size_t i = 0; i < p.kh; ++i)
            for (std::size_t j = 0; j < p.kw; ++j) {
                const double* row = cols + ((c * p.kh + i) * p.kw + j) * p.cols();
                for (std::size_t oy = 0; oy < p.out_h; ++oy) {
                    const auto y = static_cast<std::ptrdiff_t>(oy * p.stride + i) - pad;
                    if (y < 0 || y >= static_cast<std::ptrdiff_t>(p.height))
                        continue;
                    for (std::size_t ox = 0; ox < p.out_w; ++ox) {
                        const auto x = static_cast<std::ptrdiff_t>(ox * p.stride + j) - pad;
                        if (x < 0 || x >= static_cast<std::ptrdiff_t>(p.width))
                            continue;
                        img[(c * p.height + static_cast<std::size_t>(y)) * p.width
                            + static_cast<std::size_t>(x)]
                            += row[oy * p.out_w + ox];
                    }
                }
            }
}

inline std::size_t conv_out_size(std::size_t in, std::size_t k, const ConvGeometry& g)
{
    const auto span = static_cast<std::ptrdiff_t>(in + 2 * g.padding)
                      - static_cast<std::ptrdiff_t>(k);
    if (g.stride == 0 || span < 0)
        throw ShapeError("kernel of size " + std::to_string(k) + " does not fit padded input "
                         + std::to_string(in + 2 * g.padding));
    return static_cast<std::size_t>(span) / g.stride + 1;
}

} // namespace detail

/// Cross-correlation of x [B,Cin,H,W] with w [Cout,Cin,kh,kw] plus optional
/// bias [Cout]. Output spatial size (H + 2p - kh)/s + 1.
inline Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias = Tensor(),
                     ConvGeometry geo = {})
{
    if (x.rank() != 4 || w.rank() != 4)
        throw ShapeError("conv2d expects 4-d input and weight");
    const std::size_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const std::size_t O = w.dim(0), kh = w.dim(2), kw = w.dim(3);
    if (w.dim(1) != C)
        throw ShapeError("conv2d channel mismatch: input " + to_string(x.shape()) + ", weight "
                         + to_string(w.shape()));
    if (bias.defined() && bias.size() != O)
        throw ShapeError("conv2d bias size mismatch");
    const detail::PatchLayout p{C,  H,  W, kh, kw, geo.stride, geo.padding,
                                detail::conv_out_size(H, kh, geo),
                                detail::conv_out_size(W, kw, geo)};

    const auto eo = static_cast<Eigen::Index>(O), er = static_cast<Eigen::Index>(p.rows()),
               ec = static_cast<Eigen::Index>(p.cols());
    std::vector<double> cols(p.rows() * p.cols());
    std::vector<double> out(B * O * p.cols());
    detail::ConstMatMap Wm(w.data().data(), eo, er);
    for (std::size_t b = 0; b < B; ++b) {
        detail::im2col(x.data().data() + b * C * H * W, p, cols.data());
        detail::MatMap Y(out.data() + b * O * p.cols(), eo, ec);
        Y.noalias() = Wm * detail::ConstMatMap(cols.data(), er, ec);
        if (bias.defined()) {
            Eigen::Map<const Eigen::VectorXd> bv(bias.data().data(), eo);
            Y.colwise() += bv;
        }
    }
    std::vector<Tensor> inputs{x, w};
    if (bias.defined())
        inputs.push_back(bias);
    return detail::make_result(
        "conv2d", Shape{B, O, p.out_h, p.out_w}, std::move(out), inputs,
        [x, w, bias, p, B, eo, er, ec](const detail::Node& self) {
            const auto gx = detail::grad_sink(x);
            const auto gw = detail::grad_sink(w);
            const auto gb = bias.defined() ? detail::grad_sink(bias) : std::span<double>();
            const std::size_t in_size = p.channels * p.height * p.width;
            std::vector<double> cols(p.rows() * p.cols());
            detail::ConstMatMap Wm(w.data().data(), eo, er);
            for (std::size_t b = 0; b < B; ++b) {
                detail::ConstMatMap G(self.grad.data() + b * static_cast<std::size_t>(eo * ec), eo,
                                      ec);
                if (!gw.empty()) {
                    detail::im2col(x.data().data() + b * in_size, p, cols.data());
                    detail::MatMap GW(gw.data(), eo, er);
                    GW.noalias() += G * detail::ConstMatMap(cols.data(), er, ec).transpose();
                }
                if (!gb.empty()) {
                    // plain loop: Eigen's row reduction peels by address alignment
                    for (Eigen::Index o = 0; o < eo; ++o) {
                        double acc = 0.0;
                        for (Eigen::Index c = 0; c < ec; ++c)
                            acc += G(o, c);
                        gb[static_cast<std::size_t>(o)] += acc;
                    }
                }
                if (!gx.empty()) {
                    detail::MatMap DC(cols.data(), er, ec);
                    DC.noalias() = Wm.transpose() * G;
                    detail::col2im(cols.data(), p, gx.data() + b * in_size);
                }
            }
        });
}

/// Transposed convolution of x [B,Cin,H,W] with w [Cin,Cout,kh,kw]; output
/// spatial size (H - 1)s - 2p + kh. It is the adjoint of conv2d with the same
/// weight and geometry.
inline Tensor conv_transpose2d(const Tensor& x, const Tensor& w, const Tensor& bias = Tensor(),
                               ConvGeometry geo = {})
{
    if (x.rank() != 4 || w.rank() != 4)
        throw ShapeError("conv_transpose2d expects 4-d input and weight");
    const std::size_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const std::size_t O = w.dim(1), kh = w.dim(2), kw = w.dim(3);
    if (w.dim(0) != C)
        throw ShapeError("conv_transpose2d channel mismatch: input " + to_string(x.shape())
                         + ", weight " + to_string(w.shape()));
    if (bias.defined() && bias.size() != O)
        throw ShapeError("conv_transpose2d bias size mismatch");
    if (geo.stride == 0)
        throw ShapeError("conv_transpose2d stride must be positive");
    const auto oh = static_cast<std::ptrdiff_t>((H - 1) * geo.stride + kh)
                    - static_cast<std::ptrdiff_t>(2 * geo.padding);
    const auto ow = static_cast<std::ptrdiff_t>((W - 1) * geo.stride + kw)
                    - static_cast<std::ptrdiff_t>(2 * geo.padding);
    if (oh <= 0 || ow <= 0)
        throw ShapeError("conv_transpose2d produces non-positive output size");
    // Layout of the output image seen as the input of the adjoint conv2d.
    const detail::PatchLayout p{O,  static_cast<std::size_t>(oh), static_cast<std::size_t>(ow),
                                kh, kw,                           geo.stride,
                                geo.padding, H,                   W};

    const auto ec_in = static_cast<Eigen::Index>(C), er = static_cast<Eigen::Index>(p.rows()),
               ehw = static_cast<Eigen::Index>(H * W);
    const std::size_t out_size = O * p.height * p.width;
    std::vector<double> cols(p.rows() * p.cols());
    std::vector<double> out(B * out_size, 0.0);
    detail::ConstMatMap Wm(w.data().data(), ec_in, er);
    for (std::size_t b = 0; b < B; ++b) {
        detail::ConstMatMap X(x.data().data() + b * C * H * W, ec_in, ehw);
        detail::MatMap(cols.data(), er, ehw).noalias() = Wm.transpose() * X;
        double* img = out.data() + b * out_size;
        detail::col2im(cols.data(), p, img);
        if (bias.defined()) {
            const auto bv = bias.data();
            for (std::size_t o = 0; o < O; ++o)
                for (std::size_t k = 0; k < p.height * p.width; ++k)
                    img[o * p.height * p.width + k] += bv[o];
        }
    }
    std::vector<Tensor> inputs{x, w};
    if (bias.defined())
        inputs.push_back(bias);
    return detail::make_result(
        "conv_transpose2d", Shape{B, O, p.height, p.width}, std::move(out), inputs,
        [x, w, bias, p, B, C, ec_in, er, ehw, out_size](const detail::Node& self) {
            const auto gx = detail::grad_sink(x);
            const auto gw = detail::grad_sink(w);
            const auto gb = bias.defined() ? detail::grad_sink(bias) : std::span<double>();
            std::vector<double> cols(p.rows() * p.cols());
            detail::ConstMatMap Wm(w.data().data(), ec_in, er);
            const std::size_t hw = p.height * p.width;
            const std::size_t in_size = C * static_cast<std::size_t>(ehw);
            for (std::size_t b = 0; b < B; ++b) {
                const double* g = self.grad.data() + b * out_size;
                detail::im2col(g, p, cols.data());
                detail::ConstMatMap GC(cols.data(), er, ehw);
                if (!gx.empty()) {
                    detail::MatMap GX(gx.data() + b * in_size, ec_in, ehw);
                    GX.noalias() += Wm * GC;
                }
                if (!gw.empty()) {
                    detail::ConstMatMap X(x.data().data() + b * in_size, ec_in, ehw);
                    detail::MatMap GW(gw.data(), ec_in, er);
                    GW.noalias() += X * GC.transpose();
                }
                if (!gb.empty()) {
                    for (std::size_t o = 0; o < p.channels; ++o)
                        for (std::size_t k = 0; k < hw; ++k)
                            gb[o] += g[o * hw + k];
                }
            }
        });
}

namespace detail {

/// Source taps for one output coordinate of half-pixel-centred bilinear
/// resampling (the align_corners=false convention).
struct Taps {
    std::size_t i0, i1;
    double w0, w1;
};

inline std::vector<Taps> bilinear_taps(std::size_t in, std::size_t out)
{
    std::vector<Taps> taps(out);
    const double ratio = static_cast<double>(in) / static_cast<double>(out);
    for (std::size_t o = 0; o < out; ++o) {
        double src = (static_cast<double>(o) + 0.5) * ratio - 0.5;
        if (src < 0.0)
            src = 0.0;
        auto i0 = static_cast<std::size_t>(src);
        if (i0 > in - 1)
            i0 = in - 1;
        const std::size_t i1 = std::min(i0 + 1, in - 1);
        const double frac = src - static_cast<double>(i0);
        taps[o] = {i0, i1, 1.0 - frac, frac};
    }
    return taps;
}

} // namespace detail

/// Bilinear resize of the two trailing axes of x [..., H, W] to out_h x out_w.
inline Tensor bilinear_upsample(const Tensor& x, std::size_t out_h, std::size_t out_w)
{
    if (x.rank() < 2 || out_h == 0 || out_w == 0)
        throw ShapeError("bilinear_upsample needs rank >= 2 and positive output size");
    const std::size_t H = x.dim(-2), W = x.dim(-1);
    const std::size_t planes = x.size() / (H * W);
    const auto ty = detail::bilinear_taps(H, out_h);
    const auto tx = detail::bilinear_taps(W, out_w);
    Shape out_shape = x.shape();
    out_shape[out_shape.size() - 2] = out_h;
    out_shape[out_shape.size() - 1] = out_w;
    std::vector<double> out(planes * out_h * out_w);
    const auto v = x.data();
    for (std::size_t pl = 0; pl < planes; ++pl) {
        const double* src = v.data() + pl * H * W;
        double* dst = out.data() + pl * out_h * out_w;
        for (std::size_t oy = 0; oy < out_h; ++oy) {
            const auto& a = ty[oy];
            for (std::size_t ox = 0; ox < out_w; ++ox) {
                const auto& c = tx[ox];
                dst[oy * out_w + ox] = a.w0 * (c.w0 * src[a.i0 * W + c.i0] + c.w1 * src[a.i0 * W + c.i1])
                                       + a.w1 * (c.w0 * src[a.i1 * W + c.i0] + c.w1 * src[a.i1 * W + c.i1]);
            }
        }
    }
    return detail::make_result(
        "bilinear_upsample", std::move(out_shape), std::move(out), {x},
        [x, ty, tx, planes, H, W, out_h, out_w](const detail::Node& self) {
            const auto gx = detail::grad_sink(x);
            for (std::size_t pl = 0; pl < planes; ++pl) {
                double* dst = gx.data() + pl * H * W;
                const double* g = self.grad.data() + pl * out_h * out_w;
                for (std::size_t oy = 0; oy < out_h; ++oy) {
                    const auto& a = ty[oy];
                    for (std::size_t ox = 0; ox < out_w; ++ox) {
                        const auto& c = tx[ox];
                        const double gv = g[oy * out_w + ox];
                        dst[a.i0 * W + c.i0] += gv * a.w0 * c.w0;
                        dst[a.i0 * W + c.i1] += gv * a.w0 * c.w1;
                        dst[a.i1 * W + c.i0] += gv * a.w1 * c.w0;
                        dst[a.i1 * W + c.i1] += gv * a.w1 * c.w1;
                    }
                }
            }
        });
}

} // namespace xbus
