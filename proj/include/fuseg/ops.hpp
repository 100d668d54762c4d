#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>

#include "fuseg/tensor.hpp"

namespace fuseg {

enum class Padding { same, valid };

namespace detail {

inline int ceil_div(int n, int d) { return n > 0 ? (n + d - 1) / d : -((-n) / d); }
inline int floor_div(int n, int d) { return n >= 0 ? n / d : -((-n + d - 1) / d); }

struct ConvGeom {
    int out_h, out_w, pad_top, pad_left;
};

inline ConvGeom conv_geometry(int in_h, int in_w, int kh, int kw, int stride,
                              int dilation, Padding pad) {
    const int eff_h = (kh - 1) * dilation + 1;
    const int eff_w = (kw - 1) * dilation + 1;
    ConvGeom g{};
    if (pad == Padding::same) {
        g.out_h = (in_h + stride - 1) / stride;
        g.out_w = (in_w + stride - 1) / stride;
        g.pad_top = std::max(0, ((g.out_h - 1) * stride + eff_h - in_h)) / 2;
        g.pad_left = std::max(0, ((g.out_w - 1) * stride + eff_w - in_w)) / 2;
    } else {
        if (in_h < eff_h || in_w < eff_w)
            throw std::invalid_argument("conv2d: input smaller than kernel (valid padding)");
        g.out_h = (in_h - eff_h) / stride + 1;
        g.out_w = (in_w - eff_w) / stride + 1;
        g.pad_top = 0;
        g.pad_left = 0;
    }
    return g;
}

// Output index range [lo, hi] such that i = o*stride + k*dilation - pad stays
// inside [0, in_extent).
inline void conv_bounds(int k, int stride, int dilation, int pad, int in_extent,
                        int out_extent, int& lo, int& hi) {
    lo = std::max(0, ceil_div(pad - k * dilation, stride));
    hi = std::min(out_extent - 1, floor_div(in_extent - 1 + pad - k * dilation, stride));
}

inline void check_conv_args(const Tensor& x, const Tensor& w, const Tensor& b,
                            int stride, int dilation) {
    if (x.ndim() != 3) throw std::invalid_argument("conv2d: input must be [C,H,W]");
    if (w.ndim() != 4) throw std::invalid_argument("conv2d: kernel must be [Cout,Cin,kh,kw]");
    if (w.dim(1) != x.dim(0))
        throw std::invalid_argument("conv2d: kernel Cin " + std::to_string(w.dim(1)) +
                                    " != input channels " + std::to_string(x.dim(0)));
    if (b.numel() != w.dim(0)) throw std::invalid_argument("conv2d: bias size != Cout");
    if (w.dim(2) % 2 == 0 || w.dim(3) % 2 == 0)
        throw std::invalid_argument("conv2d: kernel extents must be odd");
    if (stride < 1 || dilation < 1)
        throw std::invalid_argument("conv2d: stride and dilation must be >= 1");
}

}  // namespace detail

/// Cross-correlation (deep-learning convention, no kernel flip).
inline Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride,
                     int dilation, Padding pad) {
    detail::check_conv_args(x, w, b, stride, dilation);
    const int cin = x.dim(0), in_h = x.dim(1), in_w = x.dim(2);
    const int cout = w.dim(0), kh = w.dim(2), kw = w.dim(3);
    const auto g = detail::conv_geometry(in_h, in_w, kh, kw, stride, dilation, pad);

    Tensor out({cout, g.out_h, g.out_w});
    for (int oc = 0; oc < cout; ++oc) {
        double* o = &out.data[static_cast<std::size_t>(oc) * g.out_h * g.out_w];
        std::fill(o, o + static_cast<std::size_t>(g.out_h) * g.out_w, b.data[oc]);
    }
    for (int ic = 0; ic < cin; ++ic) {
        const double* xin = &x.data[static_cast<std::size_t>(ic) * in_h * in_w];
        for (int oc = 0; oc < cout; ++oc) {
            double* o = &out.data[static_cast<std::size_t>(oc) * g.out_h * g.out_w];
            const double* wk = &w.data[(static_cast<std::size_t>(oc) * cin + ic) * kh * kw];
            for (int ky = 0; ky < kh; ++ky) {
                int oh_lo, oh_hi, ow_lo, ow_hi;
                detail::conv_bounds(ky, stride, dilation, g.pad_top, in_h, g.out_h, oh_lo, oh_hi);
                for (int kx = 0; kx < kw; ++kx) {
                    const double wv = wk[ky * kw + kx];
                    detail::conv_bounds(kx, stride, dilation, g.pad_left, in_w, g.out_w, ow_lo, ow_hi);
                    const int n = ow_hi - ow_lo + 1;
                    if (n <= 0) continue;
                    for (int oh = oh_lo; oh <= oh_hi; ++oh) {
                        const int ih = oh * stride + ky * dilation - g.pad_top;
                        const double* __restrict xr =
                            xin + static_cast<std::size_t>(ih) * in_w +
                            (ow_lo * stride + kx * dilation - g.pad_left);
                        double* __restrict orow = o + static_cast<std::size_t>(oh) * g.out_w + ow_lo;
                        if (stride == 1) {
                            for (int i = 0; i < n; ++i) orow[i] += wv * xr[i];
                        } else {
                            for (int i = 0; i < n; ++i) orow[i] += wv * xr[static_cast<std::size_t>(i) * stride];
                        }
                    }
                }
            }
        }
    }
    return out;
}

/// Accumulates input/kernel/bias gradients for conv2d. Any of gx/gw/gb may be
/// null to skip that gradient; non-null tensors must already have the right
/// shape (gradients are added, not overwritten).
inline void conv2d_backward(const Tensor& x, const Tensor& w, int stride, int dilation,
                            Padding pad, const Tensor& gout, Tensor* gx, Tensor* gw,
                            Tensor* gb) {
    const int cin = x.dim(0), in_h = x.dim(1), in_w = x.dim(2);
    const int cout = w.dim(0), kh = w.dim(2), kw = w.dim(3);
    const auto g = detail::conv_geometry(in_h, in_w, kh, kw, stride, dilation, pad);
    if (gout.dim(0) != cout || gout.dim(1) != g.out_h || gout.dim(2) != g.out_w)
        throw std::invalid_argument("conv2d_backward: upstream gradient shape mismatch");

    if (gb) {
        for (int oc = 0; oc < cout; ++oc) {
            const double* gr = &gout.data[static_cast<std::size_t>(oc) * g.out_h * g.out_w];
            double s = 0.0;
            for (std::int64_t i = 0; i < static_cast<std::int64_t>(g.out_h) * g.out_w; ++i) s += gr[i];
            gb->data[oc] += s;
        }
    }
    for (int ic = 0; ic < cin; ++ic) {
        const double* xin = &x.data[static_cast<std::size_t>(ic) * in_h * in_w];
        double* gxin = gx ? &gx->data[static_cast<std::size_t>(ic) * in_h * in_w] : nullptr;
        for (int oc = 0; oc < cout; ++oc) {
            const double* go = &gout.data[static_cast<std::size_t>(oc) * g.out_h * g.out_w];
            const double* wk = &w.data[(static_cast<std::size_t>(oc) * cin + ic) * kh * kw];
            double* gwk = gw ? &gw->data[(static_cast<std::size_t>(oc) * cin + ic) * kh * kw] : nullptr;
            for (int ky = 0; ky < kh; ++ky) {
                int oh_lo, oh_hi, ow_lo, ow_hi;
                detail::conv_bounds(ky, stride, dilation, g.pad_top, in_h, g.out_h, oh_lo, oh_hi);
                for (int kx = 0; kx < kw; ++kx) {
                    detail::conv_bounds(kx, stride, dilation, g.pad_left, in_w, g.out_w, ow_lo, ow_hi);
                    const int n = ow_hi - ow_lo + 1;
                    if (n <= 0) continue;
                    const double wv = wk[ky * kw + kx];
                    double wgrad = 0.0;
                    for (int oh = oh_lo; oh <= oh_hi; ++oh) {
                        const int ih = oh * stride + ky * dilation - g.pad_top;
                        const std::size_t xoff =
                            static_cast<std::size_t>(ih) * in_w +
                            (ow_lo * stride + kx * dilation - g.pad_left);
                        const double* __restrict grow =
                            go + static_cast<std::size_t>(oh) * g.out_w + ow_lo;
                        if (gxin) {
                            double* __restrict gxr = gxin + xoff;
                            if (stride == 1) {
                                for (int i = 0; i < n; ++i) gxr[i] += wv * grow[i];
                            } else {
                                for (int i = 0; i < n; ++i)
                                    gxr[static_cast<std::size_t>(i) * stride] += wv * grow[i];
                            }
                        }
                        if (gwk) {
                            const double* __restrict xr = xin + xoff;
                            if (stride == 1) {
                                for (int i = 0; i < n; ++i) wgrad += grow[i] * xr[i];
                            } else {
                                for (int i = 0; i < n; ++i)
                                    wgrad += grow[i] * xr[static_cast<std::size_t>(i) * stride];
                            }
                        }
                    }
                    if (gwk) gwk[ky * kw + kx] += wgrad;
                }
            }
        }
    }
}

inline Tensor relu(const Tensor& x) {
    Tensor y = x;
    for (double& v : y.data) v = v > 0.0 ? v : 0.0;
    return y;
}

// Subgradient at 0 is 0: gradient passes only where x > 0.
inline void relu_backward(const Tensor& x, const Tensor& gout, Tensor& gx) {
    for (std::size_t i = 0; i < x.data.size(); ++i)
        if (x.data[i] > 0.0) gx.data[i] += gout.data[i];
}

inline Tensor add(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b))
        throw std::invalid_argument("add: shape mismatch " + a.shape_str() + " vs " + b.shape_str());
    Tensor y = a;
    for (std::size_t i = 0; i < y.data.size(); ++i) y.data[i] += b.data[i];
    return y;
}

inline Tensor concat_channels(const Tensor& a, const Tensor& b) {
    if (a.ndim() != 3 || b.ndim() != 3 || a.dim(1) != b.dim(1) || a.dim(2) != b.dim(2))
        throw std::invalid_argument("concat_channels: spatial mismatch " + a.shape_str() +
                                    " vs " + b.shape_str());
    Tensor y({a.dim(0) + b.dim(0), a.dim(1), a.dim(2)});
    std::copy(a.data.begin(), a.data.end(), y.data.begin());
    std::copy(b.data.begin(), b.data.end(), y.data.begin() + a.data.size());
    return y;
}

/// Align-corners bilinear interpolation. Resizing to the same extents is the
/// identity.
inline Tensor bilinear_resize(const Tensor& x, int out_h, int out_w) {
    if (x.ndim() != 3) throw std::invalid_argument("bilinear_resize: input must be [C,H,W]");
    if (out_h < 1 || out_w < 1) throw std::invalid_argument("bilinear_resize: bad output size");
    const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
    const double sh = out_h > 1 ? static_cast<double>(h - 1) / (out_h - 1) : 0.0;
    const double sw = out_w > 1 ? static_cast<double>(w - 1) / (out_w - 1) : 0.0;
    Tensor y({c, out_h, out_w});
    for (int oy = 0; oy < out_h; ++oy) {
        const double syf = oy * sh;
        const int y0 = static_cast<int>(syf);
        const int y1 = std::min(y0 + 1, h - 1);
        const double fy = syf - y0;
        for (int ox = 0; ox < out_w; ++ox) {
            const double sxf = ox * sw;
            const int x0 = static_cast<int>(sxf);
            const int x1 = std::min(x0 + 1, w - 1);
            const double fx = sxf - x0;
            for (int ch = 0; ch < c; ++ch) {
                const double v = (1 - fy) * ((1 - fx) * x.at(ch, y0, x0) + fx * x.at(ch, y0, x1)) +
                                 fy * ((1 - fx) * x.at(ch, y1, x0) + fx * x.at(ch, y1, x1));
                y.at(ch, oy, ox) = v;
            }
        }
    }
    return y;
}

inline void bilinear_resize_backward(const Tensor& x, const Tensor& gout, Tensor& gx) {
    const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
    const int out_h = gout.dim(1), out_w = gout.dim(2);
    const double sh = out_h > 1 ? static_cast<double>(h - 1) / (out_h - 1) : 0.0;
    const double sw = out_w > 1 ? static_cast<double>(w - 1) / (out_w - 1) : 0.0;
    for (int oy = 0; oy < out_h; ++oy) {
        const double syf = oy * sh;
        const int y0 = static_cast<int>(syf);
        const int y1 = std::min(y0 + 1, h - 1);
        const double fy = syf - y0;
        for (int ox = 0; ox < out_w; ++ox) {
            const double sxf = ox * sw;
            const int x0 = static_cast<int>(sxf);
            const int x1 = std::min(x0 + 1, w - 1);
            const double fx = sxf - x0;
            for (int ch = 0; ch < c; ++ch) {
                const double g = gout.at(ch, oy, ox);
                gx.at(ch, y0, x0) += (1 - fy) * (1 - fx) * g;
                gx.at(ch, y0, x1) += (1 - fy) * fx * g;
                gx.at(ch, y1, x0) += fy * (1 - fx) * g;
                gx.at(ch, y1, x1) += fy * fx * g;
            }
        }
    }
}

namespace detail {

// Align-corners source index, shared by the nearest resizes so that streams
// resized with different filters stay registered with bilinear_resize.
inline int nearest_src(int out_idx, int in_extent, int out_extent) {
    if (out_extent <= 1) return 0;
    const double src = out_idx * static_cast<double>(in_extent - 1) / (out_extent - 1);
    return std::clamp(static_cast<int>(std::lround(src)), 0, in_extent - 1);
}

}  // namespace detail

inline Tensor nearest_resize(const Tensor& t, int out_h, int out_w) {
    if (t.ndim() != 3) throw std::invalid_argument("nearest_resize: input must be [C,H,W]");
    const int c = t.dim(0), h = t.dim(1), w = t.dim(2);
    Tensor out({c, out_h, out_w});
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < out_h; ++y) {
            const int sy = detail::nearest_src(y, h, out_h);
            for (int x = 0; x < out_w; ++x)
                out.at(ch, y, x) = t.at(ch, sy, detail::nearest_src(x, w, out_w));
        }
    return out;
}

inline LabelMap nearest_resize(const LabelMap& m, int out_h, int out_w) {
    LabelMap out(out_h, out_w);
    for (int y = 0; y < out_h; ++y) {
        const int sy = detail::nearest_src(y, m.h, out_h);
        for (int x = 0; x < out_w; ++x)
            out.at(y, x) = m.at(sy, detail::nearest_src(x, m.w, out_w));
    }
    return out;
}

/// Non-overlapping block mean over factor x factor windows.
inline Tensor avg_downsample(const Tensor& x, int factor) {
    if (x.ndim() != 3) throw std::invalid_argument("avg_downsample: input must be [C,H,W]");
    if (factor < 1) throw std::invalid_argument("avg_downsample: factor must be >= 1");
    const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
    if (h % factor != 0 || w % factor != 0)
        throw std::invalid_argument("avg_downsample: extents not divisible by factor");
    const int oh = h / factor, ow = w / factor;
    const double inv = 1.0 / (static_cast<double>(factor) * factor);
    Tensor y({c, oh, ow});
    for (int ch = 0; ch < c; ++ch)
        for (int ry = 0; ry < oh; ++ry)
            for (int rx = 0; rx < ow; ++rx) {
                double s = 0.0;
                for (int dy = 0; dy < factor; ++dy)
                    for (int dx = 0; dx < factor; ++dx)
                        s += x.at(ch, ry * factor + dy, rx * factor + dx);
                y.at(ch, ry, rx) = s * inv;
            }
    return y;
}

inline void avg_downsample_backward(const Tensor& x, int factor, const Tensor& gout,
                                    Tensor& gx) {
    const int c = x.dim(0);
    const int oh = gout.dim(1), ow = gout.dim(2);
    const double inv = 1.0 / (static_cast<double>(factor) * factor);
    for (int ch = 0; ch < c; ++ch)
        for (int ry = 0; ry < oh; ++ry)
            for (int rx = 0; rx < ow; ++rx) {
                const double g = gout.at(ch, ry, rx) * inv;
                for (int dy = 0; dy < factor; ++dy)
                    for (int dx = 0; dx < factor; ++dx)
                        gx.at(ch, ry * factor + dy, rx * factor + dx) += g;
            }
}

struct XentResult {
    double loss = 0.0;
    Tensor grad;  // [C,H,W], zero at ignored pixels
};

/// Mean softmax cross-entropy over non-ignored pixels, stabilized by
/// max-subtraction. grad = (softmax - onehot) / count at non-ignored pixels.
inline XentResult softmax_cross_entropy(const Tensor& logits, const LabelMap& labels,
                                        int ignore_id) {
    if (logits.ndim() != 3) throw std::invalid_argument("xent: logits must be [C,H,W]");
    const int c = logits.dim(0), h = logits.dim(1), w = logits.dim(2);
    if (labels.h != h || labels.w != w)
        throw std::invalid_argument("xent: label map extent mismatch");

    XentResult r;
    r.grad = Tensor(logits.shape);
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    std::int64_t count = 0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const int t = labels.at(y, x);
            if (t == ignore_id) continue;
            if (t >= c)
                throw std::invalid_argument("xent: label " + std::to_string(t) +
                                            " out of range for " + std::to_string(c) + " classes");
            ++count;
        }
    if (count == 0) throw std::invalid_argument("xent: all pixels ignored");
    const double invn = 1.0 / static_cast<double>(count);

    double loss = 0.0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const int t = labels.at(y, x);
            if (t == ignore_id) continue;
            const std::size_t off = static_cast<std::size_t>(y) * w + x;
            double m = logits.data[off];
            for (int ch = 1; ch < c; ++ch)
                m = std::max(m, logits.data[static_cast<std::size_t>(ch) * plane + off]);
            double denom = 0.0;
            for (int ch = 0; ch < c; ++ch)
                denom += std::exp(logits.data[static_cast<std::size_t>(ch) * plane + off] - m);
            const double logden = std::log(denom);
            loss -= (logits.data[static_cast<std::size_t>(t) * plane + off] - m - logden);
            for (int ch = 0; ch < c; ++ch) {
                const double p =
                    std::exp(logits.data[static_cast<std::size_t>(ch) * plane + off] - m - logden);
                r.grad.data[static_cast<std::size_t>(ch) * plane + off] =
                    (p - (ch == t ? 1.0 : 0.0)) * invn;
            }
        }
    r.loss = loss * invn;
    return r;
}

}  // namespace fuseg
