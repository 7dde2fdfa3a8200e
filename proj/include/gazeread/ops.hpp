#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "gazeread/tape.hpp"

// Forward ops + hand-derived reverse rules. Every op here is covered by a
// finite-difference check in the test suite; keep new ops on that list.
namespace gazeread::ops {

using std::int64_t;

// ---------------------------------------------------------------- elementwise

template <class Real>
Var add(Tape<Real>& t, Var a, Var b) {
    const auto& av = t.value(a);
    const auto& bv = t.value(b);
    if (!av.same_shape(bv)) throw ShapeError("add: shape mismatch " + av.shape_str() + " vs " + bv.shape_str());
    Tensor<Real> y = av;
    for (std::size_t i = 0; i < y.data.size(); ++i) y.data[i] += bv.data[i];
    int ai = a.id, bi = b.id;
    return Var{t.emplace(std::move(y), [ai, bi](Tape<Real>& tp, int self) {
        const auto& g = tp.grad_buf(self);
        auto& da = tp.grad_buf(ai);
        auto& db = tp.grad_buf(bi);
        for (std::size_t i = 0; i < g.data.size(); ++i) {
            da.data[i] += g.data[i];
            db.data[i] += g.data[i];
        }
    })};
}

// y[i,j] = x[i,j] + r[j]; broadcast row add (bias / type embedding)
template <class Real>
Var add_row(Tape<Real>& t, Var x, Var r) {
    const auto& xv = t.value(x);
    const auto& rv = t.value(r);
    if (xv.ndim() != 2 || rv.ndim() != 1 || rv.dim(0) != xv.dim(1))
        throw ShapeError("add_row: want [N,D] + [D], got " + xv.shape_str() + " + " + rv.shape_str());
    Tensor<Real> y = xv;
    int64_t n = xv.dim(0), d = xv.dim(1);
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < d; ++j) y.at(i, j) += rv.at(j);
    int xi = x.id, ri = r.id;
    return Var{t.emplace(std::move(y), [xi, ri, n, d](Tape<Real>& tp, int self) {
        const auto& g = tp.grad_buf(self);
        auto& dx = tp.grad_buf(xi);
        auto& dr = tp.grad_buf(ri);
        for (int64_t i = 0; i < n; ++i)
            for (int64_t j = 0; j < d; ++j) {
                dx.at(i, j) += g.at(i, j);
                dr.at(j) += g.at(i, j);
            }
    })};
}

template <class Real>
Var scale(Tape<Real>& t, Var x, Real c) {
    Tensor<Real> y = t.value(x);
    for (auto& v : y.data) v *= c;
    int xi = x.id;
    return Var{t.emplace(std::move(y), [xi, c](Tape<Real>& tp, int self) {
        const auto& g = tp.grad_buf(self);
        auto& dx = tp.grad_buf(xi);
        for (std::size_t i = 0; i < g.data.size(); ++i) dx.data[i] += c * g.data[i];
    })};
}

// exact GELU: x * Phi(x)
template <class Real>
Var gelu(Tape<Real>& t, Var x) {
    const auto& xv = t.value(x);
    Tensor<Real> y = xv;
    for (auto& v : y.data) {
        double z = static_cast<double>(v);
        v = static_cast<Real>(z * 0.5 * (1.0 + std::erf(z / std::numbers::sqrt2)));
    }
    int xi = x.id;
    return Var{t.emplace(std::move(y), [xi](Tape<Real>& tp, int self) {
        const auto& g = tp.grad_buf(self);
        const auto& xv2 = tp.value(xi);
        auto& dx = tp.grad_buf(xi);
        constexpr double inv_sqrt2pi = 0.3989422804014327;
        for (std::size_t i = 0; i < g.data.size(); ++i) {
            double z = static_cast<double>(xv2.data[i]);
            double phi = 0.5 * (1.0 + std::erf(z / std::numbers::sqrt2));
            double d = phi + z * inv_sqrt2pi * std::exp(-0.5 * z * z);
            dx.data[i] += g.data[i] * static_cast<Real>(d);
        }
    })};
}

// ------------------------------------------------------------ shape plumbing

template <class Real>
Var reshape(Tape<Real>& t, Var x, std::vector<int64_t> shape) {
    const auto& xv = t.value(x);
    if (Tensor<Real>::numel_of(shape) != xv.numel()) throw ShapeError("reshape: element count mismatch");
    Tensor<Real> y(shape, xv.data);
    int xi = x.id;
    return Var{t.emplace(std::move(y), [xi](Tape<Real>& tp, int self) {
        const auto& g = tp.grad_buf(self);
        auto& dx = tp.grad_buf(xi);
        for (std::size_t i = 0; i < g.data.size(); ++i) dx.data[i] += g.data[i];
    })};
}

template <class Real>
Var transpose2d(Tape<Real>& t, Var x) {
    const auto& xv = t.value(x);
    if (xv.ndim() != 2) throw ShapeError("transpose2d: want 2-D, got " + xv.shape_str());
    int64_t n = xv.dim(0), m = xv.dim(1);
    Tensor<Real> y({m, n});
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < m; ++j) y.at(j, i) = xv.at(i, j);
    int xi = x.id;
    return Var{t.emplace(std::move(y), [xi, n, m](Tape<Real>& tp, int self) {
        const auto& g = tp.grad_buf(self);
        auto& dx = tp.grad_buf(xi);
        for (int64_t i = 0; i < n; ++i)
            for (int64_t j = 0; j < m; ++j) dx.at(i, j) += g.at(j, i);
    })};
}

template <class Real>
Var slice_rows(Tape<Real>& t, Var x, int64_t lo, int64_t hi) {
    const auto& xv = t.value(x);
    if (xv.ndim() != 2 || lo < 0 || hi > xv.dim(0) || lo >= hi) throw ShapeError("slice_rows: bad range");
    int64_t d = xv.dim(1);
    Tensor<Real> y({hi - lo, d});
    for (int64_t i = lo; i < hi; ++i)
        for (int64_t j = 0; j < d; ++j) y.at(i - lo, j) = xv.at(i, j);
    int xi = x.id;
    return Var{t.emplace(std::move(y), [xi, lo, hi, d](Tape<Real>& tp, int self) {
        const auto& g = tp.grad_buf(self);
        auto& dx = tp.grad_buf(xi);
        for (int64_t i = lo; i < hi; ++i)
            for (int64_t j = 0; j < d; ++j) dx.at(i, j) += g.at(i - lo, j);
    })};
}

template <class Real>
Var slice_cols(Tape<Real>& t, Var x, int64_t lo, int64_t hi) {
    const auto& xv = t.value(x);
    if (xv.ndim() != 2 || lo < 0 || hi > xv.dim(1) || lo >= hi) throw ShapeError("slice_cols: bad range");
    int64_t n = xv.dim(0);
    Tensor<Real> y({n, hi - lo});
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = lo; j < hi; ++j) y.at(i, j - lo) = xv.at(i, j);
    int xi = x.id;
    return Var{t.emplace(std::move(y), [xi, lo, hi, n](Tape<Real>& tp, int self) {
        const auto& g = tp.grad_buf(self);
        auto& dx = tp.grad_buf(xi);
        for (int64_t i = 0; i < n; ++i)
            for (int64_t j = lo; j < hi; ++j) dx.at(i, j) += g.at(i, j - lo);
    })};
}

template <class Real>
Var concat_rows(Tape<Real>& t, const std::vector<Var>& xs) {
    if (xs.empty()) throw ShapeError("concat_rows: empty input");
    int64_t d = t.value(xs[0]).dim(1), n = 0;
    for (Var v : xs) {
        const auto& xv = t.value(v);
        if (xv.ndim() != 2 || xv.dim(1) != d) throw ShapeError("concat_rows: column mismatch");
        n += xv.dim(0);
    }
    Tensor<Real> y({n, d});
    std::vector<int> ids;
    std::vector<int64_t> offs;
    int64_t row = 0;
    for (Var v : xs) {
        const auto& xv = t.value(v);
        ids.push_back(v.id);
        offs.push_back(row);
        for (int64_t i = 0; i < xv.dim(0); ++i)
            for (int64_t j = 0; j < d; ++j) y.at(row + i, j) = xv.at(i, j);
        row += xv.dim(0);
    }
    return Var{t.emplace(std::move(y), [ids, offs, d](Tape<Real>& tp, int self) {
        const auto& g = tp.grad_buf(self);
        for (std::size_t k = 0; k < ids.size(); ++k) {
            auto& dx = tp.grad_buf(ids[k]);
            int64_t rows = dx.dim(0);
            for (int64_t i = 0; i < rows; ++i)
                for (int64_t j = 0; j < d; ++j) dx.at(i, j) += g.at(offs[k] + i, j);
        }
    })};
}

template <class Real>
Var concat_cols(Tape<Real>& t, const std::vector<Var>& xs) {
    if (xs.empty()) throw ShapeError("concat_cols: empty input");
    int64_t n = t.value(xs[0]).dim(0), d = 0;
    for (Var v : xs) {
        const auto& xv = t.value(v);
        if (xv.ndim() != 2 || xv.dim(0) != n) throw ShapeError("concat_cols: row mismatch");
        d += xv.dim(1);
    }
    Tensor<Real> y({n, d});
    std::vector<int> ids;
    std::vector<int64_t> offs;
    int64_t col = 0;
    for (Var v : xs) {
        const auto& xv = t.value(v);
        ids.push_back(v.id);
        offs.push_back(col);
        for (int64_t i = 0; i < n; ++i)
            for (int64_t j = 0; j < xv.dim(1); ++j) y.at(i, col + j) = xv.at(i, j);
        col += xv.dim(1);
    }
    return Var{t.emplace(std::move(y), [ids, offs, n](Tape<Real>& tp, int self) {
        const auto& g = tp.grad_buf(self);
        for (std::size_t k = 0; k < ids.size(); ++k) {
            auto& dx = tp.grad_buf(ids[k]);
            int64_t cols = dx.dim(1);
            for (int64_t i = 0; i < n; ++i)
                for (int64_t j = 0; j < cols; ++j) dx.at(i, j) += g.at(i, offs[k] + j);
        }
    })};
}

// ------------------------------------------------------------ linear algebra

template <class Real>
Var matmul(Tape<Real>& t, Var a, Var b) {
    const auto& av = t.value(a);
    const auto& bv = t.value(b);
    if (av.ndim() != 2 || bv.ndim() != 2 || av.dim(1) != bv.dim(0))
        throw ShapeError("matmul: " + av.shape_str() + " x " + bv.shape_str());
    int64_t m = av.dim(0), k = av.dim(1), n = bv.dim(1);
    Tensor<Real> y({m, n});
    for (int64_t i = 0; i < m; ++i) {
        Real* yi = &y.at(i, 0);
        for (int64_t p = 0; p < k; ++p) {
            Real aip = av.at(i, p);
            const Real* bp = &bv.at(p, 0);
            for (int64_t j = 0; j < n; ++j) yi[j] += aip * bp[j];
        }
    }
    int ai = a.id, bi = b.id;
    return Var{t.emplace(std::move(y), [ai, bi, m, k, n](Tape<Real>& tp, int self) {
        const auto& g = tp.grad_buf(self);
        const auto& av2 = tp.value(ai);
        const auto& bv2 = tp.value(bi);
        auto& da = tp.grad_buf(ai);
        auto& db = tp.grad_buf(bi);
        // da += g . b^T
        for (int64_t i = 0; i < m; ++i)
            for (int64_t p = 0; p < k; ++p) {
                Real acc = 0;
                const Real* gi = &g.at(i, 0);
                const Real* bp = &bv2.at(p, 0);
                for (int64_t j = 0; j < n; ++j) acc += gi[j] * bp[j];
                da.at(i, p) += acc;
            }
        // db += a^T . g
        for (int64_t p = 0; p < k; ++p) {
            Real* dbp = &db.at(p, 0);
            for (int64_t i = 0; i < m; ++i) {
                Real aip = av2.at(i, p);
                const Real* gi = &g.at(i, 0);
                for (int64_t j = 0; j < n; ++j) dbp[j] += aip * gi[j];
            }
        }
    })};
}

// y = x.w + b with x:[N,in], w:[in,out], b:[out]
template <class Real>
Var linear(Tape<Real>& t, Var x, Var w, Var b) {
    const auto& xv = t.value(x);
    const auto& wv = t.value(w);
    const auto& bv = t.value(b);
    if (xv.ndim() != 2 || wv.ndim() != 2 || xv.dim(1) != wv.dim(0))
        throw ShapeError("linear: " + xv.shape_str() + " x " + wv.shape_str());
    if (bv.ndim() != 1 || bv.dim(0) != wv.dim(1)) throw ShapeError("linear: bias " + bv.shape_str());
    Var xw = matmul(t, x, w);
    return add_row(t, xw, b);
}

// ---------------------------------------------------------------- convolution

inline int64_t conv_out_len(int64_t len, int64_t kernel, int64_t stride, int64_t pad) {
    if (kernel > len + 2 * pad) throw ShapeError("conv: kernel larger than padded input");
    if (stride < 1) throw ShapeError("conv: stride must be >= 1");
    return (len + 2 * pad - kernel) / stride + 1;
}

namespace detail {

template <class Real>
Tensor<Real> pad1d(const Tensor<Real>& x, int64_t pad) {
    int64_t c = x.dim(0), l = x.dim(1);
    Tensor<Real> p({c, l + 2 * pad});
    for (int64_t ci = 0; ci < c; ++ci)
        for (int64_t i = 0; i < l; ++i) p.at(ci, i + pad) = x.at(ci, i);
    return p;
}

template <class Real>
Tensor<Real> pad2d(const Tensor<Real>& x, int64_t pad) {
    int64_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
    Tensor<Real> p({c, h + 2 * pad, w + 2 * pad});
    for (int64_t ci = 0; ci < c; ++ci)
        for (int64_t y = 0; y < h; ++y)
            for (int64_t xx = 0; xx < w; ++xx) p.at(ci, y + pad, xx + pad) = x.at(ci, y, xx);
    return p;
}

} // namespace detail

// x:[Cin,L], k:[Cout,Cin,K], b:[Cout] -> y:[Cout,L']; cross-correlation with
// symmetric zero padding
template <class Real>
Var conv1d(Tape<Real>& t, Var x, Var k, Var b, int64_t stride, int64_t pad) {
    const auto& xv = t.value(x);
    const auto& kv = t.value(k);
    const auto& bv = t.value(b);
    if (xv.ndim() != 2 || kv.ndim() != 3) throw ShapeError("conv1d: want x[Cin,L], k[Cout,Cin,K]");
    if (kv.dim(1) != xv.dim(0)) throw ShapeError("conv1d: channel mismatch");
    if (bv.ndim() != 1 || bv.dim(0) != kv.dim(0)) throw ShapeError("conv1d: bias shape");
    int64_t cin = xv.dim(0), l = xv.dim(1), cout = kv.dim(0), kk = kv.dim(2);
    int64_t lo = conv_out_len(l, kk, stride, pad);

    Tensor<Real> xp = detail::pad1d(xv, pad);
    Tensor<Real> y({cout, lo});
    for (int64_t co = 0; co < cout; ++co) {
        for (int64_t o = 0; o < lo; ++o) y.at(co, o) = bv.at(co);
        for (int64_t ci = 0; ci < cin; ++ci) {
            const Real* kp = &kv.at(co, ci, 0);
            for (int64_t o = 0; o < lo; ++o) {
                const Real* xi = &xp.at(ci, o * stride);
                Real acc = 0;
                for (int64_t j = 0; j < kk; ++j) acc += kp[j] * xi[j];
                y.at(co, o) += acc;
            }
        }
    }
    int xid = x.id, kid = k.id, bid = b.id;
    return Var{t.emplace(std::move(y), [=](Tape<Real>& tp, int self) {
        const auto& g = tp.grad_buf(self);
        const auto& xv2 = tp.value(xid);
        const auto& kv2 = tp.value(kid);
        auto& dx = tp.grad_buf(xid);
        auto& dk = tp.grad_buf(kid);
        auto& db = tp.grad_buf(bid);
        Tensor<Real> xp2 = detail::pad1d(xv2, pad);
        Tensor<Real> dxp({cin, l + 2 * pad});
        for (int64_t co = 0; co < cout; ++co) {
            for (int64_t o = 0; o < lo; ++o) db.at(co) += g.at(co, o);
            for (int64_t ci = 0; ci < cin; ++ci) {
                Real* dkp = &dk.at(co, ci, 0);
                const Real* kp = &kv2.at(co, ci, 0);
                for (int64_t o = 0; o < lo; ++o) {
                    Real go = g.at(co, o);
                    const Real* xi = &xp2.at(ci, o * stride);
                    Real* dxi = &dxp.at(ci, o * stride);
                    for (int64_t j = 0; j < kk; ++j) {
                        dkp[j] += go * xi[j];
                        dxi[j] += go * kp[j];
                    }
                }
            }
        }
        for (int64_t ci = 0; ci < cin; ++ci)
            for (int64_t i = 0; i < l; ++i) dx.at(ci, i) += dxp.at(ci, i + pad);
    })};
}

// x:[Cin,H,W], k:[Cout,Cin,K,K], b:[Cout] -> y:[Cout,H',W']
template <class Real>
Var conv2d(Tape<Real>& t, Var x, Var k, Var b, int64_t stride, int64_t pad) {
    const auto& xv = t.value(x);
    const auto& kv = t.value(k);
    const auto& bv = t.value(b);
    if (xv.ndim() != 3 || kv.ndim() != 4) throw ShapeError("conv2d: want x[Cin,H,W], k[Cout,Cin,K,K]");
    if (kv.dim(1) != xv.dim(0)) throw ShapeError("conv2d: channel mismatch");
    if (kv.dim(2) != kv.dim(3)) throw ShapeError("conv2d: kernel must be square");
    if (bv.ndim() != 1 || bv.dim(0) != kv.dim(0)) throw ShapeError("conv2d: bias shape");
    int64_t cin = xv.dim(0), h = xv.dim(1), w = xv.dim(2);
    int64_t cout = kv.dim(0), kk = kv.dim(2);
    int64_t ho = conv_out_len(h, kk, stride, pad);
    int64_t wo = conv_out_len(w, kk, stride, pad);

    Tensor<Real> xp = detail::pad2d(xv, pad);
    int64_t wp = w + 2 * pad;
    Tensor<Real> y({cout, ho, wo});
    for (int64_t co = 0; co < cout; ++co) {
        for (int64_t oy = 0; oy < ho; ++oy)
            for (int64_t ox = 0; ox < wo; ++ox) y.at(co, oy, ox) = bv.at(co);
        for (int64_t ci = 0; ci < cin; ++ci) {
            for (int64_t oy = 0; oy < ho; ++oy) {
                for (int64_t ox = 0; ox < wo; ++ox) {
                    Real acc = 0;
                    for (int64_t ky = 0; ky < kk; ++ky) {
                        const Real* xi = &xp.at(ci, oy * stride + ky, ox * stride);
                        const Real* kp = &kv.at(co, ci, ky, 0);
                        for (int64_t kx = 0; kx < kk; ++kx) acc += kp[kx] * xi[kx];
                    }
                    y.at(co, oy, ox) += acc;
                }
            }
        }
    }
    int xid = x.id, kid = k.id, bid = b.id;
    return Var{t.emplace(std::move(y), [=](Tape<Real>& tp, int self) {
        const auto& g = tp.grad_buf(self);
        const auto& xv2 = tp.value(xid);
        const auto& kv2 = tp.value(kid);
        auto& dx = tp.grad_buf(xid);
        auto& dk = tp.grad_buf(kid);
        auto& db = tp.grad_buf(bid);
        Tensor<Real> xp2 = detail::pad2d(xv2, pad);
        Tensor<Real> dxp({cin, h + 2 * pad, wp});
        for (int64_t co = 0; co < cout; ++co) {
            for (int64_t oy = 0; oy < ho; ++oy)
                for (int64_t ox = 0; ox < wo; ++ox) db.at(co) += g.at(co, oy, ox);
            for (int64_t ci = 0; ci < cin; ++ci) {
                for (int64_t oy = 0; oy < ho; ++oy) {
                    for (int64_t ox = 0; ox < wo; ++ox) {
                        Real go = g.at(co, oy, ox);
                        for (int64_t ky = 0; ky < kk; ++ky) {
                            const Real* xi = &xp2.at(ci, oy * stride + ky, ox * stride);
                            Real* dxi = &dxp.at(ci, oy * stride + ky, ox * stride);
                            Real* dkp = &dk.at(co, ci, ky, 0);
                            const Real* kp = &kv2.at(co, ci, ky, 0);
                            for (int64_t kx = 0; kx < kk; ++kx) {
                                dkp[kx] += go * xi[kx];
                                dxi[kx] += go * kp[kx];
                            }
                        }
                    }
                }
            }
        }
        for (int64_t ci = 0; ci < cin; ++ci)
            for (int64_t yy = 0; yy < h; ++yy)
                for (int64_t xx = 0; xx < w; ++xx) dx.at(ci, yy, xx) += dxp.at(ci, yy + pad, xx + pad);
    })};
}

// ------------------------------------------------------------- normalization

// per-row zero mean / unit variance before the affine
template <class Real>
Var layer_norm(Tape<Real>& t, Var x, Var gamma, Var beta, Real eps) {
    const auto& xv = t.value(x);
    const auto& gv = t.value(gamma);
    const auto& bv = t.value(beta);
    if (xv.ndim() != 2) throw ShapeError("layer_norm: want [N,D]");
    int64_t n = xv.dim(0), d = xv.dim(1);
    if (gv.ndim() != 1 || gv.dim(0) != d || bv.ndim() != 1 || bv.dim(0) != d)
        throw ShapeError("layer_norm: affine shape");
    Tensor<Real> y({n, d});
    Tensor<Real> xhat({n, d});
    Tensor<Real> inv_std({n});
    for (int64_t i = 0; i < n; ++i) {
        Real mu = 0;
        for (int64_t j = 0; j < d; ++j) mu += xv.at(i, j);
        mu /= static_cast<Real>(d);
        Real var = 0;
        for (int64_t j = 0; j < d; ++j) {
            Real c = xv.at(i, j) - mu;
            var += c * c;
        }
        var /= static_cast<Real>(d);
        Real s = Real(1) / std::sqrt(var + eps);
        inv_std.at(i) = s;
        for (int64_t j = 0; j < d; ++j) {
            Real xh = (xv.at(i, j) - mu) * s;
            xhat.at(i, j) = xh;
            y.at(i, j) = gv.at(j) * xh + bv.at(j);
        }
    }
    int xi = x.id, gi = gamma.id, bi = beta.id;
    return Var{t.emplace(std::move(y), [xi, gi, bi, n, d, xhat, inv_std](Tape<Real>& tp, int self) {
        const auto& g = tp.grad_buf(self);
        const auto& gv2 = tp.value(gi);
        auto& dx = tp.grad_buf(xi);
        auto& dgamma = tp.grad_buf(gi);
        auto& dbeta = tp.grad_buf(bi);
        for (int64_t i = 0; i < n; ++i) {
            Real sum_dxh = 0, sum_dxh_xh = 0;
            for (int64_t j = 0; j < d; ++j) {
                Real go = g.at(i, j);
                Real xh = xhat.at(i, j);
                dgamma.at(j) += go * xh;
                dbeta.at(j) += go;
                Real dxh = go * gv2.at(j);
                sum_dxh += dxh;
                sum_dxh_xh += dxh * xh;
            }
            Real s = inv_std.at(i);
            Real inv_d = Real(1) / static_cast<Real>(d);
            for (int64_t j = 0; j < d; ++j) {
                Real dxh = g.at(i, j) * gv2.at(j);
                dx.at(i, j) += s * (dxh - inv_d * sum_dxh - xhat.at(i, j) * inv_d * sum_dxh_xh);
            }
        }
    })};
}

// ------------------------------------------------------------------ softmax

// row-wise stable softmax
template <class Real>
Var softmax_rows(Tape<Real>& t, Var x) {
    const auto& xv = t.value(x);
    if (xv.ndim() != 2) throw ShapeError("softmax_rows: want 2-D");
    int64_t n = xv.dim(0), d = xv.dim(1);
    Tensor<Real> y({n, d});
    for (int64_t i = 0; i < n; ++i) {
        Real m = xv.at(i, 0);
        for (int64_t j = 1; j < d; ++j) m = std::max(m, xv.at(i, j));
        Real z = 0;
        for (int64_t j = 0; j < d; ++j) {
            Real e = std::exp(xv.at(i, j) - m);
            y.at(i, j) = e;
            z += e;
        }
        for (int64_t j = 0; j < d; ++j) y.at(i, j) /= z;
    }
    int xi = x.id;
    return Var{t.emplace(std::move(y), [xi, n, d](Tape<Real>& tp, int self) {
        const auto& g = tp.grad_buf(self);
        const auto& yv = tp.value(self);
        auto& dx = tp.grad_buf(xi);
        for (int64_t i = 0; i < n; ++i) {
            Real dot = 0;
            for (int64_t j = 0; j < d; ++j) dot += g.at(i, j) * yv.at(i, j);
            for (int64_t j = 0; j < d; ++j) dx.at(i, j) += yv.at(i, j) * (g.at(i, j) - dot);
        }
    })};
}

// loss = -log softmax(logits)[label]; logits [k] or [1,k]; max-subtraction
// keeps exp() bounded
template <class Real>
Var softmax_cross_entropy(Tape<Real>& t, Var logits, int64_t label) {
    const auto& xv = t.value(logits);
    if (xv.ndim() > 2 || (xv.ndim() == 2 && xv.dim(0) != 1))
        throw ShapeError("softmax_cross_entropy: want [k] or [1,k]");
    int64_t k = xv.numel();
    if (label < 0 || label >= k) throw DataError("softmax_cross_entropy: label out of range");
    Real m = xv.data[0];
    for (int64_t j = 1; j < k; ++j) m = std::max(m, xv.data[static_cast<std::size_t>(j)]);
    Real z = 0;
    for (int64_t j = 0; j < k; ++j) z += std::exp(xv.data[static_cast<std::size_t>(j)] - m);
    Real loss = std::log(z) + m - xv.data[static_cast<std::size_t>(label)];
    int xi = logits.id;
    return Var{t.emplace(Tensor<Real>({1}, {loss}), [xi, label, k, m, z](Tape<Real>& tp, int self) {
        Real go = tp.grad_buf(self).data[0];
        const auto& xv2 = tp.value(xi);
        auto& dx = tp.grad_buf(xi);
        for (int64_t j = 0; j < k; ++j) {
            Real p = std::exp(xv2.data[static_cast<std::size_t>(j)] - m) / z;
            dx.data[static_cast<std::size_t>(j)] += go * (p - (j == label ? Real(1) : Real(0)));
        }
    })};
}

// ---------------------------------------------------------------- attention

template <class Real>
struct AttentionParams {
    Var wq, bq, wk, bk, wv, bv, wo, bo;
};

// standard scaled dot-product attention over all tokens, full bidirectional;
// composed from checked primitives so each piece carries its own gradient
template <class Real>
Var multi_head_attention(Tape<Real>& t, Var x, int n_heads, const AttentionParams<Real>& p) {
    const auto& xv = t.value(x);
    if (xv.ndim() != 2) throw ShapeError("attention: want [N,D]");
    int64_t d = xv.dim(1);
    if (n_heads < 1 || d % n_heads != 0) throw ConfigError("attention: D must be divisible by n_heads");
    int64_t hd = d / n_heads;
    Var q = linear(t, x, p.wq, p.bq);
    Var k = linear(t, x, p.wk, p.bk);
    Var v = linear(t, x, p.wv, p.bv);
    Real inv_sqrt_hd = Real(1) / std::sqrt(static_cast<Real>(hd));
    std::vector<Var> heads;
    heads.reserve(static_cast<std::size_t>(n_heads));
    for (int h = 0; h < n_heads; ++h) {
        int64_t lo = h * hd, hi = lo + hd;
        Var qh = slice_cols(t, q, lo, hi);
        Var kh = slice_cols(t, k, lo, hi);
        Var vh = slice_cols(t, v, lo, hi);
        Var scores = scale(t, matmul(t, qh, transpose2d(t, kh)), inv_sqrt_hd);
        Var attn = softmax_rows(t, scores);
        heads.push_back(matmul(t, attn, vh));
    }
    Var cat = heads.size() == 1 ? heads[0] : concat_cols(t, heads);
    return linear(t, cat, p.wo, p.bo);
}

} // namespace gazeread::ops
