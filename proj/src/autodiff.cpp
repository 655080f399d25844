#include "pndr/autodiff.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

#include "pndr/compose.hpp"

namespace pndr::ad {

std::size_t shape_size(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int d : shape) {
        if (d < 0) throw InvalidArgument("negative tensor dimension");
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

template <class T>
Tensor<T>::Tensor(std::vector<int> s, T fill) : shape(std::move(s)), data(shape_size(shape), fill) {}

template <class T>
Tensor<T>::Tensor(std::vector<int> s, Buffer<T> values) : shape(std::move(s)), data(std::move(values)) {
    if (data.size() != shape_size(shape)) throw InvalidArgument("tensor data does not match its shape");
}

// ---------------------------------------------------------------------------
// Tape

template <class T>
Var Tape<T>::constant(Tensor<T> value) {
    nodes_.push_back({std::move(value), {}, false, {}});
    return {static_cast<int>(nodes_.size() - 1)};
}

template <class T>
Var Tape<T>::parameter(Tensor<T> value) {
    nodes_.push_back({std::move(value), {}, true, {}});
    return {static_cast<int>(nodes_.size() - 1)};
}

template <class T>
Var Tape<T>::record(Tensor<T> value, std::span<const Var> inputs, Backward fn) {
    bool needs = false;
    for (Var v : inputs) needs = needs || requires_grad(v);
    nodes_.push_back({std::move(value), {}, needs, needs ? std::move(fn) : Backward{}});
    return {static_cast<int>(nodes_.size() - 1)};
}

template <class T>
Var Tape<T>::record(Tensor<T> value, std::initializer_list<Var> inputs, Backward fn) {
    return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()), std::move(fn));
}

template <class T>
Tensor<T> Tape<T>::grad(Var v) const {
    const Node& n = nodes_.at(v.id);
    if (n.grad.data.empty()) return Tensor<T>(n.value.shape);
    return n.grad;
}

template <class T>
Tensor<T>& Tape<T>::grad_accumulator(Var v) {
    Node& n = nodes_.at(v.id);
    if (n.grad.data.empty()) n.grad = Tensor<T>(n.value.shape);
    return n.grad;
}

template <class T>
void Tape<T>::backward(Var root) {
    if (nodes_.at(root.id).value.size() != 1) throw InvalidArgument("backward() needs a scalar root");
    for (Node& n : nodes_) n.grad = {};
    grad_accumulator(root).data[0] = T(1);
    for (int i = root.id; i >= 0; --i) {
        Node& n = nodes_[i];
        if (n.backward && !n.grad.data.empty()) n.backward(*this, n.grad);
    }
}

namespace {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MatMap = Eigen::Map<RowMat<T>>;
template <class T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

template <class T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
    if (a.shape != b.shape) throw InvalidArgument(std::string(op) + ": shape mismatch");
}

template <class T, class F, class D>
Var unary(Tape<T>& tape, Var a, F f, D df) {
    const Tensor<T>& x = tape.value(a);
    Tensor<T> out(x.shape);
    for (std::size_t i = 0; i < x.size(); ++i) out.data[i] = f(x.data[i]);
    return tape.record(std::move(out), {a}, [a, df](Tape<T>& t, const Tensor<T>& g) {
        const Tensor<T>& x = t.value(a);
        auto& ga = t.grad_accumulator(a).data;
        for (std::size_t i = 0; i < x.size(); ++i) ga[i] += g.data[i] * df(x.data[i]);
    });
}

template <class T>
T softplus_value(T x) {
    return std::max(x, T(0)) + std::log1p(std::exp(-std::abs(x)));
}

template <class T>
T sigmoid_value(T x) {
    if (x >= 0) return T(1) / (T(1) + std::exp(-x));
    const T e = std::exp(x);
    return e / (T(1) + e);
}

}  // namespace

// ---------------------------------------------------------------------------
// Elementwise

template <class T>
Var add(Tape<T>& tape, Var a, Var b) {
    const auto& x = tape.value(a);
    const auto& y = tape.value(b);
    require_same_shape(x, y, "add");
    Tensor<T> out(x.shape);
    for (std::size_t i = 0; i < x.size(); ++i) out.data[i] = x.data[i] + y.data[i];
    return tape.record(std::move(out), {a, b}, [a, b](Tape<T>& t, const Tensor<T>& g) {
        for (Var v : {a, b}) {
            if (!t.requires_grad(v)) continue;
            auto& gv = t.grad_accumulator(v).data;
            for (std::size_t i = 0; i < gv.size(); ++i) gv[i] += g.data[i];
        }
    });
}

template <class T>
Var sub(Tape<T>& tape, Var a, Var b) {
    const auto& x = tape.value(a);
    const auto& y = tape.value(b);
    require_same_shape(x, y, "sub");
    Tensor<T> out(x.shape);
    for (std::size_t i = 0; i < x.size(); ++i) out.data[i] = x.data[i] - y.data[i];
    return tape.record(std::move(out), {a, b}, [a, b](Tape<T>& t, const Tensor<T>& g) {
        if (t.requires_grad(a)) {
            auto& ga = t.grad_accumulator(a).data;
            for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g.data[i];
        }
        if (t.requires_grad(b)) {
            auto& gb = t.grad_accumulator(b).data;
            for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= g.data[i];
        }
    });
}

template <class T>
Var mul(Tape<T>& tape, Var a, Var b) {
    const auto& x = tape.value(a);
    const auto& y = tape.value(b);
    require_same_shape(x, y, "mul");
    Tensor<T> out(x.shape);
    for (std::size_t i = 0; i < x.size(); ++i) out.data[i] = x.data[i] * y.data[i];
    return tape.record(std::move(out), {a, b}, [a, b](Tape<T>& t, const Tensor<T>& g) {
        const auto& x = t.value(a).data;
        const auto& y = t.value(b).data;
        if (t.requires_grad(a)) {
            auto& ga = t.grad_accumulator(a).data;
            for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g.data[i] * y[i];
        }
        if (t.requires_grad(b)) {
            auto& gb = t.grad_accumulator(b).data;
            for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g.data[i] * x[i];
        }
    });
}

template <class T>
Var scale(Tape<T>& tape, Var a, T s) {
    return unary(tape, a, [s](T x) { return x * s; }, [s](T) { return s; });
}

template <class T>
Var relu(Tape<T>& tape, Var a) {
    return unary(tape, a, [](T x) { return x > 0 ? x : T(0); }, [](T x) { return x > 0 ? T(1) : T(0); });
}

template <class T>
Var softplus(Tape<T>& tape, Var a) {
    return unary(tape, a, [](T x) { return softplus_value(x); }, [](T x) { return sigmoid_value(x); });
}

template <class T>
Var sigmoid(Tape<T>& tape, Var a) {
    return unary(tape, a, [](T x) { return sigmoid_value(x); },
                 [](T x) {
                     const T s = sigmoid_value(x);
                     return s * (T(1) - s);
                 });
}

template <class T>
Var sine(Tape<T>& tape, Var a, T omega) {
    return unary(tape, a, [omega](T x) { return std::sin(omega * x); },
                 [omega](T x) { return omega * std::cos(omega * x); });
}

template <class T>
Var tone_map(Tape<T>& tape, Var a) {
    return unary(tape, a, [](T x) { return static_cast<T>(tone_curve(x)); },
                 [](T x) { return static_cast<T>(tone_curve_derivative(x)); });
}

template <class T>
Var sum(Tape<T>& tape, Var a) {
    const auto& x = tape.value(a);
    T s = 0;
    for (T v : x.data) s += v;
    return tape.record(Tensor<T>::scalar(s), {a}, [a](Tape<T>& t, const Tensor<T>& g) {
        for (auto& v : t.grad_accumulator(a).data) v += g.data[0];
    });
}

// ---------------------------------------------------------------------------
// Layout

template <class T>
Var concat(Tape<T>& tape, std::span<const Var> parts) {
    if (parts.empty()) throw InvalidArgument("concat: no inputs");
    std::vector<int> shape = tape.value(parts[0]).shape;
    if (shape.empty()) throw InvalidArgument("concat: rank-0 input");
    const std::vector<int> tail(shape.begin() + 1, shape.end());
    int rows = 0;
    for (Var v : parts) {
        const auto& s = tape.value(v).shape;
        if (s.size() != shape.size() || !std::equal(tail.begin(), tail.end(), s.begin() + 1)) {
            throw InvalidArgument("concat: trailing dimensions differ");
        }
        rows += s[0];
    }
    shape[0] = rows;
    Tensor<T> out(shape);
    std::size_t offset = 0;
    for (Var v : parts) {
        const auto& d = tape.value(v).data;
        std::copy(d.begin(), d.end(), out.data.begin() + static_cast<std::ptrdiff_t>(offset));
        offset += d.size();
    }
    std::vector<Var> inputs(parts.begin(), parts.end());
    return tape.record(std::move(out), parts, [inputs](Tape<T>& t, const Tensor<T>& g) {
        std::size_t off = 0;
        for (Var v : inputs) {
            const std::size_t n = t.value(v).size();
            if (t.requires_grad(v)) {
                auto& gv = t.grad_accumulator(v).data;
                for (std::size_t i = 0; i < n; ++i) gv[i] += g.data[off + i];
            }
            off += n;
        }
    });
}

template <class T>
Var slice(Tape<T>& tape, Var a, int begin, int count) {
    const auto& x = tape.value(a);
    if (x.shape.empty() || begin < 0 || count < 0 || begin + count > x.shape[0]) {
        throw InvalidArgument("slice: range out of bounds");
    }
    const std::size_t stride = x.size() / static_cast<std::size_t>(x.shape[0]);
    std::vector<int> shape = x.shape;
    shape[0] = count;
    Tensor<T> out(shape);
    const std::size_t off = static_cast<std::size_t>(begin) * stride;
    std::copy(x.data.begin() + static_cast<std::ptrdiff_t>(off),
              x.data.begin() + static_cast<std::ptrdiff_t>(off + out.size()), out.data.begin());
    return tape.record(std::move(out), {a}, [a, off](Tape<T>& t, const Tensor<T>& g) {
        auto& ga = t.grad_accumulator(a).data;
        for (std::size_t i = 0; i < g.size(); ++i) ga[off + i] += g.data[i];
    });
}

template <class T>
Var reshape(Tape<T>& tape, Var a, std::vector<int> shape) {
    const auto& x = tape.value(a);
    if (shape_size(shape) != x.size()) throw InvalidArgument("reshape: element count differs");
    Tensor<T> out(std::move(shape), x.data);
    return tape.record(std::move(out), {a}, [a](Tape<T>& t, const Tensor<T>& g) {
        auto& ga = t.grad_accumulator(a).data;
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g.data[i];
    });
}

template <class T>
Var broadcast_channels(Tape<T>& tape, Var a, int channels) {
    const auto& x = tape.value(a);
    if (x.rank() != 3 || x.shape[0] != 1) throw InvalidArgument("broadcast_channels: expected [1,H,W]");
    Tensor<T> out({channels, x.shape[1], x.shape[2]});
    const std::size_t plane = x.size();
    for (int c = 0; c < channels; ++c) std::copy(x.data.begin(), x.data.end(), out.data.begin() + c * plane);
    return tape.record(std::move(out), {a}, [a, channels, plane](Tape<T>& t, const Tensor<T>& g) {
        auto& ga = t.grad_accumulator(a).data;
        for (int c = 0; c < channels; ++c) {
            for (std::size_t i = 0; i < plane; ++i) ga[i] += g.data[c * plane + i];
        }
    });
}

// ---------------------------------------------------------------------------
// Convolution

namespace {

template <class T>
void im2col(const T* x, int channels, int h, int w, int k, T* col) {
    const int pad = k / 2;
    const std::size_t hw = static_cast<std::size_t>(h) * w;
    for (int c = 0; c < channels; ++c) {
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                T* dst = col + (static_cast<std::size_t>(c * k + ky) * k + kx) * hw;
                const int dy = ky - pad, dx = kx - pad;
                for (int y = 0; y < h; ++y) {
                    T* drow = dst + static_cast<std::size_t>(y) * w;
                    const int sy = y + dy;
                    if (sy < 0 || sy >= h) {
                        std::fill(drow, drow + w, T(0));
                        continue;
                    }
                    const T* srow = x + (static_cast<std::size_t>(c) * h + sy) * w;
                    const int x0 = std::max(0, -dx), x1 = std::min(w, w - dx);
                    std::fill(drow, drow + x0, T(0));
                    std::copy(srow + x0 + dx, srow + x1 + dx, drow + x0);
                    std::fill(drow + x1, drow + w, T(0));
                }
            }
        }
    }
}

template <class T>
void col2im_add(const T* col, int channels, int h, int w, int k, T* x) {
    const int pad = k / 2;
    const std::size_t hw = static_cast<std::size_t>(h) * w;
    for (int c = 0; c < channels; ++c) {
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                const T* src = col + (static_cast<std::size_t>(c * k + ky) * k + kx) * hw;
                const int dy = ky - pad, dx = kx - pad;
                for (int y = 0; y < h; ++y) {
                    const int sy = y + dy;
                    if (sy < 0 || sy >= h) continue;
                    const T* crow = src + static_cast<std::size_t>(y) * w;
                    T* xrow = x + (static_cast<std::size_t>(c) * h + sy) * w;
                    const int x0 = std::max(0, -dx), x1 = std::min(w, w - dx);
                    for (int xx = x0; xx < x1; ++xx) xrow[xx + dx] += crow[xx];
                }
            }
        }
    }
}

}  // namespace

template <class T>
Var conv2d(Tape<T>& tape, Var xv, Var wv, Var bv) {
    const auto& x = tape.value(xv);
    const auto& w = tape.value(wv);
    const auto& b = tape.value(bv);
    if (x.rank() != 3 || w.rank() != 4 || b.rank() != 1) throw InvalidArgument("conv2d: bad ranks");
    const int ci = x.shape[0], h = x.shape[1], wd = x.shape[2];
    const int co = w.shape[0], k = w.shape[2];
    if (w.shape[1] != ci || w.shape[3] != k || k % 2 != 1 || b.shape[0] != co) {
        throw InvalidArgument("conv2d: weight shape does not match input");
    }
    const int kk = ci * k * k;
    const int hw = h * wd;
    auto col = std::make_shared<Buffer<T>>(static_cast<std::size_t>(kk) * hw);
    im2col(x.data.data(), ci, h, wd, k, col->data());

    Tensor<T> out({co, h, wd});
    MatMap<T> o(out.data.data(), co, hw);
    ConstMatMap<T> wm(w.data.data(), co, kk);
    ConstMatMap<T> cm(col->data(), kk, hw);
    o.noalias() = wm * cm;
    for (int c = 0; c < co; ++c) o.row(c).array() += b.data[c];

    if (!(tape.requires_grad(xv) || tape.requires_grad(wv) || tape.requires_grad(bv))) {
        return tape.constant(std::move(out));
    }
    return tape.record(std::move(out), {xv, wv, bv},
                       [xv, wv, bv, col, ci, h, wd, co, k, kk, hw](Tape<T>& t, const Tensor<T>& g) {
                           ConstMatMap<T> gm(g.data.data(), co, hw);
                           if (t.requires_grad(wv)) {
                               MatMap<T> gw(t.grad_accumulator(wv).data.data(), co, kk);
                               ConstMatMap<T> cm(col->data(), kk, hw);
                               gw.noalias() += gm * cm.transpose();
                           }
                           if (t.requires_grad(bv)) {
                               auto& gb = t.grad_accumulator(bv).data;
                               for (int c = 0; c < co; ++c) gb[c] += gm.row(c).sum();
                           }
                           if (t.requires_grad(xv)) {
                               ConstMatMap<T> wm(t.value(wv).data.data(), co, kk);
                               RowMat<T> dcol = wm.transpose() * gm;
                               col2im_add(dcol.data(), ci, h, wd, k, t.grad_accumulator(xv).data.data());
                           }
                       });
}

template <class T>
Var avg_pool2(Tape<T>& tape, Var xv) {
    const auto& x = tape.value(xv);
    if (x.rank() != 3 || x.shape[1] % 2 || x.shape[2] % 2) throw InvalidArgument("avg_pool2: odd spatial size");
    const int c = x.shape[0], h = x.shape[1], w = x.shape[2], oh = h / 2, ow = w / 2;
    Tensor<T> out({c, oh, ow});
    for (int ch = 0; ch < c; ++ch) {
        for (int y = 0; y < oh; ++y) {
            const T* r0 = &x.data[(static_cast<std::size_t>(ch) * h + 2 * y) * w];
            const T* r1 = r0 + w;
            T* o = &out.data[(static_cast<std::size_t>(ch) * oh + y) * ow];
            for (int xx = 0; xx < ow; ++xx) {
                o[xx] = T(0.25) * (r0[2 * xx] + r0[2 * xx + 1] + r1[2 * xx] + r1[2 * xx + 1]);
            }
        }
    }
    return tape.record(std::move(out), {xv}, [xv, c, h, w, oh, ow](Tape<T>& t, const Tensor<T>& g) {
        auto& gx = t.grad_accumulator(xv).data;
        for (int ch = 0; ch < c; ++ch) {
            for (int y = 0; y < oh; ++y) {
                T* r0 = &gx[(static_cast<std::size_t>(ch) * h + 2 * y) * w];
                T* r1 = r0 + w;
                const T* gi = &g.data[(static_cast<std::size_t>(ch) * oh + y) * ow];
                for (int xx = 0; xx < ow; ++xx) {
                    const T v = T(0.25) * gi[xx];
                    r0[2 * xx] += v;
                    r0[2 * xx + 1] += v;
                    r1[2 * xx] += v;
                    r1[2 * xx + 1] += v;
                }
            }
        }
    });
}

namespace {

struct Tap {
    int i0, i1;
    double w0, w1;
};

std::vector<Tap> upsample_taps(int n) {
    std::vector<Tap> taps(static_cast<std::size_t>(2 * n));
    for (int o = 0; o < 2 * n; ++o) {
        const double s = std::max(0.0, (o + 0.5) * 0.5 - 0.5);
        const int i0 = std::min(static_cast<int>(s), n - 1);
        const int i1 = std::min(i0 + 1, n - 1);
        const double w1 = s - i0;
        taps[o] = {i0, i1, 1.0 - w1, w1};
    }
    return taps;
}

}  // namespace

template <class T>
Var upsample_bilinear2(Tape<T>& tape, Var xv) {
    const auto& x = tape.value(xv);
    if (x.rank() != 3) throw InvalidArgument("upsample_bilinear2: expected [C,H,W]");
    const int c = x.shape[0], h = x.shape[1], w = x.shape[2], oh = 2 * h, ow = 2 * w;
    auto ty = std::make_shared<std::vector<Tap>>(upsample_taps(h));
    auto tx = std::make_shared<std::vector<Tap>>(upsample_taps(w));
    Tensor<T> out({c, oh, ow});
    for (int ch = 0; ch < c; ++ch) {
        const T* src = &x.data[static_cast<std::size_t>(ch) * h * w];
        T* dst = &out.data[static_cast<std::size_t>(ch) * oh * ow];
        for (int y = 0; y < oh; ++y) {
            const Tap& a = (*ty)[y];
            const T* r0 = src + static_cast<std::size_t>(a.i0) * w;
            const T* r1 = src + static_cast<std::size_t>(a.i1) * w;
            for (int xx = 0; xx < ow; ++xx) {
                const Tap& b = (*tx)[xx];
                dst[static_cast<std::size_t>(y) * ow + xx] =
                    static_cast<T>(a.w0 * (b.w0 * r0[b.i0] + b.w1 * r0[b.i1]) + a.w1 * (b.w0 * r1[b.i0] + b.w1 * r1[b.i1]));
            }
        }
    }
    return tape.record(std::move(out), {xv}, [xv, c, h, w, oh, ow, ty, tx](Tape<T>& t, const Tensor<T>& g) {
        auto& gx = t.grad_accumulator(xv).data;
        for (int ch = 0; ch < c; ++ch) {
            T* dst = &gx[static_cast<std::size_t>(ch) * h * w];
            const T* gi = &g.data[static_cast<std::size_t>(ch) * oh * ow];
            for (int y = 0; y < oh; ++y) {
                const Tap& a = (*ty)[y];
                T* r0 = dst + static_cast<std::size_t>(a.i0) * w;
                T* r1 = dst + static_cast<std::size_t>(a.i1) * w;
                for (int xx = 0; xx < ow; ++xx) {
                    const Tap& b = (*tx)[xx];
                    const T v = gi[static_cast<std::size_t>(y) * ow + xx];
                    r0[b.i0] += static_cast<T>(a.w0 * b.w0 * v);
                    r0[b.i1] += static_cast<T>(a.w0 * b.w1 * v);
                    r1[b.i0] += static_cast<T>(a.w1 * b.w0 * v);
                    r1[b.i1] += static_cast<T>(a.w1 * b.w1 * v);
                }
            }
        }
    });
}

// ---------------------------------------------------------------------------
// Dense

template <class T>
Var linear(Tape<T>& tape, Var xv, Var wv, Var bv) {
    const auto& x = tape.value(xv);
    const auto& w = tape.value(wv);
    const auto& b = tape.value(bv);
    if (w.rank() != 2 || x.rank() != 1 || b.rank() != 1 || w.shape[1] != x.shape[0] || b.shape[0] != w.shape[0]) {
        throw InvalidArgument("linear: shape mismatch");
    }
    const int m = w.shape[0], n = w.shape[1];
    Tensor<T> out({m});
    for (int i = 0; i < m; ++i) {
        T s = b.data[i];
        for (int j = 0; j < n; ++j) s += w.data[static_cast<std::size_t>(i) * n + j] * x.data[j];
        out.data[i] = s;
    }
    return tape.record(std::move(out), {xv, wv, bv}, [xv, wv, bv, m, n](Tape<T>& t, const Tensor<T>& g) {
        const auto& x = t.value(xv).data;
        const auto& w = t.value(wv).data;
        if (t.requires_grad(wv)) {
            auto& gw = t.grad_accumulator(wv).data;
            for (int i = 0; i < m; ++i) {
                for (int j = 0; j < n; ++j) gw[static_cast<std::size_t>(i) * n + j] += g.data[i] * x[j];
            }
        }
        if (t.requires_grad(bv)) {
            auto& gb = t.grad_accumulator(bv).data;
            for (int i = 0; i < m; ++i) gb[i] += g.data[i];
        }
        if (t.requires_grad(xv)) {
            auto& gx = t.grad_accumulator(xv).data;
            for (int i = 0; i < m; ++i) {
                for (int j = 0; j < n; ++j) gx[j] += w[static_cast<std::size_t>(i) * n + j] * g.data[i];
            }
        }
    });
}

template <class T>
Var row(Tape<T>& tape, Var table, int index) {
    const auto& x = tape.value(table);
    if (x.rank() != 2 || index < 0 || index >= x.shape[0]) throw InvalidArgument("row: index out of range");
    const int d = x.shape[1];
    Tensor<T> out({d});
    std::copy_n(x.data.begin() + static_cast<std::ptrdiff_t>(index) * d, d, out.data.begin());
    return tape.record(std::move(out), {table}, [table, index, d](Tape<T>& t, const Tensor<T>& g) {
        auto& gt = t.grad_accumulator(table).data;
        for (int i = 0; i < d; ++i) gt[static_cast<std::size_t>(index) * d + i] += g.data[i];
    });
}

// ---------------------------------------------------------------------------
// Losses

template <class T>
Var masked_l1(Tape<T>& tape, Var av, Var bv, std::span<const std::uint8_t> mask, T groupCount) {
    const auto& a = tape.value(av);
    const auto& b = tape.value(bv);
    require_same_shape(a, b, "masked_l1");
    if (a.rank() != 3 || mask.size() != static_cast<std::size_t>(a.shape[1]) * a.shape[2]) {
        throw InvalidArgument("masked_l1: mask does not match [C,H,W]");
    }
    const int c = a.shape[0];
    const std::size_t plane = mask.size();
    std::size_t valid = 0;
    for (auto m : mask) valid += m ? 1 : 0;
    const T norm = valid ? groupCount / static_cast<T>(valid * static_cast<std::size_t>(c)) : T(0);
    T total = 0;
    for (int ch = 0; ch < c; ++ch) {
        for (std::size_t p = 0; p < plane; ++p) {
            if (mask[p]) total += std::abs(a.data[ch * plane + p] - b.data[ch * plane + p]);
        }
    }
    std::vector<std::uint8_t> m(mask.begin(), mask.end());
    return tape.record(Tensor<T>::scalar(total * norm), {av, bv},
                       [av, bv, m = std::move(m), norm, c, plane](Tape<T>& t, const Tensor<T>& g) {
                           const auto& a = t.value(av).data;
                           const auto& b = t.value(bv).data;
                           const T s = g.data[0] * norm;
                           const bool ga = t.requires_grad(av), gb = t.requires_grad(bv);
                           auto* pa = ga ? t.grad_accumulator(av).data.data() : nullptr;
                           auto* pb = gb ? t.grad_accumulator(bv).data.data() : nullptr;
                           for (int ch = 0; ch < c; ++ch) {
                               for (std::size_t p = 0; p < plane; ++p) {
                                   if (!m[p]) continue;
                                   const std::size_t i = ch * plane + p;
                                   const T d = a[i] - b[i];
                                   const T sg = d > 0 ? T(1) : (d < 0 ? T(-1) : T(0));
                                   if (pa) pa[i] += s * sg;
                                   if (pb) pb[i] -= s * sg;
                               }
                           }
                       });
}

// ---------------------------------------------------------------------------
// Scene ops

template <class T>
Var gather_instances(Tape<T>& tape, Var tablev, std::span<const int> index, std::span<const T> pixelScale,
                     int height, int width) {
    const auto& table = tape.value(tablev);
    const std::size_t plane = static_cast<std::size_t>(height) * width;
    if (table.rank() != 2 || index.size() != plane || (!pixelScale.empty() && pixelScale.size() != plane)) {
        throw InvalidArgument("gather_instances: shape mismatch");
    }
    const int rows = table.shape[0], k = table.shape[1];
    for (int i : index) {
        if (i >= rows) throw InvalidArgument("gather_instances: index out of range");
    }
    Tensor<T> out({k, height, width});
    for (std::size_t p = 0; p < plane; ++p) {
        if (index[p] < 0) continue;
        const T s = pixelScale.empty() ? T(1) : pixelScale[p];
        for (int c = 0; c < k; ++c) out.data[c * plane + p] = table.data[static_cast<std::size_t>(index[p]) * k + c] * s;
    }
    std::vector<int> idx(index.begin(), index.end());
    std::vector<T> sc(pixelScale.begin(), pixelScale.end());
    return tape.record(std::move(out), {tablev},
                       [tablev, idx = std::move(idx), sc = std::move(sc), k, plane](Tape<T>& t, const Tensor<T>& g) {
                           auto& gt = t.grad_accumulator(tablev).data;
                           for (std::size_t p = 0; p < plane; ++p) {
                               if (idx[p] < 0) continue;
                               const T s = sc.empty() ? T(1) : sc[p];
                               for (int c = 0; c < k; ++c) {
                                   gt[static_cast<std::size_t>(idx[p]) * k + c] += g.data[c * plane + p] * s;
                               }
                           }
                       });
}

template <class T>
Var light_field(Tape<T>& tape, Var lightPos, const Tensor<T>& X, std::span<const std::uint8_t> mask, T normRadius) {
    const auto& l = tape.value(lightPos);
    if (l.size() != 3 || X.rank() != 3 || X.shape[0] != 3 ||
        mask.size() != static_cast<std::size_t>(X.shape[1]) * X.shape[2]) {
        throw InvalidArgument("light_field: shape mismatch");
    }
    const int h = X.shape[1], w = X.shape[2];
    const std::size_t plane = mask.size();
    Tensor<T> out({4, h, w});
    auto dirs = std::make_shared<std::vector<T>>(plane * 4, T(0));  // dir xyz + distance
    for (std::size_t p = 0; p < plane; ++p) {
        if (!mask[p]) continue;
        const T dx = l.data[0] - X.data[p], dy = l.data[1] - X.data[plane + p], dz = l.data[2] - X.data[2 * plane + p];
        const T r = std::sqrt(dx * dx + dy * dy + dz * dz);
        if (!(r >= T(1e-6))) throw NumericError("light_field: pixel coincides with the light");
        T* d = &(*dirs)[4 * p];
        d[0] = dx / r;
        d[1] = dy / r;
        d[2] = dz / r;
        d[3] = r;
        for (int c = 0; c < 3; ++c) out.data[c * plane + p] = d[c];
        out.data[3 * plane + p] = r / normRadius;
    }
    std::vector<std::uint8_t> m(mask.begin(), mask.end());
    return tape.record(std::move(out), {lightPos},
                       [lightPos, dirs, m = std::move(m), plane, normRadius](Tape<T>& t, const Tensor<T>& g) {
                           T acc[3] = {0, 0, 0};
                           for (std::size_t p = 0; p < plane; ++p) {
                               if (!m[p]) continue;
                               const T* d = &(*dirs)[4 * p];
                               const T gd[3] = {g.data[p], g.data[plane + p], g.data[2 * plane + p]};
                               const T gr = g.data[3 * plane + p] / normRadius;
                               const T proj = d[0] * gd[0] + d[1] * gd[1] + d[2] * gd[2];
                               for (int i = 0; i < 3; ++i) acc[i] += (gd[i] - d[i] * proj) / d[3] + d[i] * gr;
                           }
                           auto& gl = t.grad_accumulator(lightPos).data;
                           for (int i = 0; i < 3; ++i) gl[i] += acc[i];
                       });
}

template <class T>
Var hemisphere_point(Tape<T>& tape, Var raw, T radius) {
    const auto& r = tape.value(raw);
    if (r.size() != 3) throw InvalidArgument("hemisphere_point: expected a 3-vector");
    const T q[3] = {r.data[0], r.data[1], std::abs(r.data[2])};
    const T n = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2]);
    if (!(n > T(0)) || !std::isfinite(n)) throw NumericError("hemisphere_point: degenerate raw direction");
    Tensor<T> out({3});
    for (int i = 0; i < 3; ++i) out.data[i] = radius * q[i] / n;
    return tape.record(std::move(out), {raw}, [raw, radius](Tape<T>& t, const Tensor<T>& g) {
        const auto& r = t.value(raw).data;
        const T sz = r[2] > 0 ? T(1) : (r[2] < 0 ? T(-1) : T(0));
        const T q[3] = {r[0], r[1], std::abs(r[2])};
        const T n = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2]);
        const T proj = (q[0] * g.data[0] + q[1] * g.data[1] + q[2] * g.data[2]) / (n * n);
        auto& gr = t.grad_accumulator(raw).data;
        T gq[3];
        for (int i = 0; i < 3; ++i) gq[i] = radius * (g.data[i] - q[i] * proj) / n;
        gr[0] += gq[0];
        gr[1] += gq[1];
        gr[2] += gq[2] * sz;
    });
}

template <class T>
Var rigid_transform(Tape<T>& tape, Var pv, const Pose& pose) {
    const auto& p = tape.value(pv);
    if (p.size() != 3) throw InvalidArgument("rigid_transform: expected a 3-vector");
    const Vec3 o = pose.apply({static_cast<double>(p.data[0]), static_cast<double>(p.data[1]),
                               static_cast<double>(p.data[2])});
    Tensor<T> out({3}, std::vector<T>{static_cast<T>(o.x), static_cast<T>(o.y), static_cast<T>(o.z)});
    const Mat3 rt = pose.rotation.transpose();
    return tape.record(std::move(out), {pv}, [pv, rt](Tape<T>& t, const Tensor<T>& g) {
        const Vec3 d = rt * Vec3{static_cast<double>(g.data[0]), static_cast<double>(g.data[1]),
                                 static_cast<double>(g.data[2])};
        auto& gp = t.grad_accumulator(pv).data;
        for (int i = 0; i < 3; ++i) gp[i] += static_cast<T>(d[i]);
    });
}

// ---------------------------------------------------------------------------

#define PNDR_INSTANTIATE(T)                                                                                   \
    template struct Tensor<T>;                                                                                \
    template class Tape<T>;                                                                                   \
    template Var add(Tape<T>&, Var, Var);                                                                     \
    template Var sub(Tape<T>&, Var, Var);                                                                     \
    template Var mul(Tape<T>&, Var, Var);                                                                     \
    template Var scale(Tape<T>&, Var, T);                                                                     \
    template Var relu(Tape<T>&, Var);                                                                         \
    template Var softplus(Tape<T>&, Var);                                                                     \
    template Var sigmoid(Tape<T>&, Var);                                                                      \
    template Var sine(Tape<T>&, Var, T);                                                                      \
    template Var tone_map(Tape<T>&, Var);                                                                     \
    template Var sum(Tape<T>&, Var);                                                                          \
    template Var concat(Tape<T>&, std::span<const Var>);                                                      \
    template Var slice(Tape<T>&, Var, int, int);                                                              \
    template Var reshape(Tape<T>&, Var, std::vector<int>);                                                   \
    template Var broadcast_channels(Tape<T>&, Var, int);                                                      \
    template Var conv2d(Tape<T>&, Var, Var, Var);                                                             \
    template Var avg_pool2(Tape<T>&, Var);                                                                    \
    template Var upsample_bilinear2(Tape<T>&, Var);                                                           \
    template Var linear(Tape<T>&, Var, Var, Var);                                                             \
    template Var row(Tape<T>&, Var, int);                                                                     \
    template Var masked_l1(Tape<T>&, Var, Var, std::span<const std::uint8_t>, T);                             \
    template Var gather_instances(Tape<T>&, Var, std::span<const int>, std::span<const T>, int, int);         \
    template Var light_field(Tape<T>&, Var, const Tensor<T>&, std::span<const std::uint8_t>, T);              \
    template Var hemisphere_point(Tape<T>&, Var, T);                                                          \
    template Var rigid_transform(Tape<T>&, Var, const Pose&);

PNDR_INSTANTIATE(float)
PNDR_INSTANTIATE(double)

}  // namespace pndr::ad
