#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <new>
#include <span>
#include <vector>

#include "pndr/error.hpp"
#include "pndr/math.hpp"

// Tape-based reverse-mode differentiation over small dense tensors. Ops are
// instantiated for float (training, inference) and double (gradient checks).
namespace pndr::ad {

/// Cache-line aligned storage. Vectorized kernels peel differently depending on
/// pointer alignment, so a fixed alignment keeps results bit-reproducible.
template <class T>
struct AlignedAllocator {
    using value_type = T;
    static constexpr std::align_val_t kAlign{64};

    AlignedAllocator() = default;
    template <class U>
    AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

    T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
    void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlign); }
    template <class U>
    bool operator==(const AlignedAllocator<U>&) const noexcept {
        return true;
    }
};

template <class T>
using Buffer = std::vector<T, AlignedAllocator<T>>;

template <class T>
struct Tensor {
    std::vector<int> shape;
    Buffer<T> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s, T fill = T(0));
    Tensor(std::vector<int> s, Buffer<T> values);
    Tensor(std::vector<int> s, const std::vector<T>& values) : Tensor(std::move(s), Buffer<T>(values.begin(), values.end())) {}
    static Tensor scalar(T v) { return Tensor({1}, Buffer<T>{v}); }

    std::size_t size() const { return data.size(); }
    int dim(int i) const { return shape.at(static_cast<std::size_t>(i)); }
    int rank() const { return static_cast<int>(shape.size()); }
    bool operator==(const Tensor&) const = default;
};

std::size_t shape_size(const std::vector<int>& shape);

struct Var {
    int id = -1;
};

template <class T>
class Tape {
public:
    using Backward = std::function<void(Tape&, const Tensor<T>& gradOut)>;

    /// Leaf that never receives gradients.
    Var constant(Tensor<T> value);
    /// Leaf whose gradient is accumulated by backward().
    Var parameter(Tensor<T> value);
    /// Records an op result. The closure is kept only when some input needs gradients.
    Var record(Tensor<T> value, std::initializer_list<Var> inputs, Backward fn);
    Var record(Tensor<T> value, std::span<const Var> inputs, Backward fn);

    bool requires_grad(Var v) const { return nodes_.at(v.id).requiresGrad; }
    const Tensor<T>& value(Var v) const { return nodes_.at(v.id).value; }
    /// Gradient of the last backward() root; zeros when the node was not reached.
    Tensor<T> grad(Var v) const;
    /// Zero-initialized on first use.
    Tensor<T>& grad_accumulator(Var v);

    /// Seeds d(root)/d(root) = 1 for a single-element root and sweeps in reverse order.
    void backward(Var root);
    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Tensor<T> value;
        Tensor<T> grad;
        bool requiresGrad = false;
        Backward backward;
    };
    std::vector<Node> nodes_;
};

// Elementwise ------------------------------------------------------------
template <class T> Var add(Tape<T>& tape, Var a, Var b);
template <class T> Var sub(Tape<T>& tape, Var a, Var b);
template <class T> Var mul(Tape<T>& tape, Var a, Var b);
template <class T> Var scale(Tape<T>& tape, Var a, T s);
template <class T> Var relu(Tape<T>& tape, Var a);
template <class T> Var softplus(Tape<T>& tape, Var a);
template <class T> Var sigmoid(Tape<T>& tape, Var a);
/// sin(omega * a)
template <class T> Var sine(Tape<T>& tape, Var a, T omega);
/// Filmic tone curve; derivative 0 at and below the threshold.
template <class T> Var tone_map(Tape<T>& tape, Var a);
template <class T> Var sum(Tape<T>& tape, Var a);

// Layout -----------------------------------------------------------------
/// Concatenates along dimension 0; trailing dimensions must agree.
template <class T> Var concat(Tape<T>& tape, std::span<const Var> parts);
/// Rows [begin, begin + count) of dimension 0.
template <class T> Var slice(Tape<T>& tape, Var a, int begin, int count);
/// Same data under a new shape with equal element count.
template <class T> Var reshape(Tape<T>& tape, Var a, std::vector<int> shape);
/// [1, H, W] -> [channels, H, W].
template <class T> Var broadcast_channels(Tape<T>& tape, Var a, int channels);

// Image ops (CHW) ---------------------------------------------------------
/// Same-padded stride-1 convolution; x [Ci,H,W], w [Co,Ci,k,k], b [Co].
template <class T> Var conv2d(Tape<T>& tape, Var x, Var w, Var b);
/// 2x2 average pooling.
template <class T> Var avg_pool2(Tape<T>& tape, Var x);
/// 2x bilinear upsampling, half-pixel centers, edge clamped.
template <class T> Var upsample_bilinear2(Tape<T>& tape, Var x);

// Dense ops ----------------------------------------------------------------
/// W [m,n] * x [n] + b [m].
template <class T> Var linear(Tape<T>& tape, Var x, Var w, Var b);
/// One row of a [rows, dim] table as a [dim] vector.
template <class T> Var row(Tape<T>& tape, Var table, int index);

// Losses -------------------------------------------------------------------
/// groupCount * mean |a - b| over masked pixels and all channels; a, b [C,H,W],
/// mask has H*W entries. Subgradient 0 at ties.
template <class T> Var masked_l1(Tape<T>& tape, Var a, Var b, std::span<const std::uint8_t> mask, T groupCount);

// Scene ops used by the inverse problem ------------------------------------
/// Per pixel: out[k, p] = table[index[p], k] * pixelScale[p] (0 when index < 0).
/// table [n, K]; index and pixelScale have H*W entries.
template <class T>
Var gather_instances(Tape<T>& tape, Var table, std::span<const int> index, std::span<const T> pixelScale,
                     int height, int width);
/// Light direction (3 channels) and distance / normRadius (1 channel) for every
/// masked pixel of X [3,H,W] given a camera-frame light position [3].
template <class T>
Var light_field(Tape<T>& tape, Var lightPos, const Tensor<T>& X, std::span<const std::uint8_t> mask, T normRadius);
/// radius * (x, y, |z|) / |r| for raw r [3]; d|z|/dz = 0 at z = 0.
template <class T> Var hemisphere_point(Tape<T>& tape, Var raw, T radius);
/// rotation * p + translation for p [3].
template <class T> Var rigid_transform(Tape<T>& tape, Var p, const Pose& pose);

}  // namespace pndr::ad
