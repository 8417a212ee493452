#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "gwnet/error.hpp"

namespace gwnet {

using Shape = std::vector<std::size_t>;

inline std::string shape_to_string(const Shape& s) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << ']';
    return os.str();
}

// Dense N-dimensional array, row-major with the last axis fastest.
// Verification paths instantiate T = double, training paths T = float.
template <typename T>
class Tensor {
  public:
    Tensor() = default;

    Tensor(Shape shape, T fill) : shape_(std::move(shape)) {
        data_.assign(checked_volume(shape_), fill);
    }

    Tensor(Shape shape, std::vector<T> values) : shape_(std::move(shape)), data_(std::move(values)) {
        if (data_.size() != checked_volume(shape_))
            throw ShapeError("tensor value list of length " + std::to_string(data_.size()) +
                             " does not fill shape " + shape_to_string(shape_));
    }

    static Tensor zeros(Shape shape) { return Tensor(std::move(shape), T(0)); }
    static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape_, T(0)); }

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }
    std::size_t extent(std::size_t axis) const { return shape_[axis]; }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }
    std::vector<T>& values() { return data_; }
    const std::vector<T>& values() const { return data_; }

    T& operator[](std::size_t flat) {
        assert(flat < data_.size());
        return data_[flat];
    }
    T operator[](std::size_t flat) const {
        assert(flat < data_.size());
        return data_[flat];
    }

    // Multi-index access: flat(i,j,k) = (i*d1 + j)*d2 + k.
    template <typename... Ix>
    T& operator()(Ix... ix) {
        return data_[flat_of(ix...)];
    }
    template <typename... Ix>
    T operator()(Ix... ix) const {
        return data_[flat_of(ix...)];
    }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    bool all_finite() const {
        for (T v : data_)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> out;
        out.reset(shape_);
        for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
        return out;
    }

    // Re-shapes in place without touching values (used behind bounds checks).
    void reset(Shape shape) {
        shape_ = std::move(shape);
        data_.assign(checked_volume(shape_), T(0));
    }

    // Reinterprets the same values under a new shape of equal volume.
    Tensor reshaped(Shape shape) const {
        if (checked_volume(shape) != data_.size())
            throw ShapeError("reshape " + shape_to_string(shape_) + " -> " + shape_to_string(shape) +
                             " changes the element count");
        Tensor out;
        out.shape_ = std::move(shape);
        out.data_ = data_;
        return out;
    }

  private:
    template <typename... Ix>
    std::size_t flat_of(Ix... ix) const {
        assert(sizeof...(Ix) == shape_.size());
        const std::size_t idx[] = {static_cast<std::size_t>(ix)...};
        std::size_t flat = 0;
        for (std::size_t a = 0; a < sizeof...(Ix); ++a) {
            assert(idx[a] < shape_[a]);
            flat = flat * shape_[a] + idx[a];
        }
        return flat;
    }

    static std::size_t checked_volume(const Shape& shape) {
        if (shape.empty()) throw ShapeError("tensor shape must have at least one axis");
        std::size_t n = 1;
        for (std::size_t e : shape) {
            if (e == 0) throw ShapeError("tensor extent must be positive, got shape " + shape_to_string(shape));
            n *= e;
        }
        return n;
    }

    Shape shape_;
    std::vector<T> data_;
};

// Validating factory mirroring the library surface used by tests and tools;
// extents arrive as signed integers from user input.
template <typename T>
Tensor<T> tensor_new(const std::vector<long long>& extents, T fill) {
    Shape shape;
    shape.reserve(extents.size());
    for (long long e : extents) {
        if (e <= 0) throw ShapeError("tensor extent must be positive, got " + std::to_string(e));
        shape.push_back(static_cast<std::size_t>(e));
    }
    return Tensor<T>(std::move(shape), fill);
}

template <typename T>
Tensor<T> tensor_new(const std::vector<long long>& extents, std::vector<T> values) {
    Shape shape;
    shape.reserve(extents.size());
    for (long long e : extents) {
        if (e <= 0) throw ShapeError("tensor extent must be positive, got " + std::to_string(e));
        shape.push_back(static_cast<std::size_t>(e));
    }
    return Tensor<T>(std::move(shape), std::move(values));
}

// Elementwise combination of two same-shape tensors.
template <typename T, typename Op>
Tensor<T> map_zip(const Tensor<T>& a, const Tensor<T>& b, Op op) {
    if (!a.same_shape(b))
        throw ShapeError("map_zip shape mismatch: " + shape_to_string(a.shape()) + " vs " +
                         shape_to_string(b.shape()));
    Tensor<T> out = Tensor<T>::zeros_like(a);
    const T* pa = a.data();
    const T* pb = b.data();
    T* po = out.data();
    for (std::size_t i = 0; i < a.size(); ++i) po[i] = op(pa[i], pb[i]);
    return out;
}

// Standard matrix product of two rank-2 tensors. The contraction axis is
// reduced sequentially in ascending order so repeated runs are bit-identical.
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.rank() != 2 || b.rank() != 2)
        throw ShapeError("matmul expects rank-2 operands, got " + shape_to_string(a.shape()) + " and " +
                         shape_to_string(b.shape()));
    if (a.extent(1) != b.extent(0))
        throw ShapeError("matmul inner extents disagree: " + shape_to_string(a.shape()) + " vs " +
                         shape_to_string(b.shape()));
    const std::size_t m = a.extent(0), k = a.extent(1), n = b.extent(1);
    Tensor<T> out({m, n}, T(0));
    for (std::size_t i = 0; i < m; ++i) {
        const T* arow = a.data() + i * k;
        T* orow = out.data() + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const T av = arow[p];
            const T* brow = b.data() + p * n;
            for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    }
    return out;
}

// Row-major index of the maximum value; ties break toward the lowest index.
template <typename T>
std::size_t argmax_flat(const Tensor<T>& t) {
    if (t.empty()) throw ShapeError("argmax of an empty tensor");
    std::size_t best = 0;
    for (std::size_t i = 1; i < t.size(); ++i)
        if (t[i] > t[best]) best = i;
    return best;
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    return map_zip(a, b, [](T x, T y) { return x + y; });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
    return map_zip(a, b, [](T x, T y) { return x - y; });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    return map_zip(a, b, [](T x, T y) { return x * y; });
}

template <typename T>
void scale_inplace(Tensor<T>& t, T s) {
    for (std::size_t i = 0; i < t.size(); ++i) t[i] *= s;
}

template <typename T>
void add_inplace(Tensor<T>& into, const Tensor<T>& other) {
    if (!into.same_shape(other))
        throw ShapeError("accumulate shape mismatch: " + shape_to_string(into.shape()) + " vs " +
                         shape_to_string(other.shape()));
    for (std::size_t i = 0; i < into.size(); ++i) into[i] += other[i];
}

}  // namespace gwnet
