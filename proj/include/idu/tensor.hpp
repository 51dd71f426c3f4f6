#pragma once

#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <span>
#include <sstream>
#include <vector>

#include "idu/common.hpp"

namespace idu::core {

/// Dense row-major tensor. Templated on the scalar type: the production
/// model runs float32; double instantiations back the finite-difference
/// oracles in the test suites.
template <class T>
struct TensorT {
    std::vector<int> dims;
    std::vector<T> data;

    TensorT() = default;

    explicit TensorT(std::vector<int> d) : dims(std::move(d)) {
        data.assign(check_dims(dims), T(0));
    }

    TensorT(std::vector<int> d, std::vector<T> values) : dims(std::move(d)), data(std::move(values)) {
        if (check_dims(dims) != data.size())
            throw ShapeError("tensor: dims " + shape_str() + " do not match value count " +
                             std::to_string(data.size()));
    }

    static TensorT zeros(std::vector<int> d) { return TensorT(std::move(d)); }

    static TensorT full(std::vector<int> d, T v) {
        TensorT t(std::move(d));
        for (auto& x : t.data) x = v;
        return t;
    }

    static TensorT identity(int n) {
        TensorT t({n, n});
        for (int i = 0; i < n; ++i) t.data[static_cast<size_t>(i) * n + i] = T(1);
        return t;
    }

    static size_t check_dims(const std::vector<int>& dims) {
        size_t n = 1;
        for (int d : dims) {
            if (d <= 0) throw ShapeError("tensor: non-positive dimension");
            n *= static_cast<size_t>(d);
        }
        return n;
    }

    size_t size() const { return data.size(); }
    int rank() const { return static_cast<int>(dims.size()); }
    int rows() const { return dims.at(0); }
    int cols() const { return dims.at(1); }

    T& at(int r, int c) { return data[static_cast<size_t>(r) * dims[1] + c]; }
    T at(int r, int c) const { return data[static_cast<size_t>(r) * dims[1] + c]; }

    std::span<T> row(int r) { return {data.data() + static_cast<size_t>(r) * dims[1], static_cast<size_t>(dims[1])}; }
    std::span<const T> row(int r) const {
        return {data.data() + static_cast<size_t>(r) * dims[1], static_cast<size_t>(dims[1])};
    }

    bool same_shape(const TensorT& o) const { return dims == o.dims; }

    std::string shape_str() const {
        std::ostringstream os;
        os << "[";
        for (size_t i = 0; i < dims.size(); ++i) os << (i ? "x" : "") << dims[i];
        os << "]";
        return os.str();
    }

    /// Throws NumericError on the first non-finite element; `where` names the op.
    void ensure_finite(const char* where) const {
        for (size_t i = 0; i < data.size(); ++i) {
            if (!is_finite_value(data[i]))
                throw NumericError(std::string(where) + ": non-finite value at flat index " +
                                   std::to_string(i));
        }
    }
};

using Tensor = TensorT<float>;

/// Column slice [c0, c0+width) of a 2-D tensor; plain utility, not a graph op.
template <class T>
TensorT<T> slice_cols(const TensorT<T>& x, int c0, int width) {
    if (x.rank() != 2) throw ShapeError("slice_cols: rank-2 tensor required");
    if (c0 < 0 || width <= 0 || c0 + width > x.cols()) throw ShapeError("slice_cols: out of range");
    TensorT<T> out({x.rows(), width});
    for (int r = 0; r < x.rows(); ++r)
        for (int c = 0; c < width; ++c) out.at(r, c) = x.at(r, c0 + c);
    return out;
}

}  // namespace idu::core
