#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "sardine/errors.hpp"

namespace sardine {

// Dense 4-D array in (batch, channel, height, width) row-major order.
// float is the production precision; double instantiations back the
// finite-difference verification paths.
template <typename T>
struct Tensor4 {
    int n = 0, c = 0, h = 0, w = 0;
    std::vector<T> data;

    Tensor4() = default;

    Tensor4(int n_, int c_, int h_, int w_, T fill = T(0))
        : n(n_), c(c_), h(h_), w(w_) {
        if (n < 1 || c < 1 || h < 1 || w < 1) {
            throw ShapeError("Tensor4: all dims must be >= 1");
        }
        data.assign(static_cast<std::size_t>(n) * c * h * w, fill);
    }

    std::size_t size() const { return data.size(); }
    std::size_t plane_size() const { return static_cast<std::size_t>(h) * w; }

    T* plane(int in, int ic) {
        return data.data() + (static_cast<std::size_t>(in) * c + ic) * plane_size();
    }
    const T* plane(int in, int ic) const {
        return data.data() + (static_cast<std::size_t>(in) * c + ic) * plane_size();
    }

    T& at(int in, int ic, int iy, int ix) {
        return data[((static_cast<std::size_t>(in) * c + ic) * h + iy) * w + ix];
    }
    T at(int in, int ic, int iy, int ix) const {
        return data[((static_cast<std::size_t>(in) * c + ic) * h + iy) * w + ix];
    }

    bool same_shape(const Tensor4& o) const {
        return n == o.n && c == o.c && h == o.h && w == o.w;
    }

    std::string shape_str() const {
        return "(" + std::to_string(n) + "," + std::to_string(c) + "," +
               std::to_string(h) + "," + std::to_string(w) + ")";
    }
};

using Tensor4f = Tensor4<float>;
using Tensor4d = Tensor4<double>;

template <typename T>
bool all_finite(const Tensor4<T>& t) {
    for (T v : t.data) {
        if (!std::isfinite(static_cast<double>(v))) return false;
    }
    return true;
}

template <typename T>
void require_finite(const Tensor4<T>& t, const char* what) {
    if (!all_finite(t)) {
        throw NumericError(std::string(what) + ": non-finite value");
    }
}

} // namespace sardine
