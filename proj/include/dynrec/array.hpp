#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

#include "dynrec/errors.hpp"

namespace dynrec {

// Dense row-major array of doubles, rank 1 or 2. Rank-1 arrays behave as a
// single row in matrix contexts.
struct Array {
    std::vector<std::size_t> shape;
    std::vector<double> v;

    Array() = default;
    Array(std::initializer_list<double> vals) : shape{vals.size()}, v(vals) {}

    static Array zeros(std::vector<std::size_t> s) {
        Array a;
        std::size_t n = 1;
        for (auto d : s) n *= d;
        a.shape = std::move(s);
        a.v.assign(n, 0.0);
        return a;
    }
    static Array row(std::vector<double> vals) {
        Array a;
        a.shape = {vals.size()};
        a.v = std::move(vals);
        return a;
    }
    static Array matrix(std::size_t r, std::size_t c, std::vector<double> vals) {
        Array a;
        a.shape = {r, c};
        a.v = std::move(vals);
        return a;
    }
    static Array scalar(double x) {
        Array a;
        a.shape = {1};
        a.v = {x};
        return a;
    }

    std::size_t numel() const { return v.size(); }
    std::size_t rank() const { return shape.size(); }
    std::size_t rows() const { return rank() <= 1 ? 1 : shape[0]; }
    std::size_t cols() const { return shape.empty() ? 0 : shape.back(); }

    double& at(std::size_t r, std::size_t c) { return v[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const { return v[r * cols() + c]; }
    double& operator[](std::size_t i) { return v[i]; }
    double operator[](std::size_t i) const { return v[i]; }

    bool same_shape(const Array& o) const { return rows() == o.rows() && cols() == o.cols(); }

    std::string shape_str() const {
        std::string s = "(";
        for (std::size_t i = 0; i < shape.size(); ++i) {
            if (i) s += "x";
            s += std::to_string(shape[i]);
        }
        return s + ")";
    }

    bool all_finite() const;
};

inline void require_same_shape(const Array& a, const Array& b, const char* op) {
    if (!a.same_shape(b))
        throw DimensionError(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " + b.shape_str());
}

}  // namespace dynrec
