#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "gazeread/errors.hpp"

namespace gazeread {

// Dense row-major tensor. Real is float for training/inference and double
// for gradient-check mode; the whole tape inherits the choice.
template <class Real>
struct Tensor {
    std::vector<std::int64_t> shape;
    std::vector<Real> data;

    Tensor() = default;

    explicit Tensor(std::vector<std::int64_t> s) : shape(std::move(s)) {
        data.assign(static_cast<std::size_t>(numel_of(shape)), Real(0));
    }

    Tensor(std::vector<std::int64_t> s, std::vector<Real> d) : shape(std::move(s)), data(std::move(d)) {
        if (numel_of(shape) != static_cast<std::int64_t>(data.size()))
            throw ShapeError("tensor data size does not match shape");
    }

    static std::int64_t numel_of(const std::vector<std::int64_t>& s) {
        std::int64_t n = 1;
        for (std::int64_t d : s) {
            if (d <= 0) throw ShapeError("tensor dims must be positive");
            n *= d;
        }
        return n;
    }

    static Tensor zeros(std::vector<std::int64_t> s) { return Tensor(std::move(s)); }

    static Tensor full(std::vector<std::int64_t> s, Real v) {
        Tensor t(std::move(s));
        std::fill(t.data.begin(), t.data.end(), v);
        return t;
    }

    std::int64_t numel() const { return static_cast<std::int64_t>(data.size()); }
    int ndim() const { return static_cast<int>(shape.size()); }

    std::int64_t dim(int i) const { return shape.at(static_cast<std::size_t>(i)); }

    Real& at(std::int64_t i) { return data[static_cast<std::size_t>(i)]; }
    const Real& at(std::int64_t i) const { return data[static_cast<std::size_t>(i)]; }

    Real& at(std::int64_t i, std::int64_t j) { return data[static_cast<std::size_t>(i * shape[1] + j)]; }
    const Real& at(std::int64_t i, std::int64_t j) const { return data[static_cast<std::size_t>(i * shape[1] + j)]; }

    Real& at(std::int64_t i, std::int64_t j, std::int64_t k) {
        return data[static_cast<std::size_t>((i * shape[1] + j) * shape[2] + k)];
    }
    const Real& at(std::int64_t i, std::int64_t j, std::int64_t k) const {
        return data[static_cast<std::size_t>((i * shape[1] + j) * shape[2] + k)];
    }

    Real& at(std::int64_t i, std::int64_t j, std::int64_t k, std::int64_t l) {
        return data[static_cast<std::size_t>(((i * shape[1] + j) * shape[2] + k) * shape[3] + l)];
    }
    const Real& at(std::int64_t i, std::int64_t j, std::int64_t k, std::int64_t l) const {
        return data[static_cast<std::size_t>(((i * shape[1] + j) * shape[2] + k) * shape[3] + l)];
    }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    bool all_finite() const {
        for (Real v : data)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }

    template <class Other>
    Tensor<Other> cast() const {
        Tensor<Other> out;
        out.shape = shape;
        out.data.resize(data.size());
        for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<Other>(data[i]);
        return out;
    }

    std::string shape_str() const {
        std::ostringstream os;
        os << '[';
        for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
        os << ']';
        return os.str();
    }
};

template <class Real>
inline void require_shape(const Tensor<Real>& t, const std::vector<std::int64_t>& want, const char* what) {
    if (t.shape != want) {
        Tensor<Real> w;
        w.shape = want;
        throw ShapeError(std::string(what) + ": expected " + w.shape_str() + ", got " + t.shape_str());
    }
}

} // namespace gazeread
