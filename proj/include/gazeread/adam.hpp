#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "gazeread/errors.hpp"
#include "gazeread/tensor.hpp"

namespace gazeread {

// Adam with bias correction; moment tensors are parallel to the parameter
// list they were initialized from.
template <class Real>
struct AdamState {
    Real lr = Real(1e-3);
    Real beta1 = Real(0.9);
    Real beta2 = Real(0.999);
    Real epsilon = Real(1e-8);
    std::int64_t step = 0;
    std::vector<Tensor<Real>> m;
    std::vector<Tensor<Real>> v;

    void init(const std::vector<Tensor<Real>>& params) {
        m.clear();
        v.clear();
        for (const auto& p : params) {
            m.push_back(Tensor<Real>::zeros(p.shape));
            v.push_back(Tensor<Real>::zeros(p.shape));
        }
        step = 0;
    }
};

template <class Real>
void adam_step(std::vector<Tensor<Real>>& params, const std::vector<Tensor<Real>>& grads, AdamState<Real>& st) {
    if (params.size() != grads.size() || params.size() != st.m.size())
        throw ShapeError("adam_step: params/grads/state size mismatch");
    st.step += 1;
    const Real bc1 = Real(1) - std::pow(st.beta1, static_cast<Real>(st.step));
    const Real bc2 = Real(1) - std::pow(st.beta2, static_cast<Real>(st.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& p = params[i];
        const auto& g = grads[i];
        auto& m = st.m[i];
        auto& v = st.v[i];
        if (!p.same_shape(g) || !p.same_shape(m))
            throw ShapeError("adam_step: tensor shape mismatch at parameter " + std::to_string(i));
        for (std::size_t j = 0; j < p.data.size(); ++j) {
            m.data[j] = st.beta1 * m.data[j] + (Real(1) - st.beta1) * g.data[j];
            v.data[j] = st.beta2 * v.data[j] + (Real(1) - st.beta2) * g.data[j] * g.data[j];
            Real mhat = m.data[j] / bc1;
            Real vhat = v.data[j] / bc2;
            p.data[j] -= st.lr * mhat / (std::sqrt(vhat) + st.epsilon);
        }
    }
}

} // namespace gazeread
