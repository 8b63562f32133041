#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "maskfuse/core/rng.hpp"
#include "maskfuse/core/tensor.hpp"

namespace maskfuse {

// One named parameter tensor with its gradient buffer. `section` tags the
// checkpoint group ("adapter", "denoiser", "cond"). Frozen parameters keep
// receiving gradients (needed for gradient checks) but the optimizer skips
// them.
template <typename T>
struct Param {
    std::string name;
    std::string section;
    Tensor<T> value;
    Tensor<T> grad;
    bool frozen = false;
};

template <typename T>
class ParamStore {
public:
    int add(const std::string& name, std::vector<int64_t> shape, const std::string& section) {
        Param<T> p;
        p.name = name;
        p.section = section;
        p.value = Tensor<T>(shape);
        p.grad = Tensor<T>(std::move(shape));
        items_.push_back(std::move(p));
        return static_cast<int>(items_.size()) - 1;
    }

    Param<T>& operator[](int i) { return items_[static_cast<size_t>(i)]; }
    const Param<T>& operator[](int i) const { return items_[static_cast<size_t>(i)]; }

    Tensor<T>& value(int i) { return items_[static_cast<size_t>(i)].value; }
    const Tensor<T>& value(int i) const { return items_[static_cast<size_t>(i)].value; }
    Tensor<T>& grad(int i) { return items_[static_cast<size_t>(i)].grad; }

    size_t size() const { return items_.size(); }
    std::vector<Param<T>>& items() { return items_; }
    const std::vector<Param<T>>& items() const { return items_; }

    void zero_grads() {
        for (auto& p : items_) p.grad.fill(T(0));
    }

    void scale_grads(T s) {
        for (auto& p : items_) scale_inplace(p.grad, s);
    }

    int64_t total_size() const {
        int64_t n = 0;
        for (const auto& p : items_) n += p.value.numel();
        return n;
    }

private:
    std::vector<Param<T>> items_;
};

// Decoupled weight decay Adam. Frozen parameters are untouched, bit for bit.
template <typename T>
class AdamW {
public:
    AdamW(T lr, T weight_decay, T beta1 = T(0.9), T beta2 = T(0.999), T eps = T(1e-8))
        : lr_(lr), wd_(weight_decay), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(ParamStore<T>& store) {
        if (m_.empty()) {
            for (const auto& p : store.items()) {
                m_.push_back(zeros_like(p.value));
                v_.push_back(zeros_like(p.value));
            }
        }
        ++t_;
        const T bc1 = T(1) - std::pow(beta1_, static_cast<T>(t_));
        const T bc2 = T(1) - std::pow(beta2_, static_cast<T>(t_));
        for (size_t i = 0; i < store.size(); ++i) {
            Param<T>& p = store.items()[i];
            if (p.frozen) continue;
            Tensor<T>& m = m_[i];
            Tensor<T>& v = v_[i];
            for (size_t k = 0; k < p.value.data.size(); ++k) {
                const T g = p.grad.data[k];
                m.data[k] = beta1_ * m.data[k] + (T(1) - beta1_) * g;
                v.data[k] = beta2_ * v.data[k] + (T(1) - beta2_) * g * g;
                const T mhat = m.data[k] / bc1;
                const T vhat = v.data[k] / bc2;
                p.value.data[k] -= lr_ * (mhat / (std::sqrt(vhat) + eps_) + wd_ * p.value.data[k]);
            }
        }
    }

    T lr() const { return lr_; }

private:
    T lr_, wd_, beta1_, beta2_, eps_;
    int64_t t_ = 0;
    std::vector<Tensor<T>> m_, v_;
};

// Gaussian init helpers.
template <typename T>
void init_normal(Tensor<T>& t, Rng& rng, double stddev) {
    for (T& v : t.data) v = static_cast<T>(rng.normal() * stddev);
}

}  // namespace maskfuse
