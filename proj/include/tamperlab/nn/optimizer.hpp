#pragma once

#include <cmath>
#include <vector>

#include "tamperlab/nn/tensor.hpp"

namespace tamperlab::nn {

// Bias-corrected adaptive moment estimation.
template <class T>
class Adam {
public:
    explicit Adam(double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(const std::vector<Param<T>*>& params) {
        if (m_.empty()) {
            for (const Param<T>* p : params) {
                m_.emplace_back(p->value.size(), T(0));
                v_.emplace_back(p->value.size(), T(0));
            }
        }
        if (m_.size() != params.size()) throw std::invalid_argument("optimizer/parameter set mismatch");
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
        for (std::size_t k = 0; k < params.size(); ++k) {
            Param<T>& p = *params[k];
            if (p.grad.size() != p.value.size()) throw std::invalid_argument("gradient shape mismatch");
            auto& m = m_[k];
            auto& v = v_[k];
            for (std::size_t i = 0; i < p.value.v.size(); ++i) {
                const double g = static_cast<double>(p.grad.v[i]);
                m[i] = static_cast<T>(beta1_ * m[i] + (1.0 - beta1_) * g);
                v[i] = static_cast<T>(beta2_ * v[i] + (1.0 - beta2_) * g * g);
                const double mhat = static_cast<double>(m[i]) / bc1;
                const double vhat = static_cast<double>(v[i]) / bc2;
                p.value.v[i] -= static_cast<T>(lr_ * mhat / (std::sqrt(vhat) + eps_));
            }
        }
    }

    static void zero_grad(const std::vector<Param<T>*>& params) {
        for (Param<T>* p : params) p->zero_grad();
    }

    std::int64_t step_count() const { return t_; }
    double learning_rate() const { return lr_; }

private:
    double lr_, beta1_, beta2_, eps_;
    std::int64_t t_ = 0;
    std::vector<std::vector<T>> m_, v_;
};

} // namespace tamperlab::nn
