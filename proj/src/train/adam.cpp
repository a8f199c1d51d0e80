#include "train/adam.hpp"

#include <cmath>

namespace vmd {

Adam::Adam(std::vector<Param*> params, double beta1, double beta2, double eps)
    : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const Param* p : params_) {
        m_.emplace_back(p->numel(), 0.0);
        v_.emplace_back(p->numel(), 0.0);
    }
}

void Adam::step(double lr, double weight_decay) {
    ++step_;
    double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(step_));
    double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(step_));
    for (size_t pi = 0; pi < params_.size(); ++pi) {
        Param& p = *params_[pi];
        auto& m = m_[pi];
        auto& v = v_[pi];
        for (size_t i = 0; i < p.numel(); ++i) {
            if (weight_decay != 0.0) p.value[i] -= lr * weight_decay * p.value[i];
            double g = p.grad[i];
            m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
            v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
            double m_hat = m[i] / bc1;
            double v_hat = v[i] / bc2;
            p.value[i] -= lr * m_hat / (std::sqrt(v_hat) + eps_);
        }
    }
}

void Adam::save(Checkpoint& ckpt) const {
    for (size_t pi = 0; pi < params_.size(); ++pi) {
        const Param& p = *params_[pi];
        ckpt.add("adam.m." + p.name, p.shape, m_[pi]);
        ckpt.add("adam.v." + p.name, p.shape, v_[pi]);
    }
    ckpt.meta["adam_step"] = step_;
}

void Adam::load(const Checkpoint& ckpt) {
    for (size_t pi = 0; pi < params_.size(); ++pi) {
        const Param& p = *params_[pi];
        const auto& em = ckpt.require("adam.m." + p.name);
        const auto& ev = ckpt.require("adam.v." + p.name);
        if (em.shape != p.shape || ev.shape != p.shape) {
            throw IoError("adam state shape mismatch for " + p.name);
        }
        m_[pi] = em.data;
        v_[pi] = ev.data;
    }
    step_ = ckpt.meta.at("adam_step").get<uint64_t>();
}

}  // namespace vmd
