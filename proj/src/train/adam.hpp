#pragma once

#include <vector>

#include "nets/checkpoint.hpp"
#include "nets/model.hpp"

namespace vmd {

// Adam with bias correction and decoupled weight decay (applied to the value
// before the moment update, never folded into the gradient).
class Adam {
public:
    explicit Adam(std::vector<Param*> params, double beta1 = 0.9, double beta2 = 0.999,
                  double eps = 1e-8);

    void step(double lr, double weight_decay);
    uint64_t step_count() const { return step_; }

    void save(Checkpoint& ckpt) const;
    void load(const Checkpoint& ckpt);

private:
    std::vector<Param*> params_;
    std::vector<std::vector<double>> m_, v_;
    double beta1_, beta2_, eps_;
    uint64_t step_ = 0;
};

}  // namespace vmd
