#pragma once

#include <cstdint>
#include <vector>

#include "core/nn.hpp"

namespace lfb {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Adam with per-parameter first/second moment state. Freezing is enforced
// here: a frozen parameter's value, moments, and gradient buffer are left
// bit-identical by step(). Parameters whose gradient buffer was never touched
// this step are likewise skipped (nothing to apply).
class Adam {
public:
    explicit Adam(std::vector<Parameter*> params, AdamConfig cfg = {});

    void step();
    void zero_grad();

    std::int64_t steps_taken() const { return t_; }
    const AdamConfig& config() const { return cfg_; }

private:
    struct Slot {
        Parameter* p;
        Tensor4 m, v;
    };
    std::vector<Slot> slots_;
    AdamConfig cfg_;
    std::int64_t t_ = 0;
};

}  // namespace lfb
