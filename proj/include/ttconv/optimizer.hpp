#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace ttconv {

// lr(epoch) = initial_lr / decay_factor^floor(epoch / decay_every), epochs
// counted from 0; decay_every == 0 keeps the rate constant.
struct LrSchedule {
    double initial_lr = 0.1;
    double decay_factor = 10.0;
    std::size_t decay_every = 30;

    double at(std::size_t epoch) const;
};

// Classical momentum: v <- mu v - lr g; p <- p + v.
class SGDMomentum {
public:
    SGDMomentum(std::size_t dim, double momentum, LrSchedule schedule);

    void set_epoch(std::size_t epoch);
    void step(std::span<double> params, std::span<const double> grads);

    double learning_rate() const noexcept { return lr_; }
    double momentum() const noexcept { return momentum_; }
    std::span<const double> velocity() const noexcept { return velocity_; }

private:
    double momentum_;
    LrSchedule schedule_;
    double lr_;
    std::vector<double> velocity_;
};

}  // namespace ttconv
