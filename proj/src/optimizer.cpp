#include "ttconv/optimizer.hpp"

#include <cmath>
#include <string>

#include "ttconv/errors.hpp"

namespace ttconv {

double LrSchedule::at(std::size_t epoch) const {
    if (decay_every == 0) return initial_lr;
    return initial_lr / std::pow(decay_factor, static_cast<double>(epoch / decay_every));
}

SGDMomentum::SGDMomentum(std::size_t dim, double momentum, LrSchedule schedule)
    : momentum_(momentum), schedule_(schedule), lr_(schedule.initial_lr), velocity_(dim, 0.0) {
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ArgumentError("momentum must lie in [0, 1)");
    // A zero rate is allowed so a run can be checked for a flat loss.
    if (!(schedule.initial_lr >= 0.0)) throw ArgumentError("learning rate must be non-negative");
    if (!(schedule.decay_factor > 0.0)) throw ArgumentError("decay factor must be positive");
}

void SGDMomentum::set_epoch(std::size_t epoch) { lr_ = schedule_.at(epoch); }

void SGDMomentum::step(std::span<double> params, std::span<const double> grads) {
    if (params.size() != velocity_.size() || grads.size() != velocity_.size()) {
        throw ShapeError("optimizer holds " + std::to_string(velocity_.size()) + " entries, got " +
                         std::to_string(params.size()) + " params and " +
                         std::to_string(grads.size()) + " grads");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        velocity_[i] = momentum_ * velocity_[i] - lr_ * grads[i];
        params[i] += velocity_[i];
    }
}

}  // namespace ttconv
