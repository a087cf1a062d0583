#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "ttconv/dataset.hpp"
#include "ttconv/network.hpp"
#include "ttconv/optimizer.hpp"

namespace ttconv {

struct TrainOptions {
    std::size_t epochs = 30;
    std::size_t batch_size = 128;
    std::uint64_t seed = 1;  // drives shuffling
    double momentum = 0.9;
    LrSchedule schedule;
};

// Accuracies are percentages. Epochs count from 1.
struct EpochRecord {
    std::size_t epoch = 0;
    double lr = 0.0;
    double train_loss = 0.0;
    double train_acc = 0.0;
    double test_acc = 0.0;
};

// Eval-mode top-1 accuracy in percent.
double evaluate_accuracy(Network& net, const Dataset& data, std::size_t batch_size = 128);

// Minibatch SGD with momentum. Layers flagged `frozen` keep their parameters
// bit for bit. Throws DivergenceError if a batch loss is not finite.
std::vector<EpochRecord> train(Network& net, const Dataset& train_set, const Dataset& test_set,
                               const TrainOptions& options,
                               const std::function<void(const EpochRecord&)>& on_epoch = {});

}  // namespace ttconv
