#include "ttconv/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "ttconv/errors.hpp"

namespace ttconv {

namespace {

std::size_t correct(const DenseTensor& logits, std::span<const int> labels) {
    const std::size_t k = logits.dim(1);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const auto row = logits.data().subspan(i * k, k);
        const auto best = std::max_element(row.begin(), row.end()) - row.begin();
        if (best == labels[i]) ++hits;
    }
    return hits;
}

std::vector<int> labels_of(const Dataset& data, std::span<const std::size_t> idx) {
    std::vector<int> out(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) out[i] = data.labels[idx[i]];
    return out;
}

}  // namespace

double evaluate_accuracy(Network& net, const Dataset& data, std::size_t batch_size) {
    if (data.size() == 0) return 0.0;
    if (batch_size == 0) throw ArgumentError("batch size must be positive");
    std::size_t hits = 0;
    std::vector<std::size_t> idx;
    for (std::size_t start = 0; start < data.size(); start += batch_size) {
        idx.resize(std::min(batch_size, data.size() - start));
        std::iota(idx.begin(), idx.end(), start);
        hits += correct(net.logits(data.gather(idx), Mode::Eval), labels_of(data, idx));
    }
    return 100.0 * static_cast<double>(hits) / static_cast<double>(data.size());
}

std::vector<EpochRecord> train(Network& net, const Dataset& train_set, const Dataset& test_set,
                               const TrainOptions& options,
                               const std::function<void(const EpochRecord&)>& on_epoch) {
    if (options.batch_size == 0) throw ArgumentError("batch size must be positive");
    if (train_set.size() == 0) throw ArgumentError("training set is empty");
    SGDMomentum opt(net.param_count(), options.momentum, options.schedule);
    std::mt19937_64 rng(options.seed);

    std::vector<bool> trainable;
    for (std::size_t l = 0; l < net.size(); ++l) {
        trainable.insert(trainable.end(), net.layer(l).params().size(), !net.layer(l).frozen);
    }

    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<EpochRecord> log;
    std::vector<double> params = net.parameters();
    const std::vector<double> initial = params;
    for (std::size_t epoch = 1; epoch <= options.epochs; ++epoch) {
        opt.set_epoch(epoch - 1);
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        std::size_t hits = 0;
        for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
            const std::size_t n = std::min(options.batch_size, order.size() - start);
            const std::span<const std::size_t> idx(order.data() + start, n);
            const std::vector<int> labels = labels_of(train_set, idx);
            const ForwardResult fr = net.forward(train_set.gather(idx), labels, Mode::Train);
            if (!std::isfinite(fr.loss)) {
                throw DivergenceError("loss diverged in epoch " + std::to_string(epoch), epoch);
            }
            loss_sum += fr.loss * static_cast<double>(n);
            hits += correct(fr.logits, labels);
            std::vector<double> grads = net.backward();
            for (std::size_t i = 0; i < grads.size(); ++i) {
                if (!trainable[i]) grads[i] = 0.0;
            }
            opt.step(params, grads);
            // Zero gradients alone would still turn -0.0 into +0.0.
            for (std::size_t i = 0; i < params.size(); ++i) {
                if (!trainable[i]) params[i] = initial[i];
            }
            net.set_parameters(params);
        }
        EpochRecord rec;
        rec.epoch = epoch;
        rec.lr = opt.learning_rate();
        rec.train_loss = loss_sum / static_cast<double>(order.size());
        rec.train_acc = 100.0 * static_cast<double>(hits) / static_cast<double>(order.size());
        rec.test_acc = evaluate_accuracy(net, test_set, options.batch_size);
        log.push_back(rec);
        if (on_epoch) on_epoch(rec);
    }
    return log;
}

}  // namespace ttconv
