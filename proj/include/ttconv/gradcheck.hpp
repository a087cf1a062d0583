#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ttconv/network.hpp"

namespace ttconv {

struct GradcheckRow {
    std::string block;  // "<index>:<kind>"
    std::size_t entries = 0;
    double max_error = 0.0;
    bool pass = true;
};

struct GradcheckReport {
    std::vector<GradcheckRow> rows;
    double tolerance = 0.0;

    bool passed() const;
};

struct GradcheckOptions {
    double step = 1e-6;
    double tolerance = 1e-5;
    // Entries whose analytic and numeric values are both below this are
    // compared absolutely.
    double absolute_below = 1e-8;
    // Perturbs the analytic gradient; the check must then fail.
    bool corrupt = false;
};

// Central differences of the training-mode loss (evaluated in long double)
// against Network::backward, one row per layer; parameter-free layers report
// 0 entries. Parameters are restored afterwards.
GradcheckReport gradcheck(Network& net, const DenseTensor& batch, std::span<const int> labels,
                          const GradcheckOptions& options = {});

}  // namespace ttconv
