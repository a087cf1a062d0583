#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "ttconv/dense_tensor.hpp"
#include "ttconv/tt_tensor.hpp"

namespace ttconv {

struct RankPoint {
    Ranks ranks;  // interior ranks
    std::size_t params = 0;
    double rel_error = 0.0;
};

// Largest useful interior ranks: min(prod n_<=k, prod n_>k).
Ranks full_tt_ranks(const Shape& modes);

// tt_param_count for the given modes and interior ranks.
std::size_t tt_params_for(const Shape& modes, const Ranks& interior);

// Every interior-rank tuple with 1 <= r_k <= limits[k], in ascending
// parameter count (ties in lexicographic rank order).
std::vector<Ranks> rank_grid(const Shape& modes, const Ranks& limits);

// tt_svd at every grid point.
std::vector<RankPoint> sweep_tt(const DenseTensor& a, const Ranks& limits);

// Cheapest grid point whose tt_svd error is within budget.
std::optional<RankPoint> cheapest_within(const DenseTensor& a, const Ranks& limits, double budget);

// Points not beaten on both parameters and error, by ascending parameters.
std::vector<RankPoint> pareto_frontier(std::vector<RankPoint> points);

}  // namespace ttconv
