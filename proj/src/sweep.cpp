#include "ttconv/sweep.hpp"

#include <algorithm>

#include "ttconv/errors.hpp"

namespace ttconv {

Ranks full_tt_ranks(const Shape& modes) {
    Ranks r;
    const std::size_t total = shape_product(modes);
    std::size_t left = 1;
    for (std::size_t k = 0; k + 1 < modes.size(); ++k) {
        left *= modes[k];
        r.push_back(std::min(left, total / left));
    }
    return r;
}

std::size_t tt_params_for(const Shape& modes, const Ranks& interior) {
    if (interior.size() + 1 != modes.size()) throw ArgumentError("need d-1 interior ranks");
    std::size_t n = 0;
    for (std::size_t k = 0; k < modes.size(); ++k) {
        const std::size_t a = k == 0 ? 1 : interior[k - 1];
        const std::size_t b = k + 1 == modes.size() ? 1 : interior[k];
        n += a * modes[k] * b;
    }
    return n;
}

std::vector<Ranks> rank_grid(const Shape& modes, const Ranks& limits) {
    if (limits.size() + 1 != modes.size()) throw ArgumentError("need d-1 rank limits");
    std::vector<Ranks> grid;
    if (limits.empty()) return {Ranks{}};
    Ranks r(limits.size(), 1);
    for (std::size_t lim : limits) {
        if (lim == 0) throw ArgumentError("rank limits must be positive");
    }
    while (true) {
        grid.push_back(r);
        std::size_t k = r.size();
        while (k-- > 0) {
            if (++r[k] <= limits[k]) break;
            r[k] = 1;
        }
        if (k == static_cast<std::size_t>(-1)) break;
    }
    std::stable_sort(grid.begin(), grid.end(), [&](const Ranks& a, const Ranks& b) {
        return tt_params_for(modes, a) < tt_params_for(modes, b);
    });
    return grid;
}

namespace {

RankPoint evaluate(const DenseTensor& a, const Ranks& r) {
    const TTTensor tt = tt_svd(a, Truncation::ranks(r));
    return {tt.ranks().size() > 2 ? Ranks(tt.ranks().begin() + 1, tt.ranks().end() - 1) : Ranks{},
            tt_param_count(tt), relative_error(tt_full(tt), a)};
}

}  // namespace

std::vector<RankPoint> sweep_tt(const DenseTensor& a, const Ranks& limits) {
    std::vector<RankPoint> out;
    for (const Ranks& r : rank_grid(a.shape(), limits)) out.push_back(evaluate(a, r));
    return out;
}

std::optional<RankPoint> cheapest_within(const DenseTensor& a, const Ranks& limits, double budget) {
    for (const Ranks& r : rank_grid(a.shape(), limits)) {
        RankPoint p = evaluate(a, r);
        if (p.rel_error <= budget) return p;
    }
    return std::nullopt;
}

std::vector<RankPoint> pareto_frontier(std::vector<RankPoint> points) {
    std::stable_sort(points.begin(), points.end(), [](const RankPoint& a, const RankPoint& b) {
        return a.params != b.params ? a.params < b.params : a.rel_error < b.rel_error;
    });
    std::vector<RankPoint> front;
    for (const RankPoint& p : points) {
        if (front.empty() || p.rel_error < front.back().rel_error) front.push_back(p);
    }
    return front;
}

}  // namespace ttconv
