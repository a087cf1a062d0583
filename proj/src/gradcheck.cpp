#include "ttconv/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace ttconv {

bool GradcheckReport::passed() const {
    return std::all_of(rows.begin(), rows.end(), [](const GradcheckRow& r) { return r.pass; });
}

namespace {

double entry_error(double analytic, double numeric, double absolute_below) {
    const double scale = std::max(std::abs(analytic), std::abs(numeric));
    const double diff = std::abs(analytic - numeric);
    return scale < absolute_below ? diff : diff / scale;
}

void corrupt_block(std::span<double> g) {
    if (!g.empty()) g[0] += 1e-3 + 0.1 * std::abs(g[0]);
}

}  // namespace

GradcheckReport gradcheck(Network& net, const DenseTensor& batch, std::span<const int> labels,
                          const GradcheckOptions& options) {
    GradcheckReport report;
    report.tolerance = options.tolerance;
    if (net.size() == 0) return report;

    net.forward(batch, labels, Mode::Train);
    std::vector<double> analytic = net.backward();
    const std::vector<double> params = net.parameters();
    const double h = options.step;

    std::vector<double> probe = params;
    auto loss_at = [&](std::size_t i, double value) {
        probe[i] = value;
        net.set_parameters(probe);
        const long double f =
            SoftmaxCrossEntropy::loss_extended(net.forward(batch, labels, Mode::Train).logits, labels);
        probe[i] = params[i];
        return f;
    };

    for (std::size_t l = 0; l < net.size(); ++l) {
        const std::size_t begin = net.param_offset(l);
        const std::size_t end = net.param_offset(l + 1);
        const auto block = std::span<double>(analytic).subspan(begin, end - begin);
        if (options.corrupt) corrupt_block(block);
        GradcheckRow row{std::to_string(l) + ":" + net.layer(l).kind(), end - begin, 0.0, true};
        for (std::size_t i = begin; i < end; ++i) {
            const auto numeric = static_cast<double>((loss_at(i, params[i] + h) - loss_at(i, params[i] - h)) /
                                                     (2.0L * static_cast<long double>(h)));
            row.max_error = std::max(row.max_error, entry_error(analytic[i], numeric, options.absolute_below));
        }
        row.pass = row.max_error <= options.tolerance;
        report.rows.push_back(row);
    }
    net.set_parameters(params);
    return report;
}

}  // namespace ttconv
