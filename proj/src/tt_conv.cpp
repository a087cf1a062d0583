#include "ttconv/tt_conv.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "ttconv/errors.hpp"

namespace ttconv {

std::size_t ChannelFactorization::padded_in() const { return shape_product(c_factors); }
std::size_t ChannelFactorization::padded_out() const { return shape_product(s_factors); }

void ChannelFactorization::validate() const {
    if (c_factors.empty() || c_factors.size() != s_factors.size()) {
        throw ShapeError("channel factorization needs equal, nonzero numbers of C and S factors");
    }
    for (std::size_t f : c_factors) {
        if (f == 0) throw ShapeError("channel factors must be positive");
    }
    for (std::size_t f : s_factors) {
        if (f == 0) throw ShapeError("channel factors must be positive");
    }
    if (pad_c >= padded_in() || pad_s >= padded_out()) {
        throw ShapeError("channel padding must leave at least one real channel");
    }
}

namespace {

std::size_t prime_factor_count(std::size_t n) {
    std::size_t count = 0;
    for (std::size_t p = 2; p * p <= n; ++p) {
        while (n % p == 0) {
            n /= p;
            ++count;
        }
    }
    return count + (n > 1 ? 1 : 0);
}

std::size_t next_power_of_two(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p *= 2;
    return p;
}

std::size_t padded_channel_count(std::size_t n, std::size_t levels) {
    if (levels == 1 || n == 1 || prime_factor_count(n) >= levels) return n;
    return std::max(next_power_of_two(n), std::size_t{1} << levels);
}

}  // namespace

Factors balanced_factors(std::size_t n, std::size_t levels) {
    if (n == 0 || levels == 0) throw ArgumentError("balanced_factors: n and levels must be positive");
    if (n == 1) return Factors(levels, 1);
    if (levels == 1) return {n};

    Factors best;
    double best_ratio = 0.0;
    Factors current;
    // Non-increasing chains; the first chain found with the smallest
    // max/min ratio wins, which is the lexicographically largest one.
    std::function<void(std::size_t, std::size_t)> search = [&](std::size_t rem, std::size_t cap) {
        if (current.size() + 1 == levels) {
            if (rem < 2 || rem > cap) return;
            current.push_back(rem);
            const double ratio = static_cast<double>(current.front()) / static_cast<double>(rem);
            if (best.empty() || ratio < best_ratio) {
                best = current;
                best_ratio = ratio;
            }
            current.pop_back();
            return;
        }
        for (std::size_t f = std::min(cap, rem); f >= 2; --f) {
            if (rem % f != 0) continue;
            current.push_back(f);
            search(rem / f, f);
            current.pop_back();
        }
    };
    search(n, n);
    if (best.empty()) {
        throw ArgumentError(std::to_string(n) + " has no split into " + std::to_string(levels) +
                            " factors >= 2");
    }
    return best;
}

ChannelFactorization factorize_channels(std::size_t in_channels, std::size_t out_channels,
                                        std::size_t levels) {
    if (in_channels == 0 || out_channels == 0 || levels == 0) {
        throw ArgumentError("factorize_channels: C, S and d must be positive");
    }
    const std::size_t cp = padded_channel_count(in_channels, levels);
    const std::size_t sp = padded_channel_count(out_channels, levels);
    return ChannelFactorization{balanced_factors(cp, levels), balanced_factors(sp, levels),
                                cp - in_channels, sp - out_channels};
}

TTConvKernel::TTConvKernel(std::size_t filter, ChannelFactorization fact, TTTensor tt)
    : filter_(filter), fact_(std::move(fact)), tt_(std::move(tt)) {
    if (filter_ == 0) throw ShapeError("filter size must be positive");
    fact_.validate();
    const std::size_t d = fact_.levels();
    if (tt_.order() != d + 1) {
        throw ShapeError("TT-conv kernel needs d+1 = " + std::to_string(d + 1) + " TT modes");
    }
    if (tt_.mode_size(0) != filter_ * filter_) throw ShapeError("TT mode 0 must have l^2 entries");
    for (std::size_t k = 0; k < d; ++k) {
        if (tt_.mode_size(k + 1) != fact_.c_factors[k] * fact_.s_factors[k]) {
            throw ShapeError("TT mode " + std::to_string(k + 1) + " must have C_k*S_k entries");
        }
    }
}

TTConvKernel TTConvKernel::random(std::size_t filter, ChannelFactorization fact,
                                  const Ranks& ranks, std::mt19937_64& rng,
                                  double kernel_variance) {
    fact.validate();
    const std::size_t d = fact.levels();
    if (ranks.size() != d) throw ArgumentError("TT-conv needs d interior ranks");
    Shape modes{filter * filter};
    Ranks full{1};
    double paths = 1.0;
    for (std::size_t k = 0; k < d; ++k) {
        modes.push_back(fact.c_factors[k] * fact.s_factors[k]);
        full.push_back(ranks[k]);
        paths *= static_cast<double>(ranks[k]);
    }
    full.push_back(1);
    // Each element sums `paths` products of d+1 independent factors.
    const double core_var = std::pow(kernel_variance / paths, 1.0 / static_cast<double>(d + 1));
    TTTensor tt = TTTensor::random(std::move(modes), std::move(full), rng, std::sqrt(core_var));
    return TTConvKernel(filter, std::move(fact), std::move(tt));
}

ConstStridedMatrixMap TTConvKernel::g0(std::size_t x, std::size_t y) const {
    if (x >= filter_ || y >= filter_) throw IndexError("spatial index out of range");
    return tt_.slice(0, x + filter_ * y);
}

ConstStridedMatrixMap TTConvKernel::core_slice(std::size_t k, std::size_t c, std::size_t s) const {
    if (k == 0 || k > fact_.levels()) throw IndexError("channel core index out of range");
    const std::size_t ck = fact_.c_factors[k - 1];
    const std::size_t sk = fact_.s_factors[k - 1];
    if (c >= ck || s >= sk) throw IndexError("channel digit out of range");
    return tt_.slice(k, c * sk + s);
}

TTConvKernel ttconv_identity(const ChannelFactorization& fact) {
    fact.validate();
    if (fact.c_factors != fact.s_factors) {
        throw ArgumentError("identity TT-conv needs matching C and S factors");
    }
    Shape modes{1};
    std::vector<std::vector<double>> cores{{1.0}};
    for (std::size_t f : fact.c_factors) {
        modes.push_back(f * f);
        std::vector<double> core(f * f, 0.0);
        for (std::size_t c = 0; c < f; ++c) core[c * f + c] = 1.0;
        cores.push_back(std::move(core));
    }
    const std::size_t order = modes.size();
    return TTConvKernel(1, fact, TTTensor(std::move(modes), Ranks(order + 1, 1), std::move(cores)));
}

namespace {

Shape reshape_modes(std::size_t filter, const ChannelFactorization& fact) {
    Shape modes{filter * filter};
    for (std::size_t k = 0; k < fact.levels(); ++k) {
        modes.push_back(fact.c_factors[k] * fact.s_factors[k]);
    }
    return modes;
}

// Flat position of K(x, y, c, s) in the (d+1)-mode reshaped tensor.
std::size_t reshape_flat(std::size_t filter, const ChannelFactorization& fact, std::size_t x,
                         std::size_t y, std::size_t c, std::size_t s) {
    std::size_t flat = x + filter * y;
    for (std::size_t k = 0; k < fact.levels(); ++k) {
        const std::size_t ck = fact.c_factors[k];
        const std::size_t sk = fact.s_factors[k];
        flat = flat * (ck * sk) + (c % ck) * sk + s % sk;
        c /= ck;
        s /= sk;
    }
    return flat;
}

void check_fact_matches(const ConvKernel& k, const ChannelFactorization& fact) {
    fact.validate();
    if (fact.in_channels() != k.in_channels() || fact.out_channels() != k.out_channels()) {
        throw ShapeError("factorization covers " + std::to_string(fact.in_channels()) + "x" +
                         std::to_string(fact.out_channels()) + " channels, kernel has " +
                         std::to_string(k.in_channels()) + "x" + std::to_string(k.out_channels()));
    }
}

}  // namespace

DenseTensor ttconv_reshape(const ConvKernel& k, const ChannelFactorization& fact) {
    check_fact_matches(k, fact);
    const std::size_t l = k.size(), C = k.in_channels(), S = k.out_channels();
    DenseTensor t(reshape_modes(l, fact));
    const auto ker = k.tensor().data();
    for (std::size_t x = 0; x < l; ++x) {
        for (std::size_t y = 0; y < l; ++y) {
            for (std::size_t c = 0; c < C; ++c) {
                for (std::size_t s = 0; s < S; ++s) {
                    t[reshape_flat(l, fact, x, y, c, s)] = ker[((x * l + y) * C + c) * S + s];
                }
            }
        }
    }
    return t;
}

TTConvKernel ttconv_from_dense(const ConvKernel& k, const ChannelFactorization& fact,
                               const Truncation& truncation) {
    DenseTensor t = ttconv_reshape(k, fact);
    return TTConvKernel(k.size(), fact, tt_svd(t, truncation));
}

ConvKernel ttconv_to_dense(const TTConvKernel& tk) {
    const DenseTensor full = tt_full(tk.tt());
    const std::size_t l = tk.filter(), C = tk.in_channels(), S = tk.out_channels();
    const auto& fact = tk.factorization();
    DenseTensor k({l, l, C, S});
    for (std::size_t x = 0; x < l; ++x) {
        for (std::size_t y = 0; y < l; ++y) {
            for (std::size_t c = 0; c < C; ++c) {
                for (std::size_t s = 0; s < S; ++s) {
                    k[((x * l + y) * C + c) * S + s] = full[reshape_flat(l, fact, x, y, c, s)];
                }
            }
        }
    }
    return ConvKernel(std::move(k));
}

std::size_t ttconv_param_count(const TTConvKernel& tk) { return tt_param_count(tk.tt()); }

std::vector<ChainStep> ttconv_chain_steps(const TTConvKernel& tk, std::size_t pixels) {
    const auto& fact = tk.factorization();
    const std::size_t d = fact.levels();
    std::vector<ChainStep> steps(d);
    std::size_t prefix = 1;
    std::size_t suffix = fact.padded_in();
    for (std::size_t k = 0; k < d; ++k) {
        ChainStep& st = steps[k];
        st.batch = pixels;
        st.prefix = prefix;
        st.rank_in = tk.tt().rank(k + 1);
        st.rank_out = tk.tt().rank(k + 2);
        st.n_in = fact.c_factors[k];
        st.n_out = fact.s_factors[k];
        st.rest = suffix / st.n_in;
        st.order = SliceOrder::InputMajor;
        prefix *= st.n_out;
        suffix = st.rest;
    }
    return steps;
}

ConvOutput ttconv_forward(const ConvInput& x, const TTConvKernel& tk) {
    TTConvTrace trace;
    return ttconv_forward(x, tk, trace);
}

ConvOutput ttconv_forward(const ConvInput& x, const TTConvKernel& tk, TTConvTrace& trace) {
    const auto& fact = tk.factorization();
    const std::size_t l = tk.filter();
    const std::size_t C = x.channels();
    const std::size_t Cp = fact.padded_in();
    if (C > Cp) {
        throw ShapeError("input has " + std::to_string(C) + " channels, kernel accepts at most " +
                         std::to_string(Cp));
    }
    if (l > x.width() || l > x.height()) throw ShapeError("filter larger than input");
    const std::size_t W = x.width(), H = x.height();
    const std::size_t Wo = W - l + 1, Ho = H - l + 1;
    const std::size_t pixels = Wo * Ho;

    DenseTensor padded({W, H, Cp});
    for (std::size_t p = 0; p < W * H; ++p) {
        for (std::size_t c = 0; c < C; ++c) padded[p * Cp + c] = x.tensor()[p * C + c];
    }
    trace.width = W;
    trace.height = H;
    trace.patches = im2col(ConvInput(std::move(padded)), l);
    trace.states.clear();

    // Patch rows read as (pixel, channel) x (x + l*y) because the channel is
    // the slowest column digit of im2col.
    const std::size_t r1 = tk.tt().rank(1);
    ConstMatrixMap patch_view(trace.patches.data(), static_cast<Eigen::Index>(pixels * Cp),
                              static_cast<Eigen::Index>(l * l));
    ConstMatrixMap g0(tk.tt().core(0).data(), static_cast<Eigen::Index>(l * l),
                      static_cast<Eigen::Index>(r1));
    const RowMatrix z = patch_view * g0;

    std::vector<double> state(pixels * r1 * Cp);
    for (std::size_t p = 0; p < pixels; ++p) {
        for (std::size_t c = 0; c < Cp; ++c) {
            for (std::size_t a = 0; a < r1; ++a) {
                state[(p * r1 + a) * Cp + c] =
                    z(static_cast<Eigen::Index>(p * Cp + c), static_cast<Eigen::Index>(a));
            }
        }
    }

    const auto steps = ttconv_chain_steps(tk, pixels);
    for (std::size_t k = 0; k < steps.size(); ++k) {
        std::vector<double> next = chain_forward(steps[k], state, tk.tt().core(k + 1));
        trace.states.push_back(std::move(state));
        state = std::move(next);
    }

    const std::size_t Sp = fact.padded_out();
    const std::size_t S = tk.out_channels();
    DenseTensor y({Wo, Ho, S});
    for (std::size_t oy = 0; oy < Ho; ++oy) {
        for (std::size_t ox = 0; ox < Wo; ++ox) {
            const std::size_t p = ox + Wo * oy;
            for (std::size_t s = 0; s < S; ++s) y[(ox * Ho + oy) * S + s] = state[p * Sp + s];
        }
    }
    return ConvOutput(std::move(y));
}

DenseTensor ttconv_backward(const TTConvKernel& tk, const TTConvTrace& trace,
                            const DenseTensor& grad_out, std::span<double> grad_cores) {
    const auto& fact = tk.factorization();
    const std::size_t l = tk.filter();
    const std::size_t W = trace.width, H = trace.height;
    const std::size_t Wo = W - l + 1, Ho = H - l + 1;
    const std::size_t pixels = Wo * Ho;
    const std::size_t S = tk.out_channels(), Sp = fact.padded_out();
    const std::size_t Cp = fact.padded_in(), C = tk.in_channels();
    if (grad_out.shape() != Shape{Wo, Ho, S}) throw ShapeError("ttconv_backward: gradient shape");
    if (grad_cores.size() != tt_param_count(tk.tt())) {
        throw ShapeError("ttconv_backward: core gradient buffer size");
    }

    // Dummy output channels never reach the loss, so their gradient is zero.
    std::vector<double> grad(pixels * Sp, 0.0);
    for (std::size_t oy = 0; oy < Ho; ++oy) {
        for (std::size_t ox = 0; ox < Wo; ++ox) {
            const std::size_t p = ox + Wo * oy;
            for (std::size_t s = 0; s < S; ++s) grad[p * Sp + s] = grad_out[(ox * Ho + oy) * S + s];
        }
    }

    std::vector<std::size_t> offsets{0};
    for (std::size_t k = 0; k < tk.tt().order(); ++k) {
        offsets.push_back(offsets.back() + tk.tt().core(k).size());
    }
    const auto steps = ttconv_chain_steps(tk, pixels);
    for (std::size_t k = steps.size(); k-- > 0;) {
        grad = chain_backward(steps[k], trace.states[k], tk.tt().core(k + 1), grad,
                              grad_cores.subspan(offsets[k + 1], offsets[k + 2] - offsets[k + 1]));
    }

    const std::size_t r1 = tk.tt().rank(1);
    RowMatrix dz(static_cast<Eigen::Index>(pixels * Cp), static_cast<Eigen::Index>(r1));
    for (std::size_t p = 0; p < pixels; ++p) {
        for (std::size_t c = 0; c < Cp; ++c) {
            for (std::size_t a = 0; a < r1; ++a) {
                dz(static_cast<Eigen::Index>(p * Cp + c), static_cast<Eigen::Index>(a)) =
                    grad[(p * r1 + a) * Cp + c];
            }
        }
    }
    ConstMatrixMap patch_view(trace.patches.data(), static_cast<Eigen::Index>(pixels * Cp),
                              static_cast<Eigen::Index>(l * l));
    ConstMatrixMap g0(tk.tt().core(0).data(), static_cast<Eigen::Index>(l * l),
                      static_cast<Eigen::Index>(r1));
    MatrixMap dg0(grad_cores.data(), static_cast<Eigen::Index>(l * l), static_cast<Eigen::Index>(r1));
    dg0.noalias() += patch_view.transpose() * dz;

    RowMatrix dpatches = dz * g0.transpose();
    const RowMatrix dpatch_matrix =
        Eigen::Map<RowMatrix>(dpatches.data(), static_cast<Eigen::Index>(pixels),
                              static_cast<Eigen::Index>(l * l * Cp));
    const DenseTensor dpadded = col2im(dpatch_matrix, W, H, Cp, l);
    DenseTensor dx({W, H, C});
    for (std::size_t p = 0; p < W * H; ++p) {
        for (std::size_t c = 0; c < C; ++c) dx[p * C + c] = dpadded[p * Cp + c];
    }
    return dx;
}

TTMatrix pointwise_ttmatrix(const TTConvKernel& tk) {
    if (tk.filter() != 1) throw ArgumentError("pointwise_ttmatrix needs a 1x1 kernel");
    const auto& fact = tk.factorization();
    const TTTensor& tt = tk.tt();
    const std::size_t d = fact.levels();
    Shape modes;
    Ranks ranks{1};
    std::vector<std::vector<double>> cores;
    for (std::size_t k = 0; k < d; ++k) {
        const std::size_t ck = fact.c_factors[k], sk = fact.s_factors[k];
        const std::size_t r0 = k == 0 ? 1 : tt.rank(k + 1);
        const std::size_t r1 = tt.rank(k + 2);
        std::vector<double> core(r0 * ck * sk * r1);
        for (std::size_t c = 0; c < ck; ++c) {
            for (std::size_t s = 0; s < sk; ++s) {
                RowMatrix g = tt.slice(k + 1, c * sk + s);
                if (k == 0) g = (tt.slice(0, 0) * g).eval();
                for (std::size_t a = 0; a < r0; ++a) {
                    for (std::size_t b = 0; b < r1; ++b) {
                        core[(a * ck * sk + s * ck + c) * r1 + b] =
                            g(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
                    }
                }
            }
        }
        modes.push_back(ck * sk);
        ranks.push_back(r1);
        cores.push_back(std::move(core));
    }
    return TTMatrix(fact.s_factors, fact.c_factors,
                    TTTensor(std::move(modes), std::move(ranks), std::move(cores)));
}

NaiveTTConvKernel naive_ttconv_from_dense(const ConvKernel& k, const Truncation& truncation) {
    return NaiveTTConvKernel{tt_svd(k.tensor(), truncation)};
}

ConvKernel naive_ttconv_to_dense(const NaiveTTConvKernel& nk) {
    return ConvKernel(tt_full(nk.tt));
}

ConvOutput naive_ttconv_forward(const ConvInput& x, const NaiveTTConvKernel& nk) {
    return conv2d_direct(x, naive_ttconv_to_dense(nk));
}

double compression_ratio(std::size_t dense_params, std::size_t compressed_params) {
    if (dense_params == 0 || compressed_params == 0) {
        throw ArgumentError("compression_ratio: parameter counts must be positive");
    }
    return static_cast<double>(dense_params) / static_cast<double>(compressed_params);
}

}  // namespace ttconv
