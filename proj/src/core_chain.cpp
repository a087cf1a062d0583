#include "ttconv/core_chain.hpp"

#include "ttconv/errors.hpp"
#include "ttconv/linalg.hpp"

namespace ttconv {

namespace {

void check_sizes(const ChainStep& st, std::size_t state, std::size_t core) {
    if (state != st.input_size()) throw ShapeError("chain step: state size mismatch");
    if (core != st.core_size()) throw ShapeError("chain step: core size mismatch");
}

std::size_t slice_of(const ChainStep& st, std::size_t c, std::size_t s) {
    return st.order == SliceOrder::InputMajor ? c * st.n_out + s : s * st.n_in + c;
}

// Gathers the state into rows (batch, prefix, rest) and columns (rank, digit).
RowMatrix gather_rows(const ChainStep& st, std::span<const double> state) {
    const std::size_t blocks = st.batch * st.prefix;
    const std::size_t suffix = st.n_in * st.rest;
    RowMatrix a(static_cast<Eigen::Index>(blocks * st.rest),
                static_cast<Eigen::Index>(st.rank_in * st.n_in));
    for (std::size_t bp = 0; bp < blocks; ++bp) {
        for (std::size_t r = 0; r < st.rank_in; ++r) {
            const double* src = state.data() + (bp * st.rank_in + r) * suffix;
            for (std::size_t q = 0; q < st.rest; ++q) {
                double* dst = a.row(static_cast<Eigen::Index>(bp * st.rest + q)).data() + r * st.n_in;
                for (std::size_t c = 0; c < st.n_in; ++c) dst[c] = src[q * st.n_in + c];
            }
        }
    }
    return a;
}

// Core as a (rank_in * n_in) x (n_out * rank_out) matrix.
RowMatrix core_matrix(const ChainStep& st, std::span<const double> core) {
    const std::size_t slices = st.n_in * st.n_out;
    RowMatrix b(static_cast<Eigen::Index>(st.rank_in * st.n_in),
                static_cast<Eigen::Index>(st.n_out * st.rank_out));
    for (std::size_t ra = 0; ra < st.rank_in; ++ra) {
        for (std::size_t c = 0; c < st.n_in; ++c) {
            for (std::size_t s = 0; s < st.n_out; ++s) {
                const double* g = core.data() + (ra * slices + slice_of(st, c, s)) * st.rank_out;
                for (std::size_t rb = 0; rb < st.rank_out; ++rb) {
                    b(static_cast<Eigen::Index>(ra * st.n_in + c),
                      static_cast<Eigen::Index>(s * st.rank_out + rb)) = g[rb];
                }
            }
        }
    }
    return b;
}

std::size_t output_offset(const ChainStep& st, std::size_t b, std::size_t p, std::size_t s,
                          std::size_t rb, std::size_t q) {
    const std::size_t new_prefix = st.prefix * st.n_out;
    return ((b * new_prefix + p + s * st.prefix) * st.rank_out + rb) * st.rest + q;
}

}  // namespace

std::vector<double> chain_forward(const ChainStep& st, std::span<const double> state,
                                  std::span<const double> core) {
    check_sizes(st, state.size(), core.size());
    const RowMatrix r = gather_rows(st, state) * core_matrix(st, core);
    std::vector<double> out(st.output_size());
    for (std::size_t b = 0; b < st.batch; ++b) {
        for (std::size_t p = 0; p < st.prefix; ++p) {
            for (std::size_t q = 0; q < st.rest; ++q) {
                const double* row =
                    r.row(static_cast<Eigen::Index>((b * st.prefix + p) * st.rest + q)).data();
                for (std::size_t s = 0; s < st.n_out; ++s) {
                    for (std::size_t rb = 0; rb < st.rank_out; ++rb) {
                        out[output_offset(st, b, p, s, rb, q)] = row[s * st.rank_out + rb];
                    }
                }
            }
        }
    }
    return out;
}

std::vector<double> chain_backward(const ChainStep& st, std::span<const double> state,
                                   std::span<const double> core,
                                   std::span<const double> grad_out,
                                   std::span<double> grad_core) {
    check_sizes(st, state.size(), core.size());
    if (grad_out.size() != st.output_size()) throw ShapeError("chain step: gradient size mismatch");
    if (grad_core.size() != st.core_size()) throw ShapeError("chain step: core gradient size mismatch");

    RowMatrix dr(static_cast<Eigen::Index>(st.batch * st.prefix * st.rest),
                 static_cast<Eigen::Index>(st.n_out * st.rank_out));
    for (std::size_t b = 0; b < st.batch; ++b) {
        for (std::size_t p = 0; p < st.prefix; ++p) {
            for (std::size_t q = 0; q < st.rest; ++q) {
                double* row = dr.row(static_cast<Eigen::Index>((b * st.prefix + p) * st.rest + q)).data();
                for (std::size_t s = 0; s < st.n_out; ++s) {
                    for (std::size_t rb = 0; rb < st.rank_out; ++rb) {
                        row[s * st.rank_out + rb] = grad_out[output_offset(st, b, p, s, rb, q)];
                    }
                }
            }
        }
    }

    const RowMatrix a = gather_rows(st, state);
    const RowMatrix db = a.transpose() * dr;
    const std::size_t slices = st.n_in * st.n_out;
    for (std::size_t ra = 0; ra < st.rank_in; ++ra) {
        for (std::size_t c = 0; c < st.n_in; ++c) {
            for (std::size_t s = 0; s < st.n_out; ++s) {
                double* g = grad_core.data() + (ra * slices + slice_of(st, c, s)) * st.rank_out;
                for (std::size_t rb = 0; rb < st.rank_out; ++rb) {
                    g[rb] += db(static_cast<Eigen::Index>(ra * st.n_in + c),
                                static_cast<Eigen::Index>(s * st.rank_out + rb));
                }
            }
        }
    }

    const RowMatrix da = dr * core_matrix(st, core).transpose();
    std::vector<double> grad_state(st.input_size());
    const std::size_t blocks = st.batch * st.prefix;
    const std::size_t suffix = st.n_in * st.rest;
    for (std::size_t bp = 0; bp < blocks; ++bp) {
        for (std::size_t r = 0; r < st.rank_in; ++r) {
            double* dst = grad_state.data() + (bp * st.rank_in + r) * suffix;
            for (std::size_t q = 0; q < st.rest; ++q) {
                const double* src = da.row(static_cast<Eigen::Index>(bp * st.rest + q)).data() + r * st.n_in;
                for (std::size_t c = 0; c < st.n_in; ++c) dst[q * st.n_in + c] = src[c];
            }
        }
    }
    return grad_state;
}

}  // namespace ttconv
