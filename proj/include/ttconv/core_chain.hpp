#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace ttconv {

// How a core's slice index pairs an input digit c with an output digit s.
enum class SliceOrder {
    InputMajor,   // slice = c * n_out + s (TT-conv kernels)
    OutputMajor,  // slice = s * n_in + c (TT-matrices, y = A x)
};

// One core applied to a contraction state laid out as
// [batch][prefix][rank][suffix]. prefix enumerates the output digits already
// produced (little-endian); suffix enumerates the input digits not yet
// consumed, current digit fastest. The step consumes one input digit of size
// n_in and emits one output digit of size n_out, which becomes the most
// significant prefix digit.
struct ChainStep {
    std::size_t batch = 1;
    std::size_t prefix = 1;
    std::size_t rank_in = 1;
    std::size_t rank_out = 1;
    std::size_t n_in = 1;
    std::size_t n_out = 1;
    std::size_t rest = 1;  // suffix size after this step
    SliceOrder order = SliceOrder::InputMajor;

    std::size_t input_size() const { return batch * prefix * rank_in * n_in * rest; }
    std::size_t output_size() const { return batch * prefix * n_out * rank_out * rest; }
    std::size_t core_size() const { return rank_in * n_in * n_out * rank_out; }
};

std::vector<double> chain_forward(const ChainStep& step, std::span<const double> state,
                                  std::span<const double> core);

// Accumulates dL/dcore into grad_core and returns dL/dstate.
std::vector<double> chain_backward(const ChainStep& step, std::span<const double> state,
                                   std::span<const double> core,
                                   std::span<const double> grad_out,
                                   std::span<double> grad_core);

}  // namespace ttconv
