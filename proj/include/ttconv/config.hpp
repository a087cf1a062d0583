#pragma once

#include <cstddef>
#include <cstdint>
#include <istream>
#include <map>
#include <string>
#include <vector>

#include "ttconv/dataset.hpp"
#include "ttconv/network.hpp"
#include "ttconv/trainer.hpp"
#include "ttconv/tt_conv.hpp"

namespace ttconv {

// One `layer = kind arg... key=value...` line.
struct LayerSpec {
    std::string kind;
    std::vector<std::string> args;
    std::map<std::string, std::string> options;
    std::size_t line = 0;
};

// Flat key=value experiment description. Recognized keys: name, seed,
// epochs, lr, momentum, decay_every, decay_factor, batch_size, data_seed,
// train_size, test_size, noise, input (WxHxC), layer (repeatable), freeze
// (comma list of layer indices). '#' starts a comment.
struct ExperimentConfig {
    std::string name = "model";
    std::uint64_t seed = 1;
    TrainOptions train;
    SyntheticOptions data;
    Shape input{16, 16, 1};
    std::vector<LayerSpec> layers;
    std::vector<std::size_t> frozen;
};

ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::string& path);

// Builds the layer stack, drawing initial weights from `seed`. Layer kinds:
//   pad P | conv L S | ttconv L S ranks=r1,..,rd [factors=C1x..:S1x.. | levels=d]
//   naive_ttconv L S ranks=r1,r2,r3 | fc N | ttfc N ranks=.. factors=I1x..:O1x..
//   relu | bn | maxpool [K STRIDE] | avgpool K
// Input channel counts are inferred from the preceding layer.
Network build_network(const ExperimentConfig& config, std::uint64_t seed);
inline Network build_network(const ExperimentConfig& config) {
    return build_network(config, config.seed);
}

// "a,b,c" -> {a, b, c}; ParseError on anything but positive integers.
std::vector<std::size_t> parse_size_list(const std::string& text, char separator = ',');

struct FactorSpec {
    Factors in;
    Factors out;
};
// "C1xC2:S1xS2"
FactorSpec parse_factor_spec(const std::string& text);

// Pads C and S up to the factor products.
ChannelFactorization factorization_from_spec(const FactorSpec& spec, std::size_t in_channels,
                                             std::size_t out_channels);

}  // namespace ttconv
