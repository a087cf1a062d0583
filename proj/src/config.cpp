#include "ttconv/config.hpp"

#include <charconv>
#include <fstream>
#include <random>
#include <sstream>

#include "ttconv/errors.hpp"

namespace ttconv {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string at_line(std::size_t line) { return "line " + std::to_string(line) + ": "; }

template <typename T>
T parse_number(const std::string& text, const std::string& what) {
    T value{};
    const char* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc() || ptr != end || text.empty()) {
        throw ParseError("bad " + what + " '" + text + "'");
    }
    return value;
}

double parse_real(const std::string& text, const std::string& what) {
    try {
        std::size_t used = 0;
        const double v = std::stod(text, &used);
        if (used == text.size()) return v;
    } catch (const std::exception&) {
    }
    throw ParseError("bad " + what + " '" + text + "'");
}

LayerSpec parse_layer(const std::string& text, std::size_t line) {
    std::istringstream words(text);
    LayerSpec spec;
    spec.line = line;
    std::string w;
    while (words >> w) {
        if (spec.kind.empty()) {
            spec.kind = w;
        } else if (const auto eq = w.find('='); eq != std::string::npos) {
            spec.options[w.substr(0, eq)] = w.substr(eq + 1);
        } else {
            spec.args.push_back(w);
        }
    }
    if (spec.kind.empty()) throw ParseError(at_line(line) + "empty layer line");
    return spec;
}

}  // namespace

std::vector<std::size_t> parse_size_list(const std::string& text, char separator) {
    std::vector<std::size_t> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = text.find(separator, start);
        const std::string item = trim(text.substr(start, pos - start));
        const auto v = parse_number<std::size_t>(item, "size");
        if (v == 0) throw ParseError("sizes must be positive, got 0");
        out.push_back(v);
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return out;
}

FactorSpec parse_factor_spec(const std::string& text) {
    const auto colon = text.find(':');
    if (colon == std::string::npos) throw ParseError("factor spec '" + text + "' needs C1x..:S1x..");
    FactorSpec spec{parse_size_list(text.substr(0, colon), 'x'),
                    parse_size_list(text.substr(colon + 1), 'x')};
    if (spec.in.size() != spec.out.size()) {
        throw ParseError("factor spec '" + text + "' has unequal digit counts");
    }
    return spec;
}

ChannelFactorization factorization_from_spec(const FactorSpec& spec, std::size_t in_channels,
                                             std::size_t out_channels) {
    const std::size_t cp = shape_product(spec.in), sp = shape_product(spec.out);
    if (cp < in_channels || sp < out_channels) {
        throw ShapeError("factors cover " + std::to_string(cp) + "x" + std::to_string(sp) +
                         " channels but the layer has " + std::to_string(in_channels) + "x" +
                         std::to_string(out_channels));
    }
    ChannelFactorization fact{spec.in, spec.out, cp - in_channels, sp - out_channels};
    fact.validate();
    return fact;
}

ExperimentConfig parse_config(std::istream& in) {
    ExperimentConfig cfg;
    std::string raw;
    std::size_t line = 0;
    while (std::getline(in, raw)) {
        ++line;
        const std::string text = trim(raw.substr(0, raw.find('#')));
        if (text.empty()) continue;
        const auto eq = text.find('=');
        if (eq == std::string::npos) throw ParseError(at_line(line) + "expected key = value");
        const std::string key = trim(text.substr(0, eq));
        const std::string value = trim(text.substr(eq + 1));
        try {
            if (key == "name") {
                if (value.empty()) throw ParseError("empty name");
                cfg.name = value;
            } else if (key == "seed") {
                cfg.seed = parse_number<std::uint64_t>(value, "seed");
                cfg.train.seed = cfg.seed;
            } else if (key == "epochs") {
                cfg.train.epochs = parse_number<std::size_t>(value, "epochs");
            } else if (key == "lr") {
                cfg.train.schedule.initial_lr = parse_real(value, "lr");
            } else if (key == "momentum") {
                cfg.train.momentum = parse_real(value, "momentum");
            } else if (key == "decay_every") {
                cfg.train.schedule.decay_every = parse_number<std::size_t>(value, "decay_every");
            } else if (key == "decay_factor") {
                cfg.train.schedule.decay_factor = parse_real(value, "decay_factor");
            } else if (key == "batch_size") {
                cfg.train.batch_size = parse_number<std::size_t>(value, "batch_size");
                if (cfg.train.batch_size == 0) throw ParseError("batch_size must be positive");
            } else if (key == "data_seed") {
                cfg.data.seed = parse_number<std::uint64_t>(value, "data_seed");
            } else if (key == "train_size") {
                cfg.data.train_size = parse_number<std::size_t>(value, "train_size");
            } else if (key == "test_size") {
                cfg.data.test_size = parse_number<std::size_t>(value, "test_size");
            } else if (key == "noise") {
                cfg.data.noise = parse_real(value, "noise");
            } else if (key == "input") {
                cfg.input = parse_size_list(value, 'x');
                if (cfg.input.size() != 3) throw ParseError("input must be WxHxC");
                cfg.data.side = cfg.input[0];
            } else if (key == "layer") {
                cfg.layers.push_back(parse_layer(value, line));
            } else if (key == "freeze") {
                for (std::size_t start = 0;;) {
                    const auto pos = value.find(',', start);
                    cfg.frozen.push_back(
                        parse_number<std::size_t>(trim(value.substr(start, pos - start)), "layer index"));
                    if (pos == std::string::npos) break;
                    start = pos + 1;
                }
            } else {
                throw ParseError("unknown key '" + key + "'");
            }
        } catch (const ParseError& e) {
            if (std::string(e.what()).rfind("line ", 0) == 0) throw;
            throw ParseError(at_line(line) + e.what());
        }
    }
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config '" + path + "'");
    return parse_config(in);
}

namespace {

std::size_t arg(const LayerSpec& spec, std::size_t i) {
    if (i >= spec.args.size()) {
        throw ParseError(at_line(spec.line) + spec.kind + " needs " + std::to_string(i + 1) + " argument(s)");
    }
    try {
        return parse_number<std::size_t>(spec.args[i], spec.kind + " argument");
    } catch (const ParseError& e) {
        throw ParseError(at_line(spec.line) + e.what());
    }
}

const std::string& option(const LayerSpec& spec, const std::string& key) {
    const auto it = spec.options.find(key);
    if (it == spec.options.end()) throw ParseError(at_line(spec.line) + spec.kind + " needs " + key + "=");
    return it->second;
}

std::size_t channels_of(const Shape& s, std::size_t index, const std::string& kind) {
    if (s.size() != 3) {
        throw ShapeError("layer " + std::to_string(index) + " (" + kind + ") needs W x H x C input");
    }
    return s[2];
}

}  // namespace

Network build_network(const ExperimentConfig& config, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Network net(config.input);
    Shape shape = config.input;
    for (std::size_t i = 0; i < config.layers.size(); ++i) {
        const LayerSpec& spec = config.layers[i];
        const std::string& k = spec.kind;
        std::unique_ptr<Layer> layer;
        try {
            if (k == "pad" || k == "zero-pad") {
                layer = std::make_unique<ZeroPadLayer>(arg(spec, 0));
            } else if (k == "conv" || k == "dense-conv") {
                layer = std::make_unique<DenseConvLayer>(arg(spec, 0), channels_of(shape, i, k),
                                                         arg(spec, 1), rng);
            } else if (k == "ttconv" || k == "tt-conv") {
                const std::size_t c = channels_of(shape, i, k), s = arg(spec, 1);
                const Ranks ranks = parse_size_list(option(spec, "ranks"));
                ChannelFactorization fact;
                if (spec.options.count("factors")) {
                    fact = factorization_from_spec(parse_factor_spec(spec.options.at("factors")), c, s);
                } else {
                    fact = factorize_channels(c, s, ranks.size());
                }
                layer = std::make_unique<TTConvLayer>(arg(spec, 0), fact, ranks, rng);
            } else if (k == "naive_ttconv" || k == "naive-tt-conv") {
                layer = std::make_unique<NaiveTTConvLayer>(arg(spec, 0), channels_of(shape, i, k),
                                                           arg(spec, 1),
                                                           parse_size_list(option(spec, "ranks")), rng);
            } else if (k == "fc" || k == "dense-fc") {
                layer = std::make_unique<DenseFCLayer>(shape_product(shape), arg(spec, 0), rng);
            } else if (k == "ttfc" || k == "tt-fc") {
                const FactorSpec f = parse_factor_spec(option(spec, "factors"));
                if (shape_product(f.in) != shape_product(shape) || shape_product(f.out) != arg(spec, 0)) {
                    throw ShapeError("tt-fc factors must multiply to the input and output sizes");
                }
                layer = std::make_unique<TTFCLayer>(f.in, f.out, parse_size_list(option(spec, "ranks")), rng);
            } else if (k == "relu") {
                layer = std::make_unique<ReluLayer>();
            } else if (k == "bn" || k == "batch-norm") {
                layer = std::make_unique<BatchNormLayer>(shape.back());
            } else if (k == "maxpool" || k == "max-pool") {
                layer = spec.args.empty() ? std::make_unique<MaxPoolLayer>()
                                          : std::make_unique<MaxPoolLayer>(arg(spec, 0), arg(spec, 1));
            } else if (k == "avgpool" || k == "avg-pool") {
                layer = std::make_unique<AvgPoolLayer>(arg(spec, 0));
            } else {
                throw ParseError(at_line(spec.line) + "unknown layer kind '" + k + "'");
            }
            shape = layer->output_shape(shape);
        } catch (const ShapeError& e) {
            throw ShapeError("layer " + std::to_string(i) + " (" + k + "): " + e.what());
        } catch (const ParseError& e) {
            if (std::string(e.what()).rfind("line ", 0) == 0) throw;
            throw ParseError(at_line(spec.line) + e.what());
        }
        net.add(std::move(layer));
    }
    for (std::size_t f : config.frozen) {
        if (f >= net.size()) throw ArgumentError("freeze index " + std::to_string(f) + " out of range");
        net.layer(f).frozen = true;
    }
    return net;
}

}  // namespace ttconv
