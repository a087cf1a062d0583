#include <gtest/gtest.h>

#include <bit>
#include <cmath>
#include <sstream>

#include "ttconv/config.hpp"
#include "ttconv/errors.hpp"
#include "ttconv/report.hpp"

using namespace ttconv;

namespace {

ExperimentConfig parse(const std::string& text) {
    std::istringstream in(text);
    return parse_config(in);
}

const char* const kSmallNet = R"(
name = small
seed = 5
epochs = 3
lr = 0.05
batch_size = 32
train_size = 128
test_size = 64
data_seed = 9
input = 8x8x1
layer = conv 3 4
layer = relu
layer = maxpool 3 2
layer = fc 2
)";

}  // namespace

TEST(SGDMomentum, ZeroGradientZeroVelocityIsNoOp) {
    SGDMomentum opt(3, 0.9, {0.1, 10.0, 30});
    std::vector<double> p{1.0, -2.0, 3.0};
    const auto before = p;
    opt.step(p, std::vector<double>(3, 0.0));
    EXPECT_EQ(p, before);
}

TEST(SGDMomentum, ZeroMomentumIsPlainGradientDescent) {
    SGDMomentum opt(2, 0.0, {0.5, 10.0, 30});
    std::vector<double> p{1.0, 2.0};
    opt.step(p, std::vector<double>{2.0, -4.0});
    EXPECT_EQ(p, (std::vector<double>{0.0, 4.0}));
}

TEST(SGDMomentum, TwoStepsWithConstantGradient) {
    SGDMomentum opt(1, 0.9, {0.1, 10.0, 30});
    std::vector<double> p{0.0};
    const std::vector<double> g{2.0};
    opt.step(p, g);
    opt.step(p, g);
    EXPECT_NEAR(opt.velocity()[0], -0.19 * 2.0, 1e-15);
    EXPECT_NEAR(p[0], -0.1 * 2.0 - 0.19 * 2.0, 1e-15);
}

TEST(SGDMomentum, ScheduleDividesAtBoundaries) {
    const LrSchedule s{0.1, 10.0, 30};
    EXPECT_EQ(s.at(0), 0.1);
    EXPECT_EQ(s.at(29), 0.1);
    EXPECT_NEAR(s.at(30), 0.01, 1e-18);
    EXPECT_NEAR(s.at(65), 0.001, 1e-18);
    EXPECT_EQ((LrSchedule{0.1, 10.0, 0}.at(100)), 0.1);
}

TEST(SGDMomentum, RejectsBadInput) {
    SGDMomentum opt(2, 0.9, {});
    std::vector<double> p(3);
    EXPECT_THROW(opt.step(p, std::vector<double>(3)), ShapeError);
    EXPECT_THROW(SGDMomentum(2, 1.0, {}), ArgumentError);
    EXPECT_THROW(SGDMomentum(2, 0.9, {-0.1, 10.0, 30}), ArgumentError);
}

TEST(Dataset, SeededBalancedAndStandardized) {
    SyntheticOptions o;
    o.train_size = 40;
    o.test_size = 10;
    o.seed = 3;
    const auto a = make_stripes_blobs(o);
    const auto b = make_stripes_blobs(o);
    EXPECT_EQ(a.train.images, b.train.images);
    EXPECT_EQ(a.train.images.shape(), (Shape{40, 16, 16, 1}));
    EXPECT_EQ(a.test.size(), 10u);
    EXPECT_EQ(std::count(a.train.labels.begin(), a.train.labels.end(), 1), 20);
    const auto img = a.train.images.data().subspan(0, 256);
    double mean = 0.0, sq = 0.0;
    for (double v : img) mean += v / 256.0;
    for (double v : img) sq += (v - mean) * (v - mean) / 256.0;
    EXPECT_NEAR(mean, 0.0, 1e-12);
    EXPECT_NEAR(sq, 1.0, 1e-9);
    o.seed = 4;
    EXPECT_NE(make_stripes_blobs(o).train.images, a.train.images);
}

TEST(Config, ParsesKeysAndLayers) {
    const auto cfg = parse(R"(
# comment
name = TT-conv
seed = 7
epochs = 12
lr = 0.05
momentum = 0.8
decay_every = 4
decay_factor = 2
batch_size = 16
input = 12x12x3
layer = pad 1    # trailing comment
layer = ttconv 3 16 factors=4x2:4x4 ranks=6,5
freeze = 0, 1
)");
    EXPECT_EQ(cfg.name, "TT-conv");
    EXPECT_EQ(cfg.seed, 7u);
    EXPECT_EQ(cfg.train.seed, 7u);
    EXPECT_EQ(cfg.train.epochs, 12u);
    EXPECT_EQ(cfg.train.schedule.initial_lr, 0.05);
    EXPECT_EQ(cfg.train.momentum, 0.8);
    EXPECT_EQ(cfg.train.schedule.decay_every, 4u);
    EXPECT_EQ(cfg.train.schedule.decay_factor, 2.0);
    EXPECT_EQ(cfg.train.batch_size, 16u);
    EXPECT_EQ(cfg.input, (Shape{12, 12, 3}));
    ASSERT_EQ(cfg.layers.size(), 2u);
    EXPECT_EQ(cfg.layers[1].kind, "ttconv");
    EXPECT_EQ(cfg.layers[1].args, (std::vector<std::string>{"3", "16"}));
    EXPECT_EQ(cfg.layers[1].options.at("ranks"), "6,5");
    EXPECT_EQ(cfg.frozen, (std::vector<std::size_t>{0, 1}));
}

TEST(Config, ReportsLineOfParseErrors) {
    try {
        parse("seed = 1\nepochs = many\n");
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
    }
    EXPECT_THROW(parse("colour = blue\n"), ParseError);
    EXPECT_THROW(parse("no equals sign\n"), ParseError);
    EXPECT_THROW(build_network(parse("layer = wibble 3\n")), ParseError);
    EXPECT_THROW(build_network(parse("layer = ttconv 3 16\n")), ParseError);
}

TEST(Config, BuildsNetworkAndNamesBadLayer) {
    const auto cfg = parse("input = 8x8x8\nlayer = ttconv 3 16 factors=4x2:4x4 ranks=6,5\nlayer = fc 2\n");
    Network net = build_network(cfg);
    EXPECT_EQ(net.layer(0).kind(), "tt-conv");
    EXPECT_EQ(net.layer(0).params().size(), 9u * 6 + 16 * 30 + 8 * 5);
    EXPECT_EQ(net.layer(0).dense_param_count(), 9u * 8 * 16);
    try {
        build_network(parse("input = 8x8x8\nlayer = relu\nlayer = ttconv 3 16 factors=2x2:4x4 ranks=2,2\n"));
        FAIL();
    } catch (const ShapeError& e) {
        EXPECT_NE(std::string(e.what()).find("layer 1"), std::string::npos) << e.what();
    }
}

TEST(Config, FactorSpecs) {
    const FactorSpec f = parse_factor_spec("4x2:4x4");
    EXPECT_EQ(f.in, (Factors{4, 2}));
    EXPECT_EQ(f.out, (Factors{4, 4}));
    EXPECT_THROW(parse_factor_spec("4x2"), ParseError);
    EXPECT_THROW(parse_factor_spec("4x2:4"), ParseError);
    EXPECT_THROW(parse_factor_spec("4x0:4x4"), ParseError);
    const auto fact = factorization_from_spec(parse_factor_spec("2x2:2x4"), 3, 7);
    EXPECT_EQ(fact.pad_c, 1u);
    EXPECT_EQ(fact.pad_s, 1u);
    EXPECT_THROW(factorization_from_spec(f, 9, 16), ShapeError);
}

TEST(Train, ZeroLearningRateKeepsLossConstant) {
    auto cfg = parse(kSmallNet);
    cfg.train.schedule.initial_lr = 0.0;
    const auto data = make_stripes_blobs(cfg.data);
    Network net = build_network(cfg);
    const auto before = net.parameters();
    const auto log = train(net, data.train, data.test, cfg.train);
    ASSERT_EQ(log.size(), 3u);
    for (const auto& r : log) EXPECT_NEAR(r.train_loss, log[0].train_loss, 1e-12);
    EXPECT_EQ(net.parameters(), before);
}

TEST(Train, SameSeedReproducesLogBitwise) {
    const auto cfg = parse(kSmallNet);
    const auto data = make_stripes_blobs(cfg.data);
    auto run = [&] {
        Network net = build_network(cfg);
        return train(net, data.train, data.test, cfg.train);
    };
    const auto a = run(), b = run();
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(std::bit_cast<std::uint64_t>(a[i].train_loss), std::bit_cast<std::uint64_t>(b[i].train_loss));
        EXPECT_EQ(a[i].test_acc, b[i].test_acc);
    }
    EXPECT_LT(a.back().train_loss, a.front().train_loss);
}

TEST(Train, FrozenLayersStayBitwiseUnchanged) {
    auto cfg = parse(kSmallNet);
    cfg.frozen = {0};
    const auto data = make_stripes_blobs(cfg.data);
    Network net = build_network(cfg);
    const std::vector<double> conv(net.layer(0).params().begin(), net.layer(0).params().end());
    const std::vector<double> fc(net.layer(3).params().begin(), net.layer(3).params().end());
    train(net, data.train, data.test, cfg.train);
    EXPECT_TRUE(std::equal(conv.begin(), conv.end(), net.layer(0).params().begin()));
    EXPECT_FALSE(std::equal(fc.begin(), fc.end(), net.layer(3).params().begin()));
}

TEST(Train, DivergenceReportsEpoch) {
    auto cfg = parse(kSmallNet);
    cfg.train.schedule.initial_lr = 1e200;
    const auto data = make_stripes_blobs(cfg.data);
    Network net = build_network(cfg);
    try {
        train(net, data.train, data.test, cfg.train);
        FAIL() << "expected divergence";
    } catch (const DivergenceError& e) {
        EXPECT_EQ(e.epoch(), 1u);
    }
}

TEST(Report, RowFormattingMirrorsTable) {
    EXPECT_EQ(format_row_csv({"TT-conv", 89.9, 2.02}), "TT-conv, 89.9, 2.02");
    EXPECT_EQ(format_row_csv({"Baseline", 90.7, 1.0}), "Baseline, 90.7, 1.00");
    EXPECT_EQ(format_report({{"TT-conv", 89.4, 82.87}, {"Baseline", 90.7, 1.0}, {"TT-conv", 89.9, 2.02}}),
              "model|top1_acc|compr\nBaseline|90.7|1.00\nTT-conv|89.9|2.02\nTT-conv|89.4|82.87\n");
    EXPECT_EQ(format_report({}, true), "model, top1_acc, compr\n");
}

TEST(Report, LogRoundTrip) {
    TrainingLog log{"TT-conv", 729, 1306, {{1, 0.1, 0.5, 71.9, 89.6}, {2, 0.1, 0.148512, 94.35, 96.4}}};
    std::stringstream ss;
    write_log(ss, log);
    const std::string text = ss.str();
    EXPECT_NE(text.find("epoch,lr,train_loss,train_acc,test_acc\n1,0.1,0.5,71.9,89.6\n"), std::string::npos);
    const TrainingLog back = read_log(ss);
    EXPECT_EQ(back.model_name, "TT-conv");
    EXPECT_EQ(back.params, 729u);
    ASSERT_EQ(back.epochs.size(), 2u);
    EXPECT_EQ(back.epochs[1].train_loss, 0.148512);
    const ReportRow row = report_row(back);
    EXPECT_EQ(row.top1_accuracy, 96.4);
    EXPECT_EQ(row.compression, 1306.0 / 729.0);
    std::stringstream again;
    write_log(again, back);
    EXPECT_EQ(again.str(), text);
}

TEST(Report, BaselineCompressionIsExactlyOne) {
    TrainingLog log{"Baseline", 1306, 1306, {{1, 0.1, 0.5, 70.0, 80.0}}};
    EXPECT_EQ(report_row(log).compression, 1.0);
}

TEST(Report, MalformedLogsAreParseErrors) {
    std::istringstream no_meta("epoch,lr,train_loss,train_acc,test_acc\n");
    EXPECT_THROW(read_log(no_meta), ParseError);
    std::istringstream bad_row("# model: a\n# params: 1\n# dense_params: 1\nepoch,lr,train_loss,train_acc,test_acc\n1,2\n");
    EXPECT_THROW(read_log(bad_row), ParseError);
    EXPECT_THROW(load_log("/nonexistent/log.csv"), IoError);
}
