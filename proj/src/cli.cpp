#include "ttconv/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <optional>
#include <random>

#include "ttconv/config.hpp"
#include "ttconv/errors.hpp"
#include "ttconv/gradcheck.hpp"
#include "ttconv/report.hpp"
#include "ttconv/serialization.hpp"
#include "ttconv/sweep.hpp"

namespace ttconv::cli {

namespace {

struct TruncationFlags {
    std::string ranks;
    std::optional<double> tol;

    Truncation get() const {
        if (ranks.empty() == !tol.has_value()) throw ParseError("give exactly one of --ranks or --tol");
        if (tol) return Truncation::tolerance(*tol);
        return Truncation::ranks(parse_size_list(ranks));
    }
};

struct FactorFlags {
    std::string factors;
    std::size_t levels = 2;

    ChannelFactorization get(std::size_t c, std::size_t s) const {
        if (!factors.empty()) return factorization_from_spec(parse_factor_spec(factors), c, s);
        return factorize_channels(c, s, levels);
    }
};

std::string join(const Ranks& r, const char* sep) {
    std::string s;
    for (std::size_t i = 0; i < r.size(); ++i) s += (i ? sep : "") + std::to_string(r[i]);
    return s;
}

std::string shape_text(const Shape& s) { return join(s, "x"); }

ConvKernel as_kernel(const DenseTensor& t) {
    if (t.order() != 4 || t.dim(0) != t.dim(1)) {
        throw ShapeError("expected an l x l x C x S kernel, got shape " + shape_text(t.shape()));
    }
    return ConvKernel(t);
}

void summary(std::ostream& out, const std::string& mode, std::size_t dense, std::size_t compressed,
             double error, const Ranks* ranks = nullptr) {
    out << "mode=" << mode;
    if (ranks) out << " ranks=" << join(*ranks, ",");
    out << " dense_params=" << dense << " compressed_params=" << compressed
        << " compression=" << format_compression(compression_ratio(dense, compressed))
        << " rel_error=" << format_number(error) << '\n';
}

Ranks interior(const TTTensor& tt) {
    return tt.order() > 1 ? Ranks(tt.ranks().begin() + 1, tt.ranks().end() - 1) : Ranks{};
}

int cmd_decompose(const std::string& input, const std::string& mode, const TruncationFlags& tf,
                  const FactorFlags& ff, const std::string& output, bool f32, std::ostream& out) {
    const Truncation trunc = tf.get();
    const DenseTensor t = load_dense(input).value;
    const Dtype dtype = f32 ? Dtype::F32 : Dtype::F64;
    if (mode == "tt") {
        const TTTensor tt = tt_svd(t, trunc);
        const Ranks r = interior(tt);
        summary(out, mode, t.size(), tt_param_count(tt), relative_error(tt_full(tt), t), &r);
        if (!output.empty()) save_tt(output, tt, dtype);
    } else if (mode == "ttmatrix") {
        if (t.order() != 2) throw ShapeError("ttmatrix mode needs a matrix (order-2 tensor)");
        if (ff.factors.empty()) throw ParseError("ttmatrix mode needs --factors M1x..:N1x..");
        const FactorSpec f = parse_factor_spec(ff.factors);
        const RowMatrix a = ConstMatrixMap(t.data().data(), static_cast<Eigen::Index>(t.dim(0)),
                                           static_cast<Eigen::Index>(t.dim(1)));
        const TTMatrix m = ttm_from_dense(a, f.in, f.out, trunc);
        const RowMatrix back = ttm_full(m);
        const Ranks r = interior(m.tt());
        summary(out, mode, t.size(), tt_param_count(m.tt()),
                relative_error(DenseTensor(t.shape(), std::vector<double>(back.data(), back.data() + back.size())), t),
                &r);
        if (!output.empty()) save_ttmatrix(output, m, dtype);
    } else if (mode == "ttconv") {
        const ConvKernel k = as_kernel(t);
        const TTConvKernel tk = ttconv_from_dense(k, ff.get(k.in_channels(), k.out_channels()), trunc);
        const Ranks r = interior(tk.tt());
        summary(out, mode, t.size(), ttconv_param_count(tk),
                relative_error(ttconv_to_dense(tk).tensor(), t), &r);
        if (!output.empty()) save_ttconv(output, tk, dtype);
    } else if (mode == "ttconv-naive") {
        const ConvKernel k = as_kernel(t);
        const NaiveTTConvKernel nk = naive_ttconv_from_dense(k, trunc);
        const Ranks r = interior(nk.tt);
        summary(out, mode, t.size(), tt_param_count(nk.tt), relative_error(tt_full(nk.tt), t), &r);
        if (!output.empty()) save_tt(output, nk.tt, dtype);
    } else {
        throw ParseError("unknown mode '" + mode + "'");
    }
    return kOk;
}

int cmd_reconstruct(const std::string& input, const std::string& output,
                    const std::string& reference, bool f32, std::ostream& out) {
    DenseTensor t;
    Dtype dtype = Dtype::F64;
    switch (detect_file_kind(input)) {
        case FileKind::Dense: {
            auto s = load_dense(input);
            t = std::move(s.value);
            dtype = s.dtype;
            break;
        }
        case FileKind::TT: {
            auto s = load_tt(input);
            t = tt_full(s.value);
            dtype = s.dtype;
            break;
        }
        case FileKind::TTMatrix: {
            auto s = load_ttmatrix(input);
            const RowMatrix m = ttm_full(s.value);
            t = DenseTensor({s.value.rows(), s.value.cols()},
                            std::vector<double>(m.data(), m.data() + m.size()));
            dtype = s.dtype;
            break;
        }
        case FileKind::TTConv: {
            auto s = load_ttconv(input);
            t = ttconv_to_dense(s.value).tensor();
            dtype = s.dtype;
            break;
        }
    }
    save_dense(output, t, f32 ? Dtype::F32 : dtype);
    out << "wrote " << output << " shape=" << shape_text(t.shape());
    if (!reference.empty()) {
        const DenseTensor ref = load_dense(reference).value;
        if (ref.shape() != t.shape()) throw ShapeError("reference shape differs from the reconstruction");
        out << " rel_error=" << format_number(relative_error(t, ref));
    }
    out << '\n';
    return kOk;
}

int cmd_compare(const std::string& input, double budget, const FactorFlags& ff, std::ostream& out) {
    const ConvKernel k = as_kernel(load_dense(input).value);
    const DenseTensor reshaped = ttconv_reshape(k, ff.get(k.in_channels(), k.out_channels()));
    const std::size_t dense = k.tensor().size();
    const auto proposed = cheapest_within(reshaped, full_tt_ranks(reshaped.shape()), budget);
    const auto naive = cheapest_within(k.tensor(), full_tt_ranks(k.tensor().shape()), budget);
    if (!proposed || !naive) throw ArgumentError("no rank choice meets the error budget");
    summary(out, "ttconv", dense, proposed->params, proposed->rel_error, &proposed->ranks);
    summary(out, "ttconv-naive", dense, naive->params, naive->rel_error, &naive->ranks);
    return kOk;
}

int cmd_sweep(const std::string& input, const std::string& mode, const FactorFlags& ff,
              std::size_t max_rank, bool all, std::ostream& out) {
    const DenseTensor t = load_dense(input).value;
    DenseTensor target;
    if (mode == "tt") {
        target = t;
    } else if (mode == "ttconv") {
        const ConvKernel k = as_kernel(t);
        target = ttconv_reshape(k, ff.get(k.in_channels(), k.out_channels()));
    } else if (mode == "ttconv-naive") {
        target = as_kernel(t).tensor();
    } else {
        throw ParseError("sweep mode must be tt, ttconv or ttconv-naive");
    }
    Ranks limits = full_tt_ranks(target.shape());
    if (max_rank > 0) {
        for (std::size_t& r : limits) r = std::min(r, max_rank);
    }
    auto points = sweep_tt(target, limits);
    if (!all) points = pareto_frontier(std::move(points));
    out << "ranks,params,compression,rel_error\n";
    for (const RankPoint& p : points) {
        out << '"' << join(p.ranks, ",") << "\"," << p.params << ','
            << format_compression(compression_ratio(t.size(), p.params)) << ','
            << format_number(p.rel_error) << '\n';
    }
    return kOk;
}

int cmd_generate(const std::string& shape_list, std::uint64_t seed, const std::string& tt_ranks,
                 const FactorFlags& ff, const std::string& output, bool f32, std::ostream& out) {
    const Shape shape = parse_size_list(shape_list);
    std::mt19937_64 rng(seed);
    DenseTensor t;
    if (!tt_ranks.empty()) {
        if (shape.size() != 4 || shape[0] != shape[1]) {
            throw ShapeError("--ttconv-ranks needs an l,l,C,S shape");
        }
        const Ranks r = parse_size_list(tt_ranks);
        FactorFlags flags = ff;
        if (flags.factors.empty()) flags.levels = r.size();
        const auto fact = flags.get(shape[2], shape[3]);
        t = ttconv_to_dense(TTConvKernel::random(shape[0], fact, r, rng, 1.0)).tensor();
    } else {
        std::normal_distribution<double> dist;
        t = DenseTensor(shape);
        for (double& v : t.data()) v = dist(rng);
    }
    save_dense(output, t, f32 ? Dtype::F32 : Dtype::F64);
    out << "wrote " << output << " shape=" << shape_text(t.shape()) << '\n';
    return kOk;
}

int cmd_gradcheck(const std::string& path, std::optional<std::uint64_t> seed, bool corrupt,
                  std::size_t batch_size, double tol, std::ostream& out) {
    const ExperimentConfig cfg = load_config(path);
    const std::uint64_t s = seed.value_or(cfg.seed);
    Network net = build_network(cfg, s);
    out << "block|entries|max_rel_error|status\n";
    if (net.size() == 0) return kOk;
    const std::size_t classes = shape_product(net.output_shape());
    Shape shape{batch_size};
    shape.insert(shape.end(), cfg.input.begin(), cfg.input.end());
    DenseTensor x(shape);
    std::mt19937_64 rng(s + 1);
    std::normal_distribution<double> dist;
    for (double& v : x.data()) v = dist(rng);
    std::vector<int> labels(batch_size);
    for (std::size_t i = 0; i < batch_size; ++i) labels[i] = static_cast<int>(i % classes);

    GradcheckOptions opts;
    opts.tolerance = tol;
    opts.corrupt = corrupt;
    const GradcheckReport report = gradcheck(net, x, labels, opts);
    for (const GradcheckRow& row : report.rows) {
        out << row.block << '|' << row.entries << '|' << format_number(row.max_error) << '|'
            << (row.pass ? "PASS" : "FAIL") << '\n';
    }
    return report.passed() ? kOk : kCheckFailed;
}

int cmd_train(const std::string& path, const std::string& output, std::optional<std::uint64_t> seed,
              std::optional<std::size_t> epochs, std::ostream& out) {
    ExperimentConfig cfg = load_config(path);
    if (seed) {
        cfg.seed = *seed;
        cfg.train.seed = *seed;
    }
    if (epochs) cfg.train.epochs = *epochs;
    const SplitDataset data = make_stripes_blobs(cfg.data);
    Network net = build_network(cfg);
    TrainingLog log{cfg.name, net.param_count(), net.dense_param_count(), {}};
    log.epochs = train(net, data.train, data.test, cfg.train);
    save_log(output, log);
    out << format_row_csv(report_row(log)) << '\n';
    return kOk;
}

int cmd_report(const std::vector<std::string>& logs, bool csv, std::ostream& out, std::ostream& err) {
    std::vector<ReportRow> rows;
    for (const std::string& path : logs) {
        try {
            rows.push_back(report_row(load_log(path)));
        } catch (const IoError& e) {
            err << "error: " << e.what() << '\n';
            return kMissingLog;
        }
    }
    out << format_report(rows, csv);
    return kOk;
}

int exit_code(const Error& e) {
    if (dynamic_cast<const ParseError*>(&e)) return kParseError;
    if (dynamic_cast<const ShapeError*>(&e) || dynamic_cast<const ArgumentError*>(&e) ||
        dynamic_cast<const IndexError*>(&e) || dynamic_cast<const SizeError*>(&e)) {
        return kShapeError;
    }
    if (dynamic_cast<const IoError*>(&e)) return kIoError;
    return kCheckFailed;
}

void add_factor_flags(CLI::App* cmd, FactorFlags& ff) {
    cmd->add_option("--factors", ff.factors, "channel factors C1xC2:S1xS2 (matrix mode: rows:cols)");
    cmd->add_option("--levels", ff.levels, "channel digits d when --factors is absent")
        ->check(CLI::PositiveNumber);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Tensor Train decompositions of tensors, matrices and convolution kernels"};
    app.name("ttconv");
    app.require_subcommand(1);

    std::string input, output, mode = "tt", reference, config, shape_list, tt_ranks;
    TruncationFlags tf;
    FactorFlags ff;
    bool f32 = false, corrupt = false, csv = false, all = false;
    double budget = 1e-2, tol = 1e-5;
    std::size_t max_rank = 0, batch = 4;
    std::uint64_t gen_seed = 1;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> epochs;
    std::vector<std::string> logs;

    auto* decompose = app.add_subcommand("decompose", "decompose a .ten file");
    decompose->add_option("input", input, "dense .ten file")->required();
    decompose->add_option("--mode", mode, "tt | ttmatrix | ttconv | ttconv-naive")
        ->check(CLI::IsMember({"tt", "ttmatrix", "ttconv", "ttconv-naive"}));
    decompose->add_option("--ranks", tf.ranks, "interior rank caps a,b,c");
    decompose->add_option("--tol", tf.tol, "relative error tolerance");
    add_factor_flags(decompose, ff);
    decompose->add_option("-o,--output", output, "decomposed output file");
    decompose->add_flag("--f32", f32, "store values as 32-bit floats");

    auto* reconstruct = app.add_subcommand("reconstruct", "expand a decomposed file to .ten");
    reconstruct->add_option("input", input, "decomposed file")->required();
    reconstruct->add_option("-o,--output", output, ".ten output")->required();
    reconstruct->add_option("--reference", reference, "dense .ten to report the error against");
    reconstruct->add_flag("--f32", f32, "write 32-bit floats (default: the input file's precision)");

    auto* compare = app.add_subcommand("compare", "cheapest TT-conv vs naive TT within an error budget");
    compare->add_option("input", input, "l x l x C x S kernel .ten")->required();
    compare->add_option("--budget", budget, "relative error budget");
    add_factor_flags(compare, ff);

    auto* sweep = app.add_subcommand("sweep", "rank grid to error/parameter frontier");
    sweep->add_option("input", input, "dense .ten file")->required();
    sweep->add_option("--mode", mode, "tt | ttconv | ttconv-naive")
        ->check(CLI::IsMember({"tt", "ttconv", "ttconv-naive"}));
    add_factor_flags(sweep, ff);
    sweep->add_option("--max-rank", max_rank, "cap every rank (0 = no cap)");
    sweep->add_flag("--all", all, "print every grid point, not just the frontier");

    auto* generate = app.add_subcommand("generate", "write a seeded random .ten tensor");
    generate->add_option("--shape", shape_list, "comma-separated mode sizes")->required();
    generate->add_option("--seed", gen_seed, "random seed");
    generate->add_option("--ttconv-ranks", tt_ranks, "synthesize an exact TT-conv kernel with ranks r1,..,rd");
    generate->add_option("--factors", ff.factors, "channel factors for --ttconv-ranks");
    generate->add_option("-o,--output", output, ".ten output")->required();
    generate->add_flag("--f32", f32, "store values as 32-bit floats");

    auto* gradcheck_cmd = app.add_subcommand("gradcheck", "finite-difference check of a config's network");
    gradcheck_cmd->add_option("config", config, "training config")->required();
    gradcheck_cmd->add_option("--seed", seed, "initialization seed (default: config seed)");
    gradcheck_cmd->add_option("--batch", batch, "random batch size")->check(CLI::PositiveNumber);
    gradcheck_cmd->add_option("--tol", tol, "relative error tolerance");
    gradcheck_cmd->add_flag("--corrupt", corrupt, "perturb the analytic gradient (must fail)");

    auto* train_cmd = app.add_subcommand("train", "train a config on the synthetic task");
    train_cmd->add_option("config", config, "training config")->required();
    train_cmd->add_option("-o,--output", output, "log CSV")->required();
    train_cmd->add_option("--seed", seed, "override the config seed");
    train_cmd->add_option("--epochs", epochs, "override the epoch count");

    auto* report = app.add_subcommand("report", "table of training logs sorted by compression");
    report->add_option("logs", logs, "training logs")->required();
    report->add_flag("--csv", csv, "comma-separated rows");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return kParseError;
    }

    try {
        if (*decompose) return cmd_decompose(input, mode, tf, ff, output, f32, out);
        if (*reconstruct) return cmd_reconstruct(input, output, reference, f32, out);
        if (*compare) return cmd_compare(input, budget, ff, out);
        if (*sweep) return cmd_sweep(input, mode, ff, max_rank, all, out);
        if (*generate) return cmd_generate(shape_list, gen_seed, tt_ranks, ff, output, f32, out);
        if (*gradcheck_cmd) return cmd_gradcheck(config, seed, corrupt, batch, tol, out);
        if (*train_cmd) return cmd_train(config, output, seed, epochs, out);
        if (*report) return cmd_report(logs, csv, out, err);
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return exit_code(e);
    }
    return kParseError;
}

}  // namespace ttconv::cli
