#include "ttconv/report.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "ttconv/errors.hpp"
#include "ttconv/tt_conv.hpp"

namespace ttconv {

namespace {

const char* const kHeader = "epoch,lr,train_loss,train_acc,test_acc";

std::string meta_value(const std::string& line, const std::string& key) {
    const std::string prefix = "# " + key + ": ";
    return line.rfind(prefix, 0) == 0 ? line.substr(prefix.size()) : std::string();
}

std::size_t to_size(const std::string& s, const std::string& what) {
    try {
        std::size_t used = 0;
        const unsigned long long v = std::stoull(s, &used);
        if (used == s.size()) return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
    }
    throw ParseError("bad " + what + " '" + s + "' in training log");
}

double to_real(const std::string& s) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used == s.size()) return v;
    } catch (const std::exception&) {
    }
    throw ParseError("bad number '" + s + "' in training log");
}

}  // namespace

std::string format_number(double value) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", value);
    return buf;
}

std::string format_compression(double value) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f", value);
    return buf;
}

void write_log(std::ostream& out, const TrainingLog& log) {
    out << "# model: " << log.model_name << '\n'
        << "# params: " << log.params << '\n'
        << "# dense_params: " << log.dense_params << '\n'
        << kHeader << '\n';
    for (const EpochRecord& r : log.epochs) {
        out << r.epoch << ',' << format_number(r.lr) << ',' << format_number(r.train_loss) << ','
            << format_number(r.train_acc) << ',' << format_number(r.test_acc) << '\n';
    }
}

TrainingLog read_log(std::istream& in) {
    TrainingLog log;
    bool have_model = false, have_params = false, have_dense = false, have_header = false;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            if (auto v = meta_value(line, "model"); !v.empty()) {
                log.model_name = v;
                have_model = true;
            } else if (auto p = meta_value(line, "params"); !p.empty()) {
                log.params = to_size(p, "params");
                have_params = true;
            } else if (auto d = meta_value(line, "dense_params"); !d.empty()) {
                log.dense_params = to_size(d, "dense_params");
                have_dense = true;
            }
            continue;
        }
        if (!have_header) {
            if (line != kHeader) throw ParseError("training log header must be '" + std::string(kHeader) + "'");
            have_header = true;
            continue;
        }
        std::vector<std::string> cells;
        std::stringstream ss(line);
        for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
        if (cells.size() != 5) throw ParseError("training log rows need 5 columns");
        log.epochs.push_back({to_size(cells[0], "epoch"), to_real(cells[1]), to_real(cells[2]),
                              to_real(cells[3]), to_real(cells[4])});
    }
    if (!have_model || !have_params || !have_dense || !have_header) {
        throw ParseError("training log lacks model/params/dense_params metadata or header");
    }
    return log;
}

TrainingLog load_log(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open training log '" + path + "'");
    return read_log(in);
}

void save_log(const std::string& path, const TrainingLog& log) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write training log '" + path + "'");
    write_log(out, log);
    if (!out) throw IoError("failed writing training log '" + path + "'");
}

ReportRow report_row(const TrainingLog& log) {
    if (log.epochs.empty()) throw ArgumentError("training log '" + log.model_name + "' has no epochs");
    return {log.model_name, log.epochs.back().test_acc, compression_ratio(log.dense_params, log.params)};
}

std::string format_row_csv(const ReportRow& row) {
    return row.model_name + ", " + format_number(row.top1_accuracy) + ", " +
           format_compression(row.compression);
}

std::string format_report(std::vector<ReportRow> rows, bool csv) {
    std::stable_sort(rows.begin(), rows.end(),
                     [](const ReportRow& a, const ReportRow& b) { return a.compression < b.compression; });
    std::string out = csv ? "model, top1_acc, compr\n" : "model|top1_acc|compr\n";
    for (const ReportRow& r : rows) {
        if (csv) {
            out += format_row_csv(r) + '\n';
        } else {
            out += r.model_name + '|' + format_number(r.top1_accuracy) + '|' +
                   format_compression(r.compression) + '\n';
        }
    }
    return out;
}

}  // namespace ttconv
