#pragma once

#include <cstddef>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "ttconv/trainer.hpp"

namespace ttconv {

struct ReportRow {
    std::string model_name;
    double top1_accuracy = 0.0;  // percent
    double compression = 1.0;    // dense / compressed parameter count
};

// A training run: '#'-prefixed metadata lines (model, params, dense_params)
// followed by the per-epoch CSV.
struct TrainingLog {
    std::string model_name;
    std::size_t params = 0;
    std::size_t dense_params = 0;
    std::vector<EpochRecord> epochs;
};

void write_log(std::ostream& out, const TrainingLog& log);
TrainingLog read_log(std::istream& in);
TrainingLog load_log(const std::string& path);
void save_log(const std::string& path, const TrainingLog& log);

// Final-epoch test accuracy and the whole-network compression.
ReportRow report_row(const TrainingLog& log);

// %.6g, the precision of every printed number except compression.
std::string format_number(double value);
// %.2f
std::string format_compression(double value);

// "TT-conv, 89.9, 2.02"
std::string format_row_csv(const ReportRow& row);
// Rows sorted by compression (stable), header "model|top1_acc|compr" or,
// with csv, "model, top1_acc, compr".
std::string format_report(std::vector<ReportRow> rows, bool csv = false);

}  // namespace ttconv
