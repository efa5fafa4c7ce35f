#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fkrwrc/config.hpp"

namespace fkrwrc {

struct CsvTable {
    std::string name;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    void add(std::vector<std::string> row) { rows.push_back(std::move(row)); }
};

struct SummaryRow {
    std::string quantity;
    std::string parameter;
    double estimate = 0.0;
    double stderr_ = 0.0;
    std::uint64_t n_samples = 0;
    std::string flags;
};

struct ExperimentReport {
    ExperimentConfig config;
    std::vector<CsvTable> tables;
    std::vector<SummaryRow> summary;
    std::vector<std::pair<std::string, std::uint64_t>> counters;
    /// Failed invariants and budget overruns; nonempty means a nonzero exit status.
    std::vector<std::string> failures;
    double wall_seconds = 0.0;
    std::uint64_t work_units = 0;

    bool ok() const { return failures.empty(); }
    const SummaryRow* find(const std::string& quantity, const std::string& parameter = "") const;
    std::uint64_t counter(const std::string& name) const;
};

ExperimentReport run_experiment(const ExperimentConfig& config);

/// %.17g, with nan and inf spelled out.
std::string csv_number(double v);
std::string to_csv(const CsvTable& table);
CsvTable summary_table(const ExperimentReport& report);

/// Writes to a temporary file in the same directory, then renames over `path`.
void write_file_atomic(const std::string& path, const std::string& content);
/// config.ini, summary.csv, counters.csv, one CSV per table and metrics.csv (the only nondeterministic file).
void write_report(const ExperimentReport& report, const std::string& dir);

}  // namespace fkrwrc
