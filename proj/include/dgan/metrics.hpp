#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dgan/matrix.hpp"

namespace dgan {

// One row of metrics.csv. user_id -1 is the generator's row for the epoch.
struct MetricsRecord {
    std::size_t epoch = 0;
    int user_id = 0;
    double d_loss = 0.0;
    double g_loss = 0.0;
    std::size_t work_units = 0; // real samples for users, g-steps for the generator row
    std::uint64_t wall_ms = 0;
};

constexpr int kGeneratorId = -1;

struct CoverageReport {
    std::size_t epoch = 0;
    std::vector<std::size_t> per_mode_counts; // nearest-center assignment, sums to sample count
    std::size_t covered_modes = 0;
    double high_quality_fraction = 0.0;
};

// Assigns each sample to its nearest center; a mode is covered when at least
// threshold_count samples lie within 3 sigma of it. high_quality_fraction is
// the fraction of all samples within 3 sigma of their assigned center.
CoverageReport mode_coverage(const Matrix& samples, const Matrix& centers, double sigma,
                             std::size_t threshold_count);

std::string metrics_csv_header();
std::string metrics_csv_row(const MetricsRecord& r);
void write_metrics_csv(const std::vector<MetricsRecord>& records, const std::string& path);
std::vector<MetricsRecord> read_metrics_csv(const std::string& path);

std::string coverage_csv_header();
void write_coverage_csv(const std::vector<CoverageReport>& reports, const std::string& path);
std::vector<CoverageReport> read_coverage_csv(const std::string& path);

std::string format_real(double v); // %.17g, the one float format used in CSVs

} // namespace dgan
