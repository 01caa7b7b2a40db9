#include "dgan/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "dgan/errors.hpp"

namespace dgan {

CoverageReport mode_coverage(const Matrix& samples, const Matrix& centers, double sigma,
                             std::size_t threshold_count) {
    if (samples.rows == 0 || centers.rows == 0) throw SpecError("mode_coverage: empty input");
    if (samples.cols != centers.cols)
        throw SpecError("mode_coverage: sample and center widths differ");
    if (!(sigma > 0.0)) throw SpecError("mode_coverage: sigma must be positive");

    CoverageReport report;
    report.per_mode_counts.assign(centers.rows, 0);
    std::vector<std::size_t> within(centers.rows, 0);
    const double radius2 = 9.0 * sigma * sigma;

    for (std::size_t r = 0; r < samples.rows; ++r) {
        std::size_t best = 0;
        double best_d2 = 0.0;
        for (std::size_t m = 0; m < centers.rows; ++m) {
            double d2 = 0.0;
            for (std::size_t c = 0; c < samples.cols; ++c) {
                const double diff = samples(r, c) - centers(m, c);
                d2 += diff * diff;
            }
            if (m == 0 || d2 < best_d2) {
                best = m;
                best_d2 = d2;
            }
        }
        ++report.per_mode_counts[best];
        if (best_d2 <= radius2) ++within[best];
    }

    std::size_t high_quality = 0;
    for (std::size_t m = 0; m < centers.rows; ++m) {
        if (within[m] >= threshold_count) ++report.covered_modes;
        high_quality += within[m];
    }
    report.high_quality_fraction =
        static_cast<double>(high_quality) / static_cast<double>(samples.rows);
    return report;
}

std::string format_real(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string metrics_csv_header() { return "epoch,user_id,d_loss,g_loss,work_units,wall_ms"; }

std::string metrics_csv_row(const MetricsRecord& r) {
    std::ostringstream out;
    out << r.epoch << ',' << r.user_id << ',' << format_real(r.d_loss) << ','
        << format_real(r.g_loss) << ',' << r.work_units << ',' << r.wall_ms;
    return out.str();
}

void write_metrics_csv(const std::vector<MetricsRecord>& records, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open for writing: " + path);
    f << metrics_csv_header() << '\n';
    for (const MetricsRecord& r : records) f << metrics_csv_row(r) << '\n';
}

std::vector<MetricsRecord> read_metrics_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open: " + path);
    std::string line;
    if (!std::getline(f, line)) throw IoError(path + ": empty file");
    if (line != metrics_csv_header()) throw IoError(path + ": unexpected header");
    std::vector<MetricsRecord> records;
    std::size_t lineno = 1;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        MetricsRecord r;
        unsigned long long epoch = 0, work = 0, wall = 0;
        if (std::sscanf(line.c_str(), "%llu,%d,%lf,%lf,%llu,%llu", &epoch, &r.user_id, &r.d_loss,
                        &r.g_loss, &work, &wall) != 6)
            throw IoError(path + ": malformed row at line " + std::to_string(lineno));
        r.epoch = epoch;
        r.work_units = work;
        r.wall_ms = wall;
        records.push_back(r);
    }
    return records;
}

std::string coverage_csv_header() { return "epoch,covered_modes,quality"; }

void write_coverage_csv(const std::vector<CoverageReport>& reports, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open for writing: " + path);
    f << coverage_csv_header() << '\n';
    for (const CoverageReport& r : reports)
        f << r.epoch << ',' << r.covered_modes << ',' << format_real(r.high_quality_fraction)
          << '\n';
}

std::vector<CoverageReport> read_coverage_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open: " + path);
    std::string line;
    if (!std::getline(f, line)) throw IoError(path + ": empty file");
    if (line != coverage_csv_header()) throw IoError(path + ": unexpected header");
    std::vector<CoverageReport> reports;
    std::size_t lineno = 1;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        CoverageReport r;
        unsigned long long epoch = 0, covered = 0;
        if (std::sscanf(line.c_str(), "%llu,%llu,%lf", &epoch, &covered,
                        &r.high_quality_fraction) != 3)
            throw IoError(path + ": malformed row at line " + std::to_string(lineno));
        r.epoch = epoch;
        r.covered_modes = covered;
        reports.push_back(r);
    }
    return reports;
}

} // namespace dgan
