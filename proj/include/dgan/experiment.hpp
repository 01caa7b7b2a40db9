#pragma once

#include <string>
#include <vector>

#include "dgan/config.hpp"
#include "dgan/strategies.hpp"

namespace dgan {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumeric = 3;
inline constexpr int kExitAssertFailed = 4;

struct ExperimentResult {
    int exit_code = kExitOk;
    std::string error;                    // empty iff exit_code is 0
    std::vector<CoverageReport> coverage; // empty when the dataset has no mode centers
    RunResult run;                        // populated only on success
    std::uint64_t wall_ms = 0;            // whole-run wall clock, reported not persisted
};

// Runs one configured experiment and writes every artifact under
// cfg.output.dir: metrics.csv, coverage.csv, samples_final.csv,
// channel_log.txt, audit.txt, config_echo.json and network checkpoints.
// check_asserts turns the config's coverage gates into exit code 4.
ExperimentResult run_experiment(const ExperimentConfig& cfg, bool check_asserts = false);

struct CompareRow {
    std::string dir;
    std::string strategy;
    std::size_t users = 0;
    std::uint64_t total_work = 0;
    std::uint64_t max_user_work = 0;
    std::uint64_t wall_ms = 0;
    long covered_modes = -1; // -1 when the run recorded no coverage
    double final_g_loss = 0.0;
};

// Reads completed run directories (at least two) and summarizes them.
std::vector<CompareRow> compare_runs(const std::vector<std::string>& dirs);
std::string compare_table(const std::vector<CompareRow>& rows);
void write_compare_csv(const std::vector<CompareRow>& rows, const std::string& path);

} // namespace dgan
