#include <CLI11.hpp>

#include <cstdio>
#include <string>
#include <vector>

#include "dgan/errors.hpp"
#include "dgan/experiment.hpp"
#include "dgan/gradcheck.hpp"
#include "dgan/nn.hpp"

namespace {

using namespace dgan;

struct RunArgs {
    std::string config;
    std::string out;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::size_t workers = 0;
    bool workers_set = false;
    bool check_asserts = false;
};

int cmd_run(const RunArgs& args) {
    ExperimentConfig cfg = load_config(args.config);
    if (args.seed_set) cfg.seeds = Seeds{args.seed, args.seed, args.seed};
    if (!args.out.empty()) cfg.output.dir = args.out;
    if (args.workers_set) cfg.strategy.workers = args.workers;

    const ExperimentResult res = run_experiment(cfg, args.check_asserts);
    if (res.exit_code != kExitOk) {
        std::fprintf(stderr, "error: %s\n", res.error.c_str());
        return res.exit_code;
    }
    std::printf("run complete: %s (%zu epochs, %llu ms)\n", cfg.output.dir.c_str(),
                cfg.strategy.epochs, static_cast<unsigned long long>(res.wall_ms));
    if (!res.coverage.empty()) {
        const CoverageReport& last = res.coverage.back();
        std::printf("final coverage: %zu/%zu modes, quality %.3f\n", last.covered_modes,
                    last.per_mode_counts.size(), last.high_quality_fraction);
    }
    return kExitOk;
}

int cmd_compare(const std::vector<std::string>& dirs, const std::string& out_csv) {
    const std::vector<CompareRow> rows = compare_runs(dirs);
    std::fputs(compare_table(rows).c_str(), stdout);
    write_compare_csv(rows, out_csv);
    std::printf("wrote %s\n", out_csv.c_str());
    return kExitOk;
}

int cmd_gradcheck(std::uint64_t seed, std::size_t count, bool inject_bug) {
    const GradCheckReport rep = run_gradcheck(seed, count, inject_bug);
    std::printf("checked %zu networks, %zu coordinates\n", rep.networks, rep.coordinates);
    std::printf("max relative error: %.3g (tolerance %.1g)\n", rep.max_rel_error,
                kGradCheckTolerance);
    if (rep.max_rel_error >= kGradCheckTolerance) {
        std::fprintf(stderr, "gradcheck failed at %s\n", rep.worst_case.c_str());
        return 1;
    }
    return kExitOk;
}

int cmd_list_presets() {
    for (const std::string& name : preset_names()) std::printf("%s\n", name.c_str());
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"distributed GAN training harness"};
    app.require_subcommand(1);

    RunArgs run_args;
    CLI::App* run = app.add_subcommand("run", "run one experiment from a config file");
    run->add_option("--config", run_args.config, "experiment config (json)")->required();
    run->add_option("--out", run_args.out, "override the output directory");
    CLI::Option* seed_opt =
        run->add_option("--seed", run_args.seed, "override all three seed roots");
    CLI::Option* workers_opt =
        run->add_option("--workers", run_args.workers, "worker pool size (0 = one per user)");
    run->add_flag("--assert", run_args.check_asserts,
                  "fail with exit code 4 when the config's coverage gates are missed");

    std::vector<std::string> compare_dirs;
    std::string compare_out = "compare.csv";
    CLI::App* compare = app.add_subcommand("compare", "summarize completed run directories");
    compare->add_option("dirs", compare_dirs, "run directories")->required()->expected(2, -1);
    compare->add_option("--out", compare_out, "where to write the csv summary");

    std::uint64_t gc_seed = 1;
    std::size_t gc_count = 100;
    bool gc_inject = false;
    CLI::App* gradcheck =
        app.add_subcommand("gradcheck", "finite-difference check of the backprop engine");
    gradcheck->add_option("--seed", gc_seed, "rng seed for the sampled networks");
    gradcheck->add_option("--count", gc_count, "number of random networks");
    gradcheck->add_flag("--inject-bug", gc_inject)->group(""); // test hook, hidden

    CLI::App* presets = app.add_subcommand("list-presets", "print available network presets");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : dgan::kExitConfig;
    }

    run_args.seed_set = seed_opt->count() > 0;
    run_args.workers_set = workers_opt->count() > 0;

    try {
        if (run->parsed()) return cmd_run(run_args);
        if (compare->parsed()) return cmd_compare(compare_dirs, compare_out);
        if (gradcheck->parsed()) return cmd_gradcheck(gc_seed, gc_count, gc_inject);
        if (presets->parsed()) return cmd_list_presets();
    } catch (const dgan::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return dgan::kExitConfig;
    } catch (const dgan::IoError& e) {
        std::fprintf(stderr, "io error: %s\n", e.what());
        return dgan::kExitConfig;
    } catch (const dgan::NumericError& e) {
        std::fprintf(stderr, "numeric error: %s\n", e.what());
        return dgan::kExitNumeric;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
