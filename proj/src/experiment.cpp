#include "dgan/experiment.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "dgan/errors.hpp"
#include "dgan/gan.hpp"
#include "dgan/rng.hpp"

namespace dgan {

namespace {

namespace fs = std::filesystem;

Dataset build_dataset(const ExperimentConfig& cfg) {
    if (const auto* ring = std::get_if<RingSpec>(&cfg.dataset))
        return make_ring(ring->modes, ring->radius, ring->sigma, ring->per_mode,
                         mix_seed(cfg.seeds.data, 0));
    const auto& idx = std::get<IdxSpec>(cfg.dataset);
    return load_idx(idx.images, idx.labels);
}

PartitionSet build_partitions(const Dataset& ds, const ExperimentConfig& cfg) {
    if (const auto* by = std::get_if<ByLabel>(&cfg.part)) return partition(ds, *by);
    if (const auto* shard = std::get_if<Shard>(&cfg.part)) {
        Shard seeded = *shard;
        seeded.seed = mix_seed(cfg.seeds.data, 1);
        return partition(ds, seeded);
    }
    Partition all;
    all.owner = 0;
    all.indices.resize(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) all.indices[i] = i;
    return {all};
}

std::uint64_t server_init_seed(const Seeds& seeds) { return mix_seed(seeds.init, 1); }

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open for writing: " + path);
    f << text;
}

void write_checkpoints(const std::string& dir, const ExperimentConfig& cfg,
                       const NetworkSpec& g_spec, const NetworkSpec& d_spec,
                       const RunResult& run, const PartitionSet& parts) {
    save_spec(dir + "/generator_spec.json", g_spec);
    save_params(dir + "/generator_params.bin", run.final_generator.params);
    save_spec(dir + "/discriminator_spec.json", d_spec);
    for (std::size_t u = 0; u < run.final_discriminators.size(); ++u) {
        const int owner = cfg.strategy.kind == StrategyKind::Baseline
                              ? 0
                              : (u < parts.size() ? parts[u].owner : static_cast<int>(u));
        save_params(dir + "/user" + std::to_string(owner) + "_params.bin",
                    run.final_discriminators[u].params);
    }
    if (run.server_model) save_params(dir + "/server_params.bin", *run.server_model);
}

} // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg, bool check_asserts) {
    ExperimentResult result;
    const auto started = std::chrono::steady_clock::now();
    const auto finish_clock = [&] {
        result.wall_ms = static_cast<std::uint64_t>(
            std::chrono::duration_cast<std::chrono::milliseconds>(
                std::chrono::steady_clock::now() - started)
                .count());
    };

    std::string dir;
    std::vector<MetricsRecord> partial_metrics;
    try {
        cfg.validate();
        dir = cfg.output.dir;
        fs::create_directories(dir);
        write_text(dir + "/config_echo.json", config_echo(cfg).dump(2) + "\n");

        const Dataset ds = build_dataset(cfg);
        const PartitionSet parts = build_partitions(ds, cfg);
        if (cfg.strategy.kind != StrategyKind::Baseline && parts.size() != cfg.strategy.users)
            throw ConfigError("config: partition produced " + std::to_string(parts.size()) +
                              " shards for " + std::to_string(cfg.strategy.users) + " users");

        PresetOptions opts;
        opts.noise_dim = cfg.network.noise_dim;
        opts.data_dim = ds.dim();
        opts.hidden = cfg.network.hidden;
        const NetworkSpec g_spec = preset(cfg.network.generator, opts);
        const NetworkSpec d_spec = preset(cfg.network.discriminator, opts);

        Dataset baseline_view;
        const Dataset* run_data = &ds;
        if (cfg.restrict_to_user) {
            const std::size_t want = static_cast<std::size_t>(*cfg.restrict_to_user);
            const auto it = std::find_if(parts.begin(), parts.end(), [&](const Partition& p) {
                return p.owner == *cfg.restrict_to_user;
            });
            if (it == parts.end())
                throw ConfigError("config: restrict_to_user " + std::to_string(want) +
                                  " has no partition");
            baseline_view = subset(ds, it->indices);
            run_data = &baseline_view;
        }

        const double ring_sigma =
            std::holds_alternative<RingSpec>(cfg.dataset) ? std::get<RingSpec>(cfg.dataset).sigma
                                                          : 0.0;
        const std::size_t cadence =
            cfg.eval.every ? cfg.eval.every : std::max<std::size_t>(1, cfg.strategy.epochs / 20);

        RunHooks hooks;
        hooks.on_metrics = [&](const MetricsRecord& r) { partial_metrics.push_back(r); };
        if (ds.mode_centers) {
            hooks.on_epoch = [&, cadence](std::size_t epoch, const Network& generator) {
                if ((epoch + 1) % cadence != 0 && epoch + 1 != cfg.strategy.epochs) return;
                NoiseSource noise(generator.spec.input_dim, eval_stream_seed(cfg.seeds, epoch),
                                  cfg.strategy.noise);
                const Matrix samples = forward(generator, noise.draw(cfg.eval.samples));
                CoverageReport rep = mode_coverage(samples, *ds.mode_centers, ring_sigma,
                                                   cfg.eval.threshold_count);
                rep.epoch = epoch;
                result.coverage.push_back(std::move(rep));
            };
        }

        switch (cfg.strategy.kind) {
            case StrategyKind::Baseline:
                result.run = run_baseline(*run_data, g_spec, d_spec, cfg.strategy, cfg.seeds,
                                          hooks);
                break;
            case StrategyKind::RoundRobin: {
                auto users = make_users(d_spec, parts, cfg.seeds, cfg.strategy.gan_cfg.lr_d);
                Network gen = build_network(g_spec, generator_init_seed(cfg.seeds));
                result.run = run_round_robin(std::move(users), std::move(gen), ds, cfg.strategy,
                                             cfg.seeds, hooks);
                break;
            }
            case StrategyKind::Averaged: {
                auto users = make_users(d_spec, parts, cfg.seeds, cfg.strategy.gan_cfg.lr_d);
                Network gen = build_network(g_spec, generator_init_seed(cfg.seeds));
                result.run = run_averaged(std::move(users), std::move(gen), ds, cfg.strategy,
                                          cfg.seeds, hooks);
                break;
            }
            case StrategyKind::Federated: {
                ServerState server = make_server(d_spec, server_init_seed(cfg.seeds),
                                                 cfg.strategy.policy, cfg.strategy.lr_server);
                auto users = make_federated_users(server, parts, cfg.strategy.gan_cfg.lr_d);
                Network gen = build_network(g_spec, generator_init_seed(cfg.seeds));
                result.run = run_federated(std::move(users), std::move(server), std::move(gen),
                                           ds, cfg.strategy, cfg.seeds, hooks);
                break;
            }
        }

        write_metrics_csv(result.run.metrics, dir + "/metrics.csv");
        write_coverage_csv(result.coverage, dir + "/coverage.csv");
        write_text(dir + "/channel_log.txt", channel_log_text(result.run.messages));
        write_text(dir + "/audit.txt", audit_channel(result.run.messages, ds.dim()).to_text());

        {
            NoiseSource noise(result.run.final_generator.spec.input_dim,
                              eval_stream_seed(cfg.seeds, cfg.strategy.epochs),
                              cfg.strategy.noise);
            Dataset generated;
            generated.samples = forward(result.run.final_generator, noise.draw(cfg.eval.samples));
            dataset_to_csv(generated, dir + "/samples_final.csv");
        }
        write_checkpoints(dir, cfg, g_spec, d_spec, result.run, parts);
    } catch (const ConfigError& e) {
        finish_clock();
        result.exit_code = kExitConfig;
        result.error = e.what();
        return result;
    } catch (const IoError& e) {
        finish_clock();
        result.exit_code = kExitConfig;
        result.error = e.what();
        return result;
    } catch (const NumericError& e) {
        // keep whatever progress exists so the failure can be inspected
        if (!dir.empty()) {
            write_metrics_csv(partial_metrics, dir + "/metrics.csv");
            write_coverage_csv(result.coverage, dir + "/coverage.csv");
        }
        finish_clock();
        result.exit_code = kExitNumeric;
        result.error = e.what();
        return result;
    }

    finish_clock();
    if (check_asserts) {
        const CoverageReport* last = result.coverage.empty() ? nullptr : &result.coverage.back();
        std::ostringstream fail;
        if (cfg.asserts.min_covered_modes) {
            if (!last)
                fail << "assert: no coverage was recorded; ";
            else if (last->covered_modes < *cfg.asserts.min_covered_modes)
                fail << "assert: covered_modes " << last->covered_modes << " < "
                     << *cfg.asserts.min_covered_modes << "; ";
        }
        if (cfg.asserts.min_quality) {
            if (!last)
                fail << "assert: no coverage was recorded; ";
            else if (last->high_quality_fraction < *cfg.asserts.min_quality)
                fail << "assert: high_quality_fraction " << last->high_quality_fraction << " < "
                     << *cfg.asserts.min_quality << "; ";
        }
        const std::string msg = fail.str();
        if (!msg.empty()) {
            result.exit_code = kExitAssertFailed;
            result.error = msg;
        }
    }
    return result;
}

namespace {

nlohmann::json read_json_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open: " + path);
    nlohmann::json doc;
    try {
        f >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw IoError(path + ": " + e.what());
    }
    return doc;
}

} // namespace

std::vector<CompareRow> compare_runs(const std::vector<std::string>& dirs) {
    if (dirs.size() < 2) throw ConfigError("compare: need at least two run directories");

    std::vector<CompareRow> rows;
    rows.reserve(dirs.size());
    for (const std::string& dir : dirs) {
        CompareRow row;
        row.dir = dir;

        const nlohmann::json echo = read_json_file(dir + "/config_echo.json");
        row.strategy = echo.at("strategy").at("kind").get<std::string>();
        row.users = echo.at("strategy").at("users").get<std::size_t>();

        const std::vector<MetricsRecord> metrics = read_metrics_csv(dir + "/metrics.csv");
        std::map<int, std::uint64_t> per_user;
        bool saw_generator = false;
        for (const MetricsRecord& r : metrics) {
            row.wall_ms += r.wall_ms;
            if (r.user_id == kGeneratorId) {
                row.final_g_loss = r.g_loss;
                saw_generator = true;
            } else {
                row.total_work += r.work_units;
                per_user[r.user_id] += r.work_units;
            }
        }
        for (const auto& [user, work] : per_user) row.max_user_work = std::max(row.max_user_work, work);
        if (!saw_generator) row.final_g_loss = 0.0;

        if (fs::exists(dir + "/coverage.csv")) {
            const std::vector<CoverageReport> cov = read_coverage_csv(dir + "/coverage.csv");
            if (!cov.empty()) row.covered_modes = static_cast<long>(cov.back().covered_modes);
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string compare_table(const std::vector<CompareRow>& rows) {
    std::ostringstream out;
    out << "strategy      users  total_work  max_user_work  wall_ms  covered_modes  final_g_loss\n";
    for (const CompareRow& r : rows) {
        const std::string covered = r.covered_modes < 0 ? "-" : std::to_string(r.covered_modes);
        char line[256];
        std::snprintf(line, sizeof(line), "%-12s %6zu %11llu %14llu %8llu %14s %13.6g  %s\n",
                      r.strategy.c_str(), r.users,
                      static_cast<unsigned long long>(r.total_work),
                      static_cast<unsigned long long>(r.max_user_work),
                      static_cast<unsigned long long>(r.wall_ms),
                      covered.c_str(), r.final_g_loss, r.dir.c_str());
        out << line;
    }
    return out.str();
}

void write_compare_csv(const std::vector<CompareRow>& rows, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open for writing: " + path);
    f << "dir,strategy,users,total_work_units,max_user_work_units,wall_ms,covered_modes,"
         "final_g_loss\n";
    for (const CompareRow& r : rows) {
        f << r.dir << ',' << r.strategy << ',' << r.users << ',' << r.total_work << ','
          << r.max_user_work << ',' << r.wall_ms << ',' << r.covered_modes << ','
          << format_real(r.final_g_loss) << '\n';
    }
}

} // namespace dgan
