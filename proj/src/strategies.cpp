#include "dgan/strategies.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <thread>

#include "dgan/errors.hpp"
#include "dgan/rng.hpp"

namespace dgan {

std::string strategy_name(StrategyKind kind) {
    switch (kind) {
        case StrategyKind::Federated: return "federated";
        case StrategyKind::Averaged: return "averaged";
        case StrategyKind::RoundRobin: return "round_robin";
        case StrategyKind::Baseline: return "baseline";
    }
    return "?";
}

StrategyKind strategy_from_name(const std::string& name) {
    if (name == "federated") return StrategyKind::Federated;
    if (name == "averaged") return StrategyKind::Averaged;
    if (name == "round_robin") return StrategyKind::RoundRobin;
    if (name == "baseline") return StrategyKind::Baseline;
    throw ConfigError("unknown strategy: " + name);
}

void StrategyConfig::validate() const {
    gan_cfg.validate();
    const std::size_t min_users =
        (kind == StrategyKind::Federated || kind == StrategyKind::Averaged) ? 2 : 1;
    if (users < min_users)
        throw SpecError("strategy config: " + strategy_name(kind) + " needs at least " +
                        std::to_string(min_users) + " users");
    if (kind == StrategyKind::Federated) {
        validate_policy(policy);
        if (fake_refresh == 0) throw SpecError("strategy config: fake_refresh must be positive");
        if (!(upload_fraction > 0.0) || upload_fraction > 1.0)
            throw SpecError("strategy config: upload_fraction must be in (0, 1]");
        if (g_steps == 0) throw SpecError("strategy config: g_steps must be positive");
        if (!(lr_server > 0.0)) throw SpecError("strategy config: lr_server must be positive");
    }
}

std::uint64_t generator_init_seed(const Seeds& seeds) { return mix_seed(seeds.init, 0); }
std::uint64_t discriminator_init_seed(const Seeds& seeds, int user_id) {
    return mix_seed(seeds.init, 1 + static_cast<std::uint64_t>(user_id));
}
std::uint64_t noise_stream_seed(const Seeds& seeds) { return mix_seed(seeds.train, 0); }
std::uint64_t sampler_stream_seed(const Seeds& seeds, int user_id) {
    return mix_seed(seeds.train, 1000 + static_cast<std::uint64_t>(user_id));
}
std::uint64_t eval_stream_seed(const Seeds& seeds, std::size_t epoch) {
    return mix_seed(seeds.train, 3000 + epoch);
}

std::vector<UserNode> make_users(const NetworkSpec& d_spec, const PartitionSet& parts,
                                 const Seeds& seeds, double lr_d) {
    std::vector<UserNode> users;
    users.reserve(parts.size());
    for (const Partition& part : parts) {
        UserNode u;
        u.id = part.owner;
        u.discriminator = build_network(d_spec, discriminator_init_seed(seeds, part.owner));
        u.indices = part.indices;
        u.lr_d = lr_d;
        users.push_back(std::move(u));
    }
    return users;
}

std::vector<UserNode> make_federated_users(const ServerState& server, const PartitionSet& parts,
                                           double lr_d) {
    std::vector<UserNode> users;
    users.reserve(parts.size());
    for (const Partition& part : parts) {
        UserNode u;
        u.id = part.owner;
        u.discriminator = make_network(server.spec, server.w_s);
        u.indices = part.indices;
        u.lr_d = lr_d;
        users.push_back(std::move(u));
    }
    return users;
}

namespace {

using Clock = std::chrono::steady_clock;

std::uint64_t elapsed_ms(Clock::time_point start) {
    return static_cast<std::uint64_t>(
        std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start).count());
}

Matrix rows_of(const Dataset& data, const std::vector<std::size_t>& order, std::size_t begin,
               std::size_t end) {
    Matrix m(end - begin, data.dim());
    for (std::size_t r = begin; r < end; ++r)
        for (std::size_t c = 0; c < data.dim(); ++c) m(r - begin, c) = data.samples(order[r], c);
    return m;
}

struct SweepResult {
    double mean_d_loss = 0.0;
    std::size_t samples = 0;
    std::uint64_t wall_ms = 0;
};

// One epoch of local discriminator training: a full pass over the user's
// shard in freshly shuffled minibatches. fake_for_step supplies the fake side
// of minibatch s.
SweepResult local_sweep(UserNode& user, const Dataset& data, const TrainConfig& cfg, Rng& sampler,
                        const std::function<Matrix(std::size_t)>& fake_for_step,
                        bool record_wall) {
    const auto start = Clock::now();
    std::vector<std::size_t> order = user.indices;
    sampler.shuffle(order);

    SweepResult res;
    res.samples = order.size();
    double loss_sum = 0.0;
    std::size_t steps = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_real) {
        const std::size_t end = std::min(order.size(), begin + cfg.batch_real);
        const Matrix real = rows_of(data, order, begin, end);
        loss_sum += discriminator_step(user.discriminator, real, fake_for_step(steps), cfg.lr_d);
        ++steps;
    }
    res.mean_d_loss = steps ? loss_sum / static_cast<double>(steps) : 0.0;
    if (record_wall) res.wall_ms = elapsed_ms(start);
    return res;
}

void run_user_pool(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn) {
    const std::size_t hw = std::max<std::size_t>(1, std::thread::hardware_concurrency());
    std::size_t pool = workers == 0 ? n : workers;
    pool = std::min({pool, n, hw});
    if (pool <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> threads;
    threads.reserve(pool);
    for (std::size_t t = 0; t < pool; ++t) {
        threads.emplace_back([&] {
            for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
        });
    }
    for (std::thread& t : threads) t.join();
}

void check_common(const std::vector<UserNode>& users, const Network& generator,
                  const Dataset& data, const StrategyConfig& cfg) {
    cfg.validate();
    data.validate();
    if (users.size() != cfg.users)
        throw SpecError("strategy: user list size does not match config");
    for (const UserNode& u : users) {
        if (u.discriminator.spec.input_dim != data.dim())
            throw SpecError("strategy: discriminator input width does not match data");
        if (u.discriminator.spec.input_dim != generator.spec.output_dim)
            throw SpecError("strategy: generator output width does not match discriminators");
        for (std::size_t i : u.indices)
            if (i >= data.size()) throw SpecError("strategy: partition index out of range");
    }
}

std::string user_name(int id) { return "user" + std::to_string(id); }

void push_metric(RunResult& out, const RunHooks& hooks, MetricsRecord rec) {
    if (hooks.on_metrics) hooks.on_metrics(rec);
    out.metrics.push_back(std::move(rec));
}

} // namespace

RunResult run_round_robin(std::vector<UserNode> users, Network generator, const Dataset& data,
                          const StrategyConfig& cfg, const Seeds& seeds, const RunHooks& hooks) {
    check_common(users, generator, data, cfg);

    ChannelLog log;
    NoiseSource noise(generator.spec.input_dim, noise_stream_seed(seeds), cfg.noise);
    std::vector<Rng> samplers;
    for (const UserNode& u : users) samplers.emplace_back(sampler_stream_seed(seeds, u.id));

    RunResult out;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        double g_loss_sum = 0.0;
        for (std::size_t j = 0; j < users.size(); ++j) {
            UserNode& user = users[j];
            const auto fresh_fakes = [&](std::size_t) {
                const Matrix z = noise.draw(cfg.gan_cfg.batch_fake);
                Matrix fakes = forward(generator, z);
                log.append(make_message(epoch, "server", user_name(user.id),
                                        MessageKind::FakeSampleBatch, FakeSamples{fakes}));
                return fakes;
            };
            const SweepResult sweep =
                local_sweep(user, data, cfg.gan_cfg, samplers[j], fresh_fakes,
                            cfg.record_wall_ms);
            push_metric(out, hooks, {epoch, user.id, sweep.mean_d_loss, 0.0, sweep.samples,
                                     sweep.wall_ms});

            // one generator step against this user's discriminator alone
            const Matrix z = noise.draw(cfg.gan_cfg.batch_fake);
            const Matrix fakes = forward(generator, z);
            log.append(make_message(epoch, "server", user_name(user.id),
                                    MessageKind::FakeSampleBatch, FakeSamples{fakes}));
            NetworkCritic critic(user.discriminator);
            const CriticEvaluation ev = critic.evaluate(fakes);
            log.append(make_message(epoch, user_name(user.id), "server",
                                    MessageKind::ScalarScores,
                                    ScoreFeedback{ev.scores, ev.input_grad}));
            const BackpropResult bp = backward(generator, z, ev.input_grad);
            sgd_step(generator, bp.param_grad, cfg.gan_cfg.lr_g);
            g_loss_sum += ev.loss;
        }
        push_metric(out, hooks, {epoch, kGeneratorId, 0.0,
                                 g_loss_sum / static_cast<double>(users.size()), users.size(), 0});
        if (hooks.on_epoch) hooks.on_epoch(epoch, generator);
    }

    out.final_generator = std::move(generator);
    for (UserNode& u : users) out.final_discriminators.push_back(std::move(u.discriminator));
    out.messages = log.snapshot();
    return out;
}

RunResult run_baseline(const Dataset& data, const NetworkSpec& g_spec, const NetworkSpec& d_spec,
                       const StrategyConfig& cfg, const Seeds& seeds, const RunHooks& hooks) {
    cfg.validate();
    data.validate();
    if (d_spec.input_dim != data.dim())
        throw SpecError("baseline: discriminator input width does not match data");

    Network generator = build_network(g_spec, generator_init_seed(seeds));
    UserNode trainer;
    trainer.id = 0;
    trainer.discriminator = build_network(d_spec, discriminator_init_seed(seeds, 0));
    trainer.indices.resize(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) trainer.indices[i] = i;
    trainer.lr_d = cfg.gan_cfg.lr_d;

    NoiseSource noise(generator.spec.input_dim, noise_stream_seed(seeds), cfg.noise);
    Rng sampler(sampler_stream_seed(seeds, 0));

    RunResult out;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto fresh_fakes = [&](std::size_t) {
            return forward(generator, noise.draw(cfg.gan_cfg.batch_fake));
        };
        const SweepResult sweep =
            local_sweep(trainer, data, cfg.gan_cfg, sampler, fresh_fakes, cfg.record_wall_ms);
        push_metric(out, hooks, {epoch, 0, sweep.mean_d_loss, 0.0, sweep.samples, sweep.wall_ms});

        NetworkCritic critic(trainer.discriminator);
        const Matrix z = noise.draw(cfg.gan_cfg.batch_fake);
        const double g_loss = generator_step(generator, z, critic, cfg.gan_cfg.lr_g);
        push_metric(out, hooks, {epoch, kGeneratorId, 0.0, g_loss, 1, 0});
        if (hooks.on_epoch) hooks.on_epoch(epoch, generator);
    }

    out.final_generator = std::move(generator);
    out.final_discriminators.push_back(std::move(trainer.discriminator));
    return out;
}

RunResult run_averaged(std::vector<UserNode> users, Network generator, const Dataset& data,
                       const StrategyConfig& cfg, const Seeds& seeds, const RunHooks& hooks) {
    check_common(users, generator, data, cfg);

    ChannelLog log;
    NoiseSource noise(generator.spec.input_dim, noise_stream_seed(seeds), cfg.noise);
    std::vector<Rng> samplers;
    for (const UserNode& u : users) samplers.emplace_back(sampler_stream_seed(seeds, u.id));

    RunResult out;
    std::vector<Matrix> fake_batches(users.size());
    std::vector<SweepResult> sweeps(users.size());

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t u = 0; u < users.size(); ++u) {
            fake_batches[u] = forward(generator, noise.draw(cfg.gan_cfg.batch_fake));
            log.append(make_message(epoch, "server", user_name(users[u].id),
                                    MessageKind::FakeSampleBatch, FakeSamples{fake_batches[u]}));
        }

        run_user_pool(users.size(), cfg.workers, [&](std::size_t u) {
            const auto fakes = [&](std::size_t) { return fake_batches[u]; };
            sweeps[u] = local_sweep(users[u], data, cfg.gan_cfg, samplers[u], fakes,
                                    cfg.record_wall_ms);
        });

        for (std::size_t u = 0; u < users.size(); ++u) {
            const Matrix verdict = forward(users[u].discriminator, fake_batches[u]);
            log.append(make_message(epoch, user_name(users[u].id), "server",
                                    MessageKind::ScalarScores,
                                    ScoreFeedback{verdict.data, Matrix(0, 0)}));
            log.append(make_message(epoch, user_name(users[u].id), "server",
                                    MessageKind::WeightSnapshot,
                                    WeightPayload{users[u].discriminator.params.values}));
            push_metric(out, hooks, {epoch, users[u].id, sweeps[u].mean_d_loss, 0.0,
                                     sweeps[u].samples, sweeps[u].wall_ms});
        }

        std::vector<const Network*> members;
        members.reserve(users.size());
        for (const UserNode& u : users) members.push_back(&u.discriminator);
        AveragedCritic critic(members);
        const Matrix z = noise.draw(cfg.gan_cfg.batch_fake);
        const double g_loss = generator_step(generator, z, critic, cfg.gan_cfg.lr_g);
        push_metric(out, hooks, {epoch, kGeneratorId, 0.0, g_loss, 1, 0});
        if (hooks.on_epoch) hooks.on_epoch(epoch, generator);
    }

    out.final_generator = std::move(generator);
    for (UserNode& u : users) out.final_discriminators.push_back(std::move(u.discriminator));
    out.messages = log.snapshot();
    return out;
}

RunResult run_federated(std::vector<UserNode> users, ServerState server, Network generator,
                        const Dataset& data, const StrategyConfig& cfg, const Seeds& seeds,
                        const RunHooks& hooks) {
    check_common(users, generator, data, cfg);
    for (const UserNode& u : users)
        if (!(u.discriminator.spec == server.spec))
            throw SpecError("federated: users must share the server's network spec");

    ChannelLog log;
    NoiseSource noise(generator.spec.input_dim, noise_stream_seed(seeds), cfg.noise);
    std::vector<Rng> samplers;
    for (const UserNode& u : users) samplers.emplace_back(sampler_stream_seed(seeds, u.id));

    Network server_net = make_network(server.spec, server.w_s);

    RunResult out;
    std::vector<Matrix> fake_batches(users.size());
    std::vector<SweepResult> sweeps(users.size());
    std::vector<GradVector> grads(users.size());

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        if (epoch % cfg.fake_refresh == 0) {
            for (std::size_t u = 0; u < users.size(); ++u) {
                fake_batches[u] = forward(generator, noise.draw(cfg.gan_cfg.batch_fake));
                log.append(make_message(epoch, "server", user_name(users[u].id),
                                        MessageKind::FakeSampleBatch,
                                        FakeSamples{fake_batches[u]}));
            }
        }

        run_user_pool(users.size(), cfg.workers, [&](std::size_t u) {
            const std::vector<double> before = users[u].discriminator.params.values;
            const auto fakes = [&](std::size_t) { return fake_batches[u]; };
            sweeps[u] = local_sweep(users[u], data, cfg.gan_cfg, samplers[u], fakes,
                                    cfg.record_wall_ms);
            const std::vector<double>& after = users[u].discriminator.params.values;
            grads[u].resize(before.size());
            for (std::size_t k = 0; k < before.size(); ++k)
                grads[u][k] = (before[k] - after[k]) / users[u].lr_d;
        });

        std::vector<GradUpdate> uploads;
        uploads.reserve(users.size());
        for (std::size_t u = 0; u < users.size(); ++u) {
            GradUpdate up = select_upload(grads[u], cfg.upload_fraction,
                                          mix_seed(seeds.train, 5000 + epoch), users[u].id, epoch);
            log.append(make_message(epoch, user_name(users[u].id), "server",
                                    MessageKind::GradUpload, up));
            uploads.push_back(std::move(up));
            push_metric(out, hooks, {epoch, users[u].id, sweeps[u].mean_d_loss, 0.0,
                                     sweeps[u].samples, sweeps[u].wall_ms});
        }

        const GradVector agg = aggregate(server, uploads);
        std::vector<BroadcastTarget> targets;
        targets.reserve(users.size());
        for (UserNode& u : users) targets.push_back({u.id, &u.discriminator, u.lr_d});
        broadcast(server, agg, targets, log);
        apply_global(server, agg);
        server_net.params.values = server.w_s.values;

        NetworkCritic critic(server_net);
        double g_loss_sum = 0.0;
        for (std::size_t k = 0; k < cfg.g_steps; ++k) {
            const Matrix z = noise.draw(cfg.gan_cfg.batch_fake);
            g_loss_sum += generator_step(generator, z, critic, cfg.gan_cfg.lr_g);
        }
        push_metric(out, hooks, {epoch, kGeneratorId, 0.0,
                                 g_loss_sum / static_cast<double>(cfg.g_steps), cfg.g_steps, 0});
        if (hooks.on_epoch) hooks.on_epoch(epoch, generator);
    }

    out.final_generator = std::move(generator);
    for (UserNode& u : users) out.final_discriminators.push_back(std::move(u.discriminator));
    out.server_model = std::move(server.w_s);
    out.messages = log.snapshot();
    return out;
}

} // namespace dgan
