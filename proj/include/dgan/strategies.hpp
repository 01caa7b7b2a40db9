#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dgan/data.hpp"
#include "dgan/gan.hpp"
#include "dgan/metrics.hpp"
#include "dgan/nn.hpp"
#include "dgan/protocol.hpp"

namespace dgan {

enum class StrategyKind { Federated, Averaged, RoundRobin, Baseline };

std::string strategy_name(StrategyKind kind);
StrategyKind strategy_from_name(const std::string& name); // throws ConfigError

struct StrategyConfig {
    StrategyKind kind = StrategyKind::RoundRobin;
    std::size_t epochs = 1;
    std::size_t users = 2;
    TrainConfig gan_cfg;
    NoiseDistribution noise = NoiseDistribution::Normal;

    // Federated only
    SelectionPolicy policy = MaxMagnitude{};
    std::size_t fake_refresh = 1;  // server-to-user fake resend period, in epochs
    double upload_fraction = 1.0;  // share of gradient coordinates each user uploads
    std::size_t g_steps = 1;       // generator steps per protocol round
    double lr_server = 0.1;

    bool record_wall_ms = false;   // default off so metrics files are run-to-run identical
    std::size_t workers = 0;       // 0 = one per user, capped at hardware parallelism

    void validate() const; // throws SpecError
};

// The three seed roots. Every stream below them is derived with mix_seed so
// strategies can share substreams without collisions.
struct Seeds {
    std::uint64_t data = 1;
    std::uint64_t init = 2;
    std::uint64_t train = 3;
};

// Stream ids under Seeds::init and Seeds::train.
std::uint64_t generator_init_seed(const Seeds& seeds);
std::uint64_t discriminator_init_seed(const Seeds& seeds, int user_id);
std::uint64_t noise_stream_seed(const Seeds& seeds);
std::uint64_t sampler_stream_seed(const Seeds& seeds, int user_id);
std::uint64_t eval_stream_seed(const Seeds& seeds, std::size_t epoch);

struct UserNode {
    int id = 0;
    Network discriminator;
    std::vector<std::size_t> indices; // rows of the shared dataset this user owns
    double lr_d = 0.1;
};

std::vector<UserNode> make_users(const NetworkSpec& d_spec, const PartitionSet& parts,
                                 const Seeds& seeds, double lr_d);

// Federated users all start from the server's current weights.
std::vector<UserNode> make_federated_users(const ServerState& server, const PartitionSet& parts,
                                           double lr_d);

struct RunHooks {
    // called after every epoch with the epoch index and the current generator
    std::function<void(std::size_t epoch, const Network& generator)> on_epoch;
    // called as each metrics row is produced, so callers can persist partial
    // progress even when a later step throws
    std::function<void(const MetricsRecord&)> on_metrics;
};

struct RunResult {
    std::vector<MetricsRecord> metrics;
    Network final_generator;
    std::vector<Network> final_discriminators;  // user order; baseline has one
    std::optional<ParamVector> server_model;    // Federated only
    std::vector<ChannelMessage> messages;
};

RunResult run_federated(std::vector<UserNode> users, ServerState server, Network generator,
                        const Dataset& data, const StrategyConfig& cfg, const Seeds& seeds,
                        const RunHooks& hooks = {});

RunResult run_averaged(std::vector<UserNode> users, Network generator, const Dataset& data,
                       const StrategyConfig& cfg, const Seeds& seeds, const RunHooks& hooks = {});

RunResult run_round_robin(std::vector<UserNode> users, Network generator, const Dataset& data,
                          const StrategyConfig& cfg, const Seeds& seeds,
                          const RunHooks& hooks = {});

// Single-party alternation over the whole dataset: the comparator for the
// work and coverage claims. Builds its own networks from the shared seed
// streams (generator stream 0, discriminator stream of user 0).
RunResult run_baseline(const Dataset& data, const NetworkSpec& g_spec, const NetworkSpec& d_spec,
                       const StrategyConfig& cfg, const Seeds& seeds, const RunHooks& hooks = {});

} // namespace dgan
