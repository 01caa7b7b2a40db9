#pragma once

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <variant>

#include "dgan/data.hpp"
#include "dgan/strategies.hpp"

namespace dgan {

struct RingSpec {
    std::size_t modes = 8;
    double radius = 2.0;
    double sigma = 0.05;
    std::size_t per_mode = 64;
};

struct IdxSpec {
    std::string images;
    std::string labels;
};

using DatasetSpec = std::variant<RingSpec, IdxSpec>;

// scheme "none": the whole dataset as one partition (baseline runs)
struct NoPartition {};

using PartitionSpec = std::variant<ByLabel, Shard, NoPartition>;

struct NetworkChoice {
    std::string generator = "ring2d_g";
    std::string discriminator = "ring2d_d";
    std::size_t noise_dim = 2;
    std::size_t hidden = 0; // 0 keeps the preset default
};

struct EvalConfig {
    std::size_t samples = 2000;
    std::size_t every = 0; // 0 = max(1, epochs / 20)
    std::size_t threshold_count = 20;
};

struct OutputConfig {
    std::string dir = "run_out";
};

struct AssertConfig {
    std::optional<std::size_t> min_covered_modes;
    std::optional<double> min_quality;
};

struct ExperimentConfig {
    DatasetSpec dataset = RingSpec{};
    PartitionSpec part = NoPartition{};
    StrategyConfig strategy;
    NetworkChoice network;
    Seeds seeds;
    EvalConfig eval;
    OutputConfig output;
    std::optional<int> restrict_to_user; // baseline only: train on that user's shard
    AssertConfig asserts;

    void validate() const; // throws ConfigError
};

// Strict parse: unknown keys anywhere are an error, reported with their JSON
// path. Fills every default so the echo is fully resolved.
ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig load_config(const std::string& path); // throws ConfigError / IoError

nlohmann::json config_echo(const ExperimentConfig& cfg);

} // namespace dgan
