#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dgan/matrix.hpp"

namespace dgan {

enum class Activation { ReLU, LeakyReLU, Sigmoid, Tanh, Identity };

const char* activation_name(Activation a);
Activation activation_from_name(const std::string& name);

struct LayerSpec {
    enum class Kind { Dense, Activation };

    Kind kind = Kind::Dense;
    std::size_t in_dim = 0;  // Dense only
    std::size_t out_dim = 0; // Dense only
    Activation activation = Activation::Identity; // Activation only
    double slope = 0.01;                           // LeakyReLU only

    static LayerSpec dense(std::size_t in, std::size_t out);
    static LayerSpec act(Activation a, double slope = 0.01);
};

// Layer-by-layer description of an MLP. Dense layers must chain (out_dim of
// one equals in_dim of the next, activations pass dimensions through) and
// output_dim always equals the width after the last layer.
struct NetworkSpec {
    std::vector<LayerSpec> layers;
    std::size_t input_dim = 0;
    std::size_t output_dim = 0;

    // Validates the chain and fills output_dim.
    static NetworkSpec chain(std::size_t input_dim, std::vector<LayerSpec> layers);

    void validate() const; // throws SpecError on a broken chain
    std::size_t param_count() const;

    bool operator==(const NetworkSpec& o) const;
};

// Flat index map over all parameters of a NetworkSpec: for each Dense layer
// in order, weights row-major (out x in), then biases. Two layouts built from
// the same spec are identical.
struct ParamLayout {
    struct Segment {
        std::size_t layer = 0; // index into NetworkSpec.layers
        std::size_t in = 0;
        std::size_t out = 0;
        std::size_t weight_offset = 0;
        std::size_t bias_offset = 0;
    };

    std::vector<Segment> segments;
    std::size_t total = 0;

    static ParamLayout of(const NetworkSpec& spec);

    std::size_t weight_index(std::size_t segment, std::size_t row, std::size_t col) const;
    std::size_t bias_index(std::size_t segment, std::size_t row) const;

    struct Entry {
        std::size_t segment = 0;
        std::size_t layer = 0;
        bool is_bias = false;
        std::size_t row = 0;
        std::size_t col = 0;
    };
    Entry describe(std::size_t flat) const;

    bool operator==(const ParamLayout& o) const;
};

// Flat, index-addressable view of all parameters of one network.
struct ParamVector {
    std::vector<double> values;
    ParamLayout layout;

    std::size_t size() const { return values.size(); }
};

// Dense gradient with the same flat layout as a ParamVector.
using GradVector = std::vector<double>;

struct Batch {
    Matrix inputs;
    std::optional<Matrix> targets;

    // batch_size >= 1, all values finite
    void validate(std::size_t expected_input_dim) const;
};

struct Network {
    NetworkSpec spec;
    ParamVector params;
    std::uint64_t rng_seed = 0;
};

// Weights uniform(-1/sqrt(in_dim), +1/sqrt(in_dim)) per Dense layer, biases
// zero; bitwise deterministic given the seed.
Network build_network(const NetworkSpec& spec, std::uint64_t seed);

// Wraps an existing parameter vector (e.g. a checkpoint or a server model).
Network make_network(NetworkSpec spec, ParamVector params);

// Pure forward pass; throws NumericError naming the layer index if any
// intermediate goes non-finite.
Matrix forward(const Network& net, const Matrix& inputs);
Matrix forward(const Network& net, const Batch& batch);

struct BackpropResult {
    GradVector param_grad; // laid out like ParamVector
    Matrix input_grad;     // dLoss/dInput, batch_size x input_dim
};

// Exact analytic VJP: given dLoss/dOutput, returns dLoss/dParams and
// dLoss/dInput.
BackpropResult backward(const Network& net, const Matrix& inputs, const Matrix& upstream_grad);

// params <- params - lr * grad, in place.
void sgd_step(Network& net, const GradVector& grad, double lr);

// --- serialization -------------------------------------------------------

nlohmann::json spec_to_json(const NetworkSpec& spec);
NetworkSpec spec_from_json(const nlohmann::json& j);

// Little-endian u64 length prefix followed by little-endian f64 values.
std::vector<std::uint8_t> params_to_blob(const ParamVector& params);
std::vector<double> values_from_blob(const std::vector<std::uint8_t>& blob);

void save_spec(const std::string& path, const NetworkSpec& spec);
NetworkSpec load_spec(const std::string& path);
void save_params(const std::string& path, const ParamVector& params);
ParamVector load_params(const std::string& path, const NetworkSpec& spec);

// --- architecture presets ------------------------------------------------

struct PresetOptions {
    std::size_t noise_dim = 2;  // generator input width
    std::size_t data_dim = 2;   // sample width (ring presets)
    std::size_t hidden = 0;     // 0 = preset default
};

std::vector<std::string> preset_names();
NetworkSpec preset(const std::string& name, const PresetOptions& opts = {});

} // namespace dgan
