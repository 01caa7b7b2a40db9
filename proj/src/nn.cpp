#include "dgan/nn.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "dgan/errors.hpp"
#include "dgan/rng.hpp"

namespace dgan {

namespace {

double apply_activation(Activation a, double slope, double z) {
    switch (a) {
        case Activation::ReLU: return z > 0.0 ? z : 0.0;
        case Activation::LeakyReLU: return z > 0.0 ? z : slope * z;
        case Activation::Sigmoid:
            // stable in both tails
            if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
            {
                const double e = std::exp(z);
                return e / (1.0 + e);
            }
        case Activation::Tanh: return std::tanh(z);
        case Activation::Identity: return z;
    }
    return z;
}

double activation_derivative(Activation a, double slope, double z) {
    switch (a) {
        case Activation::ReLU: return z > 0.0 ? 1.0 : 0.0;
        case Activation::LeakyReLU: return z > 0.0 ? 1.0 : slope;
        case Activation::Sigmoid: {
            const double s = apply_activation(Activation::Sigmoid, 0.0, z);
            return s * (1.0 - s);
        }
        case Activation::Tanh: {
            const double t = std::tanh(z);
            return 1.0 - t * t;
        }
        case Activation::Identity: return 1.0;
    }
    return 1.0;
}

void check_finite(const Matrix& m, std::size_t layer_index) {
    if (!m.all_finite()) {
        std::ostringstream os;
        os << "non-finite value in output of layer " << layer_index;
        throw NumericError(os.str());
    }
}

// One activation record per layer: Dense layers remember their input,
// Activation layers remember their pre-activation.
struct TapeEntry {
    Matrix saved;
};

Matrix forward_impl(const Network& net, const Matrix& inputs, std::vector<TapeEntry>* tape) {
    if (inputs.cols != net.spec.input_dim)
        throw SpecError("forward: input width does not match spec.input_dim");
    if (!inputs.all_finite())
        throw NumericError("forward: non-finite value in input batch");

    Matrix cur = inputs;
    std::size_t seg = 0;
    for (std::size_t li = 0; li < net.spec.layers.size(); ++li) {
        const LayerSpec& layer = net.spec.layers[li];
        if (layer.kind == LayerSpec::Kind::Dense) {
            const ParamLayout::Segment& s = net.params.layout.segments[seg++];
            Matrix out(cur.rows, layer.out_dim);
            const double* w = net.params.values.data() + s.weight_offset;
            const double* b = net.params.values.data() + s.bias_offset;
            for (std::size_t r = 0; r < cur.rows; ++r) {
                const double* x = cur.row(r);
                double* y = out.row(r);
                for (std::size_t o = 0; o < s.out; ++o) {
                    double acc = b[o];
                    const double* wo = w + o * s.in;
                    for (std::size_t i = 0; i < s.in; ++i) acc += wo[i] * x[i];
                    y[o] = acc;
                }
            }
            if (tape) tape->push_back({std::move(cur)});
            cur = std::move(out);
        } else {
            if (tape) tape->push_back({cur});
            for (double& v : cur.data) v = apply_activation(layer.activation, layer.slope, v);
        }
        check_finite(cur, li);
    }
    return cur;
}

void encode_u64_le(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

std::uint64_t decode_u64_le(const std::uint8_t* p) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return v;
}

} // namespace

const char* activation_name(Activation a) {
    switch (a) {
        case Activation::ReLU: return "relu";
        case Activation::LeakyReLU: return "leaky_relu";
        case Activation::Sigmoid: return "sigmoid";
        case Activation::Tanh: return "tanh";
        case Activation::Identity: return "identity";
    }
    return "identity";
}

Activation activation_from_name(const std::string& name) {
    if (name == "relu") return Activation::ReLU;
    if (name == "leaky_relu") return Activation::LeakyReLU;
    if (name == "sigmoid") return Activation::Sigmoid;
    if (name == "tanh") return Activation::Tanh;
    if (name == "identity") return Activation::Identity;
    throw SpecError("unknown activation: " + name);
}

LayerSpec LayerSpec::dense(std::size_t in, std::size_t out) {
    LayerSpec l;
    l.kind = Kind::Dense;
    l.in_dim = in;
    l.out_dim = out;
    return l;
}

LayerSpec LayerSpec::act(Activation a, double slope) {
    LayerSpec l;
    l.kind = Kind::Activation;
    l.activation = a;
    l.slope = slope;
    return l;
}

NetworkSpec NetworkSpec::chain(std::size_t input_dim, std::vector<LayerSpec> layers) {
    NetworkSpec spec;
    spec.input_dim = input_dim;
    spec.layers = std::move(layers);
    std::size_t cur = input_dim;
    for (const LayerSpec& l : spec.layers)
        if (l.kind == LayerSpec::Kind::Dense) cur = l.out_dim;
    spec.output_dim = cur;
    spec.validate();
    return spec;
}

void NetworkSpec::validate() const {
    if (input_dim == 0) throw SpecError("spec: input_dim must be positive");
    std::size_t cur = input_dim;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const LayerSpec& l = layers[i];
        if (l.kind == LayerSpec::Kind::Dense) {
            if (l.in_dim == 0 || l.out_dim == 0)
                throw SpecError("spec: dense layer " + std::to_string(i) + " has zero dimension");
            if (l.in_dim != cur) {
                std::ostringstream os;
                os << "spec: dense layer " << i << " expects in_dim " << l.in_dim
                   << " but previous width is " << cur;
                throw SpecError(os.str());
            }
            cur = l.out_dim;
        } else if (l.activation == Activation::LeakyReLU) {
            if (!(l.slope > 0.0 && l.slope < 1.0))
                throw SpecError("spec: leaky_relu slope must be in (0, 1)");
        }
    }
    if (output_dim != cur) {
        std::ostringstream os;
        os << "spec: output_dim " << output_dim << " does not match final layer width " << cur;
        throw SpecError(os.str());
    }
}

std::size_t NetworkSpec::param_count() const {
    std::size_t n = 0;
    for (const LayerSpec& l : layers)
        if (l.kind == LayerSpec::Kind::Dense) n += l.in_dim * l.out_dim + l.out_dim;
    return n;
}

bool NetworkSpec::operator==(const NetworkSpec& o) const {
    if (input_dim != o.input_dim || output_dim != o.output_dim ||
        layers.size() != o.layers.size())
        return false;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const LayerSpec& a = layers[i];
        const LayerSpec& b = o.layers[i];
        if (a.kind != b.kind) return false;
        if (a.kind == LayerSpec::Kind::Dense) {
            if (a.in_dim != b.in_dim || a.out_dim != b.out_dim) return false;
        } else {
            if (a.activation != b.activation) return false;
            if (a.activation == Activation::LeakyReLU && a.slope != b.slope) return false;
        }
    }
    return true;
}

ParamLayout ParamLayout::of(const NetworkSpec& spec) {
    spec.validate();
    ParamLayout layout;
    std::size_t offset = 0;
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const LayerSpec& l = spec.layers[i];
        if (l.kind != LayerSpec::Kind::Dense) continue;
        Segment s;
        s.layer = i;
        s.in = l.in_dim;
        s.out = l.out_dim;
        s.weight_offset = offset;
        offset += l.in_dim * l.out_dim;
        s.bias_offset = offset;
        offset += l.out_dim;
        layout.segments.push_back(s);
    }
    layout.total = offset;
    return layout;
}

std::size_t ParamLayout::weight_index(std::size_t segment, std::size_t row, std::size_t col) const {
    const Segment& s = segments.at(segment);
    if (row >= s.out || col >= s.in) throw SpecError("layout: weight index out of range");
    return s.weight_offset + row * s.in + col;
}

std::size_t ParamLayout::bias_index(std::size_t segment, std::size_t row) const {
    const Segment& s = segments.at(segment);
    if (row >= s.out) throw SpecError("layout: bias index out of range");
    return s.bias_offset + row;
}

ParamLayout::Entry ParamLayout::describe(std::size_t flat) const {
    if (flat >= total) throw SpecError("layout: flat index out of range");
    for (std::size_t si = 0; si < segments.size(); ++si) {
        const Segment& s = segments[si];
        if (flat >= s.weight_offset && flat < s.bias_offset) {
            const std::size_t rel = flat - s.weight_offset;
            return {si, s.layer, false, rel / s.in, rel % s.in};
        }
        if (flat >= s.bias_offset && flat < s.bias_offset + s.out) {
            return {si, s.layer, true, flat - s.bias_offset, 0};
        }
    }
    throw SpecError("layout: flat index not covered by any segment");
}

bool ParamLayout::operator==(const ParamLayout& o) const {
    if (total != o.total || segments.size() != o.segments.size()) return false;
    for (std::size_t i = 0; i < segments.size(); ++i) {
        const Segment& a = segments[i];
        const Segment& b = o.segments[i];
        if (a.layer != b.layer || a.in != b.in || a.out != b.out ||
            a.weight_offset != b.weight_offset || a.bias_offset != b.bias_offset)
            return false;
    }
    return true;
}

void Batch::validate(std::size_t expected_input_dim) const {
    if (inputs.rows < 1) throw SpecError("batch: batch_size must be >= 1");
    if (inputs.cols != expected_input_dim)
        throw SpecError("batch: input width does not match network input_dim");
    if (!inputs.all_finite()) throw SpecError("batch: non-finite input value");
    if (targets && !targets->all_finite()) throw SpecError("batch: non-finite target value");
}

Network build_network(const NetworkSpec& spec, std::uint64_t seed) {
    spec.validate();
    Network net;
    net.spec = spec;
    net.rng_seed = seed;
    net.params.layout = ParamLayout::of(spec);
    net.params.values.assign(net.params.layout.total, 0.0);

    Rng rng(seed);
    for (const ParamLayout::Segment& s : net.params.layout.segments) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(s.in));
        double* w = net.params.values.data() + s.weight_offset;
        for (std::size_t k = 0; k < s.in * s.out; ++k) w[k] = rng.uniform(-bound, bound);
        // biases stay zero
    }
    return net;
}

Network make_network(NetworkSpec spec, ParamVector params) {
    spec.validate();
    const ParamLayout expected = ParamLayout::of(spec);
    if (!(params.layout == expected) || params.values.size() != expected.total)
        throw SpecError("make_network: parameter layout does not match spec");
    Network net;
    net.spec = std::move(spec);
    net.params = std::move(params);
    return net;
}

Matrix forward(const Network& net, const Matrix& inputs) {
    return forward_impl(net, inputs, nullptr);
}

Matrix forward(const Network& net, const Batch& batch) {
    batch.validate(net.spec.input_dim);
    return forward_impl(net, batch.inputs, nullptr);
}

BackpropResult backward(const Network& net, const Matrix& inputs, const Matrix& upstream_grad) {
    std::vector<TapeEntry> tape;
    tape.reserve(net.spec.layers.size());
    const Matrix out = forward_impl(net, inputs, &tape);
    if (upstream_grad.rows != out.rows || upstream_grad.cols != out.cols)
        throw SpecError("backward: upstream_grad shape does not match forward output");

    BackpropResult res;
    res.param_grad.assign(net.params.layout.total, 0.0);

    Matrix delta = upstream_grad;
    std::size_t seg = net.params.layout.segments.size();
    for (std::size_t li = net.spec.layers.size(); li-- > 0;) {
        const LayerSpec& layer = net.spec.layers[li];
        const Matrix& saved = tape[li].saved;
        if (layer.kind == LayerSpec::Kind::Dense) {
            const ParamLayout::Segment& s = net.params.layout.segments[--seg];
            double* dw = res.param_grad.data() + s.weight_offset;
            double* db = res.param_grad.data() + s.bias_offset;
            const double* w = net.params.values.data() + s.weight_offset;
            Matrix prev_delta(delta.rows, s.in);
            for (std::size_t r = 0; r < delta.rows; ++r) {
                const double* u = delta.row(r);
                const double* x = saved.row(r);
                double* pd = prev_delta.row(r);
                for (std::size_t o = 0; o < s.out; ++o) {
                    const double uo = u[o];
                    db[o] += uo;
                    double* dwo = dw + o * s.in;
                    const double* wo = w + o * s.in;
                    for (std::size_t i = 0; i < s.in; ++i) {
                        dwo[i] += uo * x[i];
                        pd[i] += uo * wo[i];
                    }
                }
            }
            delta = std::move(prev_delta);
        } else {
            for (std::size_t k = 0; k < delta.data.size(); ++k)
                delta.data[k] *= activation_derivative(layer.activation, layer.slope, saved.data[k]);
        }
    }
    res.input_grad = std::move(delta);
    return res;
}

void sgd_step(Network& net, const GradVector& grad, double lr) {
    if (grad.size() != net.params.values.size())
        throw SpecError("sgd_step: gradient layout does not match network");
    for (std::size_t i = 0; i < grad.size(); ++i) net.params.values[i] -= lr * grad[i];
}

// --- serialization -------------------------------------------------------

nlohmann::json spec_to_json(const NetworkSpec& spec) {
    nlohmann::json layers = nlohmann::json::array();
    for (const LayerSpec& l : spec.layers) {
        nlohmann::json jl;
        if (l.kind == LayerSpec::Kind::Dense) {
            jl["kind"] = "dense";
            jl["in"] = l.in_dim;
            jl["out"] = l.out_dim;
        } else {
            jl["kind"] = "activation";
            jl["activation"] = activation_name(l.activation);
            if (l.activation == Activation::LeakyReLU) jl["slope"] = l.slope;
        }
        layers.push_back(jl);
    }
    return {{"input_dim", spec.input_dim}, {"output_dim", spec.output_dim}, {"layers", layers}};
}

NetworkSpec spec_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("spec json: document must be an object");
    try {
        NetworkSpec spec;
        spec.input_dim = j.at("input_dim").get<std::size_t>();
        for (const nlohmann::json& jl : j.at("layers")) {
            const std::string kind = jl.at("kind").get<std::string>();
            if (kind == "dense") {
                spec.layers.push_back(LayerSpec::dense(jl.at("in").get<std::size_t>(),
                                                       jl.at("out").get<std::size_t>()));
            } else if (kind == "activation") {
                LayerSpec l =
                    LayerSpec::act(activation_from_name(jl.at("activation").get<std::string>()));
                if (jl.contains("slope")) l.slope = jl.at("slope").get<double>();
                spec.layers.push_back(l);
            } else {
                throw ConfigError("spec json: unknown layer kind '" + kind + "'");
            }
        }
        std::size_t cur = spec.input_dim;
        for (const LayerSpec& l : spec.layers)
            if (l.kind == LayerSpec::Kind::Dense) cur = l.out_dim;
        spec.output_dim = j.contains("output_dim") ? j.at("output_dim").get<std::size_t>() : cur;
        spec.validate();
        return spec;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("spec json: ") + e.what());
    } catch (const SpecError& e) {
        throw ConfigError(std::string("spec json: ") + e.what());
    }
}

std::vector<std::uint8_t> params_to_blob(const ParamVector& params) {
    std::vector<std::uint8_t> blob;
    blob.reserve(8 + 8 * params.values.size());
    encode_u64_le(blob, params.values.size());
    for (double v : params.values) encode_u64_le(blob, std::bit_cast<std::uint64_t>(v));
    return blob;
}

std::vector<double> values_from_blob(const std::vector<std::uint8_t>& blob) {
    if (blob.size() < 8) throw IoError("param blob: missing length prefix");
    const std::uint64_t n = decode_u64_le(blob.data());
    if (blob.size() != 8 + 8 * n) throw IoError("param blob: truncated or oversized payload");
    std::vector<double> values(n);
    for (std::uint64_t i = 0; i < n; ++i)
        values[i] = std::bit_cast<double>(decode_u64_le(blob.data() + 8 + 8 * i));
    return values;
}

void save_spec(const std::string& path, const NetworkSpec& spec) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open for writing: " + path);
    f << spec_to_json(spec).dump(2) << "\n";
}

NetworkSpec load_spec(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open: " + path);
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return spec_from_json(j);
}

void save_params(const std::string& path, const ParamVector& params) {
    const std::vector<std::uint8_t> blob = params_to_blob(params);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);
    f.write(reinterpret_cast<const char*>(blob.data()), static_cast<std::streamsize>(blob.size()));
}

ParamVector load_params(const std::string& path, const NetworkSpec& spec) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open: " + path);
    std::vector<std::uint8_t> blob((std::istreambuf_iterator<char>(f)),
                                   std::istreambuf_iterator<char>());
    ParamVector pv;
    pv.values = values_from_blob(blob);
    pv.layout = ParamLayout::of(spec);
    if (pv.values.size() != pv.layout.total)
        throw IoError("param blob: value count does not match spec");
    return pv;
}

// --- architecture presets ------------------------------------------------

std::vector<std::string> preset_names() {
    return {"mnist_d", "mnist_g", "ring2d_d", "ring2d_g"};
}

NetworkSpec preset(const std::string& name, const PresetOptions& opts) {
    auto hidden_or = [&](std::size_t def) { return opts.hidden > 0 ? opts.hidden : def; };
    if (name == "mnist_d") {
        const std::size_t h = hidden_or(256);
        return NetworkSpec::chain(784, {LayerSpec::dense(784, h), LayerSpec::act(Activation::LeakyReLU),
                                        LayerSpec::dense(h, h), LayerSpec::act(Activation::LeakyReLU),
                                        LayerSpec::dense(h, 1), LayerSpec::act(Activation::Sigmoid)});
    }
    if (name == "mnist_g") {
        const std::size_t h = hidden_or(256);
        return NetworkSpec::chain(opts.noise_dim,
                                  {LayerSpec::dense(opts.noise_dim, h), LayerSpec::act(Activation::ReLU),
                                   LayerSpec::dense(h, h), LayerSpec::act(Activation::ReLU),
                                   LayerSpec::dense(h, 784), LayerSpec::act(Activation::Tanh)});
    }
    if (name == "ring2d_d") {
        const std::size_t h = hidden_or(32);
        return NetworkSpec::chain(opts.data_dim,
                                  {LayerSpec::dense(opts.data_dim, h), LayerSpec::act(Activation::LeakyReLU),
                                   LayerSpec::dense(h, h), LayerSpec::act(Activation::LeakyReLU),
                                   LayerSpec::dense(h, 1), LayerSpec::act(Activation::Sigmoid)});
    }
    if (name == "ring2d_g") {
        // linear output: ring samples are not confined to [-1, 1]
        const std::size_t h = hidden_or(32);
        return NetworkSpec::chain(opts.noise_dim,
                                  {LayerSpec::dense(opts.noise_dim, h), LayerSpec::act(Activation::ReLU),
                                   LayerSpec::dense(h, h), LayerSpec::act(Activation::ReLU),
                                   LayerSpec::dense(h, opts.data_dim)});
    }
    throw ConfigError("unknown network preset: " + name);
}

} // namespace dgan
