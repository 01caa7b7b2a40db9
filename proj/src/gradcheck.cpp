#include "dgan/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "dgan/nn.hpp"
#include "dgan/rng.hpp"

namespace dgan {

namespace {

constexpr double kH = 1e-5;

double rel_error(double analytic, double numeric) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
    return std::abs(analytic - numeric) / denom;
}

double objective(const Network& net, const Matrix& inputs, const Matrix& upstream) {
    const Matrix out = forward(net, inputs);
    double j = 0.0;
    for (std::size_t k = 0; k < out.data.size(); ++k) j += out.data[k] * upstream.data[k];
    return j;
}

// Central differences lie when a ReLU-family pre-activation sits within h of
// its kink, so candidate inputs whose pre-activations come near zero are
// rejected and redrawn.
bool away_from_kinks(const Network& net, const Matrix& inputs, double margin) {
    Matrix x = inputs;
    std::size_t seg = 0;
    for (const LayerSpec& layer : net.spec.layers) {
        if (layer.kind == LayerSpec::Kind::Dense) {
            const auto& s = net.params.layout.segments[seg++];
            Matrix y(x.rows, layer.out_dim);
            for (std::size_t r = 0; r < x.rows; ++r)
                for (std::size_t o = 0; o < layer.out_dim; ++o) {
                    double acc = net.params.values[s.bias_offset + o];
                    for (std::size_t i = 0; i < layer.in_dim; ++i)
                        acc += net.params.values[s.weight_offset + o * layer.in_dim + i] * x(r, i);
                    y(r, o) = acc;
                }
            x = std::move(y);
        } else {
            const bool kinked = layer.activation == Activation::ReLU ||
                                layer.activation == Activation::LeakyReLU;
            for (double& v : x.data) {
                if (kinked && std::abs(v) < margin) return false;
                switch (layer.activation) {
                    case Activation::ReLU: v = v > 0.0 ? v : 0.0; break;
                    case Activation::LeakyReLU: v = v > 0.0 ? v : layer.slope * v; break;
                    case Activation::Sigmoid: v = 1.0 / (1.0 + std::exp(-v)); break;
                    case Activation::Tanh: v = std::tanh(v); break;
                    case Activation::Identity: break;
                }
            }
        }
    }
    return true;
}

NetworkSpec random_small_spec(Rng& rng, std::size_t net_index) {
    constexpr Activation kActivations[] = {Activation::ReLU, Activation::LeakyReLU,
                                           Activation::Sigmoid, Activation::Tanh,
                                           Activation::Identity};
    const std::size_t depth = 1 + rng.below(3);
    std::vector<LayerSpec> layers;
    std::size_t cur = 1 + rng.below(8);
    const std::size_t input_dim = cur;
    for (std::size_t d = 0; d < depth; ++d) {
        const std::size_t next = 1 + rng.below(8);
        layers.push_back(LayerSpec::dense(cur, next));
        cur = next;
        // cycle the kinds so every activation appears across the suite
        const Activation act = kActivations[(net_index + d) % 5];
        layers.push_back(LayerSpec::act(act, 0.01));
    }
    return NetworkSpec::chain(input_dim, layers);
}

} // namespace

GradCheckReport run_gradcheck(std::uint64_t seed, std::size_t count, bool inject_sign_flip) {
    GradCheckReport report;
    Rng rng(seed);

    for (std::size_t n = 0; n < count; ++n) {
        const NetworkSpec spec = random_small_spec(rng, n);
        Network net = build_network(spec, rng.next_u64());

        const std::size_t batch = 1 + rng.below(4);
        Matrix inputs(batch, spec.input_dim);
        for (int attempt = 0; attempt < 200; ++attempt) {
            for (double& v : inputs.data) v = rng.uniform(-1.5, 1.5);
            if (away_from_kinks(net, inputs, 1e-3)) break;
        }
        Matrix upstream(batch, spec.output_dim);
        for (double& v : upstream.data) v = rng.uniform(-1.0, 1.0);

        BackpropResult bp = backward(net, inputs, upstream);
        if (inject_sign_flip && !bp.param_grad.empty())
            bp.param_grad[rng.below(bp.param_grad.size())] *= -1.0;

        for (std::size_t k = 0; k < net.params.values.size(); ++k) {
            const double saved = net.params.values[k];
            net.params.values[k] = saved + kH;
            const double jp = objective(net, inputs, upstream);
            net.params.values[k] = saved - kH;
            const double jm = objective(net, inputs, upstream);
            net.params.values[k] = saved;
            const double err = rel_error(bp.param_grad[k], (jp - jm) / (2.0 * kH));
            ++report.coordinates;
            if (err > report.max_rel_error) {
                report.max_rel_error = err;
                report.worst_case = "network " + std::to_string(n) + " param " +
                                    std::to_string(k);
            }
        }
        for (std::size_t k = 0; k < inputs.data.size(); ++k) {
            const double saved = inputs.data[k];
            inputs.data[k] = saved + kH;
            const double jp = objective(net, inputs, upstream);
            inputs.data[k] = saved - kH;
            const double jm = objective(net, inputs, upstream);
            inputs.data[k] = saved;
            const double err = rel_error(bp.input_grad.data[k], (jp - jm) / (2.0 * kH));
            ++report.coordinates;
            if (err > report.max_rel_error) {
                report.max_rel_error = err;
                report.worst_case = "network " + std::to_string(n) + " input " +
                                    std::to_string(k);
            }
        }
        ++report.networks;
    }
    return report;
}

} // namespace dgan
