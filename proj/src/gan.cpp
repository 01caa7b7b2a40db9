#include "dgan/gan.hpp"

#include <algorithm>
#include <cmath>

#include "dgan/errors.hpp"

namespace dgan {

namespace {

constexpr double kClampEps = 1e-12;

double clamp_p(double p) {
    return std::min(1.0 - kClampEps, std::max(kClampEps, p));
}

std::vector<double> column0(const Matrix& m) {
    std::vector<double> v(m.rows);
    for (std::size_t r = 0; r < m.rows; ++r) v[r] = m(r, 0);
    return v;
}

} // namespace

void GanPair::validate() const {
    generator.spec.validate();
    discriminator.spec.validate();
    if (noise_dim == 0) throw SpecError("gan pair: noise_dim must be positive");
    if (generator.spec.input_dim != noise_dim)
        throw SpecError("gan pair: generator input_dim must equal noise_dim");
    if (generator.spec.output_dim != discriminator.spec.input_dim)
        throw SpecError("gan pair: generator output width must equal discriminator input width");
    if (discriminator.spec.output_dim != 1)
        throw SpecError("gan pair: discriminator must have output_dim 1");
    if (discriminator.spec.layers.empty() ||
        discriminator.spec.layers.back().kind != LayerSpec::Kind::Activation ||
        discriminator.spec.layers.back().activation != Activation::Sigmoid)
        throw SpecError("gan pair: discriminator must end in a sigmoid");
}

Matrix NoiseSource::draw(std::size_t batch_size) {
    Matrix z(batch_size, dim_);
    for (double& v : z.data)
        v = dist_ == NoiseDistribution::Normal ? rng_.gaussian() : rng_.uniform(-1.0, 1.0);
    return z;
}

void TrainConfig::validate() const {
    if (batch_real == 0 || batch_fake == 0)
        throw SpecError("train config: batch sizes must be positive");
    if (!(lr_d > 0.0) || !(lr_g > 0.0))
        throw SpecError("train config: learning rates must be positive");
    if (d_steps_per_g_step == 0)
        throw SpecError("train config: d_steps_per_g_step must be positive");
}

BceResult bce_loss(const std::vector<double>& predictions, const std::vector<double>& targets) {
    if (predictions.size() != targets.size())
        throw SpecError("bce_loss: prediction/target length mismatch");
    if (predictions.empty()) throw SpecError("bce_loss: empty input");
    const double n = static_cast<double>(predictions.size());
    BceResult res;
    res.grad.resize(predictions.size());
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const double p = clamp_p(predictions[i]);
        const double t = targets[i];
        res.loss += -(t * std::log(p) + (1.0 - t) * std::log(1.0 - p));
        res.grad[i] = (p - t) / (p * (1.0 - p)) / n;
    }
    res.loss /= n;
    return res;
}

BceResult saturating_generator_loss(const std::vector<double>& predictions) {
    if (predictions.empty()) throw SpecError("saturating loss: empty input");
    const double n = static_cast<double>(predictions.size());
    BceResult res;
    res.grad.resize(predictions.size());
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const double p = clamp_p(predictions[i]);
        res.loss += std::log(1.0 - p);
        res.grad[i] = -1.0 / (1.0 - p) / n;
    }
    res.loss /= n;
    return res;
}

CriticEvaluation NetworkCritic::evaluate(const Matrix& samples) {
    CriticEvaluation ev;
    const Matrix out = forward(*d_, samples);
    ev.scores = column0(out);
    const std::vector<double> ones(ev.scores.size(), 1.0);
    const BceResult bce = bce_loss(ev.scores, ones);
    ev.loss = bce.loss;
    Matrix upstream(samples.rows, 1);
    for (std::size_t r = 0; r < samples.rows; ++r) upstream(r, 0) = bce.grad[r];
    ev.input_grad = backward(*d_, samples, upstream).input_grad;
    return ev;
}

CriticEvaluation AveragedCritic::evaluate(const Matrix& samples) {
    if (discriminators_.empty()) throw SpecError("averaged critic: no discriminators");
    const double u = static_cast<double>(discriminators_.size());

    std::vector<std::vector<double>> per_scores;
    per_scores.reserve(discriminators_.size());
    std::vector<double> mean(samples.rows, 0.0);
    for (const Network* d : discriminators_) {
        per_scores.push_back(column0(forward(*d, samples)));
        for (std::size_t r = 0; r < samples.rows; ++r) mean[r] += per_scores.back()[r];
    }
    for (double& v : mean) v /= u;

    CriticEvaluation ev;
    ev.scores = mean;
    const std::vector<double> ones(mean.size(), 1.0);
    const BceResult bce = bce_loss(mean, ones);
    ev.loss = bce.loss;

    // shared upstream from the averaged score, pushed through each
    // discriminator, then averaged
    Matrix upstream(samples.rows, 1);
    for (std::size_t r = 0; r < samples.rows; ++r) upstream(r, 0) = bce.grad[r];
    ev.input_grad = Matrix(samples.rows, samples.cols);
    for (const Network* d : discriminators_) {
        const Matrix g = backward(*d, samples, upstream).input_grad;
        for (std::size_t k = 0; k < g.data.size(); ++k) ev.input_grad.data[k] += g.data[k];
    }
    for (double& v : ev.input_grad.data) v /= u;
    return ev;
}

double discriminator_step(Network& d, const Matrix& real, const Matrix& fake, double lr) {
    if (real.cols != d.spec.input_dim || fake.cols != d.spec.input_dim)
        throw SpecError("discriminator_step: sample width does not match discriminator input");

    const Matrix both = vstack(real, fake);
    const Matrix out = forward(d, both);
    std::vector<double> scores = out.data; // output_dim == 1

    std::vector<double> real_scores(scores.begin(), scores.begin() + static_cast<std::ptrdiff_t>(real.rows));
    std::vector<double> fake_scores(scores.begin() + static_cast<std::ptrdiff_t>(real.rows), scores.end());
    const BceResult real_bce = bce_loss(real_scores, std::vector<double>(real.rows, 1.0));
    const BceResult fake_bce = bce_loss(fake_scores, std::vector<double>(fake.rows, 0.0));
    const double loss = real_bce.loss + fake_bce.loss;
    if (!std::isfinite(loss)) throw NumericError("discriminator_step: non-finite loss");

    Matrix upstream(both.rows, 1);
    for (std::size_t r = 0; r < real.rows; ++r) upstream(r, 0) = real_bce.grad[r];
    for (std::size_t r = 0; r < fake.rows; ++r) upstream(real.rows + r, 0) = fake_bce.grad[r];

    const BackpropResult bp = backward(d, both, upstream);
    sgd_step(d, bp.param_grad, lr);
    return loss;
}

double generator_step(Network& g, const Matrix& noise, DiscriminatorOracle& critic, double lr) {
    const Matrix fakes = forward(g, noise);
    const CriticEvaluation ev = critic.evaluate(fakes);
    if (!std::isfinite(ev.loss)) throw NumericError("generator_step: non-finite loss");
    if (ev.input_grad.rows != fakes.rows || ev.input_grad.cols != fakes.cols)
        throw SpecError("generator_step: critic gradient shape does not match samples");
    const BackpropResult bp = backward(g, noise, ev.input_grad);
    sgd_step(g, bp.param_grad, lr);
    return ev.loss;
}

double d_train_step(GanPair& pair, const Batch& real, NoiseSource& noise, const TrainConfig& cfg) {
    cfg.validate();
    real.validate(pair.discriminator.spec.input_dim);
    const Matrix z = noise.draw(cfg.batch_fake);
    const Matrix fakes = forward(pair.generator, z);
    return discriminator_step(pair.discriminator, real.inputs, fakes, cfg.lr_d);
}

double g_train_step_nonsaturating(GanPair& pair, NoiseSource& noise, const TrainConfig& cfg,
                                  DiscriminatorOracle& critic) {
    cfg.validate();
    const Matrix z = noise.draw(cfg.batch_fake);
    return generator_step(pair.generator, z, critic, cfg.lr_g);
}

} // namespace dgan
