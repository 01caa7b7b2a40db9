#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "dgan/nn.hpp"
#include "dgan/rng.hpp"

namespace dgan {

// Generator + discriminator pair. The discriminator must end in a Sigmoid so
// scores live in (0,1); the generator maps noise_dim vectors to samples of
// the discriminator's input width.
struct GanPair {
    Network generator;
    Network discriminator;
    std::size_t noise_dim = 0;

    void validate() const; // throws SpecError on a mismatched pair
};

enum class NoiseDistribution { Normal, Uniform };

// Deterministic stream of noise batches for the generator. Uniform variant
// draws from U(-1, 1).
class NoiseSource {
  public:
    NoiseSource(std::size_t dim, std::uint64_t seed,
                NoiseDistribution dist = NoiseDistribution::Normal)
        : dim_(dim), dist_(dist), rng_(seed) {}

    std::size_t dim() const { return dim_; }
    Matrix draw(std::size_t batch_size);

  private:
    std::size_t dim_;
    NoiseDistribution dist_;
    Rng rng_;
};

struct TrainConfig {
    std::size_t batch_real = 64;
    std::size_t batch_fake = 64;
    double lr_d = 0.1;
    double lr_g = 0.1;
    std::size_t d_steps_per_g_step = 1;

    void validate() const;
};

struct BceResult {
    double loss = 0.0;
    std::vector<double> grad; // dLoss/dPredictions
};

// Mean of -[t ln p + (1-t) ln(1-p)] with predictions clamped to
// [eps, 1-eps], eps = 1e-12, and its gradient w.r.t. the predictions.
BceResult bce_loss(const std::vector<double>& predictions, const std::vector<double>& targets);

// Saturating generator objective mean ln(1 - p); kept as a tested formula
// variant only, the trainers use the non-saturating loss.
BceResult saturating_generator_loss(const std::vector<double>& predictions);

// What the generator trains against: any scorer that can also report the
// gradient of the non-saturating generator loss w.r.t. the candidate
// samples. Strategies substitute a server model, an averaged ensemble, or a
// rotating local discriminator here.
struct CriticEvaluation {
    std::vector<double> scores; // in (0,1), one per sample
    Matrix input_grad;          // dLoss/dSamples, same shape as the candidates
    double loss = 0.0;          // BCE(scores, 1)
};

class DiscriminatorOracle {
  public:
    virtual ~DiscriminatorOracle() = default;
    virtual CriticEvaluation evaluate(const Matrix& samples) = 0;
};

// Oracle backed by a single discriminator network.
class NetworkCritic : public DiscriminatorOracle {
  public:
    explicit NetworkCritic(const Network& d) : d_(&d) {}
    CriticEvaluation evaluate(const Matrix& samples) override;

  private:
    const Network* d_;
};

// Oracle averaging the outputs of several discriminators: score is the
// arithmetic mean of per-discriminator scores (ascending index order), the
// loss is evaluated on that mean, and the input-gradient is the mean of the
// per-discriminator input-gradients under the shared upstream.
class AveragedCritic : public DiscriminatorOracle {
  public:
    explicit AveragedCritic(std::vector<const Network*> discriminators)
        : discriminators_(std::move(discriminators)) {}
    CriticEvaluation evaluate(const Matrix& samples) override;

  private:
    std::vector<const Network*> discriminators_;
};

// --- training steps ------------------------------------------------------

// Core discriminator update on explicit real/fake batches: one SGD step on
// BCE(D(real), 1) + BCE(D(fake), 0). Returns the loss before the step.
double discriminator_step(Network& d, const Matrix& real, const Matrix& fake, double lr);

// Core generator update: one non-saturating SGD step against the critic
// using the given noise batch. Returns the loss before the step.
double generator_step(Network& g, const Matrix& noise, DiscriminatorOracle& critic, double lr);

// One discriminator step; fakes are drawn from the pair's generator. The
// generator itself is not modified.
double d_train_step(GanPair& pair, const Batch& real, NoiseSource& noise, const TrainConfig& cfg);

// One generator step against an arbitrary critic; the critic's own
// parameters are untouched.
double g_train_step_nonsaturating(GanPair& pair, NoiseSource& noise, const TrainConfig& cfg,
                                  DiscriminatorOracle& critic);

// Plain alternating trainer: per iteration, d_steps_per_g_step discriminator
// steps on fresh real batches then one generator step. real_batch_fn must
// yield a batch_real x input_dim matrix per call.
template <typename RealBatchFn>
void train_alternating(GanPair& pair, NoiseSource& noise, const TrainConfig& cfg,
                       RealBatchFn&& real_batch_fn, std::size_t iterations) {
    NetworkCritic critic(pair.discriminator);
    for (std::size_t it = 0; it < iterations; ++it) {
        for (std::size_t k = 0; k < cfg.d_steps_per_g_step; ++k) {
            Batch real{real_batch_fn(), std::nullopt};
            d_train_step(pair, real, noise, cfg);
        }
        g_train_step_nonsaturating(pair, noise, cfg, critic);
    }
}

} // namespace dgan
