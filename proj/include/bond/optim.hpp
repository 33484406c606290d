#pragma once

// Token losses, Adam with decoupled weight decay, a linear-decay learning
// rate and a seeded epoch sampler.

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "bond/tagger.hpp"

namespace bond {

struct LossValue {
    double value = 0.0;
    std::size_t active_tokens = 0;
    /// Per sentence, per token contribution before averaging; 0 when masked.
    std::vector<std::vector<double>> per_token;
    bool clamped = false;  // a log argument hit kLogClamp
    bool skipped = false;  // nothing selected; callers should not update
};

/// Mean over unmasked tokens of -log f[label]. `masks` may be empty (all
/// tokens count) or hold one mask per sentence.
LossValue cross_entropy_loss(const PredictionBatch& preds, const std::vector<LabelSequence>& labels,
                             const std::vector<TokenMask>& masks = {});

/// Mean over selected tokens of sum_c -s_c log f_c. Empty selection yields 0
/// with `skipped` set.
LossValue kl_soft_loss(const PredictionBatch& preds, const std::vector<ProbMatrix>& soft,
                       const std::vector<TokenMask>& masks = {});

struct LrSchedule {
    double base = 0.003;
    double decay = 0.0;  // subtracted per step

    double at(std::uint64_t step) const noexcept;
};

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.98;
    double epsilon = 1e-8;
    double weight_decay = 0.0;  // decoupled; skipped when 0
};

struct OptimizerState {
    AdamConfig config;
    std::vector<double> m;
    std::vector<double> v;
    std::uint64_t step = 0;

    OptimizerState() = default;
    OptimizerState(std::size_t size, AdamConfig cfg) : config(cfg), m(size, 0.0), v(size, 0.0) {}
    void reset() {
        std::fill(m.begin(), m.end(), 0.0);
        std::fill(v.begin(), v.end(), 0.0);
        step = 0;
    }
};

/// Bias-corrected Adam update. Throws NumericalError on a non-finite
/// gradient, leaving params and state untouched.
void adam_step(ModelParams& params, std::span<const double> grad, OptimizerState& state, double lr);

/// Visits a fresh permutation of [0, M) every epoch; the last batch of an
/// epoch may be short.
class BatchSampler {
public:
    BatchSampler(std::size_t corpus_size, std::size_t batch_size, std::uint64_t seed);

    std::vector<std::size_t> next();
    std::size_t epoch() const noexcept { return epoch_; }

private:
    void reshuffle();

    std::size_t size_;
    std::size_t batch_;
    std::mt19937_64 rng_;
    std::vector<std::size_t> order_;
    std::size_t cursor_ = 0;
    std::size_t epoch_ = 0;
};

}  // namespace bond
