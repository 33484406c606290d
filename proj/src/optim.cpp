#include "bond/optim.hpp"

#include <algorithm>
#include <cmath>

namespace bond {

namespace {

const TokenMask* mask_for(const std::vector<TokenMask>& masks, std::size_t i, std::size_t n) {
    if (masks.empty()) return nullptr;
    if (masks.size() <= i || masks[i].size() != n) throw Error("mask does not align with the batch");
    return &masks[i];
}

}  // namespace

LossValue cross_entropy_loss(const PredictionBatch& preds, const std::vector<LabelSequence>& labels,
                             const std::vector<TokenMask>& masks) {
    if (preds.size() != labels.size()) throw Error("prediction and label batches differ in size");
    LossValue out;
    out.per_token.resize(preds.size());
    double total = 0.0;
    for (std::size_t s = 0; s < preds.size(); ++s) {
        const auto& p = preds[s];
        if (labels[s].size() != p.rows()) throw Error("labels misaligned with predictions");
        const auto* mask = mask_for(masks, s, p.rows());
        out.per_token[s].assign(p.rows(), 0.0);
        for (std::size_t i = 0; i < p.rows(); ++i) {
            if (mask && !(*mask)[i]) continue;
            const auto y = labels[s][i];
            if (y < 0 || static_cast<std::size_t>(y) >= p.cols()) throw Error("label index out of range");
            double prob = p(i, static_cast<std::size_t>(y));
            if (prob < kLogClamp) {
                prob = kLogClamp;
                out.clamped = true;
            }
            out.per_token[s][i] = -std::log(prob);
            total += out.per_token[s][i];
            ++out.active_tokens;
        }
    }
    if (out.active_tokens == 0) {
        out.skipped = true;
        return out;
    }
    out.value = total / static_cast<double>(out.active_tokens);
    return out;
}

LossValue kl_soft_loss(const PredictionBatch& preds, const std::vector<ProbMatrix>& soft,
                       const std::vector<TokenMask>& masks) {
    if (preds.size() != soft.size()) throw Error("prediction and soft-label batches differ in size");
    LossValue out;
    out.per_token.resize(preds.size());
    double total = 0.0;
    for (std::size_t s = 0; s < preds.size(); ++s) {
        const auto& p = preds[s];
        const auto& t = soft[s];
        if (t.rows() != p.rows() || t.cols() != p.cols()) throw Error("soft labels misaligned with predictions");
        const auto* mask = mask_for(masks, s, p.rows());
        out.per_token[s].assign(p.rows(), 0.0);
        for (std::size_t i = 0; i < p.rows(); ++i) {
            if (mask && !(*mask)[i]) continue;
            double loss = 0.0;
            double mass = 0.0;
            for (std::size_t c = 0; c < p.cols(); ++c) {
                const double sc = t(i, c);
                if (!(sc >= 0.0)) throw Error("soft label has a negative or NaN entry");
                mass += sc;
                if (sc == 0.0) continue;
                double prob = p(i, c);
                if (prob < kLogClamp) {
                    prob = kLogClamp;
                    out.clamped = true;
                }
                loss -= sc * std::log(prob);
            }
            if (std::abs(mass - 1.0) > 1e-6) throw Error("soft label does not sum to 1");
            out.per_token[s][i] = loss;
            total += loss;
            ++out.active_tokens;
        }
    }
    if (out.active_tokens == 0) {
        out.skipped = true;
        return out;
    }
    out.value = total / static_cast<double>(out.active_tokens);
    return out;
}

double LrSchedule::at(std::uint64_t step) const noexcept {
    return std::max(0.0, base - decay * static_cast<double>(step));
}

void adam_step(ModelParams& params, std::span<const double> grad, OptimizerState& state, double lr) {
    const std::size_t n = params.weights.size();
    if (grad.size() != n || state.m.size() != n || state.v.size() != n) {
        throw Error("adam_step: shape mismatch");
    }
    for (double g : grad) {
        if (!std::isfinite(g)) throw NumericalError("non-finite gradient");
    }
    const auto& cfg = state.config;
    const std::uint64_t t = state.step + 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
    const bool decay = cfg.weight_decay > 0.0;
    double* w = params.weights.data();
    double* m = state.m.data();
    double* v = state.v.data();
    for (std::size_t i = 0; i < n; ++i) {
        const double g = grad[i];
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        if (decay) w[i] -= lr * cfg.weight_decay * w[i];
        w[i] -= lr * mhat / (std::sqrt(vhat) + cfg.epsilon);
    }
    state.step = t;
    ++params.version;
}

BatchSampler::BatchSampler(std::size_t corpus_size, std::size_t batch_size, std::uint64_t seed)
    : size_(corpus_size), batch_(std::max<std::size_t>(1, batch_size)), rng_(seed), order_(corpus_size) {
    reshuffle();
}

void BatchSampler::reshuffle() {
    for (std::size_t i = 0; i < size_; ++i) order_[i] = i;
    // Fisher-Yates with rejection sampling, so the sequence depends only on
    // the mt19937_64 stream and not on library distribution internals.
    for (std::size_t i = size_; i > 1; --i) {
        const std::uint64_t bound = i;
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
        std::uint64_t r;
        do {
            r = rng_();
        } while (r >= limit);
        std::swap(order_[i - 1], order_[static_cast<std::size_t>(r % bound)]);
    }
    cursor_ = 0;
}

std::vector<std::size_t> BatchSampler::next() {
    if (size_ == 0) return {};
    if (cursor_ >= size_) {
        reshuffle();
        ++epoch_;
    }
    const std::size_t hi = std::min(size_, cursor_ + batch_);
    std::vector<std::size_t> out(order_.begin() + static_cast<std::ptrdiff_t>(cursor_),
                                 order_.begin() + static_cast<std::ptrdiff_t>(hi));
    cursor_ = hi;
    return out;
}

}  // namespace bond
