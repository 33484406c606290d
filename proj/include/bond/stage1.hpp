#pragma once

// Stage I: fit the tagger to distant labels for a fixed number of Adam steps.
// Stopping early is the regularizer; dev F1 is only ever logged.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "bond/corpus.hpp"
#include "bond/optim.hpp"
#include "bond/tagger.hpp"

namespace bond {

/// Held-out data for logging learning curves. Never used for control in
/// Stage I.
struct DevSet {
    const std::vector<SentenceFeatures>* features = nullptr;
    const std::vector<LabelSequence>* gold = nullptr;
    const LabelSchema* schema = nullptr;
};

double dev_f1(const ModelParams& params, const DevSet& dev);

struct Stage1Config {
    std::uint64_t steps = 500;  // T1
    std::size_t batch_size = 16;
    std::uint64_t seed = 0;
    LrSchedule lr;
    AdamConfig adam;
    std::uint64_t dev_interval = 0;  // 0 disables dev logging
};

struct Stage1LogRow {
    std::uint64_t step = 0;
    double lr = 0.0;
    double loss = 0.0;
    std::optional<double> dev_f1;
};

struct Stage1Result {
    ModelParams params;
    std::vector<Stage1LogRow> log;
    std::uint64_t optimizer_steps = 0;
};

using StepObserver = std::function<void(std::uint64_t step, const ModelParams& params)>;

/// Runs exactly config.steps Adam updates of the cross-entropy against the
/// distant layer. `features` must be featurize(corpus) for the same corpus.
Stage1Result train_stage1(const Corpus& corpus, const std::vector<SentenceFeatures>& features,
                          ModelParams params, const Stage1Config& config, const DevSet* dev = nullptr,
                          const StepObserver& observer = {});

/// CSV: step,lr,loss,dev_f1 (dev_f1 blank where not evaluated).
std::string stage1_log_csv(const std::vector<Stage1LogRow>& log);

}  // namespace bond
