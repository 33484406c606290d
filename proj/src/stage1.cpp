#include "bond/stage1.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "bond/eval.hpp"

namespace bond {

double dev_f1(const ModelParams& params, const DevSet& dev) {
    auto pred = decode(predict(params, *dev.features), *dev.schema);
    return entity_prf(*dev.gold, pred, *dev.schema).f1();
}

Stage1Result train_stage1(const Corpus& corpus, const std::vector<SentenceFeatures>& features,
                          ModelParams params, const Stage1Config& config, const DevSet* dev,
                          const StepObserver& observer) {
    const auto& distant = corpus.layer(LabelLayer::Distant);
    if (features.size() != corpus.size()) throw Error("features do not match the corpus");
    if (params.num_classes != corpus.schema().num_labels()) {
        throw Error("model class count does not match the label schema");
    }
    for (std::size_t i = 0; i < distant.size(); ++i) {
        if (auto v = validate_bio(distant[i], corpus.schema()); !v) {
            throw Error("distant labels of sentence " + std::to_string(i) + " are not valid BIO");
        }
    }

    std::vector<ProbMatrix> targets;
    targets.reserve(distant.size());
    for (const auto& labels : distant) targets.push_back(ProbMatrix::one_hot(labels, params.num_classes));

    Stage1Result result;
    OptimizerState state(params.weights.size(), config.adam);
    BatchSampler sampler(corpus.size(), config.batch_size, config.seed);
    LossAndGradient lg;
    std::vector<TrainingExample> batch;

    for (std::uint64_t t = 1; t <= config.steps; ++t) {
        batch.clear();
        for (auto i : sampler.next()) batch.push_back({&features[i], &targets[i], nullptr});
        grad_loss(params, batch, lg);
        if (!std::isfinite(lg.loss)) {
            throw NumericalError("non-finite Stage I loss at step " + std::to_string(t));
        }
        const double lr = config.lr.at(t - 1);
        adam_step(params, lg.gradient, state, lr);
        ++result.optimizer_steps;

        Stage1LogRow row{t, lr, lg.loss, std::nullopt};
        if (dev && config.dev_interval > 0 && (t % config.dev_interval == 0 || t == config.steps)) {
            row.dev_f1 = dev_f1(params, *dev);
        }
        result.log.push_back(row);
        if (observer) observer(t, params);
    }
    result.params = std::move(params);
    return result;
}

std::string stage1_log_csv(const std::vector<Stage1LogRow>& log) {
    std::ostringstream out;
    out << "step,lr,loss,dev_f1\n";
    char buf[128];
    for (const auto& r : log) {
        std::snprintf(buf, sizeof buf, "%llu,%.10g,%.10g,", static_cast<unsigned long long>(r.step), r.lr, r.loss);
        out << buf;
        if (r.dev_f1) {
            std::snprintf(buf, sizeof buf, "%.6f", *r.dev_f1);
            out << buf;
        }
        out << '\n';
    }
    return out.str();
}

}  // namespace bond
