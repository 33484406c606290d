#include "bond/stage2.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace bond {

const char* to_string(LabelMode mode) noexcept {
    switch (mode) {
        case LabelMode::Hard: return "hard";
        case LabelMode::Soft: return "soft";
        case LabelMode::SoftHighConfidence: return "soft_high_conf";
    }
    return "?";
}

const char* to_string(ReinitMode mode) noexcept {
    switch (mode) {
        case ReinitMode::Off: return "off";
        case ReinitMode::Once: return "once";
        case ReinitMode::OnStall: return "on_stall";
    }
    return "?";
}

std::optional<LabelMode> parse_label_mode(std::string_view s) {
    for (auto m : {LabelMode::Hard, LabelMode::Soft, LabelMode::SoftHighConfidence}) {
        if (s == to_string(m)) return m;
    }
    return std::nullopt;
}

std::optional<ReinitMode> parse_reinit_mode(std::string_view s) {
    for (auto m : {ReinitMode::Off, ReinitMode::Once, ReinitMode::OnStall}) {
        if (s == to_string(m)) return m;
    }
    return std::nullopt;
}

std::size_t ConfidenceMask::count() const noexcept {
    std::size_t n = 0;
    for (const auto& m : selected) n += static_cast<std::size_t>(std::count(m.begin(), m.end(), 1));
    return n;
}

std::size_t ConfidenceMask::total() const noexcept {
    std::size_t n = 0;
    for (const auto& m : selected) n += m.size();
    return n;
}

std::vector<LabelSequence> hard_pseudo_labels(const PredictionBatch& preds) {
    std::vector<LabelSequence> out;
    out.reserve(preds.size());
    for (const auto& m : preds) {
        LabelSequence labels(m.rows());
        for (std::size_t i = 0; i < m.rows(); ++i) {
            auto r = m.row(i);
            labels[i] = static_cast<LabelId>(std::max_element(r.begin(), r.end()) - r.begin());
        }
        out.push_back(std::move(labels));
    }
    return out;
}

std::vector<double> class_mass(const PredictionBatch& preds) {
    if (preds.empty()) return {};
    std::vector<double> p(preds.front().cols(), 0.0);
    for (const auto& m : preds) {
        if (m.cols() != p.size()) throw Error("inconsistent class count in prediction batch");
        for (std::size_t i = 0; i < m.rows(); ++i) {
            auto r = m.row(i);
            for (std::size_t c = 0; c < p.size(); ++c) p[c] += r[c];
        }
    }
    return p;
}

SoftLabelBatch soft_pseudo_labels(const PredictionBatch& preds) { return soft_pseudo_labels(preds, class_mass(preds)); }

SoftLabelBatch soft_pseudo_labels(const PredictionBatch& preds, const std::vector<double>& mass) {
    std::size_t tokens = 0;
    for (const auto& m : preds) tokens += m.rows();
    if (tokens == 0) throw Error("soft pseudo-labels need at least one token");

    SoftLabelBatch out;
    out.class_mass = mass;
    out.labels.reserve(preds.size());
    const std::size_t c = mass.size();
    for (const auto& m : preds) {
        if (m.cols() != c) throw Error("class mass does not match the prediction width");
        ProbMatrix s(m.rows(), c);
        for (std::size_t i = 0; i < m.rows(); ++i) {
            double z = 0.0;
            for (std::size_t k = 0; k < c; ++k) {
                const double f = m(i, k);
                const double w = mass[k] > 0.0 ? f * f / mass[k] : 0.0;
                s(i, k) = w;
                z += w;
            }
            if (!(z > 0.0)) throw Error("token has no probability mass to re-weight");
            for (std::size_t k = 0; k < c; ++k) s(i, k) /= z;
        }
        out.labels.push_back(std::move(s));
    }
    return out;
}

ConfidenceMask select_high_confidence(const SoftLabelBatch& soft, double epsilon) {
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw Error("confidence threshold must lie in (0, 1)");
    ConfidenceMask mask;
    mask.threshold = epsilon;
    mask.selected.reserve(soft.labels.size());
    for (const auto& s : soft.labels) {
        TokenMask m(s.rows(), 0);
        for (std::size_t i = 0; i < s.rows(); ++i) {
            auto r = s.row(i);
            m[i] = *std::max_element(r.begin(), r.end()) > epsilon ? 1 : 0;
        }
        mask.selected.push_back(std::move(m));
    }
    return mask;
}

TeacherStudent TeacherStudent::from(const ModelParams& trained, const AdamConfig& adam) {
    TeacherStudent ts{trained, trained, trained.initial, OptimizerState(trained.weights.size(), adam)};
    if (!ts.checkpoint) ts.checkpoint = std::make_shared<const std::vector<double>>(trained.weights);
    return ts;
}

TeacherStudent reinitialize_student(TeacherStudent ts) {
    if (!ts.checkpoint) throw Error("no re-initialization checkpoint stored");
    if (ts.checkpoint->size() != ts.student.weights.size()) throw Error("checkpoint shape mismatch");
    ts.student.weights = *ts.checkpoint;
    ++ts.student.version;
    ts.optimizer.reset();
    return ts;
}

std::uint64_t Stage2Config::steps_for(std::uint64_t iteration) const {
    if (inner_steps_schedule.empty()) return inner_steps;
    if (inner_steps_schedule.size() != iterations) {
        throw Error("inner step schedule must have one entry per self-training iteration");
    }
    return inner_steps_schedule.at(iteration);
}

namespace {

struct IterationTargets {
    std::vector<ProbMatrix> targets;
    std::vector<TokenMask> masks;  // empty unless high-confidence selection
    double selected_fraction = 1.0;
    std::size_t selected = 0;
};

IterationTargets label_corpus(const PredictionBatch& preds, const Stage2Config& config, std::size_t num_classes) {
    IterationTargets it;
    if (config.mode == LabelMode::Hard) {
        for (const auto& labels : hard_pseudo_labels(preds)) {
            it.targets.push_back(ProbMatrix::one_hot(labels, num_classes));
        }
        for (const auto& t : it.targets) it.selected += t.rows();
        return it;
    }
    if (config.per_batch_class_mass) {
        // Targets are rebuilt per minibatch in the training loop.
        return it;
    }
    auto soft = soft_pseudo_labels(preds);
    if (config.mode == LabelMode::SoftHighConfidence) {
        auto mask = select_high_confidence(soft, config.confidence_threshold);
        it.selected = mask.count();
        it.selected_fraction = mask.total() == 0 ? 0.0 : double(it.selected) / double(mask.total());
        it.masks = std::move(mask.selected);
    } else {
        for (const auto& s : soft.labels) it.selected += s.rows();
    }
    it.targets = std::move(soft.labels);
    return it;
}

}  // namespace

Stage2Result train_stage2(const std::vector<SentenceFeatures>& features, const ModelParams& stage1,
                          const Stage2Config& config, const DevSet* dev, const AuxiliaryLoss& auxiliary) {
    if (config.mode == LabelMode::SoftHighConfidence &&
        !(config.confidence_threshold > 0.0 && config.confidence_threshold < 1.0)) {
        throw Error("confidence threshold must lie in (0, 1)");
    }
    if (config.reinit == ReinitMode::OnStall && !dev) throw Error("on_stall re-initialization needs a dev set");
    if (!config.inner_steps_schedule.empty() && config.inner_steps_schedule.size() != config.iterations) {
        throw Error("inner step schedule must have one entry per self-training iteration");
    }

    Stage2Result result;
    auto ts = TeacherStudent::from(stage1, config.adam);
    if (config.reinit == ReinitMode::Once) {
        ts = reinitialize_student(std::move(ts));
        ++result.reinitializations;
    }
    const std::size_t num_classes = stage1.num_classes;
    BatchSampler sampler(features.size(), config.batch_size, config.seed);
    LossAndGradient lg;
    std::vector<TrainingExample> batch;
    double best_dev = -1.0;
    std::size_t stalled = 0;

    for (std::uint64_t t = 0; t < config.iterations; ++t) {
        // The teacher is frozen for the whole iteration; labels are computed
        // once up front.
        const auto teacher_preds = predict(ts.teacher, features);
        auto labels = label_corpus(teacher_preds, config, num_classes);
        const std::uint64_t steps = config.steps_for(t);
        ts.optimizer.reset();

        const bool nothing_selected =
            config.mode == LabelMode::SoftHighConfidence && !config.per_batch_class_mass && labels.selected == 0;
        if (nothing_selected) {
            result.warnings.push_back("iteration " + std::to_string(t + 1) +
                                      ": no token above the confidence threshold; skipped");
            ++result.skipped_iterations;
        }

        std::vector<ProbMatrix> batch_targets;
        std::vector<TokenMask> batch_masks;
        for (std::uint64_t k = 1; k <= steps && !nothing_selected; ++k) {
            const auto idx = sampler.next();
            batch.clear();
            double fraction = labels.selected_fraction;
            if (config.per_batch_class_mass && config.mode != LabelMode::Hard) {
                PredictionBatch sub;
                for (auto i : idx) sub.push_back(teacher_preds[i]);
                auto soft = soft_pseudo_labels(sub);
                batch_targets = std::move(soft.labels);
                batch_masks.clear();
                if (config.mode == LabelMode::SoftHighConfidence) {
                    auto mask = select_high_confidence(
                        SoftLabelBatch{batch_targets, soft.class_mass}, config.confidence_threshold);
                    fraction = mask.total() == 0 ? 0.0 : double(mask.count()) / double(mask.total());
                    batch_masks = std::move(mask.selected);
                }
                for (std::size_t j = 0; j < idx.size(); ++j) {
                    batch.push_back({&features[idx[j]], &batch_targets[j],
                                     batch_masks.empty() ? nullptr : &batch_masks[j]});
                }
            } else {
                for (auto i : idx) {
                    batch.push_back({&features[i], &labels.targets[i], labels.masks.empty() ? nullptr : &labels.masks[i]});
                }
            }

            grad_loss(ts.student, batch, lg);
            if (auxiliary) auxiliary(ts.student, idx, lg);
            if (!std::isfinite(lg.loss)) {
                throw NumericalError("non-finite Stage II loss at iteration " + std::to_string(t + 1));
            }
            Stage2LogRow row{t + 1, k, lg.loss, fraction, std::nullopt, false};
            if (lg.active_tokens == 0) {
                row.skipped = true;
                ++result.skipped_steps;
            } else {
                adam_step(ts.student, lg.gradient, ts.optimizer, config.lr.at(k - 1));
                ++result.student_updates;
            }
            result.log.push_back(row);
        }

        ts.teacher = ts.student;
        ++result.teacher_updates;

        if (dev) {
            const double f1 = dev_f1(ts.student, *dev);
            if (!result.log.empty() && result.log.back().iteration == t + 1) {
                result.log.back().dev_f1 = f1;
            } else {
                result.log.push_back({t + 1, 0, 0.0, labels.selected_fraction, f1, true});
            }
            if (f1 > best_dev) {
                best_dev = f1;
                stalled = 0;
            } else if (config.reinit == ReinitMode::OnStall && ++stalled >= config.stall_patience) {
                ts = reinitialize_student(std::move(ts));
                ++result.reinitializations;
                stalled = 0;
            }
        }
    }
    result.student = std::move(ts.student);
    return result;
}

std::string stage2_log_csv(const std::vector<Stage2LogRow>& log) {
    std::ostringstream out;
    out << "iter,inner_step,loss,selected_token_fraction,dev_f1\n";
    char buf[160];
    for (const auto& r : log) {
        std::snprintf(buf, sizeof buf, "%llu,%llu,%.10g,%.6f,", static_cast<unsigned long long>(r.iteration),
                      static_cast<unsigned long long>(r.inner_step), r.loss, r.selected_fraction);
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
