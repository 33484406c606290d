#pragma once

// Stage II: teacher-student self-training on pseudo-labels.
//
// Each outer iteration freezes the teacher, labels the whole training set
// (hard argmax, squared-and-class-normalized soft labels, or soft labels
// restricted to high-confidence tokens), trains the student for a fixed
// number of Adam steps, then promotes the student to teacher. Labels from
// earlier iterations are never reused.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bond/optim.hpp"
#include "bond/stage1.hpp"
#include "bond/tagger.hpp"

namespace bond {

enum class LabelMode { Hard, Soft, SoftHighConfidence };
enum class ReinitMode { Off, Once, OnStall };

const char* to_string(LabelMode mode) noexcept;
const char* to_string(ReinitMode mode) noexcept;
std::optional<LabelMode> parse_label_mode(std::string_view s);
std::optional<ReinitMode> parse_reinit_mode(std::string_view s);

/// Soft targets for a set of sentences and the class mass they were
/// normalized with.
struct SoftLabelBatch {
    std::vector<ProbMatrix> labels;
    std::vector<double> class_mass;  // p_c = sum over every token of f_c
};

struct ConfidenceMask {
    std::vector<TokenMask> selected;
    double threshold = 0.0;

    std::size_t count() const noexcept;
    std::size_t total() const noexcept;
};

/// Argmax per token, lowest class index on ties. Not BIO-repaired.
std::vector<LabelSequence> hard_pseudo_labels(const PredictionBatch& preds);

/// Sums the class mass over every token of `preds`.
std::vector<double> class_mass(const PredictionBatch& preds);

/// s_c = (f_c^2 / p_c) / sum_k (f_k^2 / p_k), with p summed over all of
/// `preds`. Classes with p_c = 0 contribute 0. Throws on an empty batch or a
/// token whose re-weighted mass is zero.
SoftLabelBatch soft_pseudo_labels(const PredictionBatch& preds);

/// Same re-weighting with a caller-supplied class mass.
SoftLabelBatch soft_pseudo_labels(const PredictionBatch& preds, const std::vector<double>& class_mass);

/// Selects tokens whose largest soft probability is strictly above epsilon.
ConfidenceMask select_high_confidence(const SoftLabelBatch& soft, double epsilon);

struct TeacherStudent {
    ModelParams teacher;
    ModelParams student;
    std::shared_ptr<const std::vector<double>> checkpoint;
    OptimizerState optimizer;

    /// Teacher = student = trained; checkpoint taken from trained.initial.
    static TeacherStudent from(const ModelParams& trained, const AdamConfig& adam);
};

/// Student back to the stored checkpoint with a fresh optimizer; the teacher
/// is untouched.
TeacherStudent reinitialize_student(TeacherStudent ts);

struct Stage2Config {
    std::uint64_t iterations = 2;  // T2
    std::uint64_t inner_steps = 200;  // T3
    /// Overrides inner_steps per iteration when non-empty; size must be T2.
    std::vector<std::uint64_t> inner_steps_schedule;
    double confidence_threshold = 0.9;  // epsilon
    LabelMode mode = LabelMode::SoftHighConfidence;
    ReinitMode reinit = ReinitMode::Off;
    std::size_t stall_patience = 2;
    /// Compute p_c from each minibatch instead of the whole training set.
    bool per_batch_class_mass = false;
    std::size_t batch_size = 16;
    std::uint64_t seed = 0;
    LrSchedule lr;
    AdamConfig adam;

    std::uint64_t steps_for(std::uint64_t iteration) const;  // 0-based
};

struct Stage2LogRow {
    std::uint64_t iteration = 0;   // 1-based
    std::uint64_t inner_step = 0;  // 1-based
    double loss = 0.0;
    double selected_fraction = 1.0;
    std::optional<double> dev_f1;  // set on the last row of an iteration
    bool skipped = false;          // no selected token in this minibatch
};

struct Stage2Result {
    ModelParams student;
    std::vector<Stage2LogRow> log;
    std::uint64_t teacher_updates = 0;
    std::uint64_t student_updates = 0;
    std::uint64_t skipped_steps = 0;
    std::uint64_t skipped_iterations = 0;
    std::uint64_t reinitializations = 0;
    std::vector<std::string> warnings;
};

/// Extra loss term on the student (e.g. a consistency regularizer). Receives
/// the minibatch indices and adds to loss and gradient in place.
using AuxiliaryLoss =
    std::function<void(const ModelParams& student, std::span<const std::size_t> batch, LossAndGradient& lg)>;

/// Self-trains from the Stage I model. The distant layer plays no part; only
/// the training features are used. ReinitMode::OnStall needs `dev`.
Stage2Result train_stage2(const std::vector<SentenceFeatures>& features, const ModelParams& stage1,
                          const Stage2Config& config, const DevSet* dev = nullptr,
                          const AuxiliaryLoss& auxiliary = {});

/// CSV: iter,inner_step,loss,selected_token_fraction,dev_f1.
std::string stage2_log_csv(const std::vector<Stage2LogRow>& log);

}  // namespace bond
