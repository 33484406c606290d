#pragma once

// Built-in token classifier: hashed sparse context-window features feeding a
// linear softmax layer. Everything downstream (losses, both training stages)
// only needs per-token probability rows and exact gradients, so another model
// family can replace this header without touching them.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "bond/corpus.hpp"

namespace bond {

struct FeatureConfig {
    int window = 2;              // context offsets -window..+window
    unsigned hash_bits = 18;     // feature dimension D = 2^hash_bits
    std::uint64_t hash_seed = 0;

    std::size_t dim() const noexcept { return std::size_t{1} << hash_bits; }
    /// Stable fingerprint stored in checkpoints.
    std::uint64_t digest() const noexcept;
};

struct Feature {
    std::uint32_t index = 0;
    double value = 1.0;
};

using FeatureVector = std::vector<Feature>;
using SentenceFeatures = std::vector<FeatureVector>;

/// One sorted, duplicate-free indicator vector per token.
SentenceFeatures featurize(const Sentence& sentence, const FeatureConfig& config);
std::vector<SentenceFeatures> featurize(const Corpus& corpus, const FeatureConfig& config);

/// Word shape: upper -> X, lower -> x, digit -> d, non-ASCII byte -> u,
/// everything else unchanged.
std::string word_shape(const std::string& token);
/// ASCII lower-casing; multi-byte UTF-8 sequences pass through.
std::string fold_case(const std::string& token);

/// Dense rows x cols matrix, row-major. Used for per-token class
/// distributions of one sentence (rows = tokens, cols = classes).
class ProbMatrix {
public:
    ProbMatrix() = default;
    ProbMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
    const std::vector<double>& data() const noexcept { return data_; }

    bool operator==(const ProbMatrix&) const = default;

    /// Rows are one-hot encodings of the labels.
    static ProbMatrix one_hot(const LabelSequence& labels, std::size_t num_classes);

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Per sentence, per token probability simplexes.
using PredictionBatch = std::vector<ProbMatrix>;

/// Weight matrix of shape D x C (row per feature), row-major.
struct ModelParams {
    std::size_t dim = 0;
    std::size_t num_classes = 0;
    std::vector<double> weights;
    std::uint64_t version = 0;  // bumped by every optimizer update
    std::uint64_t seed = 0;
    std::uint64_t feature_digest = 0;
    /// Parameters at initialization; what re-initialization restores.
    std::shared_ptr<const std::vector<double>> initial;

    std::span<const double> row(std::size_t feature) const {
        return {weights.data() + feature * num_classes, num_classes};
    }
    bool same_shape(const ModelParams& other) const noexcept {
        return dim == other.dim && num_classes == other.num_classes;
    }
};

/// Weights i.i.d. uniform in [-0.01, 0.01]; the initial snapshot is stored.
ModelParams init_params(std::size_t dim, std::size_t num_classes, std::uint64_t seed);

/// Throws NumericalError if any weight is NaN or infinite.
void check_finite(const ModelParams& params);

ProbMatrix forward(const ModelParams& params, const SentenceFeatures& features);

/// Forward over a set of sentences; parallel over sentences, results in
/// input order.
PredictionBatch predict(const ModelParams& params, const std::vector<SentenceFeatures>& features);

/// Argmax labels with lowest-index tie-break, BIO-repaired.
std::vector<LabelSequence> decode(const PredictionBatch& preds, const LabelSchema& schema);

/// Per-token boolean mask; 0 excludes the token from a loss.
using TokenMask = std::vector<std::uint8_t>;

/// One sentence of a training minibatch. The pointers must outlive the call.
struct TrainingExample {
    const SentenceFeatures* features = nullptr;
    const ProbMatrix* target = nullptr;  // rows are target distributions
    const TokenMask* mask = nullptr;     // null means every token counts
};

struct LossAndGradient {
    double loss = 0.0;
    std::size_t active_tokens = 0;
    bool clamped = false;  // a target class had probability below the log clamp
    std::vector<double> gradient;  // same layout as ModelParams::weights
};

/// Mean over unmasked tokens of sum_c -target_c * log f_c, and its exact
/// gradient. With no unmasked token the loss and gradient are zero.
LossAndGradient grad_loss(const ModelParams& params, std::span<const TrainingExample> batch);

/// Same as above but reuses the caller's gradient buffer.
void grad_loss(const ModelParams& params, std::span<const TrainingExample> batch, LossAndGradient& out);

inline constexpr double kLogClamp = 1e-12;

/// Binary checkpoint: "BONDMDL1", then D, C, seed, feature digest as
/// little-endian u64, then D*C little-endian IEEE doubles row-major.
void write_checkpoint(std::ostream& out, const ModelParams& params);
void save_checkpoint(const std::string& path, const ModelParams& params);
/// The initial snapshot is rebuilt from the stored seed.
ModelParams read_checkpoint(std::istream& in);
ModelParams load_checkpoint(const std::string& path);

}  // namespace bond
