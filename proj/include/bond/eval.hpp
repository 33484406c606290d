#pragma once

// Entity-level scoring with exact (start, end, type) span matching, plus a
// token-level confusion table.

#include <cstddef>
#include <string>
#include <vector>

#include "bond/corpus.hpp"

namespace bond {

struct PrfCounts {
    std::size_t tp = 0;
    std::size_t pred_count = 0;
    std::size_t gold_count = 0;

    double precision() const noexcept { return pred_count == 0 ? 0.0 : double(tp) / double(pred_count); }
    double recall() const noexcept { return gold_count == 0 ? 0.0 : double(tp) / double(gold_count); }
    double f1() const noexcept;
};

struct TypeMetrics {
    std::string type;
    PrfCounts counts;
};

struct Metrics {
    PrfCounts counts;
    std::vector<TypeMetrics> per_type;  // schema order

    double precision() const noexcept { return counts.precision(); }
    double recall() const noexcept { return counts.recall(); }
    double f1() const noexcept { return counts.f1(); }

    /// JSON with fixed 6-decimal fractions.
    std::string to_json() const;
    /// "F1 (P/R)" in percent with two decimals, e.g. "81.48 (82.05/80.92)".
    std::string summary_line() const;
};

/// Scores label sequences sentence by sentence. Predictions are BIO-repaired
/// before span extraction; gold must already be valid.
Metrics entity_prf(const std::vector<LabelSequence>& gold, const std::vector<LabelSequence>& pred,
                   const LabelSchema& schema);

class ConfusionTable {
public:
    explicit ConfusionTable(std::size_t num_labels) : n_(num_labels), counts_(num_labels * num_labels, 0) {}

    std::size_t num_labels() const noexcept { return n_; }
    std::size_t at(LabelId gold, LabelId pred) const { return counts_.at(index(gold, pred)); }
    void add(LabelId gold, LabelId pred) { ++counts_.at(index(gold, pred)); }
    std::size_t total() const noexcept;
    /// Row-normalized fraction; 0 for empty rows.
    double row_fraction(LabelId gold, LabelId pred) const;

    std::string to_csv(const LabelSchema& schema) const;

private:
    std::size_t index(LabelId gold, LabelId pred) const {
        return static_cast<std::size_t>(gold) * n_ + static_cast<std::size_t>(pred);
    }

    std::size_t n_;
    std::vector<std::size_t> counts_;
};

ConfusionTable token_confusion(const std::vector<LabelSequence>& gold, const std::vector<LabelSequence>& pred,
                               const LabelSchema& schema);

}  // namespace bond
