#include "bond/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include <json.hpp>

namespace bond {

double PrfCounts::f1() const noexcept {
    const double p = precision();
    const double r = recall();
    return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

namespace {

void check_aligned(const std::vector<LabelSequence>& gold, const std::vector<LabelSequence>& pred) {
    if (gold.size() != pred.size()) throw Error("gold and predicted layers have different sentence counts");
    for (std::size_t i = 0; i < gold.size(); ++i) {
        if (gold[i].size() != pred[i].size()) {
            throw Error("gold and predicted layers misaligned at sentence " + std::to_string(i));
        }
    }
}

std::string fixed6(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

}  // namespace

Metrics entity_prf(const std::vector<LabelSequence>& gold, const std::vector<LabelSequence>& pred,
                   const LabelSchema& schema) {
    check_aligned(gold, pred);
    Metrics m;
    m.per_type.resize(schema.num_types());
    for (std::size_t t = 0; t < schema.num_types(); ++t) m.per_type[t].type = schema.entity_types()[t];

    for (std::size_t i = 0; i < gold.size(); ++i) {
        auto g = spans_from_labels(gold[i], schema);
        auto p = spans_from_labels(repair_bio(pred[i], schema), schema);
        // Both lists come out sorted by start and are non-overlapping.
        for (const auto& s : g) ++m.per_type[s.type].counts.gold_count;
        for (const auto& s : p) ++m.per_type[s.type].counts.pred_count;
        std::size_t a = 0;
        std::size_t b = 0;
        while (a < g.size() && b < p.size()) {
            if (g[a] == p[b]) {
                ++m.per_type[g[a].type].counts.tp;
                ++a;
                ++b;
            } else if (g[a] < p[b]) {
                ++a;
            } else {
                ++b;
            }
        }
    }
    for (const auto& t : m.per_type) {
        m.counts.tp += t.counts.tp;
        m.counts.pred_count += t.counts.pred_count;
        m.counts.gold_count += t.counts.gold_count;
    }
    return m;
}

std::string Metrics::to_json() const {
    // Fractions are emitted as pre-formatted raw numbers so output is stable
    // byte for byte.
    std::ostringstream out;
    auto triple = [&](const PrfCounts& c) {
        out << "\"precision\": " << fixed6(c.precision()) << ", \"recall\": " << fixed6(c.recall())
            << ", \"f1\": " << fixed6(c.f1()) << ", \"tp\": " << c.tp << ", \"pred_count\": " << c.pred_count
            << ", \"gold_count\": " << c.gold_count;
    };
    out << "{";
    triple(counts);
    out << ", \"per_type\": {";
    for (std::size_t i = 0; i < per_type.size(); ++i) {
        if (i > 0) out << ", ";
        out << nlohmann::json(per_type[i].type).dump() << ": {";
        triple(per_type[i].counts);
        out << "}";
    }
    out << "}}\n";
    return out.str();
}

std::string Metrics::summary_line() const {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f (%.2f/%.2f)", 100.0 * f1(), 100.0 * precision(), 100.0 * recall());
    return buf;
}

std::size_t ConfusionTable::total() const noexcept {
    std::size_t n = 0;
    for (auto c : counts_) n += c;
    return n;
}

double ConfusionTable::row_fraction(LabelId gold, LabelId pred) const {
    std::size_t row = 0;
    for (std::size_t j = 0; j < n_; ++j) row += counts_.at(index(gold, static_cast<LabelId>(j)));
    return row == 0 ? 0.0 : double(at(gold, pred)) / double(row);
}

std::string ConfusionTable::to_csv(const LabelSchema& schema) const {
    std::ostringstream out;
    out << "gold\\pred";
    for (std::size_t j = 0; j < n_; ++j) out << ',' << schema.label_name(static_cast<LabelId>(j));
    out << '\n';
    for (std::size_t i = 0; i < n_; ++i) {
        out << schema.label_name(static_cast<LabelId>(i));
        for (std::size_t j = 0; j < n_; ++j) out << ',' << counts_[i * n_ + j];
        out << '\n';
    }
    return out.str();
}

ConfusionTable token_confusion(const std::vector<LabelSequence>& gold, const std::vector<LabelSequence>& pred,
                               const LabelSchema& schema) {
    check_aligned(gold, pred);
    ConfusionTable table(schema.num_labels());
    for (std::size_t i = 0; i < gold.size(); ++i) {
        for (std::size_t j = 0; j < gold[i].size(); ++j) table.add(gold[i][j], pred[i][j]);
    }
    return table;
}

}  // namespace bond
