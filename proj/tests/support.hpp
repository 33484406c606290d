#pragma once

// Random instance generators and brute-force reference implementations used
// by the unit and acceptance tests.

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "bond/corpus.hpp"
#include "bond/eval.hpp"
#include "bond/optim.hpp"
#include "bond/tagger.hpp"

namespace testing {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

inline bond::LabelSchema schema_with(std::size_t types) {
    static const char* names[] = {"PER", "LOC", "ORG", "MISC", "GPE", "DATE", "EVT", "FAC", "LAW"};
    std::vector<std::string> t(names, names + types);
    return bond::LabelSchema(t);
}

/// A row-stochastic matrix with strictly positive entries.
inline bond::ProbMatrix random_simplex(Rng& rng, std::size_t rows, std::size_t cols) {
    bond::ProbMatrix m(rows, cols);
    std::normal_distribution<double> z(0.0, 1.5);
    for (std::size_t r = 0; r < rows; ++r) {
        double sum = 0.0;
        for (std::size_t c = 0; c < cols; ++c) sum += (m(r, c) = std::exp(z(rng)));
        for (std::size_t c = 0; c < cols; ++c) m(r, c) /= sum;
    }
    return m;
}

/// Uniform over valid BIO sequences of the given length, built span by span.
inline bond::LabelSequence random_valid_bio(Rng& rng, std::size_t length, std::size_t types) {
    bond::LabelSequence out(length, bond::kOutside);
    std::size_t i = 0;
    while (i < length) {
        if (pick(rng, 0, 2) == 0) {
            const std::size_t len = pick(rng, 1, std::min<std::size_t>(3, length - i));
            const std::size_t t = pick(rng, 0, types - 1);
            out[i] = bond::LabelSchema::begin_label(t);
            for (std::size_t k = 1; k < len; ++k) out[i + k] = bond::LabelSchema::inside_label(t);
            i += len;
        } else {
            ++i;
        }
    }
    return out;
}

/// Any label sequence, valid or not.
inline bond::LabelSequence random_raw_labels(Rng& rng, std::size_t length, std::size_t num_labels) {
    bond::LabelSequence out(length);
    for (auto& l : out) l = static_cast<bond::LabelId>(pick(rng, 0, num_labels - 1));
    return out;
}

/// Spans by exhaustive search over (start, end, type): B opens, every later
/// token in range is the matching I, and the next token does not continue it.
inline std::set<std::tuple<std::size_t, std::size_t, std::size_t>> brute_spans(const bond::LabelSequence& labels,
                                                                               std::size_t types) {
    std::set<std::tuple<std::size_t, std::size_t, std::size_t>> out;
    const std::size_t n = labels.size();
    for (std::size_t t = 0; t < types; ++t) {
        const auto b = bond::LabelSchema::begin_label(t);
        const auto in = bond::LabelSchema::inside_label(t);
        for (std::size_t s = 0; s < n; ++s) {
            for (std::size_t e = s; e < n; ++e) {
                bool ok = labels[s] == b;
                for (std::size_t k = s + 1; k <= e && ok; ++k) ok = labels[k] == in;
                if (ok && (e + 1 == n || labels[e + 1] != in)) out.insert({s, e, t});
            }
        }
    }
    return out;
}

struct BrutePrf {
    std::size_t tp = 0, pred = 0, gold = 0;
};

/// Exact-match span counts over a corpus of valid sequences.
inline BrutePrf brute_prf(const std::vector<bond::LabelSequence>& gold, const std::vector<bond::LabelSequence>& pred,
                          std::size_t types) {
    BrutePrf r;
    for (std::size_t i = 0; i < gold.size(); ++i) {
        const auto g = brute_spans(gold[i], types);
        const auto p = brute_spans(pred[i], types);
        r.gold += g.size();
        r.pred += p.size();
        for (const auto& s : p) r.tp += g.count(s);
    }
    return r;
}

/// Soft labels written out as the plain double loop: class mass summed over
/// every token, then f^2 / p renormalized per token.
inline std::vector<bond::ProbMatrix> brute_soft_labels(const std::vector<bond::ProbMatrix>& f) {
    const std::size_t C = f.front().cols();
    std::vector<double> p(C, 0.0);
    for (const auto& m : f)
        for (std::size_t j = 0; j < m.rows(); ++j)
            for (std::size_t c = 0; c < C; ++c) p[c] += m(j, c);
    std::vector<bond::ProbMatrix> s;
    for (const auto& m : f) {
        bond::ProbMatrix out(m.rows(), C);
        for (std::size_t j = 0; j < m.rows(); ++j) {
            double z = 0.0;
            for (std::size_t c = 0; c < C; ++c) z += m(j, c) * m(j, c) / p[c];
            for (std::size_t c = 0; c < C; ++c) out(j, c) = (m(j, c) * m(j, c) / p[c]) / z;
        }
        s.push_back(out);
    }
    return s;
}

/// A random sentence of lowercase, capitalized and numeric tokens.
inline bond::Sentence random_sentence(Rng& rng, std::size_t length) {
    static const char* words[] = {"the", "Paris", "of", "ACME", "won", "Smith", "42", "in", "Inc.", "a-b", "x"};
    bond::Sentence s;
    for (std::size_t i = 0; i < length; ++i) s.tokens.push_back({words[pick(rng, 0, 10)], i});
    return s;
}

}  // namespace testing

#include <filesystem>
#include <fstream>

namespace testing {

/// Fresh scratch directory under the system temp dir, removed on scope exit.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::uint64_t counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("bond_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

    void write(const std::string& name, const std::string& text) const {
        std::filesystem::create_directories((path_ / name).parent_path());
        std::ofstream(path_ / name, std::ios::binary) << text;
    }

private:
    std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace testing

namespace testing {

/// Largest relative gap between grad_loss and central differences of the
/// standalone loss functions on one random instance. Odd trials use soft
/// targets, even trials hard labels; both with random masks.
inline double fd_relative_error(Rng& rng, int trial, double h = 1e-5) {
    bond::FeatureConfig cfg;
    cfg.hash_bits = 6;
    cfg.window = static_cast<int>(pick(rng, 0, 2));
    const std::size_t C = pick(rng, 2, 5);
    auto params = bond::init_params(cfg.dim(), C, static_cast<std::uint64_t>(trial));
    for (auto& w : params.weights) w = uniform(rng, -0.5, 0.5);

    const bool soft = trial % 2 == 1;
    const std::size_t M = pick(rng, 1, 3);
    std::vector<bond::SentenceFeatures> feats;
    std::vector<bond::ProbMatrix> targets;
    std::vector<bond::TokenMask> masks;
    std::vector<bond::LabelSequence> hard;
    for (std::size_t i = 0; i < M; ++i) {
        const auto n = pick(rng, 1, 4);
        feats.push_back(bond::featurize(random_sentence(rng, n), cfg));
        bond::LabelSequence labels(n);
        for (auto& l : labels) l = static_cast<bond::LabelId>(pick(rng, 0, C - 1));
        hard.push_back(labels);
        targets.push_back(soft ? random_simplex(rng, n, C) : bond::ProbMatrix::one_hot(labels, C));
        bond::TokenMask m(n);
        for (auto& b : m) b = pick(rng, 0, 3) != 0;
        masks.push_back(m);
    }
    std::vector<bond::TrainingExample> batch;
    for (std::size_t i = 0; i < M; ++i) batch.push_back({&feats[i], &targets[i], &masks[i]});

    auto loss_at = [&](const bond::ModelParams& p) {
        const auto preds = bond::predict(p, feats);
        return soft ? bond::kl_soft_loss(preds, targets, masks).value
                    : bond::cross_entropy_loss(preds, hard, masks).value;
    };
    const auto lg = bond::grad_loss(params, batch);
    double worst = std::abs(lg.loss - loss_at(params)) / std::max(1e-12, std::abs(lg.loss));
    for (std::size_t k = 0; k < params.weights.size(); ++k) {
        auto plus = params;
        auto minus = params;
        plus.weights[k] += h;
        minus.weights[k] -= h;
        const double numeric = (loss_at(plus) - loss_at(minus)) / (2 * h);
        const double analytic = lg.gradient[k];
        const double scale = std::max({std::abs(numeric), std::abs(analytic), 1e-6});
        worst = std::max(worst, std::abs(numeric - analytic) / scale);
    }
    return worst;
}

}  // namespace testing
