#pragma once

// Seeded synthetic NER data with planted, imperfect gazetteers. Names follow
// a Zipf distribution so they recur across splits, and every entity sits in a
// type-indicative context, which is what lets a context model recover the
// entities the gazetteers miss.

#include <cstdint>
#include <string>
#include <vector>

#include "bond/corpus.hpp"
#include "bond/distant_labeler.hpp"

namespace bond {

struct SyntheticConfig {
    std::size_t train_sentences = 2000;
    std::size_t dev_sentences = 500;
    std::size_t test_sentences = 500;
    std::uint64_t seed = 7;
    std::size_t names_per_type = 1500;
    double zipf_exponent = 0.9;
    /// Probability that a name is listed in its own type's gazetteer, for the
    /// most frequent `head_fraction` of names and for the rest.
    double head_fraction = 0.3;
    double head_coverage = 0.95;
    double tail_coverage = 0.05;
    /// Probability that a name is also listed under one wrong type.
    double wrong_type_rate = 0.14;
    /// Of the wrong-type listings, the fraction kept in the true type too
    /// (which makes the match ambiguous and discarded).
    double ambiguous_share = 0.35;
    /// Random lower-case filler vocabulary on top of the function words.
    std::size_t filler_words = 600;
    /// Filler words wrongly listed as entities.
    std::size_t junk_entries = 60;
    /// Probability that a context cue is swapped for one of another type.
    double context_noise = 0.12;
};

struct SyntheticData {
    LabelSchema schema;
    Corpus train;  // gold layer
    Corpus dev;    // gold layer
    Corpus test;   // gold layer
    std::vector<Gazetteer> gazetteers;
    std::vector<StampRule> rules;
};

SyntheticData make_synthetic(const SyntheticConfig& config);

/// Writes train.conll, dev.conll, test.conll, gazetteers/<TYPE>.txt and
/// stamps.tsv under `dir`.
void write_synthetic(const SyntheticData& data, const std::string& dir);

}  // namespace bond
