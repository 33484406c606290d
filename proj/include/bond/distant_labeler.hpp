#pragma once

// Distant label generation: gazetteer phrase matching with ambiguity
// discarding, then stamp-word rules on capitalized candidate spans that the
// gazetteers left untouched.

#include <cstddef>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "bond/corpus.hpp"
#include "bond/eval.hpp"

namespace bond {

using Phrase = std::vector<std::string>;

/// Case-folded phrases per entity type from one source.
struct Gazetteer {
    std::string source_name;
    std::map<std::string, std::set<Phrase>> entries;  // type -> phrases

    std::size_t size() const noexcept;
    /// Tokenizes on whitespace and case-folds. Empty input adds nothing.
    void add(const std::string& type, const std::string& phrase);
    /// Set union per type.
    void merge(const Gazetteer& other);
};

/// One phrase per line; blank and '#' lines are skipped. Throws IoError when
/// the file cannot be read. `warning` is set for an empty result.
Gazetteer load_gazetteer(const std::string& path, const std::string& type, std::string* warning = nullptr);

/// Reads every "<TYPE>.txt" or "<TYPE>*.txt" file in a directory whose type
/// prefix is in the schema, merging files of the same type.
Gazetteer load_gazetteer_dir(const std::string& dir, const LabelSchema& schema,
                             std::vector<std::string>* warnings = nullptr);

/// Anything that can report every phrase match in a sentence. File-backed
/// gazetteers are the only implementation; a live knowledge-base client would
/// plug in here.
class KnowledgeSource {
public:
    struct Hit {
        std::size_t start = 0;
        std::size_t end = 0;  // inclusive
        std::set<std::size_t> types;
    };

    virtual ~KnowledgeSource() = default;
    /// All (span, types) exact matches, one entry per distinct span.
    virtual std::vector<Hit> find_all(const Sentence& sentence) const = 0;
};

/// Token-level trie over case-folded phrases from any number of gazetteers.
class GazetteerMatcher final : public KnowledgeSource {
public:
    GazetteerMatcher(const std::vector<Gazetteer>& gazetteers, const LabelSchema& schema);
    ~GazetteerMatcher() override;
    GazetteerMatcher(GazetteerMatcher&&) noexcept;
    GazetteerMatcher& operator=(GazetteerMatcher&&) noexcept;

    std::vector<Hit> find_all(const Sentence& sentence) const override;
    std::size_t max_phrase_length() const noexcept { return max_len_; }

private:
    struct Node;
    std::unique_ptr<Node> root_;
    std::size_t max_len_ = 0;
};

struct GazetteerMatch {
    std::size_t start = 0;
    std::size_t end = 0;
    std::size_t type = 0;    // meaningful only when !ambiguous
    bool ambiguous = false;  // matched phrases of two or more types
    std::set<std::size_t> candidate_types;

    auto operator<=>(const GazetteerMatch&) const = default;
};

/// Keeps non-dominated matches: first drops every match strictly inside
/// another match, then resolves remaining overlaps by length, then leftmost
/// start, then schema type order. Output sorted by start.
std::vector<GazetteerMatch> match_gazetteer(const Sentence& sentence, const KnowledgeSource& source);

enum class StampPosition { Head, Tail };

struct StampRule {
    std::string stamp;  // compared case-sensitively
    std::size_t type = 0;
    StampPosition position = StampPosition::Tail;
};

/// Lines "stamp<TAB>TYPE<TAB>head|tail"; blank and '#' lines skipped.
std::vector<StampRule> load_stamp_rules(const std::string& path, const LabelSchema& schema);
std::vector<StampRule> parse_stamp_rules(const std::string& text, const LabelSchema& schema);

enum class CandidateOrigin { Gazetteer, Rule };

struct CandidateSpan {
    std::size_t start = 0;
    std::size_t end = 0;
    CandidateOrigin origin = CandidateOrigin::Rule;

    auto operator<=>(const CandidateSpan&) const = default;
};

/// Capitalized-run heuristic for potential entity spans. A run is a maximal
/// stretch of tokens starting with an uppercase ASCII letter. The
/// sentence-initial token joins a run only if the next token is capitalized
/// or `gazetteer_hit` marks it. Tokens of two or more uppercase letters with
/// no lowercase are always candidates.
std::vector<CandidateSpan> generate_candidates(const Sentence& sentence,
                                               const std::vector<bool>& gazetteer_hit = {});

/// Types each candidate whose head or tail token equals a rule's stamp.
/// Candidates hit by rules of two or more types stay untyped.
std::vector<EntitySpan> apply_stamp_rules(const std::vector<CandidateSpan>& candidates,
                                          const std::vector<StampRule>& rules, const Sentence& sentence);

struct LabelingStats {
    std::vector<std::size_t> gazetteer_spans;  // per type
    std::vector<std::size_t> rule_spans;       // per type
    std::vector<std::size_t> ambiguous_spans;  // per type involved in an ambiguity
};

/// Labels one sentence: gazetteer matches, then stamp rules on candidates not
/// overlapping any gazetteer match. Ambiguous spans and everything else get O.
LabelSequence distant_labels(const Sentence& sentence, const KnowledgeSource& source,
                             const std::vector<StampRule>& rules, const LabelSchema& schema,
                             LabelingStats* stats = nullptr);

/// Copy of `corpus` with a distant layer (existing layers are kept).
Corpus generate_distant_labels(const Corpus& corpus, const KnowledgeSource& source,
                               const std::vector<StampRule>& rules, LabelingStats* stats = nullptr);

struct MatchReport {
    double token_precision = 0.0;
    double token_recall = 0.0;
    double token_f1 = 0.0;
    Metrics entity;  // distant layer scored against gold
    struct TypeCounts {
        std::string type;
        std::size_t matched = 0;    // gold spans reproduced exactly
        std::size_t unmatched = 0;  // gold spans missed
        std::size_t spurious = 0;   // distant spans absent from gold
        std::size_t ambiguous = 0;  // discarded multi-type matches
    };
    std::vector<TypeCounts> per_type;

    std::string to_json() const;
};

/// Token scores count a token as correct when gold and distant agree on its
/// entity type (B/I ignored) and it is not O.
MatchReport match_report(const Corpus& corpus, const LabelingStats* stats = nullptr);

}  // namespace bond
