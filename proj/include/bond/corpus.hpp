#pragma once

// Tokenized corpora, the BIO label schema and CoNLL column I/O.

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bond/error.hpp"

namespace bond {

using LabelId = int;

/// Label index 0 is always O.
inline constexpr LabelId kOutside = 0;

struct Token {
    std::string text;
    std::size_t index = 0;
};

struct Sentence {
    std::vector<Token> tokens;
    std::string doc_id;

    std::size_t size() const noexcept { return tokens.size(); }
    const std::string& text(std::size_t i) const { return tokens[i].text; }

    /// Builds a sentence from whitespace-separated text.
    static Sentence from_text(std::string_view text, std::string doc_id = {});
};

/// Ordered entity types and the derived label set
/// [O, B-T0, I-T0, B-T1, I-T1, ...].
class LabelSchema {
public:
    LabelSchema() = default;
    explicit LabelSchema(std::vector<std::string> entity_types);

    const std::vector<std::string>& entity_types() const noexcept { return types_; }
    std::size_t num_types() const noexcept { return types_.size(); }
    std::size_t num_labels() const noexcept { return 2 * types_.size() + 1; }

    const std::string& label_name(LabelId id) const;
    std::optional<LabelId> find_label(std::string_view name) const;
    std::optional<std::size_t> find_type(std::string_view type) const;
    /// Throws SchemaError for unknown types.
    std::size_t type_index(std::string_view type) const;

    static LabelId begin_label(std::size_t type) noexcept { return static_cast<LabelId>(1 + 2 * type); }
    static LabelId inside_label(std::size_t type) noexcept { return static_cast<LabelId>(2 + 2 * type); }
    static bool is_begin(LabelId id) noexcept { return id > 0 && id % 2 == 1; }
    static bool is_inside(LabelId id) noexcept { return id > 0 && id % 2 == 0; }
    /// Entity type index of a B or I label. Undefined for O.
    static std::size_t type_of(LabelId id) noexcept { return static_cast<std::size_t>(id - 1) / 2; }

    bool operator==(const LabelSchema& other) const { return types_ == other.types_; }

private:
    std::vector<std::string> types_;
    std::vector<std::string> labels_;
};

using LabelSequence = std::vector<LabelId>;

struct EntitySpan {
    std::size_t start = 0;
    std::size_t end = 0;  // inclusive
    std::size_t type = 0; // index into LabelSchema::entity_types()

    std::size_t length() const noexcept { return end - start + 1; }
    auto operator<=>(const EntitySpan&) const = default;
};

enum class LabelLayer { Gold, Distant, Predicted };

const char* layer_name(LabelLayer layer) noexcept;

class Corpus {
public:
    Corpus() = default;
    explicit Corpus(LabelSchema schema) : schema_(std::move(schema)) {}

    const LabelSchema& schema() const noexcept { return schema_; }
    const std::vector<Sentence>& sentences() const noexcept { return sentences_; }
    const Sentence& sentence(std::size_t i) const { return sentences_.at(i); }
    std::size_t size() const noexcept { return sentences_.size(); }
    bool empty() const noexcept { return sentences_.empty(); }
    std::size_t num_tokens() const noexcept;

    /// Appends a sentence. Layers that already exist must be extended through
    /// add_labeled() instead, so this is only valid on a corpus without layers.
    void add_sentence(Sentence sentence);
    /// Appends a sentence together with its labels for one layer. The corpus
    /// must either have no other layers or only that layer.
    void add_labeled(Sentence sentence, LabelLayer layer, LabelSequence labels);

    bool has_layer(LabelLayer layer) const noexcept;
    /// Throws Error when the layer is missing.
    const std::vector<LabelSequence>& layer(LabelLayer layer) const;
    /// Replaces a whole layer; checks alignment and BIO validity.
    void set_layer(LabelLayer layer, std::vector<LabelSequence> labels);
    void drop_layer(LabelLayer layer);

private:
    std::optional<std::vector<LabelSequence>>& slot(LabelLayer layer);
    const std::optional<std::vector<LabelSequence>>& slot(LabelLayer layer) const;

    LabelSchema schema_;
    std::vector<Sentence> sentences_;
    std::optional<std::vector<LabelSequence>> gold_;
    std::optional<std::vector<LabelSequence>> distant_;
    std::optional<std::vector<LabelSequence>> predicted_;
};

struct BioVerdict {
    bool valid = true;
    std::size_t position = 0;  // first offending token when !valid
    explicit operator bool() const noexcept { return valid; }
};

/// Strict BIO: I-X only directly after B-X or I-X of the same type X.
BioVerdict validate_bio(const LabelSequence& labels, const LabelSchema& schema);

/// Maximal B/I runs. Throws Error on invalid BIO input.
std::vector<EntitySpan> spans_from_labels(const LabelSequence& labels, const LabelSchema& schema);

/// Throws Error on overlapping or out-of-range spans.
LabelSequence labels_from_spans(const std::vector<EntitySpan>& spans, std::size_t length,
                                const LabelSchema& schema);

/// Turns every I-X without a valid opener into B-X.
LabelSequence repair_bio(const LabelSequence& labels, const LabelSchema& schema);

/// Reads CoNLL column text into the given layer. Lines are
/// "token [extra columns...] tag"; a file whose lines all have one column is
/// read as unlabeled. -DOCSTART- lines start a new document and are not
/// tokens. IOB1 openers (I-X not continuing X) are rewritten to B-X.
Corpus parse_conll(std::istream& in, const LabelSchema& schema, LabelLayer layer = LabelLayer::Gold);
Corpus parse_conll(std::string_view text, const LabelSchema& schema, LabelLayer layer = LabelLayer::Gold);
Corpus read_conll_file(const std::string& path, const LabelSchema& schema,
                       LabelLayer layer = LabelLayer::Gold);

/// Two-column "token tag" lines, blank line between sentences, LF endings.
void write_conll(std::ostream& out, const Corpus& corpus, LabelLayer layer);
std::string write_conll(const Corpus& corpus, LabelLayer layer);
void write_conll_file(const std::string& path, const Corpus& corpus, LabelLayer layer);

}  // namespace bond
