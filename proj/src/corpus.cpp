#include "bond/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace bond {

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\f' || c == '\v'; }

std::vector<std::string_view> split_ws(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && is_space(line[i])) ++i;
        std::size_t j = i;
        while (j < line.size() && !is_space(line[j])) ++j;
        if (j > i) out.push_back(line.substr(i, j - i));
        i = j;
    }
    return out;
}

}  // namespace

Sentence Sentence::from_text(std::string_view text, std::string doc_id) {
    Sentence s;
    s.doc_id = std::move(doc_id);
    for (auto piece : split_ws(text)) {
        s.tokens.push_back(Token{std::string(piece), s.tokens.size()});
    }
    return s;
}

LabelSchema::LabelSchema(std::vector<std::string> entity_types) : types_(std::move(entity_types)) {
    labels_.reserve(num_labels());
    labels_.emplace_back("O");
    for (std::size_t i = 0; i < types_.size(); ++i) {
        const auto& t = types_[i];
        if (t.empty() || t == "O") throw SchemaError("invalid entity type name '" + t + "'");
        if (std::find(types_.begin(), types_.begin() + static_cast<std::ptrdiff_t>(i), t) !=
            types_.begin() + static_cast<std::ptrdiff_t>(i)) {
            throw SchemaError("duplicate entity type '" + t + "'");
        }
        labels_.push_back("B-" + t);
        labels_.push_back("I-" + t);
    }
}

const std::string& LabelSchema::label_name(LabelId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= labels_.size()) {
        throw SchemaError("label index " + std::to_string(id) + " out of range");
    }
    return labels_[static_cast<std::size_t>(id)];
}

std::optional<LabelId> LabelSchema::find_label(std::string_view name) const {
    for (std::size_t i = 0; i < labels_.size(); ++i) {
        if (labels_[i] == name) return static_cast<LabelId>(i);
    }
    return std::nullopt;
}

std::optional<std::size_t> LabelSchema::find_type(std::string_view type) const {
    for (std::size_t i = 0; i < types_.size(); ++i) {
        if (types_[i] == type) return i;
    }
    return std::nullopt;
}

std::size_t LabelSchema::type_index(std::string_view type) const {
    if (auto t = find_type(type)) return *t;
    throw SchemaError("unknown entity type '" + std::string(type) + "'");
}

const char* layer_name(LabelLayer layer) noexcept {
    switch (layer) {
        case LabelLayer::Gold: return "gold";
        case LabelLayer::Distant: return "distant";
        case LabelLayer::Predicted: return "predicted";
    }
    return "?";
}

std::size_t Corpus::num_tokens() const noexcept {
    std::size_t n = 0;
    for (const auto& s : sentences_) n += s.size();
    return n;
}

std::optional<std::vector<LabelSequence>>& Corpus::slot(LabelLayer layer) {
    switch (layer) {
        case LabelLayer::Gold: return gold_;
        case LabelLayer::Distant: return distant_;
        case LabelLayer::Predicted: return predicted_;
    }
    return gold_;
}

const std::optional<std::vector<LabelSequence>>& Corpus::slot(LabelLayer layer) const {
    return const_cast<Corpus*>(this)->slot(layer);
}

void Corpus::add_sentence(Sentence sentence) {
    if (gold_ || distant_ || predicted_) throw Error("add_sentence on a corpus with label layers");
    if (sentence.tokens.empty()) throw Error("empty sentence");
    sentences_.push_back(std::move(sentence));
}

void Corpus::add_labeled(Sentence sentence, LabelLayer layer, LabelSequence labels) {
    for (auto other : {LabelLayer::Gold, LabelLayer::Distant, LabelLayer::Predicted}) {
        if (other != layer && slot(other)) throw Error("add_labeled with another layer present");
    }
    if (sentence.tokens.empty()) throw Error("empty sentence");
    if (labels.size() != sentence.size()) throw Error("label count does not match token count");
    if (auto v = validate_bio(labels, schema_); !v) {
        throw Error("invalid BIO sequence at token " + std::to_string(v.position));
    }
    auto& s = slot(layer);
    if (!s) {
        if (!sentences_.empty()) throw Error("add_labeled on a corpus with unlabeled sentences");
        s.emplace();
    }
    s->push_back(std::move(labels));
    sentences_.push_back(std::move(sentence));
}

bool Corpus::has_layer(LabelLayer layer) const noexcept { return slot(layer).has_value(); }

const std::vector<LabelSequence>& Corpus::layer(LabelLayer layer) const {
    const auto& s = slot(layer);
    if (!s) throw Error(std::string("corpus has no ") + layer_name(layer) + " layer");
    return *s;
}

void Corpus::set_layer(LabelLayer layer, std::vector<LabelSequence> labels) {
    if (labels.size() != sentences_.size()) throw Error("layer size does not match sentence count");
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i].size() != sentences_[i].size()) {
            throw Error("layer misaligned at sentence " + std::to_string(i));
        }
        if (auto v = validate_bio(labels[i], schema_); !v) {
            throw Error("invalid BIO in sentence " + std::to_string(i) + " at token " +
                        std::to_string(v.position));
        }
    }
    slot(layer) = std::move(labels);
}

void Corpus::drop_layer(LabelLayer layer) { slot(layer).reset(); }

BioVerdict validate_bio(const LabelSequence& labels, const LabelSchema& schema) {
    const auto c = static_cast<LabelId>(schema.num_labels());
    LabelId prev = kOutside;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const LabelId l = labels[i];
        if (l < 0 || l >= c) return {false, i};
        if (LabelSchema::is_inside(l)) {
            if (prev == kOutside || LabelSchema::type_of(prev) != LabelSchema::type_of(l)) return {false, i};
        }
        prev = l;
    }
    return {};
}

std::vector<EntitySpan> spans_from_labels(const LabelSequence& labels, const LabelSchema& schema) {
    if (auto v = validate_bio(labels, schema); !v) {
        throw Error("invalid BIO sequence at token " + std::to_string(v.position));
    }
    std::vector<EntitySpan> spans;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const LabelId l = labels[i];
        if (LabelSchema::is_begin(l)) {
            spans.push_back({i, i, LabelSchema::type_of(l)});
        } else if (LabelSchema::is_inside(l)) {
            spans.back().end = i;
        }
    }
    return spans;
}

LabelSequence labels_from_spans(const std::vector<EntitySpan>& spans, std::size_t length,
                                const LabelSchema& schema) {
    LabelSequence labels(length, kOutside);
    std::vector<bool> used(length, false);
    for (const auto& s : spans) {
        if (s.start > s.end || s.end >= length) throw Error("span out of range");
        if (s.type >= schema.num_types()) throw SchemaError("span type out of range");
        for (std::size_t i = s.start; i <= s.end; ++i) {
            if (used[i]) throw Error("overlapping spans at token " + std::to_string(i));
            used[i] = true;
            labels[i] = i == s.start ? LabelSchema::begin_label(s.type) : LabelSchema::inside_label(s.type);
        }
    }
    return labels;
}

LabelSequence repair_bio(const LabelSequence& labels, const LabelSchema& schema) {
    const auto c = static_cast<LabelId>(schema.num_labels());
    LabelSequence out(labels);
    LabelId prev = kOutside;
    for (auto& l : out) {
        if (l < 0 || l >= c) throw SchemaError("label index " + std::to_string(l) + " out of range");
        if (LabelSchema::is_inside(l) &&
            (prev == kOutside || LabelSchema::type_of(prev) != LabelSchema::type_of(l))) {
            l = LabelSchema::begin_label(LabelSchema::type_of(l));
        }
        prev = l;
    }
    return out;
}

Corpus parse_conll(std::istream& in, const LabelSchema& schema, LabelLayer layer) {
    Corpus corpus(schema);
    std::string line;
    std::size_t line_no = 0;
    std::size_t columns = 0;  // fixed by the first token line
    std::size_t doc = 0;
    Sentence current;
    LabelSequence labels;
    bool labeled = false;

    auto flush = [&] {
        if (current.tokens.empty()) return;
        current.doc_id = "doc" + std::to_string(doc);
        if (labeled) {
            corpus.add_labeled(std::move(current), layer, repair_bio(labels, schema));
        } else {
            corpus.add_sentence(std::move(current));
        }
        current = Sentence{};
        labels.clear();
    };

    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        auto cols = split_ws(line);
        if (cols.empty()) {
            flush();
            continue;
        }
        if (cols.front() == "-DOCSTART-") {
            flush();
            ++doc;
            continue;
        }
        if (columns == 0) {
            columns = cols.size();
            labeled = columns >= 2;
        } else if (cols.size() != columns) {
            throw ParseError("expected " + std::to_string(columns) + " columns, found " +
                                 std::to_string(cols.size()),
                             line_no);
        }
        current.tokens.push_back(Token{std::string(cols.front()), current.tokens.size()});
        if (labeled) {
            auto id = schema.find_label(cols.back());
            if (!id) {
                throw SchemaError("line " + std::to_string(line_no) + ": unknown tag '" +
                                  std::string(cols.back()) + "'");
            }
            labels.push_back(*id);
        }
    }
    flush();
    return corpus;
}

Corpus parse_conll(std::string_view text, const LabelSchema& schema, LabelLayer layer) {
    std::istringstream in{std::string(text)};
    return parse_conll(in, schema, layer);
}

Corpus read_conll_file(const std::string& path, const LabelSchema& schema, LabelLayer layer) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    return parse_conll(in, schema, layer);
}

void write_conll(std::ostream& out, const Corpus& corpus, LabelLayer layer) {
    if (corpus.empty()) return;
    const auto& labels = corpus.layer(layer);
    const auto& schema = corpus.schema();
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        if (i > 0) out << '\n';
        const auto& s = corpus.sentence(i);
        for (std::size_t j = 0; j < s.size(); ++j) {
            out << s.text(j) << ' ' << schema.label_name(labels[i][j]) << '\n';
        }
    }
}

std::string write_conll(const Corpus& corpus, LabelLayer layer) {
    std::ostringstream out;
    write_conll(out, corpus, layer);
    return out.str();
}

void write_conll_file(const std::string& path, const Corpus& corpus, LabelLayer layer) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    write_conll(out, corpus, layer);
}

}  // namespace bond
