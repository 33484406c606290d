#include "bond/distant_labeler.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "bond/parallel.hpp"
#include "bond/tagger.hpp"

namespace bond {

namespace {

Phrase tokenize_folded(const std::string& text) {
    Phrase out;
    for (const auto& tok : Sentence::from_text(text).tokens) out.push_back(fold_case(tok.text));
    return out;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

bool is_upper(char c) { return c >= 'A' && c <= 'Z'; }
bool is_lower(char c) { return c >= 'a' && c <= 'z'; }

bool capitalized(const std::string& tok) { return !tok.empty() && is_upper(tok.front()); }

bool all_caps(const std::string& tok) {
    std::size_t upper = 0;
    for (char c : tok) {
        if (is_lower(c)) return false;
        if (is_upper(c)) ++upper;
    }
    return upper >= 2;
}

}  // namespace

std::size_t Gazetteer::size() const noexcept {
    std::size_t n = 0;
    for (const auto& [type, phrases] : entries) n += phrases.size();
    return n;
}

void Gazetteer::add(const std::string& type, const std::string& phrase) {
    auto p = tokenize_folded(phrase);
    if (p.empty()) return;
    entries[type].insert(std::move(p));
}

void Gazetteer::merge(const Gazetteer& other) {
    for (const auto& [type, phrases] : other.entries) entries[type].insert(phrases.begin(), phrases.end());
}

Gazetteer load_gazetteer(const std::string& path, const std::string& type, std::string* warning) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read gazetteer " + path);
    Gazetteer g;
    g.source_name = path;
    g.entries[type];
    std::string line;
    while (std::getline(in, line)) {
        auto t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        g.add(type, t);
    }
    if (g.size() == 0 && warning) *warning = "gazetteer " + path + " is empty";
    return g;
}

Gazetteer load_gazetteer_dir(const std::string& dir, const LabelSchema& schema, std::vector<std::string>* warnings) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw IoError("gazetteer directory not found: " + dir);
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".txt") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    Gazetteer merged;
    merged.source_name = dir;
    for (const auto& f : files) {
        const auto stem = f.stem().string();
        // Longest type name that prefixes the file stem ("LOC_cities" -> LOC).
        const std::string* type = nullptr;
        for (const auto& t : schema.entity_types()) {
            if (stem.compare(0, t.size(), t) == 0 && (!type || t.size() > type->size())) type = &t;
        }
        if (!type) {
            if (warnings) warnings->push_back("skipping " + f.string() + ": no entity type prefix");
            continue;
        }
        std::string warning;
        merged.merge(load_gazetteer(f.string(), *type, &warning));
        if (!warning.empty() && warnings) warnings->push_back(warning);
    }
    return merged;
}

struct GazetteerMatcher::Node {
    std::unordered_map<std::string, std::unique_ptr<Node>> children;
    std::set<std::size_t> types;  // non-empty at phrase ends
};

GazetteerMatcher::~GazetteerMatcher() = default;
GazetteerMatcher::GazetteerMatcher(GazetteerMatcher&&) noexcept = default;
GazetteerMatcher& GazetteerMatcher::operator=(GazetteerMatcher&&) noexcept = default;

GazetteerMatcher::GazetteerMatcher(const std::vector<Gazetteer>& gazetteers, const LabelSchema& schema)
    : root_(std::make_unique<Node>()) {
    for (const auto& g : gazetteers) {
        for (const auto& [type_name, phrases] : g.entries) {
            const auto type = schema.type_index(type_name);
            for (const auto& phrase : phrases) {
                Node* node = root_.get();
                for (const auto& tok : phrase) {
                    auto& child = node->children[tok];
                    if (!child) child = std::make_unique<Node>();
                    node = child.get();
                }
                node->types.insert(type);
                max_len_ = std::max(max_len_, phrase.size());
            }
        }
    }
}

std::vector<KnowledgeSource::Hit> GazetteerMatcher::find_all(const Sentence& sentence) const {
    std::vector<std::string> folded(sentence.size());
    for (std::size_t i = 0; i < sentence.size(); ++i) folded[i] = fold_case(sentence.text(i));
    std::vector<Hit> hits;
    for (std::size_t start = 0; start < folded.size(); ++start) {
        const Node* node = root_.get();
        for (std::size_t end = start; end < folded.size(); ++end) {
            auto it = node->children.find(folded[end]);
            if (it == node->children.end()) break;
            node = it->second.get();
            if (!node->types.empty()) hits.push_back({start, end, node->types});
        }
    }
    return hits;
}

std::vector<GazetteerMatch> match_gazetteer(const Sentence& sentence, const KnowledgeSource& source) {
    auto hits = source.find_all(sentence);
    // Drop hits strictly inside another hit.
    std::vector<const KnowledgeSource::Hit*> maximal;
    for (const auto& h : hits) {
        bool inside = false;
        for (const auto& o : hits) {
            if (&o != &h && o.start <= h.start && h.end <= o.end && (o.end - o.start) > (h.end - h.start)) {
                inside = true;
                break;
            }
        }
        if (!inside) maximal.push_back(&h);
    }
    std::sort(maximal.begin(), maximal.end(), [](const auto* a, const auto* b) {
        const auto la = a->end - a->start;
        const auto lb = b->end - b->start;
        if (la != lb) return la > lb;
        if (a->start != b->start) return a->start < b->start;
        return *a->types.begin() < *b->types.begin();
    });
    std::vector<bool> taken(sentence.size(), false);
    std::vector<GazetteerMatch> out;
    for (const auto* h : maximal) {
        bool clash = false;
        for (std::size_t i = h->start; i <= h->end; ++i) clash = clash || taken[i];
        if (clash) continue;
        for (std::size_t i = h->start; i <= h->end; ++i) taken[i] = true;
        GazetteerMatch m;
        m.start = h->start;
        m.end = h->end;
        m.candidate_types = h->types;
        m.ambiguous = h->types.size() > 1;
        m.type = *h->types.begin();
        out.push_back(std::move(m));
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.start < b.start; });
    return out;
}

std::vector<StampRule> parse_stamp_rules(const std::string& text, const LabelSchema& schema) {
    std::vector<StampRule> rules;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty() || trim(line).front() == '#') continue;
        std::vector<std::string> cols;
        std::stringstream ss(line);
        std::string col;
        while (std::getline(ss, col, '\t')) cols.push_back(col);
        if (cols.size() != 3 || cols[0].empty()) throw ParseError("expected stamp<TAB>type<TAB>head|tail", line_no);
        StampRule r;
        r.stamp = cols[0];
        auto type = schema.find_type(cols[1]);
        if (!type) throw SchemaError("line " + std::to_string(line_no) + ": unknown entity type '" + cols[1] + "'");
        r.type = *type;
        if (cols[2] == "head") r.position = StampPosition::Head;
        else if (cols[2] == "tail") r.position = StampPosition::Tail;
        else throw ParseError("position must be head or tail", line_no);
        rules.push_back(std::move(r));
    }
    return rules;
}

std::vector<StampRule> load_stamp_rules(const std::string& path, const LabelSchema& schema) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read stamp rules " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_stamp_rules(buf.str(), schema);
}

std::vector<CandidateSpan> generate_candidates(const Sentence& sentence, const std::vector<bool>& gazetteer_hit) {
    const std::size_t n = sentence.size();
    std::vector<bool> in_run(n, false);
    for (std::size_t i = 0; i < n; ++i) in_run[i] = capitalized(sentence.text(i));
    if (n > 0 && in_run[0]) {
        const bool next_cap = n > 1 && capitalized(sentence.text(1));
        const bool hit = !gazetteer_hit.empty() && gazetteer_hit[0];
        in_run[0] = next_cap || hit;
    }
    std::vector<CandidateSpan> out;
    for (std::size_t i = 0; i < n;) {
        if (!in_run[i]) {
            if (all_caps(sentence.text(i))) out.push_back({i, i, CandidateOrigin::Rule});
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j + 1 < n && in_run[j + 1]) ++j;
        out.push_back({i, j, CandidateOrigin::Rule});
        i = j + 1;
    }
    return out;
}

std::vector<EntitySpan> apply_stamp_rules(const std::vector<CandidateSpan>& candidates,
                                          const std::vector<StampRule>& rules, const Sentence& sentence) {
    std::vector<EntitySpan> out;
    for (const auto& c : candidates) {
        if (c.end >= sentence.size() || c.start > c.end) throw Error("candidate span out of range");
        std::set<std::size_t> types;
        for (const auto& r : rules) {
            const auto& tok = sentence.text(r.position == StampPosition::Head ? c.start : c.end);
            if (tok == r.stamp) types.insert(r.type);
        }
        if (types.size() == 1) out.push_back({c.start, c.end, *types.begin()});
    }
    return out;
}

LabelSequence distant_labels(const Sentence& sentence, const KnowledgeSource& source,
                             const std::vector<StampRule>& rules, const LabelSchema& schema, LabelingStats* stats) {
    const auto matches = match_gazetteer(sentence, source);
    std::vector<bool> covered(sentence.size(), false);
    std::vector<EntitySpan> spans;
    for (const auto& m : matches) {
        for (std::size_t i = m.start; i <= m.end; ++i) covered[i] = true;
        if (m.ambiguous) {
            if (stats) {
                for (auto t : m.candidate_types) ++stats->ambiguous_spans[t];
            }
            continue;
        }
        spans.push_back({m.start, m.end, m.type});
        if (stats) ++stats->gazetteer_spans[m.type];
    }
    if (!rules.empty()) {
        std::vector<CandidateSpan> open;
        for (const auto& c : generate_candidates(sentence, covered)) {
            bool overlaps = false;
            for (std::size_t i = c.start; i <= c.end; ++i) overlaps = overlaps || covered[i];
            if (!overlaps) open.push_back(c);
        }
        for (const auto& s : apply_stamp_rules(open, rules, sentence)) {
            spans.push_back(s);
            if (stats) ++stats->rule_spans[s.type];
        }
    }
    return labels_from_spans(spans, sentence.size(), schema);
}

Corpus generate_distant_labels(const Corpus& corpus, const KnowledgeSource& source,
                               const std::vector<StampRule>& rules, LabelingStats* stats) {
    const auto& schema = corpus.schema();
    std::vector<LabelSequence> layer(corpus.size());
    std::vector<LabelingStats> local(corpus.size());
    for (auto& s : local) {
        s.gazetteer_spans.assign(schema.num_types(), 0);
        s.rule_spans.assign(schema.num_types(), 0);
        s.ambiguous_spans.assign(schema.num_types(), 0);
    }
    parallel_for(corpus.size(), [&](std::size_t i) {
        layer[i] = distant_labels(corpus.sentence(i), source, rules, schema, &local[i]);
    });
    if (stats) {
        stats->gazetteer_spans.assign(schema.num_types(), 0);
        stats->rule_spans.assign(schema.num_types(), 0);
        stats->ambiguous_spans.assign(schema.num_types(), 0);
        for (const auto& s : local) {
            for (std::size_t t = 0; t < schema.num_types(); ++t) {
                stats->gazetteer_spans[t] += s.gazetteer_spans[t];
                stats->rule_spans[t] += s.rule_spans[t];
                stats->ambiguous_spans[t] += s.ambiguous_spans[t];
            }
        }
    }
    Corpus out = corpus;
    out.set_layer(LabelLayer::Distant, std::move(layer));
    return out;
}

MatchReport match_report(const Corpus& corpus, const LabelingStats* stats) {
    const auto& gold = corpus.layer(LabelLayer::Gold);
    const auto& distant = corpus.layer(LabelLayer::Distant);
    const auto& schema = corpus.schema();

    MatchReport r;
    r.entity = entity_prf(gold, distant, schema);
    std::size_t correct = 0;
    std::size_t predicted = 0;
    std::size_t actual = 0;
    for (std::size_t s = 0; s < gold.size(); ++s) {
        for (std::size_t i = 0; i < gold[s].size(); ++i) {
            const auto g = gold[s][i];
            const auto d = distant[s][i];
            if (g != kOutside) ++actual;
            if (d != kOutside) ++predicted;
            if (g != kOutside && d != kOutside && LabelSchema::type_of(g) == LabelSchema::type_of(d)) ++correct;
        }
    }
    r.token_precision = predicted == 0 ? 0.0 : double(correct) / double(predicted);
    r.token_recall = actual == 0 ? 0.0 : double(correct) / double(actual);
    r.token_f1 = r.token_precision + r.token_recall == 0.0
                     ? 0.0
                     : 2.0 * r.token_precision * r.token_recall / (r.token_precision + r.token_recall);

    r.per_type.resize(schema.num_types());
    for (std::size_t t = 0; t < schema.num_types(); ++t) {
        const auto& c = r.entity.per_type[t].counts;
        r.per_type[t].type = schema.entity_types()[t];
        r.per_type[t].matched = c.tp;
        r.per_type[t].unmatched = c.gold_count - c.tp;
        r.per_type[t].spurious = c.pred_count - c.tp;
        if (stats && t < stats->ambiguous_spans.size()) r.per_type[t].ambiguous = stats->ambiguous_spans[t];
    }
    return r;
}

std::string MatchReport::to_json() const {
    auto round6 = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.6f", v);
        return std::string(buf);
    };
    std::ostringstream out;
    out << "{\"token_precision\": " << round6(token_precision) << ", \"token_recall\": " << round6(token_recall)
        << ", \"token_f1\": " << round6(token_f1) << ", \"precision\": " << round6(entity.precision())
        << ", \"recall\": " << round6(entity.recall()) << ", \"f1\": " << round6(entity.f1())
        << ", \"per_type\": {";
    for (std::size_t i = 0; i < per_type.size(); ++i) {
        const auto& t = per_type[i];
        if (i > 0) out << ", ";
        out << nlohmann::json(t.type).dump() << ": {\"matched\": " << t.matched << ", \"unmatched\": " << t.unmatched
            << ", \"spurious\": " << t.spurious << ", \"ambiguous\": " << t.ambiguous << "}";
    }
    out << "}}\n";
    return out.str();
}

}  // namespace bond
